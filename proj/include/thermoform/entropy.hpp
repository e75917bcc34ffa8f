#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "thermoform/pfaffian.hpp"

// Entropy reconstruction by quadrature.  Along a path that avoids zeros
// of f = i_Y(omega), the rescaled heat form integrates to
//
//     hat S(x) - hat S(x0) = integral of omega / f,
//
// and S = S0 * exp(hat S - hat S(x0)) is the entropy with S(x0) = S0.
// The temperature follows as T = f / S.

namespace thermoform {

class PathError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised when a numerical procedure cannot reach its tolerance (quadrature
// subdivision cap, finite-difference step underflow, overflow in exp).
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised by EntropyField on models whose heat form fails the Frobenius
// test: no entropy function exists to reconstruct.
class NotIntegrableError : public ModelError {
  public:
    NotIntegrableError(const std::string& what, std::vector<TripleResidual> residuals)
        : ModelError(what), residuals_(std::move(residuals)) {}
    const std::vector<TripleResidual>& residuals() const { return residuals_; }

  private:
    std::vector<TripleResidual> residuals_;
};

// Raised by gibbs_duhem_reconstruct when d log(1/T) is not closed, which
// is the Gibbs-Duhem-level symptom of a non-integrable heat form.
class NotExactError : public std::runtime_error {
  public:
    NotExactError(const std::string& what, StatePoint where, std::vector<PairResidual> residuals)
        : std::runtime_error(what), where_(std::move(where)), residuals_(std::move(residuals)) {}
    const StatePoint& where() const { return where_; }
    const std::vector<PairResidual>& residuals() const { return residuals_; }

  private:
    StatePoint where_;
    std::vector<PairResidual> residuals_;
};

// --- scalar quadrature ------------------------------------------------------

struct QuadratureSettings {
    double rel_tol = 1e-11;
    double abs_tol = 1e-14;
    int max_intervals = 4000;
};

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool reliable = true;   // false when the subdivision cap forced acceptance
    int intervals = 0;
};

// Adaptive Gauss-Legendre (15-point rule, embedded 7-point error estimate,
// bisection refinement).  Never throws for non-convergence; inspect
// `reliable`.  Deterministic for given inputs.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureSettings& settings = {});

// --- paths ------------------------------------------------------------------

// Piecewise-linear integration path through state space.
struct PathSpec {
    std::vector<StatePoint> waypoints;
};

// Checks that every straight segment stays inside the model's domain with
// f > 0, by sampling 33 points per segment.  Throws PathError naming the
// first offending segment, parameter value and state.
void validate_path(const ThermoModel& model, const PathSpec& path);

struct LineIntegralResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int intervals = 0;
};

// Integral of omega/f along an explicit path.  Preconditions enforced:
// the model validates, omega passes the Frobenius test at the waypoints
// (tolerance integrability_tol), and the path is admissible.  Throws
// NumericError if the quadrature cannot reach its tolerance.
LineIntegralResult reconstruct_hat_s(const ThermoModel& model, const PathSpec& path,
                                     const QuadratureSettings& settings = {},
                                     double integrability_tol = 1e-8);

struct EntropyValue {
    double hat_s = 0.0;        // hat S(x) - hat S(reference)
    double entropy = 0.0;      // S = S0 exp(hat_s)
    double temperature = 0.0;  // T = f / S
    double error_estimate = 0.0;  // on hat_s; relative error on S and T
};

// S at the final waypoint of a path that starts at the model's reference
// state (required, since S is pinned there by S0).
EntropyValue reconstruct_entropy(const ThermoModel& model, const PathSpec& path,
                                 const QuadratureSettings& settings = {},
                                 double integrability_tol = 1e-8);

// --- the reconstructed field ------------------------------------------------

// Owns a validated model plus its heat form and reconstructs S, T at
// arbitrary interior points via automatically routed axis-parallel paths.
// Construction fails with NotIntegrableError if the Frobenius residuals
// are nonzero on a sample star around the reference.  Immutable once
// built; safe to share across threads.
class EntropyField {
  public:
    explicit EntropyField(ThermoModel model, QuadratureSettings quadrature = {},
                          double integrability_tol = 1e-8);

    const ThermoModel& model() const { return model_; }
    const PfaffianForm& heat_form() const { return heat_form_; }
    const QuadratureSettings& quadrature() const { return quadrature_; }
    const StatePoint& reference() const { return model_.reference; }

    // copy with different quadrature settings (cheap; expressions shared)
    EntropyField with_quadrature(const QuadratureSettings& q) const;

    double integrating_factor(const StatePoint& x) const;

    // Axis-parallel polyline from the reference to the target that stays
    // interior with f > 0.  Coordinates move one at a time, the energy
    // last; when that route is obstructed, other axis orders are tried in
    // lexicographic order.  Throws PathError if every order fails.
    PathSpec route(const StatePoint& target) const;

    // hat S, S and T at an interior point (auto-routed).
    EntropyValue evaluate(const StatePoint& target) const;
    double hat_entropy(const StatePoint& target) const { return evaluate(target).hat_s; }
    double entropy(const StatePoint& target) const { return evaluate(target).entropy; }

    // hat S increment along an explicit (validated) path.
    LineIntegralResult hat_entropy_delta(const PathSpec& path) const;

    // T = f/S; verifies dS/dU * T = 1 by finite differences to 1e-6
    // relative (disable for hot loops via check_identity = false).
    double temperature(const StatePoint& x, bool check_identity = true) const;

  private:
    ThermoModel model_;
    PfaffianForm heat_form_;
    QuadratureSettings quadrature_;
};

// --- Gibbs-Duhem ------------------------------------------------------------

// d log(1/T) = -(V dp - sum_i X^i dxi_i)/f as a one-form with degree -1
// coefficients, built symbolically from the state equations.
PfaffianForm gibbs_duhem_form(const ThermoModel& model);

// Integrates d log(1/T) along the path after verifying closedness at the
// waypoints (NotExactError otherwise, carrying the residuals).
LineIntegralResult gibbs_duhem_reconstruct(const ThermoModel& model, const PathSpec& path,
                                           const QuadratureSettings& settings = {},
                                           double exactness_tol = 1e-8);

// Pointwise Gibbs-Duhem defect of a temperature field:
//   max_k | U d_k(1/T) + V d_k(p/T) - sum_i X^i d_k(xi_i/T) | / scale_k
// by central differences with relative step `step`; scale_k is the largest
// term magnitude (floored at 1), so the result measures cancellation.
double gibbs_duhem_residual_against(const ThermoModel& model, const StatePoint& x,
                                    const std::function<double(const StatePoint&)>& temperature,
                                    double step = 1e-4);

// The same defect for the field's reconstructed temperature (quadrature
// tightened internally so finite differences stay clean).
double gibbs_duhem_residual(const EntropyField& field, const StatePoint& x, double step = 1e-4);

}  // namespace thermoform
