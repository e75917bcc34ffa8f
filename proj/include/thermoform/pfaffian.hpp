#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermoform/expr.hpp"

// One-forms on the extensive state space of a homogeneous thermodynamic
// system.  The central object is the heat form
//
//     omega = dU + p dV - sum_i xi_i dX^i
//
// whose coefficients are degree-0 (intensive) expressions in the extensive
// coordinates.  Contracting omega with the radial field sum_i x^i d/dx^i
// yields the candidate integrating factor f = U + pV - sum_i xi_i X^i.

namespace thermoform {

struct StatePoint {
    std::vector<double> coords;

    StatePoint() = default;
    StatePoint(std::initializer_list<double> c) : coords(c) {}
    explicit StatePoint(std::vector<double> c) : coords(std::move(c)) {}

    std::size_t size() const { return coords.size(); }
    double operator[](std::size_t i) const { return coords[i]; }
    double& operator[](std::size_t i) { return coords[i]; }
    bool operator==(const StatePoint&) const = default;

    StatePoint scaled(double lambda) const;
};

// Open interval (lo, hi) of admissible values for one coordinate.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo < v && v < hi; }
};

class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A homogeneous system given by intensive state equations.  Coordinate
// order is fixed: the energy U first, the volume-like coordinate second
// (its state equation is the pressure), then any further extensive
// coordinates X^i with state equations xi_i.  The signs of the heat form
// are applied by build_heat_form, not stored here.
struct ThermoModel {
    std::string name;
    std::vector<std::string> coordinates;   // size m >= 2, energy first
    std::vector<expr::ExprPtr> intensive;   // size m-1: p, xi_1, ..., xi_n
    std::vector<Interval> bounds;           // size m, open intervals
    expr::ExprPtr boundary;                 // optional b(V, X...); B = U - b
    StatePoint reference;
    double reference_entropy = 1.0;         // S0 > 0
    expr::ExprPtr analytic_entropy;         // optional, for validation only
    std::string notes;

    std::size_t dimension() const { return coordinates.size(); }

    expr::Binding binding_at(const StatePoint& x) const;
    bool inside_bounds(const StatePoint& x) const;

    // B = U - b(V, X...); plain U when no boundary function is given.
    double boundary_offset(const StatePoint& x) const;

    // Inside the bounds and strictly above the ground-state boundary.
    bool interior(const StatePoint& x, double boundary_margin = 0.0) const;

    // Structural checks: coordinate/equation/bounds arity, b independent
    // of U, reference strictly interior with f > 0, S0 > 0.  Throws
    // ModelError with a description of the first violation.
    void validate() const;
};

// A one-form sum_i c_i(x) dx^i with homogeneous coefficients of a common
// nominal degree (0 for the heat form, -1 for omega/f).
class PfaffianForm {
  public:
    // empty placeholder, only valid as an assignment target
    PfaffianForm() = default;
    PfaffianForm(std::vector<std::string> coordinates, std::vector<expr::ExprPtr> coefficients,
                 double nominal_degree);

    const std::vector<std::string>& coordinates() const { return coordinates_; }
    const std::vector<expr::ExprPtr>& coefficients() const { return coefficients_; }
    double nominal_degree() const { return nominal_degree_; }
    std::size_t dimension() const { return coordinates_.size(); }

    expr::Binding binding_at(const StatePoint& x) const;
    double coefficient_at(std::size_t i, const StatePoint& x) const;

  private:
    std::vector<std::string> coordinates_;
    std::vector<expr::ExprPtr> coefficients_;
    double nominal_degree_ = 0.0;
};

// omega = dU + p dV - sum xi_i dX^i for the model's state equations.
PfaffianForm build_heat_form(const ThermoModel& model);

// f = i_Y(omega) with Y the radial field: as an expression and as a value.
expr::ExprPtr radial_expression(const PfaffianForm& form);
double radial_apply(const PfaffianForm& form, const StatePoint& x);

// The rescaled form omega / i_Y(omega), nominal degree -1.
PfaffianForm over_radial(const PfaffianForm& form);

// --- homogeneity ----------------------------------------------------------

enum class DegreeStatus { Pass, Fail, Untestable };

struct DegreeEntry {
    std::size_t coefficient;     // index into form.coefficients()
    std::size_t sample;          // index into the sample list
    double lambda;
    double observed_degree;      // NaN when the log-ratio is undefined
    double rel_deviation;        // |c(lx) - l^k c(x)| / scale
    DegreeStatus status;
};

struct DegreeReport {
    double nominal_degree = 0.0;
    double tolerance = 0.0;
    std::vector<double> lambdas;
    std::vector<DegreeEntry> entries;
    double worst_rel_deviation = 0.0;  // over testable entries
    std::size_t untestable = 0;
    bool pass = false;
};

// Compares c_i(lambda x) against lambda^k c_i(x) at every sample point and
// scale factor.  Samples whose scaled image leaves the caller's domain (or
// fails to evaluate) are marked untestable rather than failed.
DegreeReport check_homogeneity(
    const PfaffianForm& form, const std::vector<StatePoint>& samples,
    const std::vector<double>& lambdas, double tolerance,
    const std::function<bool(const StatePoint&)>& in_domain = {});

// --- integrability and exactness ------------------------------------------

struct TripleResidual {
    std::size_t i, j, k;   // strictly increasing coordinate indices
    double raw;            // l_ijk
    double normalized;     // raw / local coefficient scale
};

// Frobenius residuals l_ijk of omega ^ d(omega) at a point; empty for
// two-coordinate forms, which are integrable outright.
std::vector<TripleResidual> integrability_residuals(const PfaffianForm& form,
                                                    const StatePoint& x);

struct PairResidual {
    std::size_t i, j;      // i < j in coordinate order
    double raw;            // d c_i / d x_j - d c_j / d x_i
    double normalized;
};

std::vector<PairResidual> exactness_residuals(const PfaffianForm& form, const StatePoint& x);

// Potential of a closed form with homogeneous degree-alpha coefficients:
// g = i_Y(form) / (alpha + 1).  Refuses alpha == -1 (no algebraic
// potential; integrate instead) and forms that are not closed at x.
double euler_potential(const PfaffianForm& form, double alpha, const StatePoint& x,
                       double exactness_tol = 1e-9);

}  // namespace thermoform
