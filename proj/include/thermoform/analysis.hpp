#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermoform/entropy.hpp"

// Diagnostics on top of a reconstructed entropy field: concavity of S,
// reduction to densities, heat capacities along paths, zero sets of the
// integrating factor, third-law triage and the leaf solver.

namespace thermoform {

// --- concavity ---------------------------------------------------------------

enum class ConcavityVerdict {
    Concave,     // minors alternate strictly, determinant inside the zero band
    NotConcave,  // a minor (or the determinant) has the wrong sign outside the band
    Marginal,    // an intermediate minor sits inside the zero band; undecided
};

// Hessian of S from the closed form
//
//   H_jk = (S/f^2) [ w_j w_k + f dw_j/dx_k - w_j df/dx_k ],
//
// with w the heat-form coefficients.  Entries are symbolic except for the
// S prefactor, then symmetrized; a finite-difference probe of the
// reconstructed S cross-checks the dominant entries.
struct HessianReport {
    StatePoint point;
    std::vector<double> gradient;  // dS/dx_j = S w_j / f
    Eigen::MatrixXd hessian;
    std::vector<double> minors;  // leading principal minors, orders 1..m
    double determinant = 0.0;    // = minors.back()
    double radial_form = 0.0;    // x^T H x; 0 for degree-1 S by Euler's theorem
    double symmetry_defect = 0.0;    // relative, before symmetrization
    double fd_max_deviation = 0.0;   // worst relative FD disagreement, dominant entries
    bool fd_agrees = true;           // false flags the report
    ConcavityVerdict verdict = ConcavityVerdict::Marginal;
};

// Minors with |m_k| <= kMinorZeroBand * scale^k count as zero, where scale
// is the largest Hessian entry magnitude in the leading k-block.  The
// determinant is analytically zero for homogeneous S, numerically not.
inline constexpr double kMinorZeroBand = 1e-9;

HessianReport entropy_hessian(const EntropyField& field, const StatePoint& point);

// The two closed-form inequalities for three-coordinate models:
//   c1 = 1 - df/dU < 0   (positivity of the heat capacity at constant V, N)
//   c2 = (1 - df/dU)(p^2 + f dp/dV - p df/dV) - (p - df/dV)^2 > 0
// Other arities fall back to the minor tests of entropy_hessian.
struct ConcavityConditions {
    StatePoint point;
    bool used_closed_form = false;
    double c1 = 0.0;
    double c2 = 0.0;
    std::vector<double> minors;  // fallback evidence when !used_closed_form
    bool satisfied = false;
    std::string note;
};

ConcavityConditions concavity_conditions(const EntropyField& field, const StatePoint& point);

// --- densities ---------------------------------------------------------------

// The degree-1 problem reduced over one extensive coordinate r (the volume
// by default): densities y_c = x_c / r, entropy density s = S / r, and
//
//   omega/f = omega0 + dr/r,   omega0 = (du - sum xi_i dx^i) / fhat,
//
// with fhat = f/r rewritten over the densities.
struct DensityModel {
    std::string source_model;
    std::string reducing;                  // coordinate divided out
    std::vector<std::string> coordinates;  // density names (lowercased originals)
    std::vector<expr::ExprPtr> intensive;  // p, xi_i over densities
    PfaffianForm omega0;                   // nominal_degree is NaN (not homogeneous)
    expr::ExprPtr fhat;                    // f / r over densities
    StatePoint reference;                  // densities of the source reference
    double reference_density_entropy = 0.0;  // S0 / r0
    QuadratureSettings quadrature;

    // s at a density point, by quadrature of omega0 along the straight
    // segment from the reference densities (PathError if fhat <= 0 on it).
    double entropy_density(const StatePoint& densities) const;
};

// Throws ModelError when the reducing coordinate is the energy or density
// names collide, NotIntegrableError via the verification field when no
// entropy exists.  Verifies S = r * s near the reference before returning.
DensityModel reduce_to_densities(const ThermoModel& model, std::size_t reducing_index = 1,
                                 const QuadratureSettings& settings = {});

// --- heat capacity -----------------------------------------------------------

// C_gamma(t) = omega(gamma'(t)) for the piecewise-linear path, parametrized
// with t in [0, n_segments], integer values at waypoints.  Corner values of
// t are refused (invalid_argument): the velocity is two-valued there.
double heat_capacity_along_path(const ThermoModel& model, const PathSpec& path, double t);

// --- zero set of f -----------------------------------------------------------

struct RaySpec {
    StatePoint from;  // interior, f > 0
    StatePoint to;    // near the boundary B = 0 (or near coordinate bounds)
};

struct ZeroRecord {
    std::size_t ray = 0;
    StatePoint location;
    double f_value = 0.0;
    double boundary_b = 0.0;  // B at the location
    bool interior = false;    // true: f vanishes strictly inside the domain
    // T = f/S_analytic just before the zero, when an analytic S is bundled;
    // bounded away from 0 at an interior zero means Z(f) strictly contains
    // Z(T) (the entropy, not the temperature, kills f there).
    double nearby_temperature = std::numeric_limits<double>::quiet_NaN();
};

struct ZeroSetReport {
    std::vector<ZeroRecord> zeros;
    bool analytic_evidence = false;  // analytic S was available for T estimates
    bool z_f_exceeds_z_t = false;    // interior zero with nearby T away from 0
    std::string summary;
};

// Samples f along each ray, bisects sign changes, and reports near-zeros
// (|f| <= near_zero_rel * f(from)).  Scanning a ray stops at its first
// sign change; states beyond it are inadmissible.
ZeroSetReport zero_set_scan(const EntropyField& field, const std::vector<RaySpec>& rays,
                            int samples_per_ray = 512, double near_zero_rel = 1e-6);

// --- third law ---------------------------------------------------------------

enum class ThirdLawClass {
    PlanckCompliant,      // hat S diverges to -inf as B -> 0 (S -> 0 at T = 0)
    PlanckViolating,      // hat S converges; T = 0 is not a single leaf
    PositivityViolating,  // f = 0 hit at interior B > 0 (S crosses zero first)
    Inconclusive,
};

struct ThirdLawSample {
    double b = 0.0;  // boundary offset B
    StatePoint state;
    double hat_s = 0.0;
};

struct ThirdLawReport {
    std::string model_name;
    std::vector<ThirdLawSample> samples;  // successful evaluations, B descending
    double slope = std::numeric_limits<double>::quiet_NaN();  // dhatS/dlnB, last two decades
    std::vector<StatePoint> interior_zeros;
    ThirdLawClass classification = ThirdLawClass::Inconclusive;
    std::string evidence;
};

// Straight approach segment from `start` (same V, X) down to
// U = b(V,X) + eps_boundary.
PathSpec boundary_approach(const ThermoModel& model, const StatePoint& start,
                           double eps_boundary = 1e-8);

// Marches hat S along the approach at B in {1e-1, ..., 1e-8} (those below
// the starting B) and classifies by the slope against ln B over the last
// two decades: >= diverge_slope diverges, <= converge_slope converges,
// between is inconclusive.  An f <= 0 obstruction is located by bisection
// and classified as positivity-violating.
ThirdLawReport third_law_classify(const EntropyField& field, const PathSpec& approach,
                                  double eps_boundary = 1e-8, double diverge_slope = 0.05,
                                  double converge_slope = 0.005);

// --- leaves ------------------------------------------------------------------

// c is outside the entropies attained along the fiber.
class LeafRangeError : public std::runtime_error {
  public:
    LeafRangeError(const std::string& what, double attained_min, double attained_max)
        : std::runtime_error(what), min_(attained_min), max_(attained_max) {}
    double attained_min() const { return min_; }
    double attained_max() const { return max_; }

  private:
    double min_, max_;
};

struct LeafResult {
    double b_c = 0.0;  // boundary offset solving S(b + B, params) = c
    StatePoint state;
    double entropy = 0.0;   // reconstructed S at the solution
    double residual = 0.0;  // |S - c|
    int iterations = 0;     // bisection steps
};

// Solves S(U, params) = c for U = b(params) + B_c on the fiber with the
// non-energy coordinates fixed to `params`.  S is strictly increasing in B
// there (dS/dU = 1/T > 0 wherever f > 0), so a doubling search brackets c
// and bisection converges to 1e-12 relative; |S(B_c) - c| <= 1e-10 c.
// Throws invalid_argument for c <= 0, LeafRangeError when the fiber never
// attains c.
LeafResult leaf_solve(const EntropyField& field, double c, const std::vector<double>& params);

// --- ground-state surface ----------------------------------------------------

// Residuals of the Mayer-Lie system on U = b(V, X): the heat form pulled
// back to the surface must vanish, component j giving db/dV + p for the
// volume and db/dX^i - xi_i for the others.  Evaluated at B = eps above
// the surface (f = 0 on it); returns one value per non-energy coordinate.
std::vector<double> mayer_lie_residuals(const ThermoModel& model, const std::vector<double>& params,
                                        double eps = 1e-6);

}  // namespace thermoform
