#include "thermoform/entropy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>

namespace thermoform {

using expr::Binding;
using expr::ExprPtr;
using E = expr::Expression;

// ---------------------------------------------------------------------------
// Gauss-Legendre rules

namespace {

struct GLRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes are the roots of P_n found by Newton iteration from the Chebyshev
// initial guess; weights are 2 / ((1 - x^2) P_n'(x)^2).
GLRule make_gl_rule(int n) {
    GLRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    auto legendre = [n](double x, double& pn, double& pn1) {
        double pm2 = 1.0, pm1 = x;
        for (int k = 2; k <= n; ++k) {
            double pk = ((2.0 * k - 1.0) * x * pm1 - (k - 1.0) * pm2) / k;
            pm2 = pm1;
            pm1 = pk;
        }
        pn = pm1;   // P_n
        pn1 = pm2;  // P_{n-1}
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pn = 0.0, pn1 = 0.0, dp = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            legendre(x, pn, pn1);
            dp = n * (x * pn - pn1) / (x * x - 1.0);
            double dx = pn / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        legendre(x, pn, pn1);
        dp = n * (x * pn - pn1) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;  // roots found largest-first; store ascending
        r.nodes[n - 1 - i] = x;
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

const GLRule& gl15() {
    static const GLRule rule = make_gl_rule(15);
    return rule;
}

const GLRule& gl7() {
    static const GLRule rule = make_gl_rule(7);
    return rule;
}

struct IntervalEstimate {
    double value;  // 15-point result
    double error;  // |15-point - 7-point|
};

IntervalEstimate estimate_interval(const std::function<double(double)>& f, double a, double b) {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s15 = 0.0, s7 = 0.0;
    const GLRule& r15 = gl15();
    const GLRule& r7 = gl7();
    for (int i = 0; i < 15; ++i) s15 += r15.weights[i] * f(mid + half * r15.nodes[i]);
    for (int i = 0; i < 7; ++i) s7 += r7.weights[i] * f(mid + half * r7.nodes[i]);
    s15 *= half;
    s7 *= half;
    if (!std::isfinite(s15) || !std::isfinite(s7))
        throw NumericError("integrand produced a non-finite value");
    return {s15, std::fabs(s15 - s7)};
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureSettings& settings) {
    QuadratureResult out;
    if (a == b) return out;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }

    struct Seg {
        double a, b, value, error;
    };
    // Globally adaptive: always bisect the interval with the largest error
    // estimate until the error sum meets the tolerance.  Per-interval
    // acceptance would over-refine near integrable endpoint singularities.
    auto less_error = [](const Seg& l, const Seg& r) { return l.error < r.error; };
    IntervalEstimate whole = estimate_interval(f, a, b);
    std::vector<Seg> heap{{a, b, whole.value, whole.error}};
    double frozen_value = 0.0, frozen_error = 0.0;  // intervals at the width floor
    double value_sum = whole.value, error_sum = whole.error;
    int count = 1;
    const double width_floor = 1e-14 * (b - a);

    double tol = 0.0;
    for (;;) {
        tol = std::max(settings.rel_tol * std::fabs(value_sum), settings.abs_tol);
        if (error_sum <= tol) break;
        if (count >= settings.max_intervals) break;
        if (heap.empty() || frozen_error > tol) break;
        std::pop_heap(heap.begin(), heap.end(), less_error);
        Seg worst = heap.back();
        heap.pop_back();
        if (worst.b - worst.a <= width_floor) {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        double mid = 0.5 * (worst.a + worst.b);
        IntervalEstimate left = estimate_interval(f, worst.a, mid);
        IntervalEstimate right = estimate_interval(f, mid, worst.b);
        ++count;
        value_sum += left.value + right.value - worst.value;
        error_sum += left.error + right.error - worst.error;
        heap.push_back({worst.a, mid, left.value, left.error});
        std::push_heap(heap.begin(), heap.end(), less_error);
        heap.push_back({mid, worst.b, right.value, right.error});
        std::push_heap(heap.begin(), heap.end(), less_error);
    }

    double value = frozen_value, error = frozen_error;
    for (const Seg& s : heap) {
        value += s.value;
        error += s.error;
    }
    out.value = sign * value;
    out.error_estimate = error;
    out.reliable = error <= tol;
    out.intervals = count;
    return out;
}

// ---------------------------------------------------------------------------
// Paths

namespace {

constexpr int kSegmentSamples = 33;

std::string describe_state(const std::vector<std::string>& names, const StatePoint& x) {
    std::string out = "(";
    for (std::size_t i = 0; i < x.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", x[i]);
        if (i) out += ", ";
        out += names[i] + "=" + buf;
    }
    return out + ")";
}

StatePoint lerp(const StatePoint& a, const StatePoint& b, double t) {
    StatePoint x = a;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += t * (b[i] - a[i]);
    return x;
}

bool zero_length(const StatePoint& a, const StatePoint& b) {
    return a.coords == b.coords;
}

void validate_path_with(const ThermoModel& model, const PfaffianForm& omega,
                        const PathSpec& path) {
    if (path.waypoints.empty()) throw PathError("path has no waypoints");
    for (const StatePoint& wp : path.waypoints) {
        if (wp.size() != model.dimension())
            throw PathError("path waypoint has wrong dimension for model '" + model.name + "'");
    }
    for (std::size_t seg = 0; seg + 1 < path.waypoints.size(); ++seg) {
        const StatePoint& a = path.waypoints[seg];
        const StatePoint& b = path.waypoints[seg + 1];
        if (zero_length(a, b)) continue;
        for (int s = 0; s < kSegmentSamples; ++s) {
            double t = static_cast<double>(s) / (kSegmentSamples - 1);
            StatePoint x = lerp(a, b, t);
            char at[64];
            std::snprintf(at, sizeof at, "segment %zu, t=%.6g, state ", seg, t);
            if (!model.interior(x))
                throw PathError("path leaves the domain interior: " + std::string(at) +
                                describe_state(model.coordinates, x));
            double f = 0.0;
            try {
                f = radial_apply(omega, x);
            } catch (const expr::EvalError& err) {
                throw PathError("state equations fail on the path: " + std::string(at) +
                                describe_state(model.coordinates, x) + ": " + err.what());
            }
            if (!(f > 0.0))
                throw PathError("integrating factor is not positive (f = " + std::to_string(f) +
                                "): " + std::string(at) + describe_state(model.coordinates, x));
        }
    }
}

// Contraction of a one-form along the straight segment from `from` to
// `to`, optionally rescaled by f = i_Y(omega) evaluated from the same
// coefficients.  Reuses one binding across quadrature nodes.
class SegmentIntegrand {
  public:
    SegmentIntegrand(const PfaffianForm& form, const StatePoint& from, const StatePoint& to,
                     bool over_radial_factor)
        : form_(form), from_(from), over_f_(over_radial_factor) {
        delta_.resize(from.size());
        for (std::size_t i = 0; i < from.size(); ++i) delta_[i] = to[i] - from[i];
    }

    double operator()(double t) {
        double num = 0.0, f = 0.0;
        for (std::size_t i = 0; i < delta_.size(); ++i)
            binding_.set(form_.coordinates()[i], from_[i] + t * delta_[i]);
        for (std::size_t i = 0; i < delta_.size(); ++i) {
            double c = expr::evaluate(form_.coefficients()[i], binding_);
            num += c * delta_[i];
            f += c * (from_[i] + t * delta_[i]);
        }
        if (!over_f_) return num;
        if (!(f > 0.0))
            throw PathError("integrating factor is not positive inside a quadrature interval");
        return num / f;
    }

  private:
    const PfaffianForm& form_;
    StatePoint from_;
    std::vector<double> delta_;
    bool over_f_;
    Binding binding_;
};

LineIntegralResult integrate_along(const PfaffianForm& form, const PathSpec& path,
                                   bool over_radial_factor, const QuadratureSettings& settings) {
    LineIntegralResult out;
    for (std::size_t seg = 0; seg + 1 < path.waypoints.size(); ++seg) {
        const StatePoint& a = path.waypoints[seg];
        const StatePoint& b = path.waypoints[seg + 1];
        if (zero_length(a, b)) continue;
        SegmentIntegrand integrand(form, a, b, over_radial_factor);
        QuadratureResult q =
            integrate_adaptive([&integrand](double t) { return integrand(t); }, 0.0, 1.0,
                               settings);
        if (!q.reliable) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "quadrature did not converge on segment %zu: requested rel %.3g, "
                          "error estimate %.3g after %d intervals",
                          seg, settings.rel_tol, q.error_estimate, q.intervals);
            throw NumericError(msg);
        }
        out.value += q.value;
        out.error_estimate += q.error_estimate;
        out.intervals += q.intervals;
    }
    return out;
}

void require_integrable_at(const PfaffianForm& omega, const StatePoint& x, double tol) {
    for (const TripleResidual& r : integrability_residuals(omega, x)) {
        if (std::fabs(r.normalized) > tol) {
            char msg[200];
            std::snprintf(msg, sizeof msg,
                          "heat form fails the Frobenius test: residual %.6g (normalized %.6g) "
                          "on coordinates (%s, %s, %s); no entropy exists",
                          r.raw, r.normalized, omega.coordinates()[r.i].c_str(),
                          omega.coordinates()[r.j].c_str(), omega.coordinates()[r.k].c_str());
            throw NotIntegrableError(msg, integrability_residuals(omega, x));
        }
    }
}

}  // namespace

void validate_path(const ThermoModel& model, const PathSpec& path) {
    validate_path_with(model, build_heat_form(model), path);
}

LineIntegralResult reconstruct_hat_s(const ThermoModel& model, const PathSpec& path,
                                     const QuadratureSettings& settings,
                                     double integrability_tol) {
    model.validate();
    PfaffianForm omega = build_heat_form(model);
    for (const StatePoint& wp : path.waypoints) require_integrable_at(omega, wp, integrability_tol);
    validate_path_with(model, omega, path);
    return integrate_along(omega, path, /*over_radial_factor=*/true, settings);
}

EntropyValue reconstruct_entropy(const ThermoModel& model, const PathSpec& path,
                                 const QuadratureSettings& settings, double integrability_tol) {
    if (path.waypoints.empty() || !(path.waypoints.front() == model.reference))
        throw PathError("entropy reconstruction requires a path starting at the reference state");
    LineIntegralResult hat = reconstruct_hat_s(model, path, settings, integrability_tol);
    EntropyValue out;
    out.hat_s = hat.value;
    out.error_estimate = hat.error_estimate;
    out.entropy = model.reference_entropy * std::exp(hat.value);
    if (!std::isfinite(out.entropy) || out.entropy <= 0.0)
        throw NumericError("entropy exponentiation overflowed");
    out.temperature = radial_apply(build_heat_form(model), path.waypoints.back()) / out.entropy;
    return out;
}

// ---------------------------------------------------------------------------
// EntropyField

EntropyField::EntropyField(ThermoModel model, QuadratureSettings quadrature,
                           double integrability_tol)
    : model_(std::move(model)), heat_form_(build_heat_form(model_)), quadrature_(quadrature) {
    model_.validate();
    // Frobenius residuals on a star around the reference; a full grid scan
    // is the job of the check command, this catches structural failures.
    std::vector<StatePoint> star{model_.reference, model_.reference.scaled(0.7),
                                 model_.reference.scaled(1.3)};
    for (std::size_t axis = 0; axis < model_.dimension(); ++axis) {
        StatePoint bumped = model_.reference;
        bumped[axis] *= 1.25;
        star.push_back(bumped);
    }
    for (const StatePoint& x : star) {
        if (model_.interior(x)) require_integrable_at(heat_form_, x, integrability_tol);
    }
}

EntropyField EntropyField::with_quadrature(const QuadratureSettings& q) const {
    EntropyField copy = *this;
    copy.quadrature_ = q;
    return copy;
}

double EntropyField::integrating_factor(const StatePoint& x) const {
    return radial_apply(heat_form_, x);
}

PathSpec EntropyField::route(const StatePoint& target) const {
    if (target.size() != model_.dimension())
        throw PathError("target has wrong dimension for model '" + model_.name + "'");
    if (!model_.interior(target))
        throw PathError("target state " + describe_state(model_.coordinates, target) +
                        " is outside the domain of model '" + model_.name + "'");

    std::size_t m = model_.dimension();
    // volume and the other extensive coordinates first, the energy last
    std::vector<std::size_t> preferred;
    for (std::size_t i = 1; i < m; ++i) preferred.push_back(i);
    preferred.push_back(0);

    std::vector<std::vector<std::size_t>> orders{preferred};
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    do {
        if (perm != preferred) orders.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::string first_obstruction;
    for (const auto& order : orders) {
        PathSpec path;
        path.waypoints.push_back(model_.reference);
        StatePoint cur = model_.reference;
        for (std::size_t axis : order) {
            if (cur[axis] == target[axis]) continue;
            cur[axis] = target[axis];
            path.waypoints.push_back(cur);
        }
        try {
            validate_path_with(model_, heat_form_, path);
            return path;
        } catch (const PathError& err) {
            if (first_obstruction.empty()) first_obstruction = err.what();
        }
    }
    throw PathError("no admissible axis-parallel route from the reference to " +
                    describe_state(model_.coordinates, target) + ": " + first_obstruction);
}

EntropyValue EntropyField::evaluate(const StatePoint& target) const {
    EntropyValue out;
    if (target == model_.reference) {
        out.entropy = model_.reference_entropy;
        out.temperature = integrating_factor(target) / out.entropy;
        return out;
    }
    PathSpec path = route(target);
    LineIntegralResult hat = integrate_along(heat_form_, path, true, quadrature_);
    out.hat_s = hat.value;
    out.error_estimate = hat.error_estimate;
    out.entropy = model_.reference_entropy * std::exp(hat.value);
    if (!std::isfinite(out.entropy) || out.entropy <= 0.0)
        throw NumericError("entropy exponentiation overflowed");
    out.temperature = integrating_factor(target) / out.entropy;
    return out;
}

LineIntegralResult EntropyField::hat_entropy_delta(const PathSpec& path) const {
    validate_path_with(model_, heat_form_, path);
    return integrate_along(heat_form_, path, true, quadrature_);
}

double EntropyField::temperature(const StatePoint& x, bool check_identity) const {
    EntropyValue v = evaluate(x);
    if (check_identity) {
        double h = 1e-4 * std::max(1.0, std::fabs(x[0]));
        h = std::min(h, 0.25 * model_.boundary_offset(x));
        StatePoint up = x, down = x;
        up[0] += h;
        down[0] -= h;
        int shrink = 0;
        while ((!model_.interior(up) || !model_.interior(down)) && shrink++ < 60) {
            h *= 0.5;
            up[0] = x[0] + h;
            down[0] = x[0] - h;
        }
        if (shrink >= 60) throw NumericError("no room for the temperature identity check");
        double dS_dU = (evaluate(up).entropy - evaluate(down).entropy) / (2.0 * h);
        double defect = std::fabs(dS_dU * v.temperature - 1.0);
        if (defect > 1e-6) {
            char msg[120];
            std::snprintf(msg, sizeof msg,
                          "temperature identity dS/dU * T = 1 violated by %.3g", defect);
            throw NumericError(msg);
        }
    }
    return v.temperature;
}

// ---------------------------------------------------------------------------
// Gibbs-Duhem

PfaffianForm gibbs_duhem_form(const ThermoModel& model) {
    PfaffianForm omega = build_heat_form(model);
    ExprPtr f = radial_expression(omega);
    std::size_t m = model.dimension();
    std::vector<ExprPtr> coeffs;
    coeffs.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::string& xj = model.coordinates[j];
        // V dp/dx_j - sum_i X^i dxi_i/dx_j
        ExprPtr num = E::multiply(E::variable(model.coordinates[1]),
                                  expr::differentiate(model.intensive[0], xj));
        for (std::size_t i = 1; i < model.intensive.size(); ++i) {
            num = E::subtract(num, E::multiply(E::variable(model.coordinates[i + 1]),
                                               expr::differentiate(model.intensive[i], xj)));
        }
        coeffs.push_back(E::divide(E::negate(num), f));
    }
    return PfaffianForm(model.coordinates, std::move(coeffs), -1.0);
}

LineIntegralResult gibbs_duhem_reconstruct(const ThermoModel& model, const PathSpec& path,
                                           const QuadratureSettings& settings,
                                           double exactness_tol) {
    model.validate();
    PfaffianForm gd = gibbs_duhem_form(model);
    for (const StatePoint& wp : path.waypoints) {
        for (const PairResidual& r : exactness_residuals(gd, wp)) {
            if (std::fabs(r.normalized) > exactness_tol) {
                char msg[220];
                std::snprintf(msg, sizeof msg,
                              "d log(1/T) is not closed at %s: residual %.6g (normalized %.6g) "
                              "on coordinate pair (%s, %s); Gibbs-Duhem reconstruction refused",
                              describe_state(model.coordinates, wp).c_str(), r.raw, r.normalized,
                              model.coordinates[r.i].c_str(), model.coordinates[r.j].c_str());
                throw NotExactError(msg, wp, exactness_residuals(gd, wp));
            }
        }
    }
    validate_path(model, path);
    return integrate_along(gd, path, /*over_radial_factor=*/false, settings);
}

double gibbs_duhem_residual_against(const ThermoModel& model, const StatePoint& x,
                                    const std::function<double(const StatePoint&)>& temperature,
                                    double step) {
    std::size_t m = model.dimension();
    // component j of the co-vector G = (1/T, p/T, xi_1/T, ...)
    auto g_components = [&](const StatePoint& y, std::vector<double>& out) {
        double t = temperature(y);
        if (!(t > 0.0)) throw NumericError("temperature is not positive in the residual stencil");
        Binding b = model.binding_at(y);
        out[0] = 1.0 / t;
        for (std::size_t j = 1; j < m; ++j)
            out[j] = expr::evaluate(model.intensive[j - 1], b) / t;
    };

    std::vector<double> plus(m), minus(m);
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double h = step * std::max(1.0, std::fabs(x[k]));
        StatePoint up = x, down = x;
        int shrink = 0;
        for (;; ++shrink) {
            if (shrink >= 60)
                throw NumericError("no interior room for the Gibbs-Duhem stencil");
            up[k] = x[k] + h;
            down[k] = x[k] - h;
            if (model.interior(up) && model.interior(down)) break;
            h *= 0.5;
        }
        g_components(up, plus);
        g_components(down, minus);
        double residual = 0.0, scale = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            double deriv = (plus[j] - minus[j]) / (2.0 * h);
            double term = x[j] * deriv;
            if (j >= 2) term = -term;  // the X^i carry minus signs
            residual += term;
            scale = std::max(scale, std::fabs(term));
        }
        worst = std::max(worst, std::fabs(residual) / scale);
    }
    return worst;
}

double gibbs_duhem_residual(const EntropyField& field, const StatePoint& x, double step) {
    QuadratureSettings tight = field.quadrature();
    tight.rel_tol = std::min(tight.rel_tol, 1e-13);
    tight.abs_tol = std::min(tight.abs_tol, 1e-15);
    EntropyField sharp = field.with_quadrature(tight);
    return gibbs_duhem_residual_against(
        field.model(), x,
        [&sharp](const StatePoint& y) { return sharp.temperature(y, false); }, step);
}

}  // namespace thermoform
