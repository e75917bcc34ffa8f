#include "thermoform/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace thermoform {

using expr::Binding;
using expr::ExprPtr;
using E = expr::Expression;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string state_str(const std::vector<std::string>& names, const StatePoint& x) {
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

}  // namespace

// ---------------------------------------------------------------------------
// Hessian and concavity

HessianReport entropy_hessian(const EntropyField& field, const StatePoint& point) {
    const ThermoModel& model = field.model();
    const PfaffianForm& omega = field.heat_form();
    std::size_t m = model.dimension();

    HessianReport report;
    report.point = point;
    double entropy = field.entropy(point);  // also validates the point
    double f = field.integrating_factor(point);
    Binding bind = omega.binding_at(point);

    std::vector<double> w(m);
    for (std::size_t j = 0; j < m; ++j) w[j] = expr::evaluate(omega.coefficients()[j], bind);

    Eigen::MatrixXd dw(m, m);  // dw(j,k) = dw_j/dx_k
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k)
            dw(j, k) = expr::evaluate(
                expr::differentiate(omega.coefficients()[j], model.coordinates[k]), bind);

    std::vector<double> df(m);  // df/dx_k = w_k + sum_i x_i dw_i/dx_k
    for (std::size_t k = 0; k < m; ++k) {
        df[k] = w[k];
        for (std::size_t i = 0; i < m; ++i) df[k] += point[i] * dw(i, k);
    }

    report.gradient.resize(m);
    for (std::size_t j = 0; j < m; ++j) report.gradient[j] = entropy * w[j] / f;

    Eigen::MatrixXd H(m, m);
    double pref = entropy / (f * f);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k)
            H(j, k) = pref * (w[j] * w[k] + f * dw(j, k) - w[j] * df[k]);

    double scale = std::max(H.cwiseAbs().maxCoeff(), 1e-300);
    report.symmetry_defect = (H - H.transpose()).cwiseAbs().maxCoeff() / scale;
    report.hessian = 0.5 * (H + H.transpose());

    report.minors.resize(m);
    for (std::size_t k = 1; k <= m; ++k)
        report.minors[k - 1] = report.hessian.topLeftCorner(k, k).determinant();
    report.determinant = report.minors.back();

    Eigen::VectorXd xv(m);
    for (std::size_t i = 0; i < m; ++i) xv[i] = point[i];
    report.radial_form = xv.dot(report.hessian * xv);

    // cross-check dominant entries against second differences of the
    // reconstructed S (step chosen so quadrature noise stays ~1e-6 relative)
    {
        std::vector<double> h(m);
        for (std::size_t j = 0; j < m; ++j) h[j] = 5e-3 * std::max(1.0, std::fabs(point[j]));
        auto shifted = [&](int dj, std::size_t j, int dk, std::size_t k) {
            StatePoint y = point;
            y[j] += dj * h[j];
            y[k] += dk * h[k];
            return y;
        };
        bool room = true;
        for (std::size_t j = 0; j < m && room; ++j)
            for (std::size_t k = 0; k < m && room; ++k)
                for (int dj : {-1, 1})
                    for (int dk : {-1, 1})
                        if (!model.interior(shifted(dj, j, dk, k))) room = false;
        if (!room) {
            for (double& hj : h) hj *= 0.1;
        }
        double dominant = 0.05 * scale;
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = j; k < m; ++k) {
                double sym = report.hessian(j, k);
                if (std::fabs(sym) < dominant) continue;
                double fd;
                if (j == k) {
                    fd = (field.entropy(shifted(1, j, 0, j)) - 2.0 * entropy +
                          field.entropy(shifted(-1, j, 0, j))) /
                         (h[j] * h[j]);
                } else {
                    fd = (field.entropy(shifted(1, j, 1, k)) - field.entropy(shifted(1, j, -1, k)) -
                          field.entropy(shifted(-1, j, 1, k)) +
                          field.entropy(shifted(-1, j, -1, k))) /
                         (4.0 * h[j] * h[k]);
                }
                double dev = std::fabs(fd - sym) / std::max(std::fabs(sym), 1e-300);
                report.fd_max_deviation = std::max(report.fd_max_deviation, dev);
            }
        }
        report.fd_agrees = report.fd_max_deviation <= 1e-4;
    }

    // minor sign pattern: odd negative, even positive, determinant ~ 0
    report.verdict = ConcavityVerdict::Concave;
    for (std::size_t k = 1; k <= m; ++k) {
        double block_scale =
            std::max(report.hessian.topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-300);
        double band = kMinorZeroBand * std::pow(block_scale, static_cast<double>(k));
        double mk = report.minors[k - 1];
        bool in_band = std::fabs(mk) <= band;
        double want = (k % 2 == 1) ? -1.0 : 1.0;
        if (k < m) {
            if (in_band) {
                if (report.verdict == ConcavityVerdict::Concave)
                    report.verdict = ConcavityVerdict::Marginal;
            } else if (mk * want < 0.0) {
                report.verdict = ConcavityVerdict::NotConcave;
            }
        } else {
            // degree-1 homogeneity forces a vanishing determinant
            if (!in_band) {
                report.verdict = (mk * want < 0.0) ? ConcavityVerdict::NotConcave
                                                   : ConcavityVerdict::Marginal;
            }
        }
        if (report.verdict == ConcavityVerdict::NotConcave) break;
    }
    return report;
}

ConcavityConditions concavity_conditions(const EntropyField& field, const StatePoint& point) {
    const ThermoModel& model = field.model();
    ConcavityConditions out;
    out.point = point;
    if (model.dimension() == 3) {
        out.used_closed_form = true;
        const PfaffianForm& omega = field.heat_form();
        ExprPtr f_expr = radial_expression(omega);
        const std::string& u_name = model.coordinates[0];
        const std::string& v_name = model.coordinates[1];
        Binding bind = omega.binding_at(point);
        double f = expr::evaluate(f_expr, bind);
        double p = expr::evaluate(model.intensive[0], bind);
        double df_du = expr::evaluate(expr::differentiate(f_expr, u_name), bind);
        double df_dv = expr::evaluate(expr::differentiate(f_expr, v_name), bind);
        double dp_dv = expr::evaluate(expr::differentiate(model.intensive[0], v_name), bind);
        out.c1 = 1.0 - df_du;
        out.c2 = out.c1 * (p * p + f * dp_dv - p * df_dv) - (p - df_dv) * (p - df_dv);
        out.satisfied = out.c1 < 0.0 && out.c2 > 0.0;
        out.note = "1 - df/dU < 0 is the positivity of the heat capacity at constant V, N";
    } else {
        HessianReport h = entropy_hessian(field, point);
        out.c1 = kNaN;
        out.c2 = kNaN;
        out.minors = h.minors;
        out.satisfied = h.verdict == ConcavityVerdict::Concave;
        out.note = "closed form needs 3 coordinates; used the Hessian minor tests";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Densities

double DensityModel::entropy_density(const StatePoint& densities) const {
    if (densities.size() != coordinates.size())
        throw PathError("density point has wrong dimension for the reduction of '" +
                        source_model + "'");
    if (densities == reference) return reference_density_entropy;

    std::size_t n = coordinates.size();
    for (int s = 0; s < 33; ++s) {
        double t = s / 32.0;
        StatePoint y = lerp(reference, densities, t);
        Binding bind = omega0.binding_at(y);
        double fh = expr::evaluate(fhat, bind);
        if (!(fh > 0.0))
            throw PathError("reduced integrating factor is not positive at " +
                            state_str(coordinates, y));
    }

    Binding bind;
    for (std::size_t c = 0; c < n; ++c) bind.set(coordinates[c], reference[c]);
    auto integrand = [&](double t) {
        double v = 0.0;
        for (std::size_t c = 0; c < n; ++c)
            bind.set(coordinates[c], reference[c] + t * (densities[c] - reference[c]));
        for (std::size_t c = 0; c < n; ++c)
            v += expr::evaluate(omega0.coefficients()[c], bind) * (densities[c] - reference[c]);
        return v;
    };
    QuadratureResult q = integrate_adaptive(integrand, 0.0, 1.0, quadrature);
    if (!q.reliable)
        throw NumericError("quadrature for the density entropy did not converge");
    double s = reference_density_entropy * std::exp(q.value);
    if (!std::isfinite(s)) throw NumericError("density entropy exponentiation overflowed");
    return s;
}

DensityModel reduce_to_densities(const ThermoModel& model, std::size_t reducing_index,
                                 const QuadratureSettings& settings) {
    model.validate();
    std::size_t m = model.dimension();
    if (reducing_index == 0)
        throw ModelError("cannot reduce by the energy coordinate; densities are per unit of an "
                         "extensive parameter");
    if (reducing_index >= m)
        throw ModelError("model '" + model.name + "' has no coordinate with index " +
                         std::to_string(reducing_index));
    const std::string& r_name = model.coordinates[reducing_index];
    if (!(model.bounds[reducing_index].lo >= 0.0))
        throw ModelError("reducing coordinate " + r_name + " is not positive over the domain");

    DensityModel out;
    out.source_model = model.name;
    out.reducing = r_name;
    out.quadrature = settings;

    // each surviving coordinate maps to its lowercased density name
    std::vector<ExprPtr> images(m);
    for (std::size_t c = 0; c < m; ++c) {
        if (c == reducing_index) {
            images[c] = E::constant(1.0);
            continue;
        }
        std::string lower = model.coordinates[c];
        for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        for (const std::string& existing : out.coordinates)
            if (existing == lower)
                throw ModelError("density names collide: two coordinates lowercase to '" + lower +
                                 "'");
        for (const std::string& original : model.coordinates)
            if (original == lower && original != model.coordinates[c])
                throw ModelError("density name '" + lower + "' collides with coordinate '" +
                                 original + "'");
        out.coordinates.push_back(lower);
        images[c] = E::variable(lower);
    }

    auto to_densities = [&](ExprPtr e) {
        for (std::size_t c = 0; c < m; ++c) e = expr::substitute(e, model.coordinates[c], images[c]);
        return e;
    };

    for (const ExprPtr& xi : model.intensive) out.intensive.push_back(to_densities(xi));

    PfaffianForm omega = build_heat_form(model);
    out.fhat = to_densities(radial_expression(omega));
    std::vector<ExprPtr> coeffs;
    for (std::size_t c = 0; c < m; ++c) {
        if (c == reducing_index) continue;
        coeffs.push_back(E::divide(to_densities(omega.coefficients()[c]), out.fhat));
    }
    out.omega0 = PfaffianForm(out.coordinates, std::move(coeffs), kNaN);

    double r0 = model.reference[reducing_index];
    if (!(r0 > 0.0))
        throw ModelError("reference value of " + r_name + " must be positive to reduce");
    for (std::size_t c = 0; c < m; ++c)
        if (c != reducing_index) out.reference.coords.push_back(model.reference[c] / r0);
    out.reference_density_entropy = model.reference_entropy / r0;

    // spot-check S = r * s near the reference before handing the model out
    EntropyField field(model, settings);
    std::vector<StatePoint> probes{model.reference.scaled(0.85), model.reference.scaled(1.3)};
    StatePoint bumped = model.reference;
    bumped[reducing_index] *= 1.4;
    probes.push_back(bumped);
    for (const StatePoint& x : probes) {
        if (!model.interior(x)) continue;
        double r = x[reducing_index];
        StatePoint y;
        for (std::size_t c = 0; c < m; ++c)
            if (c != reducing_index) y.coords.push_back(x[c] / r);
        double s = out.entropy_density(y);
        double big_s = field.entropy(x);
        if (std::fabs(big_s - r * s) > 1e-8 * std::max(std::fabs(big_s), 1e-300)) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "density reduction failed verification: S = %.12g but %s * s = %.12g",
                          big_s, r_name.c_str(), r * s);
            throw ModelError(msg);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Heat capacity along a path

double heat_capacity_along_path(const ThermoModel& model, const PathSpec& path, double t) {
    if (path.waypoints.size() < 2)
        throw std::invalid_argument("heat capacity needs a path with at least one segment");
    for (const StatePoint& wp : path.waypoints)
        if (wp.size() != model.dimension())
            throw PathError("path waypoint has wrong dimension for model '" + model.name + "'");
    double n_segments = static_cast<double>(path.waypoints.size() - 1);
    if (!(t >= 0.0 && t <= n_segments))
        throw std::invalid_argument("path parameter outside [0, number of segments]");
    if (t == std::floor(t))
        throw std::invalid_argument(
            "path parameter sits at a waypoint corner; the velocity is two-valued there");

    std::size_t seg = static_cast<std::size_t>(t);
    const StatePoint& a = path.waypoints[seg];
    const StatePoint& b = path.waypoints[seg + 1];
    StatePoint x = lerp(a, b, t - static_cast<double>(seg));
    if (!model.interior(x))
        throw PathError("path point " + state_str(model.coordinates, x) +
                        " is outside the domain");

    PfaffianForm omega = build_heat_form(model);
    Binding bind = omega.binding_at(x);
    double c = 0.0;
    for (std::size_t i = 0; i < model.dimension(); ++i)
        c += expr::evaluate(omega.coefficients()[i], bind) * (b[i] - a[i]);
    return c;
}

// ---------------------------------------------------------------------------
// Zero set of f

namespace {

double analytic_entropy_value(const ThermoModel& model, const StatePoint& x) {
    Binding bind = model.binding_at(x);
    return expr::evaluate(model.analytic_entropy, bind);
}

}  // namespace

ZeroSetReport zero_set_scan(const EntropyField& field, const std::vector<RaySpec>& rays,
                            int samples_per_ray, double near_zero_rel) {
    const ThermoModel& model = field.model();
    const PfaffianForm& omega = field.heat_form();
    ZeroSetReport report;
    report.analytic_evidence = model.analytic_entropy != nullptr;

    auto f_of = [&](const StatePoint& x) { return radial_apply(omega, x); };

    for (std::size_t ri = 0; ri < rays.size(); ++ri) {
        const RaySpec& ray = rays[ri];
        if (ray.from.size() != model.dimension() || ray.to.size() != model.dimension())
            throw PathError("ray " + std::to_string(ri) + " has wrong dimension");
        double f0 = f_of(ray.from);
        if (!(f0 > 0.0))
            throw PathError("ray " + std::to_string(ri) + " does not start at f > 0");
        double threshold = near_zero_rel * f0;

        bool crossed = false;
        double run_min_f = 0.0, run_min_t = 0.0;
        bool in_run = false;
        double prev_t = 0.0;
        int n = std::max(samples_per_ray, 8);
        for (int i = 1; i < n && !crossed; ++i) {
            double t = static_cast<double>(i) / (n - 1);
            double fv = f_of(lerp(ray.from, ray.to, t));
            if (fv <= 0.0) {
                // bisect the crossing; beyond it states are inadmissible
                double lo = prev_t, hi = t;
                for (int it = 0; it < 90; ++it) {
                    double mid = 0.5 * (lo + hi);
                    (f_of(lerp(ray.from, ray.to, mid)) > 0.0 ? lo : hi) = mid;
                }
                double tz = 0.5 * (lo + hi);
                StatePoint xz = lerp(ray.from, ray.to, tz);
                ZeroRecord rec;
                rec.ray = ri;
                rec.location = xz;
                rec.f_value = f_of(xz);
                rec.boundary_b = model.boundary_offset(xz);
                rec.interior = true;
                if (report.analytic_evidence) {
                    // T across the zero by l'Hopital: f and S_analytic both
                    // vanish there, their difference quotient does not
                    double dt = std::max(1e-6, 0.5 * (hi - lo));
                    StatePoint xm = lerp(ray.from, ray.to, tz - dt);
                    StatePoint xp = lerp(ray.from, ray.to, tz + dt);
                    double dS = analytic_entropy_value(model, xp) -
                                analytic_entropy_value(model, xm);
                    if (dS != 0.0) rec.nearby_temperature = (f_of(xp) - f_of(xm)) / dS;
                    double t_scale = std::max(f0 / std::fabs(analytic_entropy_value(model, ray.from)),
                                              1e-300);
                    if (std::isfinite(rec.nearby_temperature) &&
                        std::fabs(rec.nearby_temperature) > 1e-6 * t_scale)
                        report.z_f_exceeds_z_t = true;
                }
                report.zeros.push_back(std::move(rec));
                crossed = true;
                break;
            }
            if (fv <= threshold) {
                if (!in_run || fv < run_min_f) {
                    run_min_f = fv;
                    run_min_t = t;
                }
                in_run = true;
            } else if (in_run) {
                // dip recovered without a sign change: interior near-zero
                ZeroRecord rec;
                rec.ray = ri;
                rec.location = lerp(ray.from, ray.to, run_min_t);
                rec.f_value = run_min_f;
                rec.boundary_b = model.boundary_offset(rec.location);
                rec.interior = true;
                report.zeros.push_back(std::move(rec));
                in_run = false;
            }
            prev_t = t;
        }
        if (!crossed && in_run) {
            // the below-threshold run reaches the ray end: boundary zero
            ZeroRecord rec;
            rec.ray = ri;
            rec.location = ray.to;
            rec.f_value = f_of(ray.to);
            rec.boundary_b = model.boundary_offset(ray.to);
            rec.interior = false;
            if (report.analytic_evidence) {
                double s_end = analytic_entropy_value(model, ray.to);
                if (s_end != 0.0) rec.nearby_temperature = rec.f_value / s_end;
            }
            report.zeros.push_back(std::move(rec));
        }
    }

    std::size_t interior = 0, boundary = 0;
    for (const ZeroRecord& z : report.zeros) (z.interior ? interior : boundary)++;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%zu interior and %zu boundary near-zeros of f across %zu rays%s", interior,
                  boundary, rays.size(),
                  !report.analytic_evidence
                      ? "; no analytic entropy, Z(T) evidence unavailable"
                      : (report.z_f_exceeds_z_t
                             ? "; Z(f) strictly contains Z(T): T stays finite at an interior zero"
                             : "; consistent with Z(f) = Z(T)"));
    report.summary = buf;
    return report;
}

// ---------------------------------------------------------------------------
// Third law

PathSpec boundary_approach(const ThermoModel& model, const StatePoint& start,
                           double eps_boundary) {
    model.validate();
    if (start.size() != model.dimension())
        throw std::invalid_argument("approach start has wrong dimension");
    if (!model.interior(start))
        throw std::invalid_argument("approach start " + state_str(model.coordinates, start) +
                                    " is not interior");
    double b_here = start[0] - model.boundary_offset(start);
    if (!(eps_boundary > 0.0 && eps_boundary < model.boundary_offset(start)))
        throw std::invalid_argument("eps_boundary must lie strictly between 0 and the start's B");
    StatePoint end = start;
    end[0] = b_here + eps_boundary;
    PathSpec path;
    path.waypoints = {start, end};
    return path;
}

ThirdLawReport third_law_classify(const EntropyField& field, const PathSpec& approach,
                                  double eps_boundary, double diverge_slope,
                                  double converge_slope) {
    const ThermoModel& model = field.model();
    ThirdLawReport report;
    report.model_name = model.name;

    if (approach.waypoints.size() < 2)
        throw std::invalid_argument("approach path needs at least one segment");
    for (const StatePoint& wp : approach.waypoints) {
        if (wp.size() != model.dimension())
            throw std::invalid_argument("approach waypoint has wrong dimension");
        if (!model.interior(wp))
            throw std::invalid_argument("approach waypoint " +
                                        state_str(model.coordinates, wp) + " is not interior");
    }
    double b_start = model.boundary_offset(approach.waypoints.front());
    double b_end = model.boundary_offset(approach.waypoints.back());
    // slack for cancellation in U - b(V, X) when b dominates eps_boundary
    if (!(b_end <= eps_boundary * (1.0 + 1e-6)))
        throw std::invalid_argument("approach path must end at B <= eps_boundary");

    // state on the approach with the requested boundary offset
    auto state_at_b = [&](double b_target) -> StatePoint {
        for (std::size_t seg = 0; seg + 1 < approach.waypoints.size(); ++seg) {
            const StatePoint& a = approach.waypoints[seg];
            const StatePoint& b = approach.waypoints[seg + 1];
            double ba = model.boundary_offset(a), bb = model.boundary_offset(b);
            if ((ba - b_target) * (bb - b_target) > 0.0) continue;
            double lo = 0.0, hi = 1.0;
            bool descending = ba >= bb;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                double bm = model.boundary_offset(lerp(a, b, mid));
                if ((bm > b_target) == descending)
                    lo = mid;
                else
                    hi = mid;
            }
            return lerp(a, b, 0.5 * (lo + hi));
        }
        throw NumericError("approach path does not reach the requested boundary offset");
    };

    // f = 0 location along the approach, if any
    auto find_interior_zero = [&]() -> std::vector<StatePoint> {
        const PfaffianForm& omega = field.heat_form();
        std::vector<StatePoint> zeros;
        for (std::size_t seg = 0; seg + 1 < approach.waypoints.size(); ++seg) {
            const StatePoint& a = approach.waypoints[seg];
            const StatePoint& b = approach.waypoints[seg + 1];
            double prev_t = 0.0;
            double prev_f = radial_apply(omega, a);
            for (int i = 1; i <= 256; ++i) {
                double t = i / 256.0;
                double fv = radial_apply(omega, lerp(a, b, t));
                if (prev_f > 0.0 && fv <= 0.0) {
                    double lo = prev_t, hi = t;
                    for (int it = 0; it < 90; ++it) {
                        double mid = 0.5 * (lo + hi);
                        (radial_apply(omega, lerp(a, b, mid)) > 0.0 ? lo : hi) = mid;
                    }
                    zeros.push_back(lerp(a, b, 0.5 * (lo + hi)));
                    return zeros;
                }
                prev_t = t;
                prev_f = fv;
            }
        }
        return zeros;
    };

    for (int k = 1; k <= 8; ++k) {
        double b_target = std::pow(10.0, -k);
        if (b_target >= 0.5 * b_start) continue;
        StatePoint x;
        if (b_target >= b_end) {
            x = state_at_b(b_target);
        } else if (b_target >= b_end / (1.0 + 1e-6)) {
            x = approach.waypoints.back();  // the path end is this decade up to rounding
        } else {
            break;
        }
        try {
            EntropyValue v = field.evaluate(x);
            report.samples.push_back({b_target, x, v.hat_s});
        } catch (const PathError& err) {
            std::vector<StatePoint> zeros = find_interior_zero();
            if (!zeros.empty() &&
                model.boundary_offset(zeros.front()) > 10.0 * eps_boundary) {
                report.interior_zeros = std::move(zeros);
                report.classification = ThirdLawClass::PositivityViolating;
                char buf[200];
                std::snprintf(buf, sizeof buf,
                              "f = 0 at interior B = %.6g: the entropy reaches zero at positive "
                              "temperature before the boundary",
                              model.boundary_offset(report.interior_zeros.front()));
                report.evidence = buf;
            } else {
                report.classification = ThirdLawClass::Inconclusive;
                report.evidence = std::string("reconstruction obstructed: ") + err.what();
            }
            return report;
        } catch (const NumericError& err) {
            report.classification = ThirdLawClass::Inconclusive;
            report.evidence = std::string("quadrature failed before classification: ") + err.what();
            return report;
        }
    }

    // slope of hat S against ln B over the last two sampled decades
    if (report.samples.size() >= 3) {
        const ThirdLawSample& last = report.samples.back();
        const ThirdLawSample* partner = nullptr;
        for (const ThirdLawSample& s : report.samples)
            if (std::fabs(s.b - 100.0 * last.b) < 1e-9 * s.b) partner = &s;
        if (partner) {
            report.slope =
                (last.hat_s - partner->hat_s) / (std::log(last.b) - std::log(partner->b));
            char buf[200];
            if (report.slope >= diverge_slope) {
                report.classification = ThirdLawClass::PlanckCompliant;
                std::snprintf(buf, sizeof buf,
                              "hat S diverges: slope %.6g vs ln B over B in [%.1g, %.1g]",
                              report.slope, last.b, partner->b);
            } else if (std::fabs(report.slope) <= converge_slope) {
                report.classification = ThirdLawClass::PlanckViolating;
                std::snprintf(buf, sizeof buf,
                              "hat S converges: slope %.3g vs ln B, limit S = %.9g stays positive "
                              "at the boundary",
                              report.slope,
                              model.reference_entropy * std::exp(last.hat_s));
            } else {
                report.classification = ThirdLawClass::Inconclusive;
                std::snprintf(buf, sizeof buf,
                              "slope %.6g between the divergence (%.3g) and convergence (%.3g) "
                              "thresholds",
                              report.slope, diverge_slope, converge_slope);
            }
            report.evidence = buf;
            return report;
        }
    }
    report.classification = ThirdLawClass::Inconclusive;
    report.evidence = "approach too short: fewer than two decades of B sampled";
    return report;
}

// ---------------------------------------------------------------------------
// Leaves

LeafResult leaf_solve(const EntropyField& field, double c, const std::vector<double>& params) {
    if (!(c > 0.0)) throw std::invalid_argument("leaf level c must be positive (S > 0)");
    const ThermoModel& model = field.model();
    std::size_t m = model.dimension();
    if (params.size() != m - 1)
        throw std::invalid_argument("expected " + std::to_string(m - 1) +
                                    " fixed parameters (all coordinates except the energy)");

    double b = 0.0;
    if (model.boundary) {
        Binding bind;
        for (std::size_t j = 1; j < m; ++j) bind.set(model.coordinates[j], params[j - 1]);
        b = expr::evaluate(model.boundary, bind);
    }
    auto state_of = [&](double B) {
        StatePoint x;
        x.coords.resize(m);
        x[0] = b + B;
        for (std::size_t j = 1; j < m; ++j) x[j] = params[j - 1];
        return x;
    };
    auto entropy_at = [&](double B) { return field.entropy(state_of(B)); };

    double b_cap = 0.999 * (model.bounds[0].hi - b);
    if (!(b_cap > 0.0)) throw std::invalid_argument("fiber lies outside the energy bounds");
    double b0 = std::min(std::max(model.boundary_offset(model.reference), 1e-12), 0.5 * b_cap);

    double lo = b0;
    double s_lo = entropy_at(lo);
    double s_min_seen = s_lo, s_max_seen = s_lo;
    int halvings = 0;
    auto never_drops = [&]() {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "S never drops to %.6g along the fiber: attained [%.6g, %.6g]", c,
                      s_min_seen, s_max_seen);
        return LeafRangeError(msg, s_min_seen, s_max_seen);
    };
    while (s_lo > c) {
        lo *= 0.5;
        if (++halvings > 80) throw never_drops();
        try {
            s_lo = entropy_at(lo);
        } catch (const PathError&) {
            // B fell below the resolution of states along the fiber
            throw never_drops();
        }
        s_min_seen = std::min(s_min_seen, s_lo);
    }
    double hi = std::max(lo, b0);
    double s_hi = (hi == lo) ? s_lo : entropy_at(hi);
    s_max_seen = std::max(s_max_seen, s_hi);
    while (s_hi < c) {
        if (hi >= b_cap) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "S never reaches %.6g along the fiber before the energy bound: attained "
                          "[%.6g, %.6g]",
                          c, s_min_seen, s_max_seen);
            throw LeafRangeError(msg, s_min_seen, s_max_seen);
        }
        hi = std::min(2.0 * hi, b_cap);
        s_hi = entropy_at(hi);
        s_max_seen = std::max(s_max_seen, s_hi);
    }

    LeafResult out;
    while (hi - lo > 1e-12 * hi) {
        double mid = 0.5 * (lo + hi);
        (entropy_at(mid) < c ? lo : hi) = mid;
        if (++out.iterations > 200) break;
    }
    out.b_c = 0.5 * (lo + hi);
    out.state = state_of(out.b_c);
    out.entropy = entropy_at(out.b_c);
    out.residual = std::fabs(out.entropy - c);
    if (out.residual > 1e-10 * c)
        throw NumericError("leaf solve converged to a bracket but the entropy residual " +
                           std::to_string(out.residual) + " exceeds 1e-10 c");
    return out;
}

// ---------------------------------------------------------------------------
// Ground-state surface

std::vector<double> mayer_lie_residuals(const ThermoModel& model,
                                        const std::vector<double>& params, double eps) {
    model.validate();
    std::size_t m = model.dimension();
    if (params.size() != m - 1)
        throw std::invalid_argument("expected " + std::to_string(m - 1) + " surface parameters");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");

    Binding surface;
    for (std::size_t j = 1; j < m; ++j) surface.set(model.coordinates[j], params[j - 1]);
    double b = model.boundary ? expr::evaluate(model.boundary, surface) : 0.0;

    StatePoint x;
    x.coords.resize(m);
    x[0] = b + eps;
    for (std::size_t j = 1; j < m; ++j) x[j] = params[j - 1];

    PfaffianForm omega = build_heat_form(model);
    Binding bind = omega.binding_at(x);
    std::vector<double> out;
    out.reserve(m - 1);
    for (std::size_t j = 1; j < m; ++j) {
        double db = 0.0;
        if (model.boundary)
            db = expr::evaluate(expr::differentiate(model.boundary, model.coordinates[j]),
                                surface);
        out.push_back(db + expr::evaluate(omega.coefficients()[j], bind));
    }
    return out;
}

}  // namespace thermoform
