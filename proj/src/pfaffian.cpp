#include "thermoform/pfaffian.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <set>

namespace thermoform {

using expr::Binding;
using expr::ExprPtr;
using E = expr::Expression;

StatePoint StatePoint::scaled(double lambda) const {
    StatePoint out = *this;
    for (double& c : out.coords) c *= lambda;
    return out;
}

Binding ThermoModel::binding_at(const StatePoint& x) const {
    assert(x.size() == coordinates.size());
    Binding b;
    for (std::size_t i = 0; i < coordinates.size(); ++i) b.set(coordinates[i], x[i]);
    return b;
}

bool ThermoModel::inside_bounds(const StatePoint& x) const {
    if (x.size() != bounds.size()) return false;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (!bounds[i].contains(x[i])) return false;
    }
    return true;
}

double ThermoModel::boundary_offset(const StatePoint& x) const {
    if (!boundary) return x[0];
    return x[0] - expr::evaluate(boundary, binding_at(x));
}

bool ThermoModel::interior(const StatePoint& x, double boundary_margin) const {
    return inside_bounds(x) && boundary_offset(x) > boundary_margin;
}

namespace {

bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

void check_vars_subset(const ExprPtr& e, const std::set<std::string>& allowed,
                       const std::string& what) {
    for (const std::string& v : expr::free_variables(e)) {
        if (!allowed.count(v))
            throw ModelError(what + " refers to unknown coordinate '" + v + "'");
    }
}

}  // namespace

void ThermoModel::validate() const {
    if (coordinates.size() < 2)
        throw ModelError("model '" + name + "': need at least two coordinates");
    std::set<std::string> seen;
    for (const std::string& c : coordinates) {
        if (!valid_identifier(c))
            throw ModelError("model '" + name + "': coordinate name '" + c + "' is not an identifier");
        if (!seen.insert(c).second)
            throw ModelError("model '" + name + "': duplicate coordinate '" + c + "'");
    }
    if (intensive.size() + 1 != coordinates.size())
        throw ModelError("model '" + name + "': expected " +
                         std::to_string(coordinates.size() - 1) + " state equations, got " +
                         std::to_string(intensive.size()));
    if (bounds.size() != coordinates.size())
        throw ModelError("model '" + name + "': bounds must cover every coordinate");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (!(bounds[i].lo < bounds[i].hi))
            throw ModelError("model '" + name + "': empty bound interval for coordinate '" +
                             coordinates[i] + "'");
    }
    for (std::size_t i = 0; i < intensive.size(); ++i) {
        if (!intensive[i])
            throw ModelError("model '" + name + "': missing state equation for coordinate '" +
                             coordinates[i + 1] + "'");
        check_vars_subset(intensive[i], seen,
                          "state equation for '" + coordinates[i + 1] + "'");
    }
    if (boundary) {
        std::set<std::string> without_energy(seen);
        without_energy.erase(coordinates[0]);
        check_vars_subset(boundary, without_energy, "ground-state boundary");
    }
    if (analytic_entropy) check_vars_subset(analytic_entropy, seen, "analytic entropy");

    if (reference.size() != coordinates.size())
        throw ModelError("model '" + name + "': reference state has wrong dimension");
    if (!inside_bounds(reference))
        throw ModelError("model '" + name + "': reference state outside the domain bounds");
    if (!(reference_entropy > 0.0))
        throw ModelError("model '" + name + "': reference entropy must be positive");

    try {
        if (!(boundary_offset(reference) > 0.0))
            throw ModelError("model '" + name +
                             "': reference state is not above the ground-state boundary");
        double f = radial_apply(build_heat_form(*this), reference);
        if (!(f > 0.0))
            throw ModelError("model '" + name + "': integrating factor is " +
                             std::to_string(f) + " <= 0 at the reference state");
    } catch (const expr::EvalError& err) {
        throw ModelError("model '" + name + "': state equations fail at the reference state: " +
                         err.what());
    }
}

// ---------------------------------------------------------------------------

PfaffianForm::PfaffianForm(std::vector<std::string> coordinates,
                           std::vector<ExprPtr> coefficients, double nominal_degree)
    : coordinates_(std::move(coordinates)), coefficients_(std::move(coefficients)),
      nominal_degree_(nominal_degree) {
    // a single coordinate is allowed: density reductions of two-coordinate
    // models leave a one-form in the lone energy density
    if (coordinates_.size() != coefficients_.size() || coordinates_.empty())
        throw ModelError("one-form needs one coefficient per coordinate (at least one)");
    for (const ExprPtr& c : coefficients_) {
        if (!c) throw ModelError("one-form has a null coefficient");
    }
}

Binding PfaffianForm::binding_at(const StatePoint& x) const {
    assert(x.size() == coordinates_.size());
    Binding b;
    for (std::size_t i = 0; i < coordinates_.size(); ++i) b.set(coordinates_[i], x[i]);
    return b;
}

double PfaffianForm::coefficient_at(std::size_t i, const StatePoint& x) const {
    return expr::evaluate(coefficients_[i], binding_at(x));
}

PfaffianForm build_heat_form(const ThermoModel& model) {
    std::vector<ExprPtr> coeffs;
    coeffs.reserve(model.dimension());
    coeffs.push_back(E::constant(1.0));      // dU
    coeffs.push_back(model.intensive[0]);    // +p dV
    for (std::size_t i = 1; i < model.intensive.size(); ++i)
        coeffs.push_back(E::negate(model.intensive[i]));  // -xi_i dX^i
    return PfaffianForm(model.coordinates, std::move(coeffs), 0.0);
}

ExprPtr radial_expression(const PfaffianForm& form) {
    ExprPtr sum;
    for (std::size_t i = 0; i < form.dimension(); ++i) {
        ExprPtr term = E::multiply(E::variable(form.coordinates()[i]), form.coefficients()[i]);
        sum = sum ? E::add(sum, term) : term;
    }
    return sum;
}

double radial_apply(const PfaffianForm& form, const StatePoint& x) {
    Binding b = form.binding_at(x);
    double sum = 0.0;
    for (std::size_t i = 0; i < form.dimension(); ++i)
        sum += x[i] * expr::evaluate(form.coefficients()[i], b);
    return sum;
}

PfaffianForm over_radial(const PfaffianForm& form) {
    ExprPtr f = radial_expression(form);
    std::vector<ExprPtr> coeffs;
    coeffs.reserve(form.dimension());
    for (const ExprPtr& c : form.coefficients()) coeffs.push_back(E::divide(c, f));
    // degree-k coefficients over a degree-(k+1) contraction
    return PfaffianForm(form.coordinates(), std::move(coeffs), -1.0);
}

// ---------------------------------------------------------------------------
// Homogeneity

DegreeReport check_homogeneity(const PfaffianForm& form, const std::vector<StatePoint>& samples,
                               const std::vector<double>& lambdas, double tolerance,
                               const std::function<bool(const StatePoint&)>& in_domain) {
    DegreeReport report;
    report.nominal_degree = form.nominal_degree();
    report.tolerance = tolerance;
    report.lambdas = lambdas;
    report.pass = true;

    for (std::size_t s = 0; s < samples.size(); ++s) {
        const StatePoint& x = samples[s];
        Binding base = form.binding_at(x);
        // local coefficient scale: zero tests below are relative to it
        double local = 0.0;
        std::vector<double> at_x(form.dimension());
        for (std::size_t i = 0; i < form.dimension(); ++i) {
            at_x[i] = expr::evaluate(form.coefficients()[i], base);
            local = std::max(local, std::fabs(at_x[i]));
        }
        if (local == 0.0) local = 1.0;

        for (double lambda : lambdas) {
            StatePoint lx = x.scaled(lambda);
            bool testable = !in_domain || in_domain(lx);
            Binding scaled_binding = form.binding_at(lx);
            double factor = std::pow(lambda, form.nominal_degree());

            for (std::size_t i = 0; i < form.dimension(); ++i) {
                DegreeEntry entry;
                entry.coefficient = i;
                entry.sample = s;
                entry.lambda = lambda;
                entry.observed_degree = std::numeric_limits<double>::quiet_NaN();
                entry.rel_deviation = 0.0;
                entry.status = DegreeStatus::Untestable;

                if (testable) {
                    try {
                        double got = expr::evaluate(form.coefficients()[i], scaled_binding);
                        double want = factor * at_x[i];
                        double scale = std::max(std::fabs(want), std::fabs(got));
                        if (scale <= 1e-13 * local) {
                            entry.rel_deviation = 0.0;  // both vanish; nothing to estimate
                        } else {
                            entry.rel_deviation = std::fabs(got - want) / scale;
                            if (got * at_x[i] > 0.0 && lambda != 1.0)
                                entry.observed_degree =
                                    std::log(got / at_x[i]) / std::log(lambda);
                        }
                        entry.status = entry.rel_deviation <= tolerance ? DegreeStatus::Pass
                                                                        : DegreeStatus::Fail;
                    } catch (const expr::EvalError&) {
                        entry.status = DegreeStatus::Untestable;
                    }
                }
                if (entry.status == DegreeStatus::Untestable) {
                    ++report.untestable;
                } else {
                    report.worst_rel_deviation =
                        std::max(report.worst_rel_deviation, entry.rel_deviation);
                    if (entry.status == DegreeStatus::Fail) report.pass = false;
                }
                report.entries.push_back(entry);
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Integrability and exactness

namespace {

struct PartialTable {
    // values[i] = c_i(x); partials[i][j] = d c_i / d x_j (x)
    std::vector<double> values;
    std::vector<std::vector<double>> partials;
};

PartialTable evaluate_partials(const PfaffianForm& form, const StatePoint& x) {
    PartialTable t;
    std::size_t m = form.dimension();
    t.values.resize(m);
    t.partials.assign(m, std::vector<double>(m, 0.0));
    Binding b = form.binding_at(x);
    for (std::size_t i = 0; i < m; ++i) {
        t.values[i] = expr::evaluate(form.coefficients()[i], b);
        for (std::size_t j = 0; j < m; ++j) {
            t.partials[i][j] =
                expr::evaluate(expr::differentiate(form.coefficients()[i], form.coordinates()[j]), b);
        }
    }
    return t;
}

}  // namespace

std::vector<TripleResidual> integrability_residuals(const PfaffianForm& form,
                                                    const StatePoint& x) {
    std::vector<TripleResidual> out;
    std::size_t m = form.dimension();
    if (m < 3) return out;  // omega ^ d(omega) vanishes identically

    PartialTable t = evaluate_partials(form, x);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            for (std::size_t k = j + 1; k < m; ++k) {
                double raw = t.values[i] * (t.partials[j][k] - t.partials[k][j]) +
                             t.values[j] * (t.partials[k][i] - t.partials[i][k]) +
                             t.values[k] * (t.partials[i][j] - t.partials[j][i]);
                double s = std::max({std::fabs(t.values[i]), std::fabs(t.values[j]),
                                     std::fabs(t.values[k]), 1e-300});
                double len = std::max({std::fabs(x[i]), std::fabs(x[j]), std::fabs(x[k]), 1e-300});
                out.push_back({i, j, k, raw, raw * len / (s * s)});
            }
        }
    }
    return out;
}

std::vector<PairResidual> exactness_residuals(const PfaffianForm& form, const StatePoint& x) {
    std::vector<PairResidual> out;
    std::size_t m = form.dimension();
    PartialTable t = evaluate_partials(form, x);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double raw = t.partials[i][j] - t.partials[j][i];
            double s = std::max({std::fabs(t.values[i]), std::fabs(t.values[j]), 1e-300});
            double len = std::max({std::fabs(x[i]), std::fabs(x[j]), 1e-300});
            out.push_back({i, j, raw, raw * len / s});
        }
    }
    return out;
}

double euler_potential(const PfaffianForm& form, double alpha, const StatePoint& x,
                       double exactness_tol) {
    if (alpha == -1.0)
        throw std::invalid_argument(
            "euler potential undefined for degree -1 coefficients; integrate along a path instead");
    for (const PairResidual& r : exactness_residuals(form, x)) {
        if (std::fabs(r.normalized) > exactness_tol)
            throw ModelError("form is not closed at the given point: residual " +
                             std::to_string(r.raw) + " on coordinate pair (" +
                             form.coordinates()[r.i] + ", " + form.coordinates()[r.j] + ")");
    }
    return radial_apply(form, x) / (alpha + 1.0);
}

}  // namespace thermoform
