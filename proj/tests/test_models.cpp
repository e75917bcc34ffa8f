#include <cmath>
#include <vector>

#include "doctest.h"
#include "thermoform/entropy.hpp"
#include "thermoform/models.hpp"

using namespace thermoform;
using namespace thermoform::models;
using doctest::Approx;

namespace {

double analytic_at(const ThermoModel& m, const StatePoint& x) {
    expr::Binding b = m.binding_at(x);
    return expr::evaluate(m.analytic_entropy, b);
}

}  // namespace

TEST_CASE("every bundled heat form is homogeneous of degree zero") {
    for (const ThermoModel& model : catalog()) {
        CAPTURE(model.name);
        PfaffianForm omega = build_heat_form(model);
        std::vector<StatePoint> samples;
        for (double f : {0.8, 1.0, 1.45}) samples.push_back(model.reference.scaled(f));
        StatePoint bump = model.reference;
        bump[0] *= 1.9;
        samples.push_back(bump);
        DegreeReport report =
            check_homogeneity(omega, samples, {0.5, 2.0, 3.0}, 1e-8,
                              [&](const StatePoint& x) { return model.interior(x); });
        CHECK(report.pass);
        CHECK(report.worst_rel_deviation <= 1e-8);
    }
}

TEST_CASE("analytic entropies are reproduced on a 10-per-axis grid") {
    for (const ThermoModel& model : catalog()) {
        if (!model.analytic_entropy) continue;
        CAPTURE(model.name);
        EntropyField field(model);
        std::size_t m = model.dimension();

        std::vector<double> factors;
        for (int i = 0; i < 10; ++i) factors.push_back(0.5 + 4.5 * i / 9.0);

        int checked = 0;
        std::vector<std::size_t> idx(m, 0);
        for (;;) {
            StatePoint x = model.reference;
            for (std::size_t c = 0; c < m; ++c) x[c] *= factors[idx[c]];
            if (model.interior(x)) {
                double got = field.entropy(x);
                double want = analytic_at(model, x);
                CHECK(std::fabs(got - want) <= 1e-8 * std::fabs(want));
                ++checked;
            }
            std::size_t c = 0;
            while (c < m && ++idx[c] == factors.size()) idx[c++] = 0;
            if (c == m) break;
        }
        // the shifted gas loses corners where U < b(V); everything else is full
        CHECK(checked >= static_cast<int>(std::pow(10.0, static_cast<double>(m)) / 2));
    }
}

TEST_CASE("the planck violator really is built from its entropy") {
    ThermoModel model = planck_violator();
    // p must equal T dS/dV with T = 1/(dS/dU), both from the analytic S
    expr::ExprPtr s_u = expr::differentiate(model.analytic_entropy, "U");
    expr::ExprPtr s_v = expr::differentiate(model.analytic_entropy, "V");
    for (double fu : {0.6, 1.0, 2.8}) {
        for (double fv : {0.7, 1.0, 3.1}) {
            StatePoint x{fu, fv};
            expr::Binding b = model.binding_at(x);
            double t = 1.0 / expr::evaluate(s_u, b);
            double p = t * expr::evaluate(s_v, b);
            CHECK(expr::evaluate(model.intensive[0], b) == Approx(p).epsilon(1e-12));
        }
    }
}

TEST_CASE("catalog models validate and stay distinct") {
    std::vector<ThermoModel> all = catalog();
    CHECK(all.size() == 5);
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK_NOTHROW(all[i].validate());
        for (std::size_t j = i + 1; j < all.size(); ++j) CHECK(all[i].name != all[j].name);
    }
}
