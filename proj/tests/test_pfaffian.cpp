#include "doctest.h"

#include <cmath>
#include <random>

#include "thermoform/models.hpp"
#include "thermoform/pfaffian.hpp"

using namespace thermoform;
using expr::parse;
using E = expr::Expression;

namespace {

// product grid of factors applied to the reference state
std::vector<StatePoint> sample_grid(const ThermoModel& m,
                                    const std::vector<double>& factors) {
    std::vector<StatePoint> pts{m.reference};
    for (std::size_t axis = 0; axis < m.dimension(); ++axis) {
        std::vector<StatePoint> next;
        for (const StatePoint& p : pts) {
            for (double f : factors) {
                StatePoint q = p;
                q[axis] = m.reference[axis] * f;
                next.push_back(q);
            }
        }
        pts = std::move(next);
    }
    std::vector<StatePoint> interior;
    for (const StatePoint& p : pts)
        if (m.interior(p)) interior.push_back(p);
    return interior;
}

}  // namespace

TEST_CASE("heat form of the photon gas") {
    ThermoModel m = models::photon_gas();
    PfaffianForm omega = build_heat_form(m);
    REQUIRE(omega.dimension() == 2);
    CHECK(omega.nominal_degree() == 0.0);
    CHECK(omega.coefficient_at(0, {3.0, 1.0}) == 1.0);
    CHECK(omega.coefficient_at(1, {3.0, 1.0}) == 1.0);  // p(3,1) = 1

    // f = U + pV = 4U/3
    CHECK(radial_apply(omega, {3.0, 1.0}) == doctest::Approx(4.0).epsilon(1e-15));
    expr::Binding at{{"U", 3.0}, {"V", 1.0}};
    CHECK(expr::evaluate(radial_expression(omega), at) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("heat form applies the sign convention to extra coordinates") {
    ThermoModel m = models::nonintegrable_example();
    PfaffianForm omega = build_heat_form(m);
    REQUIRE(omega.dimension() == 3);
    // omega = dU + p dV - mu dN with p = U/V, mu = UV/N^2
    CHECK(omega.coefficient_at(1, {2.0, 4.0, 1.0}) == doctest::Approx(0.5));
    CHECK(omega.coefficient_at(2, {2.0, 4.0, 1.0}) == doctest::Approx(-8.0));
    // f = U + U - UV/N = 1 at the unit point
    CHECK(radial_apply(omega, {1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("integrating factor is homogeneous of degree one") {
    for (const ThermoModel& m : models::catalog()) {
        PfaffianForm omega = build_heat_form(m);
        for (const StatePoint& x : sample_grid(m, {0.9, 1.4})) {
            double f = radial_apply(omega, x);
            for (double lambda : {0.5, 2.0, 3.0}) {
                double fl = radial_apply(omega, x.scaled(lambda));
                CHECK(std::fabs(fl - lambda * f) <= 1e-10 * std::fabs(lambda * f));
            }
        }
    }
}

TEST_CASE("homogeneity check passes intensive coefficients") {
    ThermoModel m = models::photon_gas();
    PfaffianForm omega = build_heat_form(m);
    auto samples = sample_grid(m, {0.8, 1.0, 1.6});
    DegreeReport report = check_homogeneity(omega, samples, {0.5, 2.0, 3.0}, 1e-9);
    CHECK(report.pass);
    CHECK(report.untestable == 0);
    CHECK(report.worst_rel_deviation <= 1e-12);
}

TEST_CASE("homogeneity check flags a coefficient of the wrong degree") {
    // dU + U dV pretends to be intensive but its second coefficient has degree 1
    PfaffianForm fake({"U", "V"}, {E::constant(1.0), parse("U")}, 0.0);
    DegreeReport report = check_homogeneity(fake, {StatePoint{3.0, 1.0}}, {2.0}, 1e-9);
    CHECK_FALSE(report.pass);
    bool saw_failure = false;
    for (const DegreeEntry& e : report.entries) {
        if (e.status == DegreeStatus::Fail) {
            saw_failure = true;
            CHECK(e.observed_degree == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(saw_failure);
}

TEST_CASE("homogeneity check marks out-of-domain scalings untestable") {
    ThermoModel m = models::photon_gas();
    PfaffianForm omega = build_heat_form(m);
    auto in_domain = [](const StatePoint& x) { return x[0] < 5.0; };
    DegreeReport report =
        check_homogeneity(omega, {StatePoint{3.0, 1.0}}, {0.5, 2.0}, 1e-9, in_domain);
    CHECK(report.pass);
    CHECK(report.untestable == 2);  // lambda = 2 scales U to 6, out of the mock domain
}

TEST_CASE("Frobenius residuals vanish identically in two coordinates") {
    ThermoModel m = models::photon_gas();
    CHECK(integrability_residuals(build_heat_form(m), {2.0, 3.0}).empty());
}

TEST_CASE("Frobenius residual of the counter-example is U/N^2") {
    ThermoModel m = models::nonintegrable_example();
    PfaffianForm omega = build_heat_form(m);

    auto residuals = integrability_residuals(omega, {2.0, 1.0, 1.0});
    REQUIRE(residuals.size() == 1);
    CHECK(std::fabs(residuals[0].raw - 2.0) <= 1e-12 * 2.0);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> coord(0.5, 4.0);
    for (int i = 0; i < 20; ++i) {
        StatePoint x{coord(rng), coord(rng), coord(rng)};
        double expected = x[0] / (x[2] * x[2]);
        auto r = integrability_residuals(omega, x);
        REQUIRE(r.size() == 1);
        CHECK(std::fabs(r[0].raw - expected) <= 1e-12 * std::fabs(expected));
        CHECK(r[0].normalized > 1e-3);  // comfortably flagged
    }
}

TEST_CASE("Frobenius residuals of the ideal gas vanish numerically") {
    ThermoModel m = models::ideal_gas();
    PfaffianForm omega = build_heat_form(m);
    for (const StatePoint& x : sample_grid(m, {1.0, 4.0, 16.0})) {
        for (const TripleResidual& r : integrability_residuals(omega, x))
            CHECK(std::fabs(r.normalized) <= 1e-10);
    }
}

TEST_CASE("heat form is inexact even when integrable") {
    // d(omega) != 0 for the photon gas: the (U,V) component is -dp/dU = -1/(3V)
    ThermoModel m = models::photon_gas();
    auto r = exactness_residuals(build_heat_form(m), {1.0, 1.0});
    REQUIRE(r.size() == 1);
    CHECK(r[0].raw == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("omega/f is closed for the integrable catalog models") {
    for (const ThermoModel& m : models::catalog()) {
        if (m.name == "nonintegrable") continue;
        PfaffianForm scaled = over_radial(build_heat_form(m));
        CHECK(scaled.nominal_degree() == -1.0);
        for (const StatePoint& x : sample_grid(m, {0.8, 1.0, 1.3, 2.1})) {
            for (const PairResidual& r : exactness_residuals(scaled, x))
                CHECK(std::fabs(r.normalized) <= 1e-10);
        }
    }
}

TEST_CASE("omega/f of the counter-example is not closed") {
    ThermoModel m = models::nonintegrable_example();
    PfaffianForm scaled = over_radial(build_heat_form(m));
    double worst = 0.0;
    for (const PairResidual& r : exactness_residuals(scaled, {1.0, 1.0, 1.0}))
        worst = std::max(worst, std::fabs(r.normalized));
    CHECK(worst > 1e-2);
}

TEST_CASE("exactness residual of d log(1/T) for the counter-example") {
    // Coefficients derived from -(V dp - N dmu)/f with p = U/V, mu = UV/N^2.
    PfaffianForm a({"U", "V", "N"},
                   {parse("(V - N)/(U*(2*N - V))"), parse("(N + V)/(V*(2*N - V))"),
                    parse("-2*V/(N*(2*N - V))")},
                   -1.0);
    auto r = exactness_residuals(a, {1.0, 1.0, 1.0});
    REQUIRE(r.size() == 3);
    // the (U,V) pair carries the obstruction: d a_U/dV - d a_V/dU = 1
    CHECK(r[0].i == 0);
    CHECK(r[0].j == 1);
    CHECK(std::fabs(r[0].raw - 1.0) <= 1e-10);
}

TEST_CASE("euler potential recovers potentials of closed homogeneous forms") {
    // 2x dx + 2y dy = d(x^2 + y^2), coefficients of degree 1
    PfaffianForm grad({"x", "y"}, {parse("2*x"), parse("2*y")}, 1.0);
    CHECK(euler_potential(grad, 1.0, {1.0, 1.0}) == doctest::Approx(2.0).epsilon(1e-14));

    // dx + dy = d(x + y), degree 0
    PfaffianForm flat({"x", "y"}, {E::constant(1.0), E::constant(1.0)}, 0.0);
    CHECK(euler_potential(flat, 0.0, {3.0, 4.0}) == doctest::Approx(7.0).epsilon(1e-14));

    // d(potential) reproduces the coefficients (finite differences)
    auto g = [&](double x, double y) { return euler_potential(grad, 1.0, {x, y}); };
    double h = 1e-6;
    CHECK(std::fabs((g(1.5 + h, 0.7) - g(1.5 - h, 0.7)) / (2 * h) - 3.0) <= 1e-7);
    CHECK(std::fabs((g(1.5, 0.7 + h) - g(1.5, 0.7 - h)) / (2 * h) - 1.4) <= 1e-7);
}

TEST_CASE("euler potential refusals") {
    PfaffianForm flat({"x", "y"}, {E::constant(1.0), E::constant(1.0)}, 0.0);
    CHECK_THROWS_AS(euler_potential(flat, -1.0, {1.0, 1.0}), std::invalid_argument);

    PfaffianForm swirl({"x", "y"}, {parse("y"), parse("0 - x")}, 1.0);
    CHECK_THROWS_AS(euler_potential(swirl, 1.0, {1.0, 1.0}), ModelError);
}

TEST_CASE("model validation rejects malformed systems") {
    ThermoModel m = models::photon_gas();

    ThermoModel bad = m;
    bad.reference = {1.0, 2e6};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("outside"), ModelError);

    bad = m;
    bad.coordinates = {"U", "U"};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("duplicate"), ModelError);

    bad = m;
    bad.intensive.push_back(parse("U"));
    CHECK_THROWS_AS(bad.validate(), ModelError);

    bad = m;
    bad.reference_entropy = 0.0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("entropy"), ModelError);

    bad = m;
    bad.boundary = parse("U/2");  // ground-state energy must not depend on U
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("unknown coordinate 'U'"), ModelError);

    bad = m;
    bad.intensive = {parse("0 - U/V")};  // f = U - U = 0 at the reference
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("integrating factor"), ModelError);

    bad = m;
    bad.intensive = {parse("U/(3*W)")};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("unknown coordinate 'W'"), ModelError);
}

TEST_CASE("interior test respects the ground-state boundary") {
    ThermoModel m = models::shifted_photon_gas(0.5);
    CHECK(m.boundary_offset({1.5, 1.0}) == doctest::Approx(1.0));
    CHECK(m.interior({1.5, 1.0}));
    CHECK_FALSE(m.interior({0.4, 1.0}));  // B = 0.4 - 0.5 < 0
    CHECK(m.interior({0.6, 1.0}));
    CHECK_FALSE(m.interior({0.6, 1.0}, 0.2));  // margin pushes it out
}
