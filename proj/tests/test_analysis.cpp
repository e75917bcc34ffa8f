#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "thermoform/analysis.hpp"
#include "thermoform/models.hpp"

using namespace thermoform;
using namespace thermoform::models;
using doctest::Approx;

namespace {

// photon gas with the sign of p flipped: S = U^{3/2} V^{-1/2} is convex in U
ThermoModel corrupted_photon() {
    ThermoModel m;
    m.name = "corrupted-photon";
    m.coordinates = {"U", "V"};
    m.intensive = {expr::parse("-U/(3*V)")};
    m.bounds = {Interval{0.0, 1e6}, Interval{0.0, 1e6}};
    m.reference = {1.0, 1.0};
    m.reference_entropy = 1.0;
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("photon Hessian matches the closed form at (1,1)") {
    EntropyField field(photon_gas());
    HessianReport h = entropy_hessian(field, {1.0, 1.0});

    CHECK(h.gradient[0] == Approx(0.75).epsilon(1e-10));
    CHECK(h.gradient[1] == Approx(0.25).epsilon(1e-10));
    CHECK(h.hessian(0, 0) == Approx(-3.0 / 16.0).epsilon(1e-10));
    CHECK(h.hessian(0, 1) == Approx(3.0 / 16.0).epsilon(1e-10));
    CHECK(h.hessian(1, 0) == Approx(3.0 / 16.0).epsilon(1e-10));
    CHECK(h.hessian(1, 1) == Approx(-3.0 / 16.0).epsilon(1e-10));
    CHECK(h.symmetry_defect <= 1e-10);

    double scale = h.hessian.cwiseAbs().maxCoeff();
    CHECK(h.minors[0] == Approx(-3.0 / 16.0).epsilon(1e-10));
    CHECK(std::fabs(h.determinant) <= 1e-9 * scale * scale);
    CHECK(std::fabs(h.radial_form) <= 1e-8 * scale * 2.0);  // |x|^2 = 2
    CHECK(h.verdict == ConcavityVerdict::Concave);
    CHECK(h.fd_agrees);
    CHECK(h.fd_max_deviation <= 1e-4);
}

TEST_CASE("Hessian signature: one null direction, the rest negative") {
    struct Probe {
        ThermoModel model;
        std::vector<StatePoint> points;
    };
    std::vector<Probe> probes;
    probes.push_back({photon_gas(), {{2.0, 5.0}, {16.0, 1.0}}});
    probes.push_back({ideal_gas(), {{1.0, 1.0, 1.0}, {3.0, 2.0, 1.5}}});

    for (const Probe& probe : probes) {
        EntropyField field(probe.model);
        for (const StatePoint& x : probe.points) {
            CAPTURE(probe.model.name);
            HessianReport h = entropy_hessian(field, x);
            CHECK(h.verdict == ConcavityVerdict::Concave);
            CHECK(h.fd_agrees);

            std::size_t m = x.size();
            double scale = h.hessian.cwiseAbs().maxCoeff();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.hessian);
            // eigenvalues ascending: all but the last strictly negative,
            // the last one numerically zero (the radial direction)
            for (std::size_t i = 0; i + 1 < m; ++i) CHECK(eig.eigenvalues()[i] < 0.0);
            CHECK(std::fabs(eig.eigenvalues()[m - 1]) <= 1e-8 * scale);

            // minor signs alternate up to the vanishing determinant
            for (std::size_t k = 1; k < m; ++k)
                CHECK(h.minors[k - 1] * (k % 2 == 1 ? -1.0 : 1.0) > 0.0);

            double norm2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) norm2 += x[i] * x[i];
            CHECK(std::fabs(h.radial_form) <= 1e-8 * scale * norm2);
        }
    }
}

TEST_CASE("ideal gas satisfies the closed-form concavity conditions") {
    EntropyField field(ideal_gas());
    ConcavityConditions cc = concavity_conditions(field, {1.0, 1.0, 1.0});
    CHECK(cc.used_closed_form);
    CHECK(cc.c1 == Approx(-20.0 / 3.0).epsilon(1e-10));
    CHECK(cc.c2 == Approx(800.0 / 27.0).epsilon(1e-10));
    CHECK(cc.satisfied);
    CHECK(cc.note.find("heat capacity") != std::string::npos);
}

TEST_CASE("two-coordinate models fall back to the minor tests") {
    EntropyField field(photon_gas());
    ConcavityConditions cc = concavity_conditions(field, {2.0, 3.0});
    CHECK_FALSE(cc.used_closed_form);
    CHECK(cc.minors.size() == 2);
    CHECK(cc.satisfied);
    CHECK(cc.note.find("3 coordinates") != std::string::npos);
}

TEST_CASE("a convex entropy is flagged (negative control)") {
    EntropyField field(corrupted_photon());
    HessianReport h = entropy_hessian(field, {1.0, 1.0});
    CHECK(h.verdict == ConcavityVerdict::NotConcave);
    CHECK(h.minors[0] > 0.0);  // S_UU = 3/4 at (1,1)
    CHECK(h.fd_agrees);        // the form is right, the concavity is not

    ConcavityConditions cc = concavity_conditions(field, {1.0, 1.0});
    CHECK_FALSE(cc.satisfied);
}

TEST_CASE("photon gas reduces to the energy density") {
    DensityModel dm = reduce_to_densities(photon_gas());
    CHECK(dm.reducing == "V");
    REQUIRE(dm.coordinates == std::vector<std::string>{"u"});
    CHECK(dm.reference == StatePoint{1.0});
    CHECK(dm.reference_density_entropy == Approx(1.0));

    expr::Binding at;
    at.set("u", 1.0);
    CHECK(expr::evaluate(dm.fhat, at) == Approx(4.0 / 3.0).epsilon(1e-12));

    // s(u) = u^{3/4}
    CHECK(dm.entropy_density({16.0}) == Approx(8.0).epsilon(1e-9));
    CHECK(dm.entropy_density({2.0}) == Approx(std::pow(2.0, 0.75)).epsilon(1e-9));

    // omega/f = omega0 + dV/V, coefficient by coefficient at (U,V) = (2,5)
    PfaffianForm omega = build_heat_form(photon_gas());
    StatePoint x{2.0, 5.0};
    double f = radial_apply(omega, x);
    expr::Binding bx = omega.binding_at(x);
    expr::Binding by;
    by.set("u", x[0] / x[1]);
    double fhat = expr::evaluate(dm.fhat, by);
    double w0_u = expr::evaluate(dm.omega0.coefficients()[0], by);
    double lhs_u = expr::evaluate(omega.coefficients()[0], bx) / f;
    double lhs_v = expr::evaluate(omega.coefficients()[1], bx) / f;
    CHECK(std::fabs(lhs_u - w0_u / x[1]) <= 1e-10);                      // du/dU = 1/V
    CHECK(std::fabs(lhs_v - (w0_u * (-x[0] / (x[1] * x[1])) + 1.0 / x[1])) <= 1e-10);
    CHECK(fhat == Approx(f / x[1]).epsilon(1e-12));
}

TEST_CASE("density identity S = r s across the integrable catalog") {
    std::vector<ThermoModel> integrable;
    integrable.push_back(photon_gas());
    integrable.push_back(ideal_gas());
    integrable.push_back(planck_violator());
    integrable.push_back(shifted_photon_gas(0.5));

    for (const ThermoModel& model : integrable) {
        CAPTURE(model.name);
        DensityModel dm = reduce_to_densities(model);
        EntropyField field(model);
        std::size_t m = model.dimension();
        // 25 interior points: reference scaled and bumped coordinate-wise
        std::vector<double> factors{0.6, 0.9, 1.0, 1.7, 2.4};
        int checked = 0;
        for (double fu : factors) {
            for (double fv : factors) {
                StatePoint x = model.reference;
                x[0] *= fu;
                x[1] *= fv;
                if (m > 2) x[2] *= 0.5 * (fu + fv);
                if (!model.interior(x)) continue;
                double r = x[1];
                StatePoint y;
                for (std::size_t c = 0; c < m; ++c)
                    if (c != 1) y.coords.push_back(x[c] / r);
                double s = dm.entropy_density(y);
                double big = field.entropy(x);
                CHECK(std::fabs(big - r * s) <= 1e-8 * std::fabs(big));
                ++checked;
            }
        }
        CHECK(checked >= 20);
    }
}

TEST_CASE("ideal gas reduces by the mole number as well") {
    ThermoModel model = ideal_gas();
    DensityModel dm = reduce_to_densities(model, 2);
    CHECK(dm.reducing == "N");
    REQUIRE(dm.coordinates == std::vector<std::string>{"u", "v"});

    EntropyField field(model);
    StatePoint x{3.0, 2.0, 1.5};
    double s = dm.entropy_density({x[0] / x[2], x[1] / x[2]});
    CHECK(field.entropy(x) == Approx(x[2] * s).epsilon(1e-8));

    // dS = N ds + s dN: dS/dN at fixed (U, V) equals s - u s_u - v s_v
    double u = x[0] / x[2], v = x[1] / x[2];
    double h = 1e-4;
    double s_u = (dm.entropy_density({u + h, v}) - dm.entropy_density({u - h, v})) / (2 * h);
    double s_v = (dm.entropy_density({u, v + h}) - dm.entropy_density({u, v - h})) / (2 * h);
    StatePoint xp = x, xm = x;
    xp[2] += h;
    xm[2] -= h;
    double dS_dN = (field.entropy(xp) - field.entropy(xm)) / (2 * h);
    CHECK(dS_dN == Approx(s - u * s_u - v * s_v).epsilon(1e-5));
}

TEST_CASE("density reduction refuses bad coordinates") {
    CHECK_THROWS_AS(reduce_to_densities(photon_gas(), 0), ModelError);
    CHECK_THROWS_AS(reduce_to_densities(photon_gas(), 7), ModelError);
    CHECK_THROWS_AS(reduce_to_densities(nonintegrable_example()), NotIntegrableError);

    // two surviving coordinates lowercase to the same density name
    ThermoModel clash;
    clash.name = "clash";
    clash.coordinates = {"U", "V", "u"};
    clash.intensive = {expr::parse("U/V"), expr::parse("U/u")};
    clash.bounds = {Interval{0.0, 1e6}, Interval{0.0, 1e6}, Interval{0.0, 1e6}};
    clash.reference = {1.0, 1.0, 1.0};
    clash.reference_entropy = 1.0;
    clash.validate();
    CHECK_THROWS_AS(reduce_to_densities(clash, 1), ModelError);
}

TEST_CASE("heat capacity along paths") {
    ThermoModel model = photon_gas();

    PathSpec heating;  // unit-speed in U: C = omega(dU) = 1
    heating.waypoints = {{1.0, 1.0}, {2.0, 1.0}};
    CHECK(heat_capacity_along_path(model, heating, 0.5) == Approx(1.0).epsilon(1e-12));

    PathSpec expansion;  // C = p dV/dt = 1/(3 V(t))
    expansion.waypoints = {{1.0, 1.0}, {1.0, 2.0}};
    CHECK(heat_capacity_along_path(model, expansion, 0.25) ==
          Approx(1.0 / (3.0 * 1.25)).epsilon(1e-12));

    PathSpec both;
    both.waypoints = {{1.0, 1.0}, {2.0, 1.0}, {2.0, 2.0}};
    CHECK_THROWS_AS(heat_capacity_along_path(model, both, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(heat_capacity_along_path(model, both, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(heat_capacity_along_path(model, both, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(heat_capacity_along_path(model, both, 2.5), std::invalid_argument);

    // chord between two nearby points of the adiabat U = c^{4/3} V^{-1/3};
    // at the chord midpoint the quadratic error cancels, leaving O(delta^3)
    double c43 = std::pow(2.0, 4.0 / 3.0);
    double delta = 1e-3;
    PathSpec adiabat;
    adiabat.waypoints = {{c43, 1.0}, {c43 * std::pow(1.0 + delta, -1.0 / 3.0), 1.0 + delta}};
    CHECK(std::fabs(heat_capacity_along_path(model, adiabat, 0.5)) <= 1e-8);
}

TEST_CASE("zero set scan: photon f vanishes only at the boundary") {
    EntropyField field(photon_gas());
    ZeroSetReport report = zero_set_scan(field, {{{1.0, 1.0}, {1e-8, 1.0}}});
    REQUIRE(report.zeros.size() == 1);
    const ZeroRecord& z = report.zeros[0];
    CHECK_FALSE(z.interior);
    CHECK(z.boundary_b == Approx(1e-8).epsilon(1e-6));
    CHECK(z.f_value == Approx(4.0 / 3.0 * 1e-8).epsilon(1e-6));
    // T = f/S also goes to zero at the boundary
    CHECK(z.nearby_temperature == Approx(4.0 / 3.0 * 1e-2).epsilon(1e-3));
    CHECK_FALSE(report.z_f_exceeds_z_t);
    CHECK(report.analytic_evidence);
    CHECK(report.summary.find("consistent") != std::string::npos);
}

TEST_CASE("zero set scan: ideal gas f vanishes strictly inside") {
    EntropyField field(ideal_gas());
    ZeroSetReport report = zero_set_scan(field, {{{1.0, 1.0, 1.0}, {1e-8, 1.0, 1.0}}});
    REQUIRE(report.zeros.size() == 1);
    const ZeroRecord& z = report.zeros[0];
    CHECK(z.interior);
    double u_star = std::exp(-20.0 / 3.0);  // S = 10 + 1.5 ln U crosses zero
    CHECK(z.location[0] == Approx(u_star).epsilon(1e-9));
    CHECK(z.boundary_b == Approx(u_star).epsilon(1e-9));
    // T across the zero stays finite: Z(f) strictly contains Z(T)
    CHECK(z.nearby_temperature == Approx(u_star / 1.5).epsilon(2e-3));
    CHECK(report.z_f_exceeds_z_t);
    CHECK(report.summary.find("strictly contains") != std::string::npos);
}

TEST_CASE("zero set scan: shifted photon gas stays boundary-only") {
    EntropyField field(shifted_photon_gas(0.5));
    ZeroSetReport report = zero_set_scan(field, {{{1.5, 1.0}, {0.5 + 1e-8, 1.0}}});
    REQUIRE(report.zeros.size() == 1);
    CHECK_FALSE(report.zeros[0].interior);
    CHECK(report.zeros[0].boundary_b == Approx(1e-8).epsilon(1e-6));
    CHECK_FALSE(report.z_f_exceeds_z_t);
}

TEST_CASE("zero set scan refuses a ray starting at f <= 0") {
    EntropyField field(ideal_gas());
    CHECK_THROWS_AS(zero_set_scan(field, {{{1e-4, 1.0, 1.0}, {1.0, 1.0, 1.0}}}), PathError);
}

TEST_CASE("third law: photon gas is planck-compliant") {
    ThermoModel model = photon_gas();
    EntropyField field(model);
    ThirdLawReport report = third_law_classify(field, boundary_approach(model, {1.0, 1.0}));
    CHECK(report.classification == ThirdLawClass::PlanckCompliant);
    CHECK(report.samples.size() == 8);  // B = 1e-1 .. 1e-8
    CHECK(report.slope == Approx(0.75).epsilon(1e-6));
    CHECK(report.evidence.find("diverges") != std::string::npos);

    // the ground-state shift does not change the classification
    ThermoModel shifted = shifted_photon_gas(0.5);
    EntropyField sfield(shifted);
    ThirdLawReport sreport =
        third_law_classify(sfield, boundary_approach(shifted, shifted.reference));
    CHECK(sreport.classification == ThirdLawClass::PlanckCompliant);
    CHECK(sreport.slope == Approx(0.75).epsilon(1e-6));
}

TEST_CASE("third law: bounded entropy limit is planck-violating") {
    ThermoModel model = planck_violator();
    EntropyField field(model);
    ThirdLawReport report = third_law_classify(field, boundary_approach(model, {1.0, 1.0}));
    CHECK(report.classification == ThirdLawClass::PlanckViolating);
    CHECK(report.samples.size() == 8);
    CHECK(std::fabs(report.slope) <= 0.005);
    CHECK(report.evidence.find("converges") != std::string::npos);
}

TEST_CASE("third law: ideal gas trips the positivity check") {
    ThermoModel model = ideal_gas();
    EntropyField field(model);
    ThirdLawReport report = third_law_classify(field, boundary_approach(model, {1.0, 1.0, 1.0}));
    CHECK(report.classification == ThirdLawClass::PositivityViolating);
    CHECK(report.samples.size() == 2);  // B = 1e-1, 1e-2 still have S > 0
    REQUIRE(report.interior_zeros.size() == 1);
    CHECK(report.interior_zeros[0][0] == Approx(std::exp(-20.0 / 3.0)).epsilon(1e-9));
    CHECK(report.evidence.find("positive temperature") != std::string::npos);
}

TEST_CASE("boundary approach argument checks") {
    ThermoModel model = photon_gas();
    CHECK_THROWS_AS(boundary_approach(model, {1.0, 1.0}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(boundary_approach(model, {-1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(boundary_approach(model, {1.0, 1.0, 1.0}), std::invalid_argument);
    PathSpec ok = boundary_approach(model, {1.0, 1.0});
    REQUIRE(ok.waypoints.size() == 2);
    CHECK(ok.waypoints[1][0] == Approx(1e-8));
    CHECK(ok.waypoints[1][1] == 1.0);
}

TEST_CASE("leaf solve inverts the photon entropy") {
    EntropyField field(photon_gas());

    LeafResult leaf = leaf_solve(field, 2.0, {1.0});
    CHECK(leaf.b_c == Approx(std::pow(2.0, 4.0 / 3.0)).epsilon(1e-9));
    CHECK(leaf.state[0] == Approx(leaf.b_c));
    CHECK(leaf.state[1] == 1.0);
    CHECK(leaf.entropy == Approx(2.0).epsilon(1e-10));
    CHECK(leaf.residual <= 1e-10 * 2.0);
    CHECK(leaf.iterations > 0);

    // the reference's own level is a fixed point of the solve
    LeafResult ref = leaf_solve(field, 1.0, {1.0});
    CHECK(ref.b_c == Approx(1.0).epsilon(1e-9));

    for (double c : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        CAPTURE(c);
        LeafResult r = leaf_solve(field, c, {1.0});
        CHECK(r.residual <= 1e-10 * c);
        CHECK(r.b_c == Approx(std::pow(c, 4.0 / 3.0)).epsilon(1e-9));
    }

    // B_c(V) = c^{4/3} V^{-1/3} decreases with V
    double prev = std::numeric_limits<double>::infinity();
    for (double v : {1.0, 1.2, 1.5, 2.0}) {
        double b = leaf_solve(field, 2.0, {v}).b_c;
        CHECK(b < prev);
        CHECK(b == Approx(std::pow(2.0, 4.0 / 3.0) * std::pow(v, -1.0 / 3.0)).epsilon(1e-9));
        prev = b;
    }
}

TEST_CASE("the radial ray meets each leaf exactly once") {
    EntropyField field(photon_gas());
    LeafResult leaf = leaf_solve(field, 2.0, {1.0});
    int crossings = 0;
    double prev = -1.0;
    for (int i = 0; i <= 40; ++i) {
        double t = -10.0 + 20.0 * i / 40.0;
        double s = field.entropy(leaf.state.scaled(std::exp(t))) - 2.0;
        if (i > 0 && prev * s < 0.0) ++crossings;
        prev = s;
    }
    CHECK(crossings == 1);
}

TEST_CASE("leaf solve error paths") {
    EntropyField field(photon_gas());
    CHECK_THROWS_AS(leaf_solve(field, 0.0, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(leaf_solve(field, -3.0, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(leaf_solve(field, 1.0, {1.0, 2.0}), std::invalid_argument);

    // the planck violator's fiber entropy stays above V = 1: c = 0.5 is
    // unattainable and the attained range says so
    EntropyField pv(planck_violator());
    try {
        leaf_solve(pv, 0.5, {1.0});
        FAIL("expected LeafRangeError");
    } catch (const LeafRangeError& e) {
        CHECK(e.attained_min() > 0.9);
        CHECK(e.attained_min() < 1.1);
        CHECK(e.attained_max() >= 2.0);
    }
}

TEST_CASE("mayer-lie residuals vanish toward the ground state") {
    // shifted photon gas: db/dV + p = b0 + (B/(3V) - b0) = B/(3V)
    ThermoModel shifted = shifted_photon_gas(0.5);
    std::vector<double> r6 = mayer_lie_residuals(shifted, {1.0}, 1e-6);
    REQUIRE(r6.size() == 1);
    CHECK(r6[0] == Approx(1e-6 / 3.0).epsilon(1e-6));
    std::vector<double> r8 = mayer_lie_residuals(shifted, {1.0}, 1e-8);
    CHECK(r8[0] == Approx(1e-8 / 3.0).epsilon(1e-4));

    // plain photon gas: the surface is U = 0 and the residual is p itself
    std::vector<double> rp = mayer_lie_residuals(photon_gas(), {1.0}, 1e-6);
    CHECK(rp[0] == Approx(1e-6 / 3.0).epsilon(1e-6));

    std::vector<double> ri = mayer_lie_residuals(ideal_gas(), {1.0, 1.0}, 1e-6);
    REQUIRE(ri.size() == 2);
    CHECK(ri[0] == Approx(1e-6 / 1.5).epsilon(1e-6));
    CHECK(std::fabs(ri[1]) <= 2e-5);  // mu ~ (U/cN) ln U -> 0

    CHECK_THROWS_AS(mayer_lie_residuals(shifted, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(mayer_lie_residuals(shifted, {1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("pressure stays positive across the physical models") {
    // the shifted gas is excluded by construction: p(B=0) = -b0 < 0
    std::vector<ThermoModel> physical;
    physical.push_back(photon_gas());
    physical.push_back(ideal_gas());
    physical.push_back(planck_violator());
    std::vector<double> factors{0.3, 0.8, 1.0, 2.5, 7.0};
    for (const ThermoModel& model : physical) {
        CAPTURE(model.name);
        for (double fu : factors) {
            for (double fv : factors) {
                StatePoint x = model.reference;
                x[0] *= fu;
                x[1] *= fv;
                if (!model.interior(x)) continue;
                expr::Binding b = model.binding_at(x);
                CHECK(expr::evaluate(model.intensive[0], b) > 0.0);
            }
        }
    }
}
