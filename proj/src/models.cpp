#include "thermoform/models.hpp"

#include <utility>

namespace thermoform::models {

using expr::ExprPtr;
using E = expr::Expression;

namespace {

ExprPtr with_params(const char* source,
                    std::initializer_list<std::pair<const char*, double>> params) {
    ExprPtr e = expr::parse(source);
    for (const auto& [name, value] : params) e = expr::substitute(e, name, E::constant(value));
    return e;
}

std::vector<Interval> positive_box(std::size_t m) {
    return std::vector<Interval>(m, Interval{0.0, 1e6});
}

}  // namespace

ThermoModel photon_gas() {
    ThermoModel m;
    m.name = "photon-gas";
    m.coordinates = {"U", "V"};
    m.intensive = {expr::parse("U/(3*V)")};
    m.bounds = positive_box(2);
    m.reference = {1.0, 1.0};
    m.reference_entropy = 1.0;
    m.analytic_entropy = expr::parse("U^0.75 * V^0.25");
    m.notes = "radiation in a box; f = 4U/3";
    m.validate();
    return m;
}

ThermoModel ideal_gas(double c, double R, double s0) {
    ThermoModel m;
    m.name = "ideal-gas";
    m.coordinates = {"U", "V", "N"};
    m.intensive = {
        with_params("U/(c*V)", {{"c", c}}),
        // mu from the Euler relation mu N = U + pV - TS
        with_params("(U/(c*N))*((c+1) - s0/R - c*ln(U/N) - ln(V/N))",
                    {{"c", c}, {"R", R}, {"s0", s0}}),
    };
    m.bounds = positive_box(3);
    m.reference = {1.0, 1.0, 1.0};
    m.reference_entropy = s0;
    m.analytic_entropy =
        with_params("N*(s0 + R*(c*ln(U/N) + ln(V/N)))", {{"c", c}, {"R", R}, {"s0", s0}});
    m.notes = "S crosses zero at U/N = exp(-s0/(cR)); f = TS vanishes there";
    m.validate();
    return m;
}

ThermoModel nonintegrable_example() {
    ThermoModel m;
    m.name = "nonintegrable";
    m.coordinates = {"U", "V", "N"};
    m.intensive = {expr::parse("U/V"), expr::parse("U*V/N^2")};
    m.bounds = positive_box(3);
    m.reference = {1.0, 1.0, 1.0};
    m.reference_entropy = 1.0;
    m.notes = "fails the Frobenius test with l_UVN = U/N^2; no entropy exists";
    m.validate();
    return m;
}

ThermoModel planck_violator() {
    ThermoModel m;
    m.name = "planck-violator";
    m.coordinates = {"U", "V"};
    m.intensive = {expr::parse("(4/3)*(U/V)^0.25 + (1/3)*(U/V)")};
    m.bounds = positive_box(2);
    m.reference = {1.0, 1.0};
    m.reference_entropy = 2.0;
    m.analytic_entropy = expr::parse("V + U^0.75 * V^0.25");
    m.notes = "entropy tends to V > 0 as U -> 0: third law (Planck form) fails";
    m.validate();
    return m;
}

ThermoModel shifted_photon_gas(double b0) {
    ThermoModel m;
    m.name = "shifted-photon-gas";
    m.coordinates = {"U", "V"};
    m.intensive = {with_params("(U - b0*V)/(3*V) - b0", {{"b0", b0}})};
    m.boundary = with_params("b0*V", {{"b0", b0}});
    m.bounds = positive_box(2);
    m.reference = {1.0 + b0, 1.0};
    m.reference_entropy = 1.0;
    m.analytic_entropy = with_params("(U - b0*V)^0.75 * V^0.25", {{"b0", b0}});
    m.notes = "photon gas with ground-state energy b0*V; p(B=0) = -b0";
    m.validate();
    return m;
}

std::vector<ThermoModel> catalog() {
    std::vector<ThermoModel> out;
    out.push_back(photon_gas());
    out.push_back(ideal_gas());
    out.push_back(nonintegrable_example());
    out.push_back(planck_violator());
    out.push_back(shifted_photon_gas(0.5));
    return out;
}

}  // namespace thermoform::models
