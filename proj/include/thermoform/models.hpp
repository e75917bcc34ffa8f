#pragma once

#include <vector>

#include "thermoform/pfaffian.hpp"

// Built-in example systems.  Each returns a validated ThermoModel; the
// integrable ones carry their analytic entropy so reconstructions can be
// checked against a closed form.

namespace thermoform::models {

// p = U/(3V); S = U^{3/4} V^{1/4} with S = 1 at (1,1).
ThermoModel photon_gas();

// Monoatomic-style ideal gas with heat capacity ratio parameter c,
// gas constant R and reference molar entropy s0:
//   T = U/(cNR),  p = U/(cV),  S = N(s0 + R(c ln(U/N) + ln(V/N))).
// The analytic S crosses zero at U/N = exp(-s0/(cR)) (V = N), so the
// model deliberately exhibits an interior zero of f = TS.
ThermoModel ideal_gas(double c = 1.5, double R = 1.0, double s0 = 10.0);

// p = U/V, xi = UV/N^2: fails the Frobenius test with l_UVN = U/N^2.
// No entropy function exists; reconstruction must be refused.
ThermoModel nonintegrable_example();

// S = V + U^{3/4} V^{1/4}: a concave, extensive entropy whose limit as
// U -> 0 is V instead of 0, violating the Planck postulate.
ThermoModel planck_violator();

// Photon gas with ground-state energy b = b0 V; B = U - b0 V plays the
// role of U.  b0 = 0 reduces to the plain photon gas.
ThermoModel shifted_photon_gas(double b0 = 0.0);

// The bundled set, with the parameter choices shipped as model files
// (ideal gas c = 3/2, R = 1, s0 = 10; shifted photon gas b0 = 1/2).
std::vector<ThermoModel> catalog();

}  // namespace thermoform::models
