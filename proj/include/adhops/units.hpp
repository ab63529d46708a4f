#pragma once

// Unit system shared by every module: energies in cm^-1, time in fs,
// temperature in K. The two constants below are the only place the
// conversion lives; output manifests echo them.

#include <complex>

namespace adhops {

using cplx = std::complex<double>;

namespace units {

// hbar = 1 / (2 pi c) with c = 2.99792458e-5 cm/fs (CODATA, exact c).
inline constexpr double hbar = 5308.837458876145;   // cm^-1 fs
// Boltzmann constant, CODATA 2018: 0.695034800 cm^-1 / K.
inline constexpr double k_boltzmann = 0.6950348004;  // cm^-1 / K

inline constexpr double beta(double temperature_kelvin) {
    return 1.0 / (k_boltzmann * temperature_kelvin);
}

}  // namespace units
}  // namespace adhops
