#pragma once

// Bath correlation functions written as finite sums of complex exponentials,
//   alpha(t) = sum_j g_j exp(-gamma_j t / hbar),
// plus constructors for the parameterizations used by the model files and a
// quadrature evaluation of the spectral-density integral used to validate
// them.

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adhops/units.hpp"

namespace adhops::bath {

// One term g * exp(-gamma t / hbar). g in cm^-2, gamma in cm^-1.
struct ExponentialMode {
    cplx g;
    cplx gamma;

    friend bool operator==(const ExponentialMode&, const ExponentialMode&) = default;
};

using ModeList = std::vector<ExponentialMode>;

// Mode lists per pigment. The order inside a list is the canonical mode
// order used by hierarchy indices.
struct BathSpec {
    std::vector<ModeList> pigments;

    std::size_t size() const { return pigments.size(); }
    const ModeList& operator[](std::size_t n) const { return pigments[n]; }
    std::size_t total_modes() const;

    // Throws std::invalid_argument if a list is empty or a mode does not decay.
    void validate() const;
};

// Throws std::invalid_argument unless Re(gamma) > 0 and both numbers are finite.
void validate_mode(const ExponentialMode& mode);

cplx bcf_evaluate(std::span<const ExponentialMode> modes, double t_fs);

// High-temperature two-term correlation function with an underdamped
// frequency nu:
//   g1 =  i lambda Gamma_- / (beta nu), gamma1 = Gamma_+
//   g2 = -i lambda Gamma_+ / (beta nu), gamma2 = Gamma_-
// with Gamma_pm = Gamma +- i nu.
ModeList build_ishizaki_pair(double lambda, double Gamma, double nu, double temperature);

// High-temperature Drude-Lorentz correlation function with a fast
// exponential that cancels Im alpha(0):
//   (2 lambda / beta - i lambda Gamma) e^{-Gamma t} + i lambda Gamma e^{-Gamma_mark t}.
// When Gamma_mark == Gamma the two terms are merged into one real mode.
ModeList build_drude_lorentz_ht(double lambda, double Gamma, double temperature, double gamma_mark);

// --- spectral densities (validation only) -----------------------------------

struct SpectralDensitySpec {
    enum class Kind { drude_lorentz, tabulated };
    Kind kind = Kind::drude_lorentz;
    double lambda = 0.0;  // cm^-1
    double Gamma = 0.0;   // cm^-1
    // Tabulated samples (omega ascending, cm^-1; J in cm^-1).
    std::vector<double> omega;
    std::vector<double> J;

    static SpectralDensitySpec drude_lorentz(double lambda, double Gamma);
    static SpectralDensitySpec tabulated(std::vector<double> omega, std::vector<double> J);

    // J(omega) for omega >= 0. The Drude-Lorentz form is normalized so that
    // its high-temperature correlation function is build_drude_lorentz_ht
    // without the Gamma_mark term: J = (2 lambda / pi) Gamma w / (w^2 + Gamma^2).
    double evaluate(double omega) const;
    void validate() const;
};

struct QuadratureOptions {
    double abs_tolerance = 1.0;  // cm^-2, absolute on |alpha|
    int max_refinements = 14;
};

struct QuadratureResult {
    cplx value;
    double error_estimate = 0.0;
};

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// alpha(t) = int_0^inf J(w) [coth(beta w / 2) cos(w t / hbar) - i sin(w t / hbar)] dw
// by trapezoidal quadrature. Throws QuadratureError when the requested
// tolerance cannot be met (e.g. the Drude-Lorentz real part at t = 0, which
// diverges logarithmically).
QuadratureResult bcf_quadrature_oracle(const SpectralDensitySpec& spectral_density,
                                       double temperature, double t_fs,
                                       const QuadratureOptions& options = {});

}  // namespace adhops::bath
