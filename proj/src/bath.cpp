#include "adhops/bath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adhops::bath {

std::size_t BathSpec::total_modes() const {
    std::size_t m = 0;
    for (const auto& p : pigments) m += p.size();
    return m;
}

void BathSpec::validate() const {
    for (std::size_t n = 0; n < pigments.size(); ++n) {
        if (pigments[n].empty()) {
            throw std::invalid_argument("bath: pigment " + std::to_string(n) + " has no modes");
        }
        for (const auto& m : pigments[n]) validate_mode(m);
    }
}

void validate_mode(const ExponentialMode& mode) {
    const bool finite = std::isfinite(mode.g.real()) && std::isfinite(mode.g.imag()) &&
                        std::isfinite(mode.gamma.real()) && std::isfinite(mode.gamma.imag());
    if (!finite) throw std::invalid_argument("bath: non-finite mode parameter");
    if (!(mode.gamma.real() > 0.0)) {
        throw std::invalid_argument("bath: mode decay rate must have Re(gamma) > 0");
    }
}

cplx bcf_evaluate(std::span<const ExponentialMode> modes, double t_fs) {
    cplx sum{0.0, 0.0};
    for (const auto& m : modes) sum += m.g * std::exp(-m.gamma * t_fs / units::hbar);
    return sum;
}

ModeList build_ishizaki_pair(double lambda, double Gamma, double nu, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("ishizaki pair: temperature must be > 0");
    if (nu == 0.0) throw std::invalid_argument("ishizaki pair: nu must be nonzero");
    const double beta = units::beta(temperature);
    const cplx i{0.0, 1.0};
    const cplx gamma_plus{Gamma, nu};
    const cplx gamma_minus{Gamma, -nu};
    ModeList modes{
        {i * lambda * gamma_minus / (beta * nu), gamma_plus},
        {-i * lambda * gamma_plus / (beta * nu), gamma_minus},
    };
    for (const auto& m : modes) validate_mode(m);
    return modes;
}

ModeList build_drude_lorentz_ht(double lambda, double Gamma, double temperature, double gamma_mark) {
    if (!(temperature > 0.0)) throw std::invalid_argument("drude-lorentz: temperature must be > 0");
    if (!(gamma_mark > 0.0)) throw std::invalid_argument("drude-lorentz: Gamma_mark must be > 0");
    const double beta = units::beta(temperature);
    const cplx lg{0.0, lambda * Gamma};
    ModeList modes;
    if (gamma_mark == Gamma) {
        modes.push_back({cplx{2.0 * lambda / beta, 0.0}, cplx{Gamma, 0.0}});
    } else {
        modes.push_back({cplx{2.0 * lambda / beta, 0.0} - lg, cplx{Gamma, 0.0}});
        modes.push_back({lg, cplx{gamma_mark, 0.0}});
    }
    for (const auto& m : modes) validate_mode(m);
    return modes;
}

// --- spectral densities ------------------------------------------------------

SpectralDensitySpec SpectralDensitySpec::drude_lorentz(double lambda, double Gamma) {
    SpectralDensitySpec s;
    s.kind = Kind::drude_lorentz;
    s.lambda = lambda;
    s.Gamma = Gamma;
    s.validate();
    return s;
}

SpectralDensitySpec SpectralDensitySpec::tabulated(std::vector<double> omega, std::vector<double> J) {
    SpectralDensitySpec s;
    s.kind = Kind::tabulated;
    s.omega = std::move(omega);
    s.J = std::move(J);
    s.validate();
    return s;
}

void SpectralDensitySpec::validate() const {
    if (kind == Kind::drude_lorentz) {
        if (lambda < 0.0 || !(Gamma > 0.0)) {
            throw std::invalid_argument("spectral density: need lambda >= 0 and Gamma > 0");
        }
        return;
    }
    if (omega.size() != J.size() || omega.size() < 3) {
        throw std::invalid_argument("spectral density: tabulated grid needs >= 3 matching samples");
    }
    for (std::size_t k = 0; k < omega.size(); ++k) {
        if (omega[k] < 0.0 || J[k] < 0.0) {
            throw std::invalid_argument("spectral density: tabulated omega and J must be >= 0");
        }
        if (k > 0 && !(omega[k] > omega[k - 1])) {
            throw std::invalid_argument("spectral density: tabulated omega must be ascending");
        }
    }
}

double SpectralDensitySpec::evaluate(double w) const {
    if (kind == Kind::drude_lorentz) {
        return 2.0 * lambda / std::numbers::pi * Gamma * w / (w * w + Gamma * Gamma);
    }
    if (w <= omega.front()) return J.front();
    if (w >= omega.back()) return J.back();
    const auto it = std::upper_bound(omega.begin(), omega.end(), w);
    const std::size_t k = static_cast<std::size_t>(it - omega.begin());
    const double f = (w - omega[k - 1]) / (omega[k] - omega[k - 1]);
    return (1.0 - f) * J[k - 1] + f * J[k];
}

namespace {

// J(w) coth(beta w / 2), continued to w = 0 with the limit 2 J'(0) / beta.
double thermal_weight(double J, double w, double beta, double slope_at_zero) {
    if (w == 0.0) return 2.0 * slope_at_zero / beta;
    return J / std::tanh(0.5 * beta * w);
}

struct Sums {
    cplx fine;
    cplx coarse;
};

template <class SampleFn>
Sums trapezoid_pair(std::size_t n_intervals, SampleFn&& sample) {
    // fine: all points; coarse: even points with doubled spacing.
    cplx fine{0.0, 0.0}, coarse{0.0, 0.0};
    for (std::size_t k = 0; k <= n_intervals; ++k) {
        const cplx f = sample(k);
        const double wf = (k == 0 || k == n_intervals) ? 0.5 : 1.0;
        fine += wf * f;
        if (k % 2 == 0) {
            const double wc = (k == 0 || k == n_intervals) ? 0.5 : 1.0;
            coarse += wc * f;
        }
    }
    return {fine, coarse};
}

}  // namespace

QuadratureResult bcf_quadrature_oracle(const SpectralDensitySpec& sd, double temperature, double t,
                                       const QuadratureOptions& options) {
    sd.validate();
    if (!(temperature > 0.0)) throw QuadratureError("quadrature: temperature must be > 0");
    if (t < 0.0) throw QuadratureError("quadrature: t must be >= 0");
    const double beta = units::beta(temperature);
    const double tau = t / units::hbar;  // rad per cm^-1

    if (sd.kind == SpectralDensitySpec::Kind::tabulated) {
        const auto& w = sd.omega;
        const std::size_t n = w.size();
        const double slope = w[1] > 0.0 ? sd.J[1] / w[1] : 0.0;
        auto integrand = [&](std::size_t k) {
            const double tw = thermal_weight(sd.J[k], w[k], beta, slope);
            return cplx{tw * std::cos(w[k] * tau), -sd.J[k] * std::sin(w[k] * tau)};
        };
        cplx fine{0.0, 0.0}, coarse{0.0, 0.0};
        for (std::size_t k = 0; k + 1 < n; ++k) {
            fine += 0.5 * (w[k + 1] - w[k]) * (integrand(k) + integrand(k + 1));
        }
        for (std::size_t k = 0; k + 2 < n; k += 2) {
            coarse += 0.5 * (w[k + 2] - w[k]) * (integrand(k) + integrand(k + 2));
        }
        if (n % 2 == 0) coarse += 0.5 * (w[n - 1] - w[n - 2]) * (integrand(n - 2) + integrand(n - 1));
        const double err = std::abs(fine - coarse) / 3.0;
        if (err > options.abs_tolerance) {
            throw QuadratureError("quadrature: tabulated grid too coarse for requested tolerance");
        }
        return {fine, err};
    }

    // Closed-form Drude-Lorentz. The integrand amplitude decays like 1/w, so
    // the tail beyond Omega is bounded by 2 J(Omega) coth(beta Omega/2) / tau
    // for t > 0 and diverges at t = 0.
    if (tau == 0.0) {
        throw QuadratureError("quadrature: Drude-Lorentz real part diverges at t = 0");
    }
    const double target_tail = 0.25 * options.abs_tolerance;
    double omega_max = 50.0 * sd.Gamma;
    for (int it = 0; it < 60; ++it) {
        const double amp = thermal_weight(sd.evaluate(omega_max), omega_max, beta, 0.0);
        if (2.0 * amp / tau <= target_tail) break;
        omega_max *= 2.0;
    }
    const double tail = 2.0 * thermal_weight(sd.evaluate(omega_max), omega_max, beta, 0.0) / tau;
    if (tail > target_tail) throw QuadratureError("quadrature: tail bound did not converge");

    const double slope = 2.0 * sd.lambda / (std::numbers::pi * sd.Gamma);
    const double period = 2.0 * std::numbers::pi / tau;
    double h = std::min({sd.Gamma / 16.0, period / 32.0, 1.0 / (beta * 4.0)});
    QuadratureResult best{};
    for (int refine = 0; refine < options.max_refinements; ++refine) {
        const std::size_t n = 2 * static_cast<std::size_t>(std::ceil(omega_max / h / 2.0));
        const double step = omega_max / static_cast<double>(n);
        auto sample = [&](std::size_t k) {
            const double w = step * static_cast<double>(k);
            const double J = sd.evaluate(w);
            const double tw = thermal_weight(J, w, beta, slope);
            return cplx{tw * std::cos(w * tau), -J * std::sin(w * tau)};
        };
        const Sums s = trapezoid_pair(n, sample);
        const cplx fine = step * s.fine;
        const cplx coarse = 2.0 * step * s.coarse;
        best = {fine, std::abs(fine - coarse) / 3.0 + tail};
        if (best.error_estimate <= options.abs_tolerance) return best;
        h *= 0.5;
    }
    throw QuadratureError("quadrature: refinement limit reached before tolerance was met");
}

}  // namespace adhops::bath
