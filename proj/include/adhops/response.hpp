#pragma once

// Dipole autocorrelation functions, windows, spectra and their statistics.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adhops/propagate.hpp"

namespace adhops::response {

struct CorrelationSeries {
    std::vector<double> t;   // fs, uniform
    std::vector<cplx> C;
    std::size_t n_traj = 0;
    double mu_tot = 0.0;
    std::size_t n_clusters = 1;  // N_D
    std::string window = "none";

    std::size_t size() const { return t.size(); }
    double dt() const;
};

struct Spectrum {
    std::vector<double> omega;  // cm^-1, ascending, uniform
    std::vector<double> A;
    int zero_pad = 1;
    std::string window = "none";

    std::size_t size() const { return omega.size(); }
    double d_omega() const;
};

// <bra|psi(t)> / (0.5 (|psi(t)|^2 + 1)) * e^{i E_g t / hbar}
std::vector<cplx> correlation_from_record(const hops::TrajectoryRecord& record, double E_g);

struct McSample {
    std::size_t cluster = 0;
    std::vector<cplx> normalized;  // correlation_from_record output
};

// C(t) = mu_tot (N_D / N_ens) sum_i A_{d_i} normalized_i(t), with N_ens the
// number of samples. Throws on empty input or mismatched grids.
CorrelationSeries assemble_mc_estimator(std::span<const McSample> samples, std::span<const double> weights,
                                        double mu_tot, std::size_t n_clusters, std::span<const double> t);

// Per-sample terms x_i(t) whose plain mean is the estimator above; used by
// bootstrap resampling.
std::vector<std::vector<cplx>> mc_terms(std::span<const McSample> samples, std::span<const double> weights,
                                        double mu_tot, std::size_t n_clusters);

CorrelationSeries isotropic_average(std::span<const CorrelationSeries> per_axis);

// C(t) cos(pi t / (2 t_max)) for t <= t_max, zero beyond.
CorrelationSeries apodize(const CorrelationSeries& C, double t_max);

// A(w) = Re dt sum_k w_k C(t_k) e^{+i w t_k / hbar}, trapezoid weights (w_0 = 1/2),
// zero padded to zero_pad_factor times the series length. With this sign an
// excitation C = e^{-i w0 t / hbar} peaks at +w0.
Spectrum spectrum(const CorrelationSeries& C, int zero_pad_factor = 4);
Spectrum spectrum(std::span<const double> t, std::span<const cplx> C, int zero_pad_factor = 4);

// int |A - A_ref| / int A_ref over [w_min, w_max] (trapezoid). Throws
// std::domain_error when the reference integral is not positive.
double spectral_error(const Spectrum& A, const Spectrum& ref, double w_min, double w_max);

struct BootstrapResult {
    double mean_error = 0.0;
    double lower = 0.0;   // 2.5th percentile
    double upper = 0.0;   // 97.5th percentile
    std::vector<double> errors;
};

struct SpectralWindow {
    double w_min = -1e300;
    double w_max = 1e300;
    int zero_pad = 4;
    double apodize_t = 0.0;  // 0 disables
};

// Resamples trajectory terms with replacement, rebuilds the spectrum from
// each resample and reports its spectral_error against the full-ensemble
// spectrum. Throws std::invalid_argument for fewer than two terms.
BootstrapResult bootstrap_error(std::span<const std::vector<cplx>> terms, std::span<const double> t,
                                int resamples, std::uint64_t seed, const SpectralWindow& window);

// Mean of terms as a correlation series on grid t.
CorrelationSeries mean_series(std::span<const std::vector<cplx>> terms, std::span<const double> t);

// Peak helpers for vibronic progressions.
struct Peak {
    double omega = 0.0;
    double height = 0.0;
};
// Global maximum refined by a parabola through the three nearest samples.
Peak main_peak(const Spectrum& A);
// Largest value in [w_lo, w_hi].
Peak max_in_range(const Spectrum& A, double w_lo, double w_hi);

// Columnar outputs with '#' metadata headers.
void write_spectrum(const std::string& path, const Spectrum& A, const std::vector<std::string>& header = {});
void write_correlation(const std::string& path, const CorrelationSeries& C,
                       const std::vector<std::string>& header = {});
CorrelationSeries read_correlation(const std::string& path);

}  // namespace adhops::response
