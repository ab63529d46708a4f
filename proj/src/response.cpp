#include "adhops/response.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fft.hpp"

namespace adhops::response {

double CorrelationSeries::dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
double Spectrum::d_omega() const { return omega.size() > 1 ? omega[1] - omega[0] : 0.0; }

namespace {

void check_uniform(std::span<const double> t) {
    if (t.size() < 2) throw std::invalid_argument("response: need at least two time points");
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw std::invalid_argument("response: time grid must be increasing");
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * dt) throw std::invalid_argument("response: time grid must be uniform");
    }
}

}  // namespace

std::vector<cplx> correlation_from_record(const hops::TrajectoryRecord& r, double E_g) {
    std::vector<cplx> out(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double denom = 0.5 * (r.norm2[k] + 1.0);
        out[k] = r.overlap[k] / denom * std::exp(cplx{0.0, E_g * r.t[k] / units::hbar});
    }
    return out;
}

std::vector<std::vector<cplx>> mc_terms(std::span<const McSample> samples, std::span<const double> weights,
                                        double mu_tot, std::size_t n_clusters) {
    if (samples.empty()) throw std::invalid_argument("mc estimator: no samples");
    const std::size_t n = samples.front().normalized.size();
    std::vector<std::vector<cplx>> terms;
    terms.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.normalized.size() != n) throw std::invalid_argument("mc estimator: samples have mismatched grids");
        if (s.cluster >= weights.size()) throw std::invalid_argument("mc estimator: cluster index out of range");
        const double scale = mu_tot * static_cast<double>(n_clusters) * weights[s.cluster];
        std::vector<cplx> x(n);
        for (std::size_t k = 0; k < n; ++k) x[k] = scale * s.normalized[k];
        terms.push_back(std::move(x));
    }
    return terms;
}

CorrelationSeries mean_series(std::span<const std::vector<cplx>> terms, std::span<const double> t) {
    if (terms.empty()) throw std::invalid_argument("mean_series: no terms");
    CorrelationSeries c;
    c.t.assign(t.begin(), t.end());
    c.C.assign(t.size(), cplx{0.0, 0.0});
    for (const auto& x : terms) {
        if (x.size() != t.size()) throw std::invalid_argument("mean_series: grid mismatch");
        for (std::size_t k = 0; k < x.size(); ++k) c.C[k] += x[k];
    }
    const double inv = 1.0 / static_cast<double>(terms.size());
    for (auto& v : c.C) v *= inv;
    c.n_traj = terms.size();
    return c;
}

CorrelationSeries assemble_mc_estimator(std::span<const McSample> samples, std::span<const double> weights,
                                        double mu_tot, std::size_t n_clusters, std::span<const double> t) {
    const auto terms = mc_terms(samples, weights, mu_tot, n_clusters);
    CorrelationSeries c = mean_series(terms, t);
    c.mu_tot = mu_tot;
    c.n_clusters = n_clusters;
    return c;
}

CorrelationSeries isotropic_average(std::span<const CorrelationSeries> per_axis) {
    if (per_axis.size() != 3) throw std::invalid_argument("isotropic average: need x, y and z series");
    CorrelationSeries out = per_axis[0];
    for (std::size_t a = 1; a < 3; ++a) {
        if (per_axis[a].size() != out.size()) throw std::invalid_argument("isotropic average: grid mismatch");
        for (std::size_t k = 0; k < out.size(); ++k) {
            if (per_axis[a].t[k] != out.t[k]) throw std::invalid_argument("isotropic average: grid mismatch");
            out.C[k] += per_axis[a].C[k];
        }
        out.n_traj += per_axis[a].n_traj;
    }
    for (auto& v : out.C) v /= 3.0;
    return out;
}

CorrelationSeries apodize(const CorrelationSeries& C, double t_max) {
    if (!(t_max > 0.0)) throw std::invalid_argument("apodize: t_max must be > 0");
    if (C.t.empty() || t_max > C.t.back() * (1.0 + 1e-12)) throw std::invalid_argument("apodize: t_max beyond the grid");
    CorrelationSeries out = C;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double t = out.t[k];
        out.C[k] *= t <= t_max ? std::cos(std::numbers::pi * t / (2.0 * t_max)) : 0.0;
    }
    out.window = "cosine(t_max=" + std::to_string(t_max) + ")";
    return out;
}

Spectrum spectrum(std::span<const double> t, std::span<const cplx> C, int zero_pad_factor) {
    check_uniform(t);
    if (C.size() != t.size()) throw std::invalid_argument("spectrum: series and grid differ in length");
    if (zero_pad_factor < 1) throw std::invalid_argument("spectrum: zero_pad_factor must be >= 1");
    const double dt = t[1] - t[0];
    const std::size_t n = t.size();
    const std::size_t P = n * static_cast<std::size_t>(zero_pad_factor);
    std::vector<cplx> buf(P, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) buf[k] = C[k] * (k == 0 ? 0.5 : 1.0);
    detail::fft_inplace(buf, detail::FftDirection::backward);
    Spectrum s;
    s.zero_pad = zero_pad_factor;
    s.omega.resize(P);
    s.A.resize(P);
    const double dw = 2.0 * std::numbers::pi * units::hbar / (static_cast<double>(P) * dt);
    const std::size_t half = P / 2;
    for (std::size_t i = 0; i < P; ++i) {
        // ascending: m = i - half .. P - 1 - half
        const auto m = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(half);
        const std::size_t idx = static_cast<std::size_t>((m + static_cast<std::int64_t>(P)) % static_cast<std::int64_t>(P));
        const double w = dw * static_cast<double>(m);
        cplx v = buf[idx];
        // grids that do not start at t = 0
        if (t[0] != 0.0) v *= std::exp(cplx{0.0, w * t[0] / units::hbar});
        s.omega[i] = w;
        s.A[i] = dt * v.real();
    }
    return s;
}

Spectrum spectrum(const CorrelationSeries& C, int zero_pad_factor) {
    Spectrum s = spectrum(C.t, C.C, zero_pad_factor);
    s.window = C.window;
    return s;
}

double spectral_error(const Spectrum& A, const Spectrum& ref, double w_min, double w_max) {
    if (A.size() != ref.size()) throw std::invalid_argument("spectral_error: grids differ");
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (std::abs(A.omega[i] - ref.omega[i]) > 1e-9 * (1.0 + std::abs(ref.omega[i]))) {
            throw std::invalid_argument("spectral_error: grids differ");
        }
    }
    double num = 0.0, den = 0.0;
    bool have_prev = false;
    double pw = 0.0, pd = 0.0, pr = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        const double w = A.omega[i];
        if (w < w_min || w > w_max) continue;
        const double d = std::abs(A.A[i] - ref.A[i]);
        const double r = ref.A[i];
        if (have_prev) {
            num += 0.5 * (w - pw) * (d + pd);
            den += 0.5 * (w - pw) * (r + pr);
        }
        pw = w;
        pd = d;
        pr = r;
        have_prev = true;
    }
    if (!(den > 0.0)) throw std::domain_error("spectral_error: reference spectrum integrates to <= 0");
    return num / den;
}

BootstrapResult bootstrap_error(std::span<const std::vector<cplx>> terms, std::span<const double> t, int resamples,
                                std::uint64_t seed, const SpectralWindow& window) {
    if (terms.size() < 2) throw std::invalid_argument("bootstrap: need at least two trajectories");
    if (resamples < 1) throw std::invalid_argument("bootstrap: need at least one resample");
    auto to_spectrum = [&](CorrelationSeries c) {
        if (window.apodize_t > 0.0) c = apodize(c, window.apodize_t);
        return spectrum(c, window.zero_pad);
    };
    const Spectrum ref = to_spectrum(mean_series(terms, t));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, terms.size() - 1);
    BootstrapResult out;
    out.errors.reserve(static_cast<std::size_t>(resamples));
    const std::size_t n = t.size();
    for (int r = 0; r < resamples; ++r) {
        CorrelationSeries c;
        c.t.assign(t.begin(), t.end());
        c.C.assign(n, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& x = terms[pick(rng)];
            for (std::size_t k = 0; k < n; ++k) c.C[k] += x[k];
        }
        for (auto& v : c.C) v /= static_cast<double>(terms.size());
        out.errors.push_back(spectral_error(to_spectrum(std::move(c)), ref, window.w_min, window.w_max));
    }
    std::vector<double> sorted = out.errors;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double e : sorted) sum += e;
    out.mean_error = sum / static_cast<double>(sorted.size());
    auto pct = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    out.lower = pct(0.025);
    out.upper = pct(0.975);
    return out;
}

Peak main_peak(const Spectrum& A) {
    if (A.size() < 3) throw std::invalid_argument("main_peak: spectrum too short");
    const auto it = std::max_element(A.A.begin(), A.A.end());
    const auto i = static_cast<std::size_t>(it - A.A.begin());
    if (i == 0 || i + 1 == A.size()) return {A.omega[i], A.A[i]};
    const double ym = A.A[i - 1], y0 = A.A[i], yp = A.A[i + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (denom == 0.0) return {A.omega[i], y0};
    const double shift = 0.5 * (ym - yp) / denom;
    return {A.omega[i] + shift * A.d_omega(), y0 - 0.25 * (ym - yp) * shift};
}

Peak max_in_range(const Spectrum& A, double w_lo, double w_hi) {
    Peak best{0.0, -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (A.omega[i] < w_lo || A.omega[i] > w_hi) continue;
        if (A.A[i] > best.height) best = {A.omega[i], A.A[i]};
    }
    if (!std::isfinite(best.height)) throw std::invalid_argument("max_in_range: empty frequency range");
    return best;
}

void write_spectrum(const std::string& path, const Spectrum& A, const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("spectrum: cannot open " + path);
    for (const auto& h : header) out << "# " << h << '\n';
    out << "# window " << A.window << " zero_pad " << A.zero_pad << '\n';
    double peak = 0.0;
    for (double a : A.A) peak = std::max(peak, a);
    out << "# omega_cm-1 A A_over_peak\n" << std::setprecision(17);
    for (std::size_t i = 0; i < A.size(); ++i) {
        out << A.omega[i] << ' ' << A.A[i] << ' ' << (peak > 0.0 ? A.A[i] / peak : 0.0) << '\n';
    }
    if (!out) throw std::runtime_error("spectrum: write failed for " + path);
}

void write_correlation(const std::string& path, const CorrelationSeries& C, const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("correlation: cannot open " + path);
    for (const auto& h : header) out << "# " << h << '\n';
    out << "# n_traj " << C.n_traj << " mu_tot " << std::setprecision(17) << C.mu_tot << " n_clusters "
        << C.n_clusters << " window " << C.window << '\n';
    out << "# t_fs re_C im_C\n";
    for (std::size_t k = 0; k < C.size(); ++k) out << C.t[k] << ' ' << C.C[k].real() << ' ' << C.C[k].imag() << '\n';
    if (!out) throw std::runtime_error("correlation: write failed for " + path);
}

CorrelationSeries read_correlation(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("correlation: cannot open " + path);
    CorrelationSeries c;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            while (hs >> key) {
                if (key == "n_traj") hs >> c.n_traj;
                else if (key == "mu_tot") hs >> c.mu_tot;
                else if (key == "n_clusters") hs >> c.n_clusters;
                else if (key == "window") hs >> c.window;
            }
            continue;
        }
        std::istringstream ls(line);
        double t, re, im;
        if (!(ls >> t >> re >> im)) throw std::runtime_error("correlation: malformed line in " + path);
        c.t.push_back(t);
        c.C.emplace_back(re, im);
    }
    check_uniform(c.t);
    return c;
}

}  // namespace adhops::response
