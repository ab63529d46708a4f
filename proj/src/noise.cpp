#include "adhops/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "fft.hpp"

namespace adhops::noise {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Time after which every mode has decayed below `ratio` of its initial size.
double decay_horizon(const bath::ModeList& modes, double ratio) {
    double horizon = 0.0;
    for (const auto& m : modes) {
        if (std::abs(m.g) == 0.0) continue;
        horizon = std::max(horizon, -std::log(ratio) * units::hbar / m.gamma.real());
    }
    return horizon;
}

}  // namespace

std::uint64_t subseed(std::uint64_t master, std::uint64_t trajectory, std::uint64_t pigment,
                      std::uint64_t stream) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ trajectory);
    h = splitmix64(h ^ (pigment + 0x51ed27ULL));
    h = splitmix64(h ^ (stream + 0xa5a5ULL));
    return h;
}

CirculantFilter::CirculantFilter(const bath::ModeList& modes, double dt, std::size_t n_points,
                                 double clip_tolerance)
    : n_points_(n_points) {
    if (!(dt > 0.0)) throw NoiseError("noise: dt must be > 0");
    if (n_points == 0) throw NoiseError("noise: need at least one grid point");
    for (const auto& m : modes) bath::validate_mode(m);

    zero_ = std::all_of(modes.begin(), modes.end(), [](const auto& m) { return std::abs(m.g) == 0.0; });
    if (zero_) return;

    const double horizon = decay_horizon(modes, 1e-10);
    const auto horizon_points = static_cast<std::size_t>(std::ceil(horizon / dt)) + 1;
    const std::size_t half = detail::good_fft_size(std::max(n_points, horizon_points));
    const std::size_t M = 2 * half;

    std::vector<cplx> c(M, cplx{0.0, 0.0});
    c[0] = cplx{bath::bcf_evaluate(modes, 0.0).real(), 0.0};
    for (std::size_t k = 1; k < half; ++k) {
        const cplx a = bath::bcf_evaluate(modes, dt * static_cast<double>(k));
        c[k] = a;
        c[M - k] = std::conj(a);
    }
    c[half] = cplx{bath::bcf_evaluate(modes, dt * static_cast<double>(half)).real(), 0.0};
    detail::fft_inplace(c, detail::FftDirection::forward);

    double max_w = 0.0, min_w = 0.0;
    for (const auto& v : c) {
        max_w = std::max(max_w, v.real());
        min_w = std::min(min_w, v.real());
    }
    if (!(max_w > 0.0)) throw NoiseError("noise: correlation function has no positive spectral weight");
    min_weight_ratio_ = min_w / max_w;
    if (-min_w > clip_tolerance * max_w) {
        throw NoiseError("noise: circulant embedding not positive (min/max weight " +
                         std::to_string(min_weight_ratio_) + "); correlation function is not a valid covariance");
    }
    sqrt_weights_.resize(M);
    const double inv_m = 1.0 / static_cast<double>(M);
    for (std::size_t k = 0; k < M; ++k) sqrt_weights_[k] = std::sqrt(std::max(c[k].real(), 0.0) * inv_m);
}

std::vector<cplx> CirculantFilter::sample(std::uint64_t seed) const {
    if (zero_) return std::vector<cplx>(n_points_, cplx{0.0, 0.0});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    std::vector<cplx> buf(sqrt_weights_.size());
    for (std::size_t k = 0; k < buf.size(); ++k) {
        const double re = normal(rng);
        const double im = normal(rng);
        buf[k] = sqrt_weights_[k] * cplx{re, im};
    }
    detail::fft_inplace(buf, detail::FftDirection::backward);
    buf.resize(n_points_);
    return buf;
}

NoiseGenerator::NoiseGenerator(const bath::BathSpec& bath, double dt, std::size_t n_steps,
                               double clip_tolerance)
    : dt_(dt), n_steps_(n_steps) {
    bath.validate();
    std::vector<std::pair<bath::ModeList, std::shared_ptr<const CirculantFilter>>> known;
    for (const auto& modes : bath.pigments) {
        auto it = std::find_if(known.begin(), known.end(), [&](const auto& e) { return e.first == modes; });
        if (it == known.end()) {
            known.emplace_back(modes, std::make_shared<const CirculantFilter>(modes, dt, n_steps + 1, clip_tolerance));
            it = known.end() - 1;
        }
        per_pigment_.push_back(it->second);
    }
}

std::vector<cplx> NoiseGenerator::generate_pigment(std::uint64_t master_seed, std::uint64_t trajectory,
                                                   std::size_t pigment) const {
    if (pigment >= per_pigment_.size()) throw NoiseError("noise: pigment index out of range");
    return per_pigment_[pigment]->sample(subseed(master_seed, trajectory, pigment));
}

NoiseTrajectory NoiseGenerator::generate(std::uint64_t master_seed, std::uint64_t trajectory) const {
    NoiseTrajectory out;
    out.dt = dt_;
    out.n_steps = n_steps_;
    out.seed = master_seed;
    out.trajectory = trajectory;
    out.z.reserve(per_pigment_.size());
    for (std::size_t n = 0; n < per_pigment_.size(); ++n) {
        out.z.push_back(generate_pigment(master_seed, trajectory, n));
    }
    return out;
}

NoiseTrajectory generate_noise(const bath::BathSpec& bath, double dt, std::size_t n_steps,
                               std::uint64_t master_seed, std::uint64_t trajectory) {
    return NoiseGenerator(bath, dt, n_steps).generate(master_seed, trajectory);
}

MomentReport validate_noise_statistics(std::span<const NoiseTrajectory> ensemble,
                                       const bath::BathSpec& bath, std::size_t pigment) {
    if (ensemble.empty()) throw NoiseError("noise statistics: empty ensemble");
    if (pigment >= bath.size()) throw NoiseError("noise statistics: pigment index out of range");
    const auto& first = ensemble.front();
    for (const auto& member : ensemble) {
        if (member.dt != first.dt || member.n_steps != first.n_steps || member.pigments() <= pigment ||
            member.z[pigment].size() != first.n_steps + 1) {
            throw NoiseError("noise statistics: ensemble members have mismatched grids");
        }
    }
    const std::size_t n = first.n_steps + 1;
    // Lower triangle t >= s; the upper one follows by (conjugate) symmetry.
    std::vector<cplx> mean(n), pseudo(n * (n + 1) / 2), cov(n * (n + 1) / 2);
    for (const auto& member : ensemble) {
        const auto& z = member.z[pigment];
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            mean[t] += z[t];
            for (std::size_t s = 0; s <= t; ++s, ++idx) {
                pseudo[idx] += z[t] * z[s];
                cov[idx] += z[t] * std::conj(z[s]);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(ensemble.size());
    std::vector<cplx> alpha(n);
    for (std::size_t k = 0; k < n; ++k) alpha[k] = bath::bcf_evaluate(bath[pigment], first.t(k));
    MomentReport r;
    r.members = ensemble.size();
    r.alpha0 = std::abs(alpha[0]);
    std::size_t idx = 0;
    for (std::size_t t = 0; t < n; ++t) {
        r.max_mean = std::max(r.max_mean, std::abs(mean[t] * inv));
        for (std::size_t s = 0; s <= t; ++s, ++idx) {
            r.max_pseudo = std::max(r.max_pseudo, std::abs(pseudo[idx] * inv));
            r.max_covariance = std::max(r.max_covariance, std::abs(cov[idx] * inv - alpha[t - s]));
        }
    }
    return r;
}

void write_noise(const std::string& path, const NoiseTrajectory& noise) {
    std::ofstream out(path);
    if (!out) throw NoiseError("noise: cannot open " + path);
    out << "# scheme " << noise.scheme << " seed " << noise.seed << " trajectory " << noise.trajectory << '\n';
    out << "# t_fs";
    for (std::size_t n = 0; n < noise.pigments(); ++n) out << " re_z" << n << " im_z" << n;
    out << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k <= noise.n_steps; ++k) {
        out << noise.t(k);
        for (const auto& z : noise.z) out << ' ' << z[k].real() << ' ' << z[k].imag();
        out << '\n';
    }
    if (!out) throw NoiseError("noise: write failed for " + path);
}

}  // namespace adhops::noise
