#pragma once

// Complex Gaussian noise z_t with
//   E[z_t] = 0,  E[z_t z_s] = 0,  E[z_t z_s^*] = alpha(t - s),
// sampled on a uniform grid by circulant embedding: the correlation function
// is periodized on a window of length 2L, its DFT gives the (real,
// nonnegative) spectral weights, and an inverse DFT of weighted circular
// white noise yields a stationary sequence with exactly these second moments
// on the grid.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adhops/bath.hpp"

namespace adhops::noise {

inline constexpr const char* kCirculantScheme = "circulant-embedding-v1";

struct NoiseTrajectory {
    double dt = 0.0;           // fs
    std::size_t n_steps = 0;   // every series has n_steps + 1 samples
    std::uint64_t seed = 0;    // master seed
    std::uint64_t trajectory = 0;
    std::string scheme = kCirculantScheme;
    std::vector<std::vector<cplx>> z;  // [pigment][time index]

    std::size_t pigments() const { return z.size(); }
    double t(std::size_t k) const { return dt * static_cast<double>(k); }
};

class NoiseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Independent stream seed for (master seed, trajectory, pigment, stream).
std::uint64_t subseed(std::uint64_t master, std::uint64_t trajectory, std::uint64_t pigment,
                      std::uint64_t stream = 0);

// Sqrt of the circulant spectral weights for one correlation function on a
// grid, precomputed so many trajectories can share it. Negative weights
// whose magnitude is below clip_tolerance * max weight are clipped to zero;
// larger ones raise NoiseError.
class CirculantFilter {
public:
    CirculantFilter(const bath::ModeList& modes, double dt, std::size_t n_points,
                    double clip_tolerance = 1e-6);

    std::size_t n_points() const { return n_points_; }
    std::size_t window() const { return sqrt_weights_.size(); }
    double min_weight_ratio() const { return min_weight_ratio_; }
    bool is_zero() const { return zero_; }

    // Draws one realization from a stream seeded with `seed`.
    std::vector<cplx> sample(std::uint64_t seed) const;

private:
    std::size_t n_points_;
    std::vector<double> sqrt_weights_;  // already scaled by 1/sqrt(M)
    double min_weight_ratio_ = 0.0;
    bool zero_ = false;
};

// Shares one filter per distinct mode list; safe to use from many threads
// once constructed.
class NoiseGenerator {
public:
    NoiseGenerator(const bath::BathSpec& bath, double dt, std::size_t n_steps,
                   double clip_tolerance = 1e-6);

    NoiseTrajectory generate(std::uint64_t master_seed, std::uint64_t trajectory) const;
    std::vector<cplx> generate_pigment(std::uint64_t master_seed, std::uint64_t trajectory,
                                       std::size_t pigment) const;

    double dt() const { return dt_; }
    std::size_t n_steps() const { return n_steps_; }

private:
    double dt_;
    std::size_t n_steps_;
    std::vector<std::shared_ptr<const CirculantFilter>> per_pigment_;
};

NoiseTrajectory generate_noise(const bath::BathSpec& bath, double dt, std::size_t n_steps,
                               std::uint64_t master_seed, std::uint64_t trajectory);

struct MomentReport {
    double max_mean = 0.0;          // sup_t |E[z_t]|
    double max_pseudo = 0.0;        // sup_{t,s} |E[z_t z_s]|
    double max_covariance = 0.0;    // sup_{t,s} |E[z_t z_s^*] - alpha(t - s)|
    double alpha0 = 0.0;            // |alpha(0)| for normalization
    std::size_t members = 0;
};

// Empirical moment deviations for one pigment over an ensemble. Throws
// NoiseError on empty ensembles or mismatched grids.
MomentReport validate_noise_statistics(std::span<const NoiseTrajectory> ensemble,
                                       const bath::BathSpec& bath, std::size_t pigment);

// Columnar text dump: t, then Re z, Im z for every pigment.
void write_noise(const std::string& path, const NoiseTrajectory& noise);

}  // namespace adhops::noise
