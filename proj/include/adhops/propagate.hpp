#pragma once

// Fixed-step RK4 propagation of single HOPS trajectories.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adhops/adaptive.hpp"
#include "adhops/hops.hpp"
#include "adhops/noise.hpp"

namespace adhops::hops {

// How the noise enters the four RK4 stages.
enum class NoiseSampling {
    hold,    // z(t_k) for every stage
    linear,  // linear interpolation between z(t_k) and z(t_{k+1})
};

// How the memory accumulators and <L> advance within a step.
enum class MemoryScheme {
    frozen,   // <L> and xi held at the step start; exact exponential update after the step
    coupled,  // accumulators integrated with the wave function; <L> re-evaluated per stage
};

struct PropagationOptions {
    double dt = 1.0;             // fs
    double t_max = 0.0;          // fs, must be a multiple of dt
    int output_stride = 1;       // steps between records
    int k_max = 0;
    Normalization normalization = Normalization::dyadic;
    NoiseSampling noise_sampling = NoiseSampling::linear;
    MemoryScheme memory = MemoryScheme::coupled;
    adaptive::AdaptiveConfig adaptive;
    std::optional<double> e_ref;  // rotating-frame energy; default mean site energy

    std::size_t n_steps() const;
    void validate() const;  // throws std::invalid_argument
};

struct TrajectoryRecord {
    std::vector<double> t;         // fs
    std::vector<cplx> overlap;     // <bra|psi^0(t)> in the lab frame
    std::vector<double> norm2;     // |psi^0(t)|^2
    std::vector<std::uint32_t> n_aux;
    std::vector<std::uint32_t> n_state;
    std::uint64_t seed = 0;
    std::uint64_t trajectory = 0;
    std::string info;              // free-form provenance

    std::size_t size() const { return t.size(); }
};

// Optional full-state output alongside the record (used by tests).
struct StateHistory {
    std::vector<std::vector<cplx>> physical;  // psi^0 over all system states per record point
};

// Propagates `initial` (amplitudes over all system states) with the given
// noise (one series per channel, sampled on the integrator grid). `bra` is
// the state projected on for the overlap series. A shared full layout may be
// passed to avoid rebuilding it per trajectory when adaptivity is off.
TrajectoryRecord propagate_trajectory(const HopsSystem& system, const std::vector<cplx>& initial,
                                      const std::vector<cplx>& bra, const noise::NoiseTrajectory& noise,
                                      const PropagationOptions& options,
                                      std::shared_ptr<const BasisLayout> full_layout = nullptr,
                                      StateHistory* history = nullptr);

// Columnar text: t, Re overlap, Im overlap, norm2, n_aux, n_state.
void write_record(const std::string& path, const TrajectoryRecord& record);
TrajectoryRecord read_record(const std::string& path);

}  // namespace adhops::hops
