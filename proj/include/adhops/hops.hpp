#pragma once

// Normalized nonlinear HOPS on a (state x auxiliary) basis:
//
//   hbar d/dt psi^k = (-i H - k.gamma + sum_n L_n (z*_n + xi_n)) psi^k
//                     + sum_j k_j gamma_j L_{n_j} psi^{k - e_j}
//                     - sum_j (g_j / gamma_j) (L_{n_j} - <L_{n_j}>) psi^{k + e_j}
//
// with L_n = |n><n| and
//   <L_n> = |psi^0_n|^2 / (|psi^0|^2 + c),   c = 0 (standard) or 1 (dyadic),
//   xi_n  = sum_{j in n} u_j,   hbar du_j/dt = -gamma_j^* u_j + g_j^* <L_n>.
//
// The basis is described by a BasisLayout, which is either the full
// triangular hierarchy or an adaptive subset. Amplitudes are stored
// auxiliary-major: psi[a * n_states + s].

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "adhops/exciton.hpp"
#include "adhops/hierarchy.hpp"
#include "adhops/simd/kernels.hpp"

namespace adhops::hops {

enum class Normalization { standard, dyadic };

struct SystemMode {
    std::size_t channel = 0;  // noise / memory channel (pigment)
    cplx g;
    cplx gamma;
};

// Everything the equation of motion needs about the system, independent of
// where it came from. Each channel n couples through L_n = |state_of_channel[n]><..|.
struct HopsSystem {
    std::vector<double> energies;                           // cm^-1 per state
    std::vector<std::vector<std::pair<std::size_t, double>>> couplings;  // per state: (m, V_sm)
    std::vector<std::size_t> state_of_channel;
    std::vector<SystemMode> modes;                          // canonical mode order

    std::size_t n_states() const { return energies.size(); }
    std::size_t n_channels() const { return state_of_channel.size(); }
    std::size_t n_modes() const { return modes.size(); }
    // modes acting on each state, in canonical order
    std::vector<std::vector<std::uint32_t>> modes_of_state() const;
    int channel_of_state(std::size_t s) const;

    void validate() const;

    // Excited manifold of an aggregate: state n = pigment n.
    static HopsSystem from_model(const exciton::AggregateModel& model);
    // Ground state at index 0 (energy E_g, no bath) followed by the excited
    // manifold at indices 1..N.
    static HopsSystem with_ground_state(const exciton::AggregateModel& model);
    // Same structure with new site energies (disorder); couplings and modes unchanged.
    void set_site_energies(std::span<const double> energies);
};

class TrajectoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Static structure of a basis: which states and auxiliaries are present and
// how they connect. Independent of the site energies and of time.
struct BasisLayout {
    std::vector<std::size_t> states;          // ascending
    std::vector<std::int32_t> state_pos;      // system state -> position or -1
    std::vector<std::int32_t> channel_at;     // position -> channel or -1
    std::vector<hierarchy::HierarchyIndex> aux;  // aux[0] is the zero index
    // Registry id per auxiliary and id -> position (-1). Layouts built from
    // indices own their registry; layouts built from ids must not outlive it.
    const hierarchy::IndexRegistry* registry = nullptr;
    std::shared_ptr<const hierarchy::IndexRegistry> owned_registry;
    std::vector<std::uint32_t> aux_id;
    std::vector<std::int32_t> id_pos;
    std::vector<cplx> kgamma;                 // (k . gamma) / hbar per auxiliary

    // Lower edge coef: k_j gamma_j / hbar. Raise edge coef: g_j / gamma_j / hbar,
    // pos -1 when the mode's state is outside the basis.
    using LowerEdge = simd::LowerEdge;
    using RaiseEdge = simd::RaiseEdge;
    std::vector<std::uint32_t> lower_offset;  // per aux, size n_aux + 1
    std::vector<LowerEdge> lower;
    std::vector<std::uint32_t> raise_offset;
    std::vector<RaiseEdge> raise;

    // -i V / hbar restricted to the basis states (CSR)
    std::vector<std::int32_t> h_rowptr;
    std::vector<std::int32_t> h_col;
    std::vector<cplx> h_val;

    std::size_t n_states() const { return states.size(); }
    std::size_t n_aux() const { return aux.size(); }
    std::size_t size() const { return states.size() * aux.size(); }
    std::int64_t find_aux(const hierarchy::HierarchyIndex& k) const;

    static BasisLayout build(const HopsSystem& system, std::vector<std::size_t> states,
                             std::vector<hierarchy::HierarchyIndex> aux);
    // Same layout from registry ids; aux_ids[0] must be 0.
    static BasisLayout build(const HopsSystem& system, std::vector<std::size_t> states,
                             const hierarchy::IndexRegistry& registry, std::vector<std::uint32_t> aux_ids);
    // Every state and the full triangular hierarchy up to k_max.
    static BasisLayout full(const HopsSystem& system, int k_max, std::size_t max_size = 5'000'000);
};

// Time-local inputs to one derivative evaluation.
struct DriveTerms {
    std::vector<cplx> zxi;      // per channel: z*_n(t) + xi_n(t), cm^-1
    std::vector<double> expect; // per channel: <L_n>
};

// <L_n> from the physical wave function (row 0 of psi).
std::vector<double> expectations(const HopsSystem& system, const BasisLayout& layout,
                                 std::span<const cplx> psi, Normalization norm);

double physical_norm2(const BasisLayout& layout, std::span<const cplx> psi);

// xi_n = sum over the channel's modes of u_j.
std::vector<cplx> memory_drift(const HopsSystem& system, std::span<const cplx> u);

// out = d psi / dt in fs^-1, in a frame rotating at e_ref (cm^-1).
void hops_derivative(const HopsSystem& system, const BasisLayout& layout, const DriveTerms& drive,
                     double e_ref, std::span<const cplx> psi, std::span<cplx> out,
                     const simd::KernelTable& kernels = simd::active());

// du_j / dt for the memory accumulators (fs^-1 * cm^-1).
void memory_derivative(const HopsSystem& system, std::span<const double> expect, std::span<const cplx> u,
                       std::span<cplx> out);

// One exact exponential step with <L> held at `expect` over dt:
//   u <- e^{-x} u + (g^* <L> / gamma^*) (1 - e^{-x}),   x = gamma^* dt / hbar.
void update_memory(const HopsSystem& system, std::span<const double> expect, double dt, std::span<cplx> u);

// Amplitudes of `psi` (on `from`) copied onto `to`; new elements start at zero.
std::vector<cplx> apply_basis_change(const BasisLayout& from, std::span<const cplx> psi, const BasisLayout& to);

}  // namespace adhops::hops
