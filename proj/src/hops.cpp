#include "adhops/hops.hpp"

#include <algorithm>
#include <cmath>

namespace adhops::hops {

using hierarchy::HierarchyIndex;

std::vector<std::vector<std::uint32_t>> HopsSystem::modes_of_state() const {
    std::vector<std::vector<std::uint32_t>> out(n_states());
    for (std::size_t j = 0; j < modes.size(); ++j) {
        out[state_of_channel[modes[j].channel]].push_back(static_cast<std::uint32_t>(j));
    }
    return out;
}

int HopsSystem::channel_of_state(std::size_t s) const {
    for (std::size_t n = 0; n < state_of_channel.size(); ++n) {
        if (state_of_channel[n] == s) return static_cast<int>(n);
    }
    return -1;
}

void HopsSystem::validate() const {
    const std::size_t n = n_states();
    if (n == 0) throw std::invalid_argument("hops system: no states");
    if (couplings.size() != n) throw std::invalid_argument("hops system: coupling list size mismatch");
    for (std::size_t s = 0; s < n; ++s) {
        if (!std::isfinite(energies[s])) throw std::invalid_argument("hops system: non-finite energy");
        for (const auto& [m, v] : couplings[s]) {
            if (m >= n || m == s || !std::isfinite(v)) throw std::invalid_argument("hops system: bad coupling entry");
        }
    }
    std::vector<int> used(n, 0);
    for (std::size_t s : state_of_channel) {
        if (s >= n || used[s]++) throw std::invalid_argument("hops system: channels must map to distinct states");
    }
    for (const auto& m : modes) {
        if (m.channel >= n_channels()) throw std::invalid_argument("hops system: mode channel out of range");
        bath::validate_mode({m.g, m.gamma});
    }
}

namespace {

HopsSystem build_system(const exciton::AggregateModel& model, std::size_t offset) {
    model.validate();
    const std::size_t n = model.size();
    HopsSystem sys;
    sys.energies.assign(n + offset, 0.0);
    sys.couplings.assign(n + offset, {});
    if (offset) sys.energies[0] = model.E_g;
    for (std::size_t i = 0; i < n; ++i) {
        sys.energies[i + offset] = model.E[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double v = model.V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (i != j && v != 0.0) sys.couplings[i + offset].emplace_back(j + offset, v);
        }
        sys.state_of_channel.push_back(i + offset);
        for (const auto& m : model.bath[i]) sys.modes.push_back({i, m.g, m.gamma});
    }
    sys.validate();
    return sys;
}

}  // namespace

HopsSystem HopsSystem::from_model(const exciton::AggregateModel& model) { return build_system(model, 0); }

HopsSystem HopsSystem::with_ground_state(const exciton::AggregateModel& model) { return build_system(model, 1); }

void HopsSystem::set_site_energies(std::span<const double> e) {
    if (e.size() != n_channels()) throw std::invalid_argument("hops system: site energy count mismatch");
    for (std::size_t n = 0; n < e.size(); ++n) energies[state_of_channel[n]] = e[n];
}

// --- layout ------------------------------------------------------------------

std::int64_t BasisLayout::find_aux(const HierarchyIndex& k) const {
    const std::int64_t id = registry->find(k);
    if (id < 0 || static_cast<std::size_t>(id) >= id_pos.size()) return -1;
    return id_pos[static_cast<std::size_t>(id)];
}

BasisLayout BasisLayout::build(const HopsSystem& system, std::vector<std::size_t> states,
                               std::vector<HierarchyIndex> aux) {
    if (aux.empty() || aux.front().depth() != 0) throw std::invalid_argument("layout: aux[0] must be the zero index");
    auto reg = std::make_shared<hierarchy::IndexRegistry>();
    std::vector<std::uint32_t> ids;
    ids.reserve(aux.size());
    for (const auto& k : aux) ids.push_back(reg->intern(k));
    BasisLayout L = build(system, std::move(states), *reg, std::move(ids));
    L.owned_registry = std::move(reg);
    return L;
}

BasisLayout BasisLayout::build(const HopsSystem& system, std::vector<std::size_t> states,
                               const hierarchy::IndexRegistry& registry, std::vector<std::uint32_t> aux_ids) {
    BasisLayout L;
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    if (states.empty()) throw std::invalid_argument("layout: empty state basis");
    if (aux_ids.empty() || aux_ids.front() != 0) throw std::invalid_argument("layout: aux[0] must be the zero index");
    L.states = std::move(states);
    L.registry = &registry;
    L.aux_id = std::move(aux_ids);
    L.state_pos.assign(system.n_states(), -1);
    for (std::size_t p = 0; p < L.states.size(); ++p) {
        if (L.states[p] >= system.n_states()) throw std::invalid_argument("layout: state out of range");
        L.state_pos[L.states[p]] = static_cast<std::int32_t>(p);
    }
    L.channel_at.assign(L.states.size(), -1);
    for (std::size_t n = 0; n < system.n_channels(); ++n) {
        const std::int32_t p = L.state_pos[system.state_of_channel[n]];
        if (p >= 0) L.channel_at[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(n);
    }
    std::uint32_t max_id = 0;
    for (std::uint32_t id : L.aux_id) max_id = std::max(max_id, id);
    L.id_pos.assign(static_cast<std::size_t>(max_id) + 1, -1);
    L.aux.reserve(L.aux_id.size());
    for (std::size_t a = 0; a < L.aux_id.size(); ++a) {
        if (L.aux_id[a] >= registry.size()) throw std::invalid_argument("layout: unknown auxiliary id");
        if (L.id_pos[L.aux_id[a]] >= 0) {
            throw std::invalid_argument("layout: duplicate auxiliary " + registry.index(L.aux_id[a]).to_string());
        }
        L.id_pos[L.aux_id[a]] = static_cast<std::int32_t>(a);
        L.aux.push_back(registry.index(L.aux_id[a]));
    }

    const std::size_t M = system.n_modes();
    std::vector<std::int32_t> mode_pos(M);
    for (std::size_t j = 0; j < M; ++j) {
        mode_pos[j] = L.state_pos[system.state_of_channel[system.modes[j].channel]];
    }

    // Lower edges come from the registry's neighbour lists; raise edges are
    // their transpose, bucketed by destination.
    struct Up {
        std::uint32_t dst, src, mode;
    };
    std::vector<Up> ups;
    std::vector<std::uint32_t> up_count(L.aux_id.size() + 1, 0);
    L.kgamma.resize(L.aux_id.size());
    L.lower_offset.assign(1, 0);
    for (std::size_t a = 0; a < L.aux_id.size(); ++a) {
        cplx kg{0.0, 0.0};
        for (const auto& low : registry.lowers(L.aux_id[a])) {
            const std::uint32_t j = low.mode;
            if (j >= M) throw std::invalid_argument("layout: auxiliary refers to unknown mode");
            kg += static_cast<double>(low.count) * system.modes[j].gamma;
            const std::int32_t src = low.id < L.id_pos.size() ? L.id_pos[low.id] : -1;
            if (src < 0) continue;
            if (mode_pos[j] >= 0) {
                L.lower.push_back({static_cast<std::uint32_t>(src), mode_pos[j],
                                   static_cast<double>(low.count) * system.modes[j].gamma / units::hbar});
            }
            ups.push_back({static_cast<std::uint32_t>(src), static_cast<std::uint32_t>(a), j});
            ++up_count[static_cast<std::size_t>(src) + 1];
        }
        L.kgamma[a] = kg / units::hbar;
        L.lower_offset.push_back(static_cast<std::uint32_t>(L.lower.size()));
    }
    L.raise_offset.assign(L.aux_id.size() + 1, 0);
    for (std::size_t a = 0; a < L.aux_id.size(); ++a) L.raise_offset[a + 1] = L.raise_offset[a] + up_count[a + 1];
    L.raise.resize(ups.size());
    std::vector<std::uint32_t> fill(L.raise_offset.begin(), L.raise_offset.end() - 1);
    for (const Up& u : ups) {
        L.raise[fill[u.dst]++] = {u.src, u.mode, mode_pos[u.mode],
                                  system.modes[u.mode].g / system.modes[u.mode].gamma / units::hbar};
    }

    L.h_rowptr.assign(1, 0);
    for (std::size_t p = 0; p < L.states.size(); ++p) {
        std::vector<std::pair<std::int32_t, double>> row;
        for (const auto& [m, v] : system.couplings[L.states[p]]) {
            if (L.state_pos[m] >= 0) row.emplace_back(L.state_pos[m], v);
        }
        std::sort(row.begin(), row.end());
        for (const auto& [c, v] : row) {
            L.h_col.push_back(c);
            L.h_val.push_back(cplx{0.0, -v / units::hbar});
        }
        L.h_rowptr.push_back(static_cast<std::int32_t>(L.h_col.size()));
    }
    return L;
}

BasisLayout BasisLayout::full(const HopsSystem& system, int k_max, std::size_t max_size) {
    auto space = hierarchy::build_hierarchy(system.n_modes(), k_max, max_size);
    std::vector<std::size_t> states(system.n_states());
    for (std::size_t s = 0; s < states.size(); ++s) states[s] = s;
    return build(system, std::move(states), std::move(space.indices));
}

// --- equation of motion --------------------------------------------------------

double physical_norm2(const BasisLayout& layout, std::span<const cplx> psi) {
    double n = 0.0;
    for (std::size_t p = 0; p < layout.n_states(); ++p) n += std::norm(psi[p]);
    return n;
}

std::vector<double> expectations(const HopsSystem& system, const BasisLayout& layout,
                                 std::span<const cplx> psi, Normalization norm) {
    const double denom = physical_norm2(layout, psi) + (norm == Normalization::dyadic ? 1.0 : 0.0);
    std::vector<double> out(system.n_channels(), 0.0);
    if (!(denom > 0.0)) return out;
    for (std::size_t n = 0; n < out.size(); ++n) {
        const std::int32_t p = layout.state_pos[system.state_of_channel[n]];
        if (p >= 0) out[n] = std::norm(psi[static_cast<std::size_t>(p)]) / denom;
    }
    return out;
}

std::vector<cplx> memory_drift(const HopsSystem& system, std::span<const cplx> u) {
    std::vector<cplx> xi(system.n_channels(), cplx{0.0, 0.0});
    for (std::size_t j = 0; j < system.n_modes(); ++j) xi[system.modes[j].channel] += u[j];
    return xi;
}

void hops_derivative(const HopsSystem& system, const BasisLayout& layout, const DriveTerms& drive,
                     double e_ref, std::span<const cplx> psi, std::span<cplx> out,
                     const simd::KernelTable& kernels) {
    const std::size_t ns = layout.n_states();
    const std::size_t na = layout.n_aux();
    if (psi.size() != ns * na || out.size() != ns * na) throw std::invalid_argument("hops_derivative: size mismatch");

    // Per-state diagonal (-i (E_s - e_ref) + z*_n + xi_n) / hbar.
    std::vector<cplx> diag(ns);
    for (std::size_t p = 0; p < ns; ++p) {
        const std::size_t s = layout.states[p];
        cplx d{0.0, -(system.energies[s] - e_ref)};
        const std::int32_t ch = layout.channel_at[p];
        if (ch >= 0) d += drive.zxi[static_cast<std::size_t>(ch)];
        diag[p] = d / units::hbar;
    }
    std::vector<cplx> raise_scale(system.n_modes());
    for (std::size_t j = 0; j < system.n_modes(); ++j) {
        raise_scale[j] = system.modes[j].g / system.modes[j].gamma * drive.expect[system.modes[j].channel] / units::hbar;
    }
    simd::HierarchyView view;
    view.ns = ns;
    view.na = na;
    view.diag = diag.data();
    view.kgamma = layout.kgamma.data();
    if (!layout.h_col.empty()) {
        view.h_rowptr = layout.h_rowptr.data();
        view.h_col = layout.h_col.data();
        view.h_val = layout.h_val.data();
    }
    view.lower_offset = layout.lower_offset.data();
    view.lower = layout.lower.data();
    view.raise_offset = layout.raise_offset.data();
    view.raise = layout.raise.data();
    view.raise_scale = raise_scale.data();
    kernels.hierarchy_apply(view, psi.data(), out.data());
}

void memory_derivative(const HopsSystem& system, std::span<const double> expect, std::span<const cplx> u,
                       std::span<cplx> out) {
    for (std::size_t j = 0; j < system.n_modes(); ++j) {
        const auto& m = system.modes[j];
        out[j] = (-std::conj(m.gamma) * u[j] + std::conj(m.g) * expect[m.channel]) / units::hbar;
    }
}

void update_memory(const HopsSystem& system, std::span<const double> expect, double dt, std::span<cplx> u) {
    for (std::size_t j = 0; j < system.n_modes(); ++j) {
        const auto& m = system.modes[j];
        const cplx gc = std::conj(m.gamma);
        const cplx decay = std::exp(-gc * dt / units::hbar);
        u[j] = decay * u[j] + std::conj(m.g) * expect[m.channel] / gc * (1.0 - decay);
    }
}

std::vector<cplx> apply_basis_change(const BasisLayout& from, std::span<const cplx> psi, const BasisLayout& to) {
    const std::size_t ns_from = from.n_states();
    const std::size_t ns_to = to.n_states();
    std::vector<cplx> out(to.size(), cplx{0.0, 0.0});
    std::vector<std::int32_t> map_state(ns_to, -1);
    for (std::size_t p = 0; p < ns_to; ++p) {
        const std::size_t s = to.states[p];
        if (s < from.state_pos.size()) map_state[p] = from.state_pos[s];
    }
    const bool shared = from.registry == to.registry;
    for (std::size_t a = 0; a < to.n_aux(); ++a) {
        std::int64_t src = -1;
        if (shared) {
            const std::uint32_t id = to.aux_id[a];
            if (id < from.id_pos.size()) src = from.id_pos[id];
        } else {
            src = from.find_aux(to.aux[a]);
        }
        if (src < 0) continue;
        for (std::size_t p = 0; p < ns_to; ++p) {
            if (map_state[p] >= 0) out[a * ns_to + p] = psi[static_cast<std::size_t>(src) * ns_from + static_cast<std::size_t>(map_state[p])];
        }
    }
    return out;
}

}  // namespace adhops::hops
