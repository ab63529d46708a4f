#include "adhops/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace adhops::adaptive {

using hierarchy::HierarchyIndex;
using hops::BasisLayout;

void AdaptiveConfig::validate() const {
    if (!(delta_A >= 0.0) || !std::isfinite(delta_A)) throw std::invalid_argument("adaptive: delta_A must be >= 0");
    if (!(delta_S >= 0.0) || !std::isfinite(delta_S)) throw std::invalid_argument("adaptive: delta_S must be >= 0");
    if (update_stride < 1) throw std::invalid_argument("adaptive: update_stride must be >= 1");
}

namespace {

BasisLayout candidate_layout(const hops::HopsSystem& system, const BasisLayout& layout,
                             std::vector<std::uint32_t> ids, hierarchy::IndexRegistry& registry, int k_max,
                             const std::vector<std::vector<std::uint32_t>>& modes_of_state) {
    std::vector<std::size_t> states = layout.states;
    for (std::size_t s : layout.states) {
        for (const auto& [m, v] : system.couplings[s]) states.push_back(m);
    }
    std::vector<std::uint32_t> raise_modes;
    for (std::size_t s : layout.states) raise_modes.insert(raise_modes.end(), modes_of_state[s].begin(), modes_of_state[s].end());
    std::sort(raise_modes.begin(), raise_modes.end());

    std::vector<char> seen(registry.size(), 0);
    for (std::uint32_t id : ids) seen[id] = 1;
    auto add = [&](std::uint32_t id) {
        if (id >= seen.size()) seen.resize(std::max<std::size_t>(registry.size(), id + 1), 0);
        if (!seen[id]) {
            seen[id] = 1;
            ids.push_back(id);
        }
    };
    const std::size_t n_basis = ids.size();
    for (std::size_t a = 0; a < n_basis; ++a) {
        const std::uint32_t id = ids[a];
        if (static_cast<int>(registry.index(id).depth()) < k_max) {
            for (std::uint32_t j : raise_modes) add(registry.raised(id, j));
        }
        for (const auto& low : registry.lowers(id)) add(low.id);
    }
    return BasisLayout::build(system, std::move(states), registry, std::move(ids));
}

}  // namespace

CandidateSpace build_candidates(const hops::HopsSystem& system, std::shared_ptr<const BasisLayout> basis,
                                int k_max, hierarchy::IndexRegistry* registry) {
    CandidateSpace c;
    // Modes with g = 0 never feed back into lower auxiliaries, so raising
    // along them cannot change the physical wave function.
    c.modes_of_state = system.modes_of_state();
    for (auto& modes : c.modes_of_state) {
        std::erase_if(modes, [&](std::uint32_t j) { return system.modes[j].g == cplx{0.0, 0.0}; });
    }
    c.k_max = k_max;
    std::vector<std::uint32_t> ids;
    if (registry == nullptr || basis->registry != registry) {
        c.owned_registry = std::make_shared<hierarchy::IndexRegistry>();
        registry = c.owned_registry.get();
        for (const auto& k : basis->aux) ids.push_back(registry->intern(k));
    } else {
        ids = basis->aux_id;
    }
    auto layout = candidate_layout(system, *basis, std::move(ids), *registry, k_max, c.modes_of_state);
    layout.owned_registry = c.owned_registry;
    c.layout = std::make_shared<const BasisLayout>(std::move(layout));
    const BasisLayout& L = *c.layout;
    const std::size_t nsb = basis->n_states();
    c.embed.assign(L.size(), -1);
    // candidate_layout keeps the basis auxiliaries first, in order
    for (std::size_t a = 0; a < basis->n_aux(); ++a) {
        for (std::size_t p = 0; p < L.n_states(); ++p) {
            const std::int32_t q = basis->state_pos[L.states[p]];
            if (q >= 0) c.embed[a * L.n_states() + p] = static_cast<std::int64_t>(a * nsb + static_cast<std::size_t>(q));
        }
    }
    c.basis = std::move(basis);
    return c;
}

ElementScores derivative_error_contributions(const hops::HopsSystem& system, const BasisLayout& layout,
                                             std::span<const cplx> psi, const hops::DriveTerms& drive,
                                             double e_ref, int k_max) {
    // non-owning handle; the candidate space does not outlive this call
    std::shared_ptr<const BasisLayout> view(&layout, [](const BasisLayout*) {});
    return derivative_error_contributions(system, build_candidates(system, view, k_max), psi, drive, e_ref);
}

ElementScores derivative_error_contributions(const hops::HopsSystem& system, const CandidateSpace& candidates,
                                             std::span<const cplx> psi, const hops::DriveTerms& drive,
                                             double e_ref) {
    const BasisLayout& layout = *candidates.basis;
    const auto& modes_of_state = candidates.modes_of_state;
    const int k_max = candidates.k_max;
    const auto& cand = candidates.layout;
    const std::size_t nsc = cand->n_states();
    const std::size_t nac = cand->n_aux();
    if (psi.size() != layout.size()) throw std::invalid_argument("adaptive: state does not match the basis");

    std::vector<cplx> embedded(cand->size(), cplx{0.0, 0.0});
    for (std::size_t e = 0; e < embedded.size(); ++e) {
        if (candidates.embed[e] >= 0) embedded[e] = psi[static_cast<std::size_t>(candidates.embed[e])];
    }
    std::vector<cplx> f(embedded.size());
    hops::hops_derivative(system, *cand, drive, e_ref, embedded, f);

    // In-degree bound q.
    std::size_t max_deg = 0, max_modes = 0, modes_in_basis = 0;
    for (std::size_t s = 0; s < system.n_states(); ++s) {
        max_deg = std::max(max_deg, system.couplings[s].size());
        max_modes = std::max(max_modes, modes_of_state[s].size());
    }
    for (std::size_t s : layout.states) modes_in_basis += modes_of_state[s].size();

    ElementScores out;
    out.q = static_cast<double>(max_deg + max_modes + modes_in_basis);
    out.flux.resize(nsc * nac);
    for (std::size_t e = 0; e < f.size(); ++e) out.flux[e] = std::norm(f[e]);
    out.score = out.flux;

    const double inv_h2 = 1.0 / (units::hbar * units::hbar);
    std::vector<double> w_h(nsc, 0.0);
    for (std::size_t p = 0; p < nsc; ++p) {
        for (const auto& [m, v] : system.couplings[cand->states[p]]) w_h[p] += v * v * inv_h2;
    }
    std::vector<double> gg2(system.n_modes());
    for (std::size_t j = 0; j < system.n_modes(); ++j) {
        gg2[j] = std::norm(system.modes[j].g / system.modes[j].gamma) * inv_h2;
    }

    // Outflux |v_e|^2 = |Phi_e|^2 * sum over out-edges |coef|^2, only where Phi_e != 0.
    for (std::size_t a = 0; a < nac; ++a) {
        const HierarchyIndex& k = cand->aux[a];
        const bool can_raise = static_cast<int>(k.depth()) < k_max;
        for (std::size_t p = 0; p < nsc; ++p) {
            const double amp2 = std::norm(embedded[a * nsc + p]);
            if (amp2 == 0.0) continue;
            const std::size_t s = cand->states[p];
            double w = w_h[p];
            if (can_raise) {
                for (std::uint32_t j : modes_of_state[s]) {
                    w += std::norm(static_cast<double>(k.count(j) + 1) * system.modes[j].gamma) * inv_h2;
                }
            }
            k.for_each_mode([&](std::uint32_t j, int) {
                const std::size_t ch = system.modes[j].channel;
                const double delta = system.state_of_channel[ch] == s ? 1.0 : 0.0;
                const double d = drive.expect[ch] - delta;
                w += gg2[j] * d * d;
            });
            out.score[a * nsc + p] += out.q * amp2 * w;
        }
    }
    out.candidates = std::move(cand);
    return out;
}

std::vector<bool> select_basis(const std::vector<double>& scores, double bound, const std::vector<bool>& forced) {
    std::vector<bool> keep(scores.size(), true);
    if (!(bound > 0.0)) return keep;
    for (double s : scores) {
        if (!(s >= 0.0)) throw std::invalid_argument("select_basis: scores must be >= 0");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
    });
    const double budget = bound * bound;
    double used = 0.0;
    for (std::size_t i : order) {
        if (!forced.empty() && forced[i]) continue;
        if (used + scores[i] > budget) break;
        used += scores[i];
        keep[i] = false;
    }
    return keep;
}

BasisChoice choose_basis(const hops::HopsSystem& system, const BasisLayout& layout, std::span<const cplx> psi,
                         const hops::DriveTerms& drive, double e_ref, int k_max, const AdaptiveConfig& config,
                         const std::vector<std::size_t>& forced_states) {
    std::shared_ptr<const BasisLayout> view(&layout, [](const BasisLayout*) {});
    return choose_basis(system, build_candidates(system, view, k_max), psi, drive, e_ref, config, forced_states);
}

BasisChoice choose_basis(const hops::HopsSystem& system, const CandidateSpace& candidates, std::span<const cplx> psi,
                         const hops::DriveTerms& drive, double e_ref, const AdaptiveConfig& config,
                         const std::vector<std::size_t>& forced_states) {
    const BasisLayout& layout = *candidates.basis;
    const ElementScores sc = derivative_error_contributions(system, candidates, psi, drive, e_ref);
    const BasisLayout& cand = *sc.candidates;
    const std::size_t nsc = cand.n_states();
    const std::size_t nac = cand.n_aux();
    const double norm = std::sqrt(hops::physical_norm2(layout, psi));

    std::vector<double> state_score(nsc, 0.0);
    for (std::size_t a = 0; a < nac; ++a) {
        for (std::size_t p = 0; p < nsc; ++p) state_score[p] += sc.score[a * nsc + p];
    }
    std::vector<bool> forced_s(nsc, false);
    std::size_t top = 0;
    double top_pop = -1.0;
    for (std::size_t p = 0; p < layout.n_states(); ++p) {
        if (std::norm(psi[p]) > top_pop) {
            top_pop = std::norm(psi[p]);
            top = layout.states[p];
        }
    }
    forced_s[static_cast<std::size_t>(cand.state_pos[top])] = true;
    for (std::size_t s : forced_states) {
        if (s < cand.state_pos.size() && cand.state_pos[s] >= 0) forced_s[static_cast<std::size_t>(cand.state_pos[s])] = true;
    }
    const std::vector<bool> keep_s = select_basis(state_score, config.delta_S * norm, forced_s);

    std::vector<double> aux_score(nac, 0.0);
    for (std::size_t a = 0; a < nac; ++a) {
        for (std::size_t p = 0; p < nsc; ++p) {
            if (keep_s[p]) aux_score[a] += sc.score[a * nsc + p];
        }
    }
    std::vector<bool> forced_a(nac, false);
    forced_a[0] = true;
    const std::vector<bool> keep_a = select_basis(aux_score, config.delta_A * norm, forced_a);

    BasisChoice choice;
    for (std::size_t p = 0; p < nsc; ++p) {
        if (keep_s[p]) {
            choice.states.push_back(cand.states[p]);
        } else {
            choice.discarded_state_score += state_score[p];
        }
    }
    for (std::size_t a = 0; a < nac; ++a) {
        if (keep_a[a]) {
            choice.aux.push_back(cand.aux[a]);
            choice.aux_ids.push_back(cand.aux_id[a]);
        } else {
            choice.discarded_aux_score += aux_score[a];
        }
    }
    return choice;
}

}  // namespace adhops::adaptive
