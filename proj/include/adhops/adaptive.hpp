#pragma once

// Adaptive (state x auxiliary) basis selection.
//
// With P the projector onto a candidate basis B' and Phi supported on the
// current basis B, the derivative error of propagating on B' splits into
// two orthogonal parts,
//
//   D Phi - P D P Phi = (1 - P) D Phi  +  P D (1 - P) Phi.
//
// The first is the full derivative f(e) at every element e outside B'. The
// second is the flux leaving the discarded amplitudes; by Cauchy-Schwarz
// over the at most q sources feeding any one element,
//
//   |P D (1 - P) Phi|^2 <= q sum_{e discarded} |v_e|^2,
//
// where v_e is the off-diagonal column of D at e times Phi_e. The score of
// an element is therefore s_e = |f(e)|^2 + q |v_e|^2, and discarding any set
// whose scores sum to at most Delta^2 keeps the derivative error below
// Delta. Scores are in fs^-2.
//
// Auxiliaries raised along modes with g = 0 are never candidates: they are
// driven by the physical wave function but do not act back on it, so the
// bound is stated on the part of the hierarchy that does.

#include <memory>
#include <vector>

#include "adhops/hops.hpp"

namespace adhops::adaptive {

struct AdaptiveConfig {
    double delta_A = 0.0;
    double delta_S = 0.0;
    int update_stride = 1;  // integrator steps between basis updates

    bool enabled() const { return delta_A > 0.0 || delta_S > 0.0; }
    void validate() const;  // throws std::invalid_argument
};

// Scores on a candidate layout: the current basis plus every element one
// coupling, raising or lowering step away (within k_max).
struct ElementScores {
    std::shared_ptr<const hops::BasisLayout> candidates;
    std::vector<double> score;    // per element, candidates->size()
    std::vector<double> flux;     // |f(e)|^2 part
    double q = 0.0;
};

// Candidate layout for one basis. It only depends on the basis, so a
// trajectory can reuse it for as long as the basis stays the same.
struct CandidateSpace {
    std::shared_ptr<const hops::BasisLayout> basis;
    std::shared_ptr<const hops::BasisLayout> layout;
    std::vector<std::int64_t> embed;  // candidate element -> basis element, -1 if new
    std::vector<std::vector<std::uint32_t>> modes_of_state;
    int k_max = 0;
    std::shared_ptr<hierarchy::IndexRegistry> owned_registry;  // set when no registry was supplied
};

// With `registry` equal to the basis' registry, candidate ids extend it and
// BasisChoice::aux_ids refer to it; otherwise a private registry is used.
CandidateSpace build_candidates(const hops::HopsSystem& system, std::shared_ptr<const hops::BasisLayout> basis,
                                int k_max, hierarchy::IndexRegistry* registry = nullptr);

// Scores for the current state. `drive` and `e_ref` are the values used by
// the equation of motion at this instant.
ElementScores derivative_error_contributions(const hops::HopsSystem& system, const hops::BasisLayout& layout,
                                             std::span<const cplx> psi, const hops::DriveTerms& drive,
                                             double e_ref, int k_max);
ElementScores derivative_error_contributions(const hops::HopsSystem& system, const CandidateSpace& cand,
                                             std::span<const cplx> psi, const hops::DriveTerms& drive,
                                             double e_ref);

// Greedy discard: sort ascending by (score, index) and drop elements while
// the running sum stays <= bound^2. Elements flagged in `forced` are never
// dropped. A nonpositive bound keeps everything. Returns keep flags.
std::vector<bool> select_basis(const std::vector<double>& scores, double bound,
                               const std::vector<bool>& forced = {});

struct BasisChoice {
    std::vector<std::size_t> states;
    std::vector<hierarchy::HierarchyIndex> aux;
    std::vector<std::uint32_t> aux_ids;  // ids in the candidate layout's registry
    double discarded_state_score = 0.0;
    double discarded_aux_score = 0.0;
};

// States first (scores summed over all candidate auxiliaries), then
// auxiliaries (summed over kept states). Always keeps the zero auxiliary,
// the most populated state and `forced_states`.
BasisChoice choose_basis(const hops::HopsSystem& system, const hops::BasisLayout& layout,
                         std::span<const cplx> psi, const hops::DriveTerms& drive, double e_ref, int k_max,
                         const AdaptiveConfig& config, const std::vector<std::size_t>& forced_states = {});
BasisChoice choose_basis(const hops::HopsSystem& system, const CandidateSpace& cand, std::span<const cplx> psi,
                         const hops::DriveTerms& drive, double e_ref, const AdaptiveConfig& config,
                         const std::vector<std::size_t>& forced_states = {});

}  // namespace adhops::adaptive
