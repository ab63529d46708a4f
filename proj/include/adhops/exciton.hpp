#pragma once

// Frenkel exciton aggregate: site energies, couplings, transition dipoles and
// per-pigment baths, together with the decomposition of the collective
// dipole operator into cluster-local excitations.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adhops/bath.hpp"

namespace adhops::exciton {

using Vec3 = std::array<double, 3>;

struct AggregateModel {
    std::vector<double> E;   // cm^-1, vertical excitation energies
    Eigen::MatrixXd V;       // cm^-1, symmetric, zero diagonal
    double E_g = 0.0;        // cm^-1
    std::vector<Vec3> mu;    // transition dipoles
    bath::BathSpec bath;     // one mode list per pigment

    std::size_t size() const { return E.size(); }

    // Throws std::invalid_argument listing the first violated invariant.
    void validate() const;
};

struct Polarization {
    Vec3 epsilon{1.0, 0.0, 0.0};

    // Normalizes v; throws on a zero vector.
    static Polarization along(const Vec3& v);
    static Polarization axis(int index);  // 0 = x, 1 = y, 2 = z
};

// Amplitudes over the pigments of the single-excitation manifold.
using InitialState = std::vector<cplx>;

struct Superposition {
    InitialState psi_ex;
    double mu_tot = 0.0;
};

double projection(const Vec3& mu, const Polarization& pol);

// psi_ex ∝ (mu_n . eps), normalized, and mu_tot = |(mu_n . eps)_n|.
// Throws std::domain_error when every projection vanishes.
Superposition excited_superposition(const AggregateModel& model, const Polarization& pol);

using Cluster = std::vector<std::size_t>;
using Partition = std::vector<Cluster>;

struct ClusterState {
    Cluster pigments;
    double weight = 0.0;   // A_d
    InitialState state;    // full-length, unit norm; all zeros when weight == 0
};

struct ClusterPartition {
    std::vector<ClusterState> clusters;
    double mu_tot = 0.0;

    std::size_t size() const { return clusters.size(); }
};

// Throws std::invalid_argument unless `partition` is disjoint and covers 0..n-1.
void validate_partition(const Partition& partition, std::size_t n);

ClusterPartition decompose_dipole(const AggregateModel& model, const Polarization& pol,
                                  const Partition& partition);

Partition singleton_partition(std::size_t n);
Partition full_partition(std::size_t n);

// Greedy strong-coupling clustering: nucleate at the largest remaining
// |V_ij| among unassigned pigments, then repeatedly add the unassigned
// pigment with the largest single |V| to any cluster member until the
// cluster holds cluster_size pigments. Ties go to the lexicographically
// smallest indices; when fewer pigments remain they form a final smaller
// cluster.
Partition greedy_strong_coupling_clusters(const Eigen::MatrixXd& V, std::size_t cluster_size);

// Copy with E_n += Normal(0, sd^2), deterministic in seed.
AggregateModel sample_disorder(const AggregateModel& model, double sd, std::uint64_t seed);

// Nearest-neighbour chain helper used by tests, tools and configs.
AggregateModel make_chain(std::size_t n, double energy, double coupling, const bath::ModeList& modes,
                          const Vec3& dipole = {1.0, 0.0, 0.0}, double E_g = 0.0);

// Model file I/O (JSON). Schema:
//   { "E": [..], "V": [[..], ..], "E_g": x, "mu": [[x,y,z], ..],
//     "bath": [ [ {"g": [re, im], "gamma": [re, im]}, .. ], .. ] }
// "bath" may also hold a single list applied to every pigment under the key
// "bath_all".
AggregateModel load_model(const std::string& path);
AggregateModel parse_model(const std::string& json_text);
std::string serialize_model(const AggregateModel& model);

}  // namespace adhops::exciton
