#include "adhops/exciton.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace adhops::exciton {

void AggregateModel::validate() const {
    const std::size_t n = E.size();
    if (n == 0) throw std::invalid_argument("model: no pigments");
    if (static_cast<std::size_t>(V.rows()) != n || static_cast<std::size_t>(V.cols()) != n) {
        throw std::invalid_argument("model: V must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (mu.size() != n) throw std::invalid_argument("model: need one dipole per pigment");
    if (bath.size() != n) throw std::invalid_argument("model: need one bath mode list per pigment");
    if (!std::isfinite(E_g)) throw std::invalid_argument("model: E_g not finite");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(E[i])) throw std::invalid_argument("model: E[" + std::to_string(i) + "] not finite");
        for (double c : mu[i]) {
            if (!std::isfinite(c)) throw std::invalid_argument("model: dipole not finite");
        }
        if (V(i, i) != 0.0) throw std::invalid_argument("model: V diagonal must be zero");
        for (std::size_t j = 0; j < i; ++j) {
            if (!std::isfinite(V(i, j)) || V(i, j) != V(j, i)) {
                throw std::invalid_argument("model: V must be finite and symmetric");
            }
        }
    }
    bath.validate();
}

Polarization Polarization::along(const Vec3& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("polarization: zero or non-finite vector");
    return Polarization{{v[0] / n, v[1] / n, v[2] / n}};
}

Polarization Polarization::axis(int index) {
    if (index < 0 || index > 2) throw std::invalid_argument("polarization: axis must be 0, 1 or 2");
    Vec3 v{0.0, 0.0, 0.0};
    v[static_cast<std::size_t>(index)] = 1.0;
    return Polarization{v};
}

double projection(const Vec3& mu, const Polarization& pol) {
    return mu[0] * pol.epsilon[0] + mu[1] * pol.epsilon[1] + mu[2] * pol.epsilon[2];
}

Superposition excited_superposition(const AggregateModel& model, const Polarization& pol) {
    Superposition s;
    double norm2 = 0.0;
    for (const auto& m : model.mu) {
        const double p = projection(m, pol);
        norm2 += p * p;
        s.psi_ex.emplace_back(p, 0.0);
    }
    if (!(norm2 > 0.0)) throw std::domain_error("excited superposition: every dipole is orthogonal to the polarization");
    s.mu_tot = std::sqrt(norm2);
    for (auto& a : s.psi_ex) a /= s.mu_tot;
    return s;
}

void validate_partition(const Partition& partition, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (const auto& cluster : partition) {
        if (cluster.empty()) throw std::invalid_argument("partition: empty cluster");
        for (std::size_t p : cluster) {
            if (p >= n) throw std::invalid_argument("partition: pigment index " + std::to_string(p) + " out of range");
            if (seen[p]++) throw std::invalid_argument("partition: pigment " + std::to_string(p) + " appears twice");
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (!seen[p]) throw std::invalid_argument("partition: pigment " + std::to_string(p) + " not covered");
    }
}

ClusterPartition decompose_dipole(const AggregateModel& model, const Polarization& pol,
                                  const Partition& partition) {
    const std::size_t n = model.size();
    validate_partition(partition, n);
    ClusterPartition out;
    double total = 0.0;
    for (const auto& cluster : partition) {
        ClusterState cs;
        cs.pigments = cluster;
        cs.state.assign(n, cplx{0.0, 0.0});
        double a2 = 0.0;
        for (std::size_t p : cluster) {
            const double proj = projection(model.mu[p], pol);
            a2 += proj * proj;
            cs.state[p] = proj;
        }
        total += a2;
        cs.weight = std::sqrt(a2);
        if (cs.weight > 0.0) {
            for (auto& a : cs.state) a /= cs.weight;
        }
        out.clusters.push_back(std::move(cs));
    }
    out.mu_tot = std::sqrt(total);
    return out;
}

Partition singleton_partition(std::size_t n) {
    Partition p;
    for (std::size_t i = 0; i < n; ++i) p.push_back({i});
    return p;
}

Partition full_partition(std::size_t n) {
    Cluster c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = i;
    return {c};
}

Partition greedy_strong_coupling_clusters(const Eigen::MatrixXd& V, std::size_t cluster_size) {
    if (cluster_size == 0) throw std::invalid_argument("clustering: cluster_size must be >= 1");
    if (V.rows() != V.cols()) throw std::invalid_argument("clustering: V must be square");
    const auto n = static_cast<std::size_t>(V.rows());
    std::vector<bool> assigned(n, false);
    std::size_t remaining = n;
    Partition out;
    auto absV = [&](std::size_t i, std::size_t j) { return std::abs(V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))); };

    while (remaining > 0) {
        Cluster cluster;
        if (cluster_size == 1 || remaining == 1) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!assigned[i]) {
                    cluster.push_back(i);
                    break;
                }
            }
        } else {
            // Step 1: nucleus at the largest |V_ij|; strict > keeps the first
            // pair in lexicographic order.
            double best = -1.0;
            std::size_t bi = 0, bj = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assigned[i]) continue;
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (assigned[j]) continue;
                    if (absV(i, j) > best) {
                        best = absV(i, j);
                        bi = i;
                        bj = j;
                    }
                }
            }
            cluster = {bi, bj};
        }
        for (std::size_t p : cluster) assigned[p] = true;
        remaining -= cluster.size();

        // Steps 2 and 3 (and further, for larger clusters).
        while (cluster.size() < cluster_size && remaining > 0) {
            double best = -1.0;
            std::size_t pick = n;
            for (std::size_t m = 0; m < n; ++m) {
                if (assigned[m]) continue;
                double strongest = 0.0;
                for (std::size_t c : cluster) strongest = std::max(strongest, absV(c, m));
                if (strongest > best) {
                    best = strongest;
                    pick = m;
                }
            }
            cluster.push_back(pick);
            assigned[pick] = true;
            --remaining;
        }
        std::sort(cluster.begin(), cluster.end());
        out.push_back(std::move(cluster));
    }
    return out;
}

AggregateModel sample_disorder(const AggregateModel& model, double sd, std::uint64_t seed) {
    if (sd < 0.0 || !std::isfinite(sd)) throw std::invalid_argument("disorder: sd must be finite and >= 0");
    AggregateModel out = model;
    if (sd == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    for (auto& e : out.E) e += normal(rng);
    return out;
}

AggregateModel make_chain(std::size_t n, double energy, double coupling, const bath::ModeList& modes,
                          const Vec3& dipole, double E_g) {
    AggregateModel m;
    m.E.assign(n, energy);
    m.V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto a = static_cast<Eigen::Index>(i);
        m.V(a, a + 1) = coupling;
        m.V(a + 1, a) = coupling;
    }
    m.E_g = E_g;
    m.mu.assign(n, dipole);
    m.bath.pigments.assign(n, modes);
    return m;
}

// --- JSON --------------------------------------------------------------------

namespace {

using nlohmann::json;

cplx complex_from(const json& j, const std::string& what) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw std::invalid_argument("model: " + what + " must be a number or [re, im]");
}

bath::ModeList modes_from(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("model: bath mode list must be an array");
    bath::ModeList modes;
    for (const auto& m : j) {
        if (!m.is_object() || !m.contains("g") || !m.contains("gamma")) {
            throw std::invalid_argument("model: each mode needs \"g\" and \"gamma\"");
        }
        for (const auto& [key, value] : m.items()) {
            if (key != "g" && key != "gamma") throw std::invalid_argument("model: unknown mode key \"" + key + "\"");
        }
        modes.push_back({complex_from(m["g"], "g"), complex_from(m["gamma"], "gamma")});
    }
    return modes;
}

json modes_to(const bath::ModeList& modes) {
    json out = json::array();
    for (const auto& m : modes) {
        out.push_back({{"g", {m.g.real(), m.g.imag()}}, {"gamma", {m.gamma.real(), m.gamma.imag()}}});
    }
    return out;
}

}  // namespace

AggregateModel parse_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("model: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("model: top level must be an object");
    static const std::vector<std::string> known{"E", "V", "E_g", "mu", "bath", "bath_all"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("model: unknown key \"" + key + "\"");
        }
    }
    AggregateModel m;
    try {
        m.E = j.at("E").get<std::vector<double>>();
        const std::size_t n = m.E.size();
        const auto rows = j.at("V").get<std::vector<std::vector<double>>>();
        if (rows.size() != n) throw std::invalid_argument("model: V must have one row per pigment");
        m.V.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r) {
            if (rows[r].size() != n) throw std::invalid_argument("model: V must be square");
            for (std::size_t c = 0; c < n; ++c) m.V(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        m.E_g = j.value("E_g", 0.0);
        if (j.contains("mu")) {
            for (const auto& v : j["mu"].get<std::vector<std::vector<double>>>()) {
                if (v.size() != 3) throw std::invalid_argument("model: each dipole needs 3 components");
                m.mu.push_back({v[0], v[1], v[2]});
            }
        } else {
            m.mu.assign(n, Vec3{1.0, 0.0, 0.0});
        }
        if (j.contains("bath") == j.contains("bath_all")) {
            throw std::invalid_argument("model: give exactly one of \"bath\" or \"bath_all\"");
        }
        if (j.contains("bath_all")) {
            m.bath.pigments.assign(n, modes_from(j["bath_all"]));
        } else {
            for (const auto& list : j["bath"]) m.bath.pigments.push_back(modes_from(list));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("model: ") + e.what());
    }
    m.validate();
    return m;
}

AggregateModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("model: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

std::string serialize_model(const AggregateModel& m) {
    json j;
    j["E"] = m.E;
    json V = json::array();
    for (Eigen::Index r = 0; r < m.V.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.V.cols()));
        for (Eigen::Index c = 0; c < m.V.cols(); ++c) row[static_cast<std::size_t>(c)] = m.V(r, c);
        V.push_back(row);
    }
    j["V"] = V;
    j["E_g"] = m.E_g;
    json mu = json::array();
    for (const auto& v : m.mu) mu.push_back({v[0], v[1], v[2]});
    j["mu"] = mu;
    json b = json::array();
    for (const auto& list : m.bath.pigments) b.push_back(modes_to(list));
    j["bath"] = b;
    return j.dump(2);
}

}  // namespace adhops::exciton
