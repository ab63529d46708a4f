#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adhops/exciton.hpp"
#include "gen.hpp"

using namespace adhops;
using namespace adhops::exciton;

namespace {

const bath::ModeList kModes = bath::build_ishizaki_pair(35.0, 50.0, 10.0, 295.0);

AggregateModel with_dipoles(const std::vector<Vec3>& mu) {
    AggregateModel m = make_chain(mu.size(), 0.0, -100.0, kModes);
    m.mu = mu;
    return m;
}

Eigen::MatrixXd sym(std::size_t n, std::initializer_list<std::tuple<int, int, double>> entries) {
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (auto [i, j, v] : entries) V(i, j) = V(j, i) = v;
    return V;
}

}  // namespace

TEST_SUITE("exciton") {

TEST_CASE("parallel dipoles give the symmetric superposition") {
    const auto m = with_dipoles({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
    const auto s = excited_superposition(m, Polarization::axis(0));
    CHECK(s.mu_tot == doctest::Approx(2.0));
    for (const auto& a : s.psi_ex) CHECK(std::abs(a - cplx{0.5, 0.0}) < 1e-15);
}

TEST_CASE("single pigment superposition") {
    const auto m = with_dipoles({{0.7, 0.3, 0}});
    const auto s = excited_superposition(m, Polarization::axis(0));
    CHECK(s.mu_tot == doctest::Approx(0.7));
    REQUIRE(s.psi_ex.size() == 1);
    CHECK(s.psi_ex[0] == cplx{1.0, 0.0});
}

TEST_CASE("mixed-sign projections keep the sign in the amplitude") {
    const auto m = with_dipoles({{1, 0, 0}, {-1, 0, 0}});
    const auto s = excited_superposition(m, Polarization::axis(0));
    CHECK(s.mu_tot == doctest::Approx(std::sqrt(2.0)));
    CHECK(s.psi_ex[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(s.psi_ex[1].real() == doctest::Approx(-1.0 / std::sqrt(2.0)));
}

TEST_CASE("dipoles orthogonal to the polarization are an error") {
    const auto m = with_dipoles({{0, 1, 0}, {0, 0, 1}});
    CHECK_THROWS_AS(excited_superposition(m, Polarization::axis(0)), std::domain_error);
}

TEST_CASE("polarizations are unit vectors") {
    const auto p = Polarization::along({3.0, 4.0, 0.0});
    CHECK(p.epsilon[0] == doctest::Approx(0.6));
    CHECK(p.epsilon[1] == doctest::Approx(0.8));
    CHECK_THROWS_AS(Polarization::along({0.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Polarization::axis(3), std::invalid_argument);
    CHECK(projection({1.0, 2.0, 3.0}, Polarization::axis(2)) == 3.0);
}

TEST_CASE("singleton decomposition of parallel unit dipoles") {
    const auto m = with_dipoles({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
    const auto d = decompose_dipole(m, Polarization::axis(0), singleton_partition(4));
    REQUIRE(d.size() == 4);
    CHECK(d.mu_tot == doctest::Approx(2.0));
    for (std::size_t n = 0; n < 4; ++n) {
        CHECK(d.clusters[n].weight == doctest::Approx(1.0));
        for (std::size_t k = 0; k < 4; ++k) CHECK(d.clusters[n].state[k] == cplx{k == n ? 1.0 : 0.0, 0.0});
    }
}

TEST_CASE("one cluster holding every pigment is the full superposition") {
    const auto m = with_dipoles({{1, 0, 0}, {0.5, 1, 0}, {-0.2, 0, 1}});
    const auto pol = Polarization::along({1.0, 1.0, 0.0});
    const auto d = decompose_dipole(m, pol, full_partition(3));
    const auto s = excited_superposition(m, pol);
    REQUIRE(d.size() == 1);
    CHECK(d.clusters[0].weight == doctest::Approx(s.mu_tot));
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(d.clusters[0].state[k] - s.psi_ex[k]) < 1e-14);
}

TEST_CASE("clusters orthogonal to the polarization get zero weight") {
    const auto m = with_dipoles({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
    const auto d = decompose_dipole(m, Polarization::axis(0), {{0, 3}, {1, 2}});
    CHECK(d.clusters[0].weight == doctest::Approx(std::sqrt(2.0)));
    CHECK(d.clusters[1].weight == 0.0);
    for (const auto& a : d.clusters[1].state) CHECK(a == cplx{0.0, 0.0});
}

TEST_CASE("partitions must be disjoint and covering") {
    CHECK_NOTHROW(validate_partition({{0, 2}, {1}}, 3));
    CHECK_THROWS_AS(validate_partition({{0, 1}, {1, 2}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(validate_partition({{0}, {2}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(validate_partition({{0, 1, 2}, {}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(validate_partition({{0, 1, 3}}, 3), std::invalid_argument);
    const auto m = with_dipoles({{1, 0, 0}, {1, 0, 0}});
    CHECK_THROWS_AS(decompose_dipole(m, Polarization::axis(0), {{0}}), std::invalid_argument);
}

TEST_CASE("property: cluster states reconstruct mu_tot psi_ex") {
    for (auto seed : gen::seeds(40)) {
        gen::Gen g(seed);
        const std::size_t n = 1 + g.index(9);
        const auto m = g.model(n);
        const auto pol = Polarization::along({g.normal(), g.normal(), g.normal()});
        const auto part = g.partition(n);
        const auto d = decompose_dipole(m, pol, part);
        const auto s = excited_superposition(m, pol);
        INFO("seed " << seed);
        std::vector<cplx> sum(n, cplx{0.0, 0.0});
        double w2 = 0.0;
        for (const auto& c : d.clusters) {
            w2 += c.weight * c.weight;
            if (c.weight > 0.0) {
                double norm = 0.0;
                for (const auto& a : c.state) norm += std::norm(a);
                CHECK(norm == doctest::Approx(1.0));
            }
            for (std::size_t k = 0; k < n; ++k) {
                sum[k] += c.weight * c.state[k];
                const bool inside = std::find(c.pigments.begin(), c.pigments.end(), k) != c.pigments.end();
                if (!inside) CHECK(c.state[k] == cplx{0.0, 0.0});
            }
        }
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(sum[k] - s.mu_tot * s.psi_ex[k]) < 1e-12);
        CHECK(w2 == doctest::Approx(s.mu_tot * s.mu_tot));
    }
}

TEST_CASE("greedy clustering of a 4-site chain takes the whole chain") {
    const auto m = make_chain(4, 0.0, -100.0, kModes);
    const auto p = greedy_strong_coupling_clusters(m.V, 4);
    REQUIRE(p.size() == 1);
    auto c = p[0];
    std::sort(c.begin(), c.end());
    CHECK(c == Cluster{0, 1, 2, 3});
}

TEST_CASE("greedy clustering of an 8-site chain in pairs follows the tie rule") {
    // Nucleus (0,1) by lowest index, then (2,3), ...
    const auto m = make_chain(8, 0.0, -100.0, kModes);
    const auto p = greedy_strong_coupling_clusters(m.V, 2);
    REQUIRE(p.size() == 4);
    for (std::size_t d = 0; d < 4; ++d) {
        auto c = p[d];
        std::sort(c.begin(), c.end());
        CHECK(c == Cluster{2 * d, 2 * d + 1});
    }
}

TEST_CASE("greedy clustering recovers two decoupled blocks") {
    const auto V = sym(8, {{0, 2, 80}, {2, 5, 60}, {5, 7, 70}, {0, 7, 10},
                           {1, 3, -90}, {3, 4, 30}, {4, 6, -50}, {1, 6, 20}});
    const auto p = greedy_strong_coupling_clusters(V, 4);
    REQUIRE(p.size() == 2);
    std::vector<Cluster> sorted;
    for (auto c : p) {
        std::sort(c.begin(), c.end());
        sorted.push_back(c);
    }
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[0] == Cluster{0, 2, 5, 7});
    CHECK(sorted[1] == Cluster{1, 3, 4, 6});
}

TEST_CASE("greedy clustering grows by the largest single coupling") {
    // Nucleus (0,1) at 100. Pigment 2 couples 60 to 0; pigment 3 couples 50
    // to 0 and 50 to 1 (sum 100, max 50). The largest single coupling wins.
    const auto V = sym(4, {{0, 1, 100}, {0, 2, 60}, {0, 3, 50}, {1, 3, 50}});
    const auto p = greedy_strong_coupling_clusters(V, 3);
    REQUIRE(p.size() == 2);
    auto c = p[0];
    std::sort(c.begin(), c.end());
    CHECK(c == Cluster{0, 1, 2});
    CHECK(p[1] == Cluster{3});
}

TEST_CASE("greedy clustering leaves a smaller final cluster") {
    const auto m = make_chain(6, 0.0, -100.0, kModes);
    const auto p = greedy_strong_coupling_clusters(m.V, 4);
    REQUIRE(p.size() == 2);
    CHECK(p[0].size() == 4);
    CHECK(p[1].size() == 2);
    CHECK_THROWS_AS(greedy_strong_coupling_clusters(m.V, 0), std::invalid_argument);
}

TEST_CASE("property: greedy clustering covers every pigment once") {
    for (auto seed : gen::seeds(50)) {
        gen::Gen g(seed);
        const std::size_t n = 1 + g.index(16);
        const std::size_t size = 1 + g.index(5);
        const auto m = g.model(n);
        const auto p = greedy_strong_coupling_clusters(m.V, size);
        INFO("seed " << seed << " n " << n << " size " << size);
        CHECK_NOTHROW(validate_partition(p, n));
        for (std::size_t d = 0; d < p.size(); ++d) {
            CHECK(p[d].size() <= size);
            if (d + 1 < p.size()) CHECK(p[d].size() == size);
        }
    }
}

TEST_CASE("zero disorder leaves the model unchanged") {
    const auto m = gen::Gen(1).model(5);
    const auto d = sample_disorder(m, 0.0, 123);
    CHECK(d.E == m.E);
    CHECK(d.V == m.V);
}

TEST_CASE("disorder has the requested standard deviation") {
    const auto m = make_chain(1, 12000.0, 0.0, kModes);
    double s = 0.0, s2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double e = sample_disorder(m, 100.0, static_cast<std::uint64_t>(i)).E[0] - 12000.0;
        s += e;
        s2 += e * e;
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    CHECK(sd == doctest::Approx(100.0).epsilon(0.03));
    CHECK(std::abs(mean) < 4.0 * 100.0 / std::sqrt(n));
}

TEST_CASE("disorder only perturbs site energies") {
    const auto m = gen::Gen(2).model(4);
    const auto a = sample_disorder(m, 50.0, 1);
    const auto b = sample_disorder(m, 50.0, 2);
    const auto a2 = sample_disorder(m, 50.0, 1);
    CHECK(a.E != b.E);
    CHECK(a.E == a2.E);
    CHECK(a.V == m.V);
    CHECK(b.mu == m.mu);
    CHECK(b.bath.pigments == m.bath.pigments);
    CHECK(a.E_g == m.E_g);
    CHECK_THROWS_AS(sample_disorder(m, -1.0, 1), std::invalid_argument);
}

TEST_CASE("model validation names the broken invariant") {
    auto m = make_chain(3, 100.0, -50.0, kModes);
    CHECK_NOTHROW(m.validate());
    auto bad = m;
    bad.V(0, 1) = 3.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = m;
    bad.E[2] = NAN;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = m;
    bad.bath.pigments.pop_back();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = m;
    bad.V(1, 1) = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("model json round trip") {
    const auto m = gen::Gen(9).model(3, 2);
    const auto back = parse_model(serialize_model(m));
    CHECK(back.E == m.E);
    CHECK(back.V == m.V);
    CHECK(back.mu == m.mu);
    CHECK(back.E_g == m.E_g);
    CHECK(back.bath.pigments == m.bath.pigments);
}

TEST_CASE("model json accepts bath_all and rejects unknown keys") {
    const auto m = parse_model(R"({"E": [1, 2], "V": [[0, 5], [5, 0]], "mu": [[1, 0, 0], [0, 1, 0]],
                                   "bath_all": [{"g": [100, 0], "gamma": [50, 10]}]})");
    CHECK(m.size() == 2);
    CHECK(m.bath[1][0].gamma == cplx{50.0, 10.0});
    CHECK(m.E_g == 0.0);
    CHECK_THROWS_AS(parse_model(R"({"E": [1], "V": [[0]], "mu": [[1,0,0]], "bath_all": [{"g": 1, "gamma": 1}], "Eg": 0})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_model("{not json"), std::invalid_argument);
    CHECK_THROWS_AS(parse_model(R"({"E": [1], "V": [[0]], "mu": [[1,0,0]]})"), std::invalid_argument);
}

}
