#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "adhops/hops.hpp"
#include "gen.hpp"
#include "hops_oracle.hpp"

using namespace adhops;
using namespace adhops::hops;
using hierarchy::HierarchyIndex;

namespace {

HopsSystem monomer(double E, const bath::ModeList& modes) {
    auto m = exciton::make_chain(1, E, 0.0, modes);
    return HopsSystem::from_model(m);
}

DriveTerms drive_for(const HopsSystem& sys, gen::Gen& g) {
    DriveTerms d;
    for (std::size_t n = 0; n < sys.n_channels(); ++n) {
        d.zxi.push_back(g.complex(300.0));
        d.expect.push_back(g.uniform(0.0, 1.0));
    }
    return d;
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const std::vector<cplx>& a) {
    double m = 0.0;
    for (const auto& x : a) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST_SUITE("hops") {

TEST_CASE("no Hamiltonian, no drive and no hierarchy gives a zero derivative") {
    const auto sys = monomer(100.0, {{cplx{500.0, 0.0}, cplx{50.0, 0.0}}});
    const auto L = BasisLayout::full(sys, 0);
    DriveTerms d{{cplx{0.0, 0.0}}, {0.7}};
    std::vector<cplx> psi{cplx{0.3, -0.4}}, out(1);
    hops_derivative(sys, L, d, 100.0, psi, out);
    CHECK(out[0] == cplx{0.0, 0.0});
}

TEST_CASE("decoupled limit: the physical row evolves under -i H alone") {
    gen::Gen g(4);
    auto model = g.model(3, 2);
    for (auto& list : model.bath.pigments)
        for (auto& m : list) m.g = 0.0;
    const auto sys = HopsSystem::from_model(model);
    const auto L = BasisLayout::full(sys, 2);
    DriveTerms d{std::vector<cplx>(3, cplx{0.0, 0.0}), {0.2, 0.3, 0.1}};
    const auto psi = g.vector(L.size());
    std::vector<cplx> out(L.size());
    hops_derivative(sys, L, d, 0.0, psi, out);
    Eigen::MatrixXcd H = model.V.cast<cplx>();
    for (int i = 0; i < 3; ++i) H(i, i) = model.E[static_cast<std::size_t>(i)];
    // Higher auxiliaries are still fed from below but never feed back.
    Eigen::VectorXcd x(3);
    for (int s = 0; s < 3; ++s) x(s) = psi[static_cast<std::size_t>(s)];
    const Eigen::VectorXcd y = cplx{0.0, -1.0} * H * x / units::hbar;
    for (int s = 0; s < 3; ++s) CHECK(std::abs(out[static_cast<std::size_t>(s)] - y(s)) < 1e-15);
}

TEST_CASE("monomer with one mode at k_max = 1, hand-expanded") {
    const auto sys = monomer(150.0, {{cplx{2000.0, 500.0}, cplx{60.0, 20.0}}});
    const auto L = BasisLayout::full(sys, 1);
    REQUIRE(L.n_aux() == 2);
    DriveTerms d{{cplx{30.0, -40.0}}, {0.6}};
    std::vector<cplx> psi{cplx{0.8, 0.1}, cplx{0.05, -0.02}}, out(2);
    hops_derivative(sys, L, d, 100.0, psi, out);
    CHECK(out[0].real() == doctest::Approx(0.006097380123378757).epsilon(1e-12));
    CHECK(out[0].imag() == doctest::Approx(-0.012938802615844512).epsilon(1e-12));
    CHECK(out[1].real() == doctest::Approx(0.007967846129716448).epsilon(1e-12));
    CHECK(out[1].imag() == doctest::Approx(0.003221044180098139).epsilon(1e-12));
}

TEST_CASE("property: derivative equals the element-wise equation of motion") {
    for (auto seed : gen::seeds(30)) {
        gen::Gen g(seed);
        const std::size_t n = 1 + g.index(3);
        const auto model = g.model(n, 1 + g.index(2), false);
        const auto sys = g.coin() ? HopsSystem::from_model(model) : HopsSystem::with_ground_state(model);
        const int k_max = g.integer(0, 3);
        const auto full = BasisLayout::full(sys, k_max);
        const auto drive = drive_for(sys, g);
        const double e_ref = g.uniform(-100.0, 100.0);
        const auto psi = g.vector(full.size());
        std::vector<cplx> out(full.size());
        hops_derivative(sys, full, drive, e_ref, psi, out);
        const auto ref = oracle::hops_rhs(sys, full.states, full.aux, drive, e_ref, psi);
        INFO("seed " << seed);
        CHECK(max_diff(out, ref) <= 1e-12 * (1.0 + max_abs(ref)));
    }
}

TEST_CASE("property: sparse subsets drop missing neighbours") {
    for (auto seed : gen::seeds(30, 77)) {
        gen::Gen g(seed);
        const std::size_t n = 2 + g.index(3);
        const auto model = g.model(n, 1 + g.index(2), false);
        const auto sys = HopsSystem::from_model(model);
        const auto space = hierarchy::build_hierarchy(sys.n_modes(), 3);
        std::vector<HierarchyIndex> aux{space.indices[0]};
        for (std::size_t i = 1; i < space.size(); ++i)
            if (g.coin()) aux.push_back(space.indices[i]);
        std::shuffle(aux.begin() + 1, aux.end(), g.rng);
        std::vector<std::size_t> states;
        for (std::size_t s = 0; s < n; ++s)
            if (g.coin() || (s + 1 == n && states.empty())) states.push_back(s);
        const auto L = BasisLayout::build(sys, states, aux);
        const auto drive = drive_for(sys, g);
        const auto psi = g.vector(L.size());
        std::vector<cplx> out(L.size());
        hops_derivative(sys, L, drive, 10.0, psi, out);
        const auto ref = oracle::hops_rhs(sys, L.states, L.aux, drive, 10.0, psi);
        INFO("seed " << seed);
        CHECK(max_diff(out, ref) <= 1e-12 * (1.0 + max_abs(ref)));
        for (std::size_t a = 0; a < aux.size(); ++a) CHECK(L.find_aux(aux[a]) == static_cast<std::int64_t>(a));
    }
}

TEST_CASE("layouts built from registry ids match layouts built from indices") {
    gen::Gen g(12);
    const auto sys = HopsSystem::from_model(g.model(3, 2, false));
    const auto a = BasisLayout::full(sys, 2);
    hierarchy::IndexRegistry reg;
    std::vector<std::uint32_t> ids;
    for (const auto& k : a.aux) ids.push_back(reg.intern(k));
    const auto b = BasisLayout::build(sys, a.states, reg, ids);
    CHECK(b.aux == a.aux);
    const auto drive = drive_for(sys, g);
    const auto psi = g.vector(a.size());
    std::vector<cplx> x(a.size()), y(a.size());
    hops_derivative(sys, a, drive, 0.0, psi, x);
    hops_derivative(sys, b, drive, 0.0, psi, y);
    CHECK(max_diff(x, y) == 0.0);
    CHECK_THROWS_AS(BasisLayout::build(sys, a.states, reg, {1u, 0u}), std::invalid_argument);
    CHECK_THROWS_AS(BasisLayout::build(sys, {}, reg, {0u}), std::invalid_argument);
}

TEST_CASE("expectations use the standard or dyadic denominator") {
    const auto sys = HopsSystem::from_model(exciton::make_chain(2, 0.0, 10.0, {{cplx{1.0, 0.0}, cplx{1.0, 0.0}}}));
    const auto L = BasisLayout::full(sys, 0);
    const std::vector<cplx> psi{cplx{0.6, 0.0}, cplx{0.0, 0.3}};
    const auto std_e = expectations(sys, L, psi, Normalization::standard);
    const auto dya_e = expectations(sys, L, psi, Normalization::dyadic);
    CHECK(std_e[0] == doctest::Approx(0.36 / 0.45));
    CHECK(dya_e[1] == doctest::Approx(0.09 / 1.45));
    CHECK(physical_norm2(L, psi) == doctest::Approx(0.45));
    const std::vector<cplx> zero(2, cplx{0.0, 0.0});
    for (double e : expectations(sys, L, zero, Normalization::dyadic)) CHECK(e == 0.0);
    for (double e : expectations(sys, L, zero, Normalization::standard)) CHECK(e == 0.0);
}

TEST_CASE("property: dyadic expectations stay bounded") {
    for (auto seed : gen::seeds(20)) {
        gen::Gen g(seed);
        const auto sys = HopsSystem::from_model(g.model(1 + g.index(5)));
        const auto L = BasisLayout::full(sys, 0);
        const auto psi = g.vector(L.size(), g.uniform(1e-3, 10.0));
        const auto e = expectations(sys, L, psi, Normalization::dyadic);
        double sum = 0.0;
        for (double x : e) {
            CHECK(x >= 0.0);
            sum += x;
        }
        const double n2 = physical_norm2(L, psi);
        CHECK(sum == doctest::Approx(n2 / (n2 + 1.0)));
        CHECK(sum < 1.0);
    }
}

TEST_CASE("memory with zero expectation or zero coupling stays zero") {
    const auto sys = monomer(0.0, {{cplx{0.0, 0.0}, cplx{50.0, 5.0}}, {cplx{300.0, 20.0}, cplx{80.0, -3.0}}});
    std::vector<cplx> u(2, cplx{0.0, 0.0});
    for (int i = 0; i < 100; ++i) update_memory(sys, std::vector<double>{0.0}, 1.0, u);
    CHECK(u[0] == cplx{0.0, 0.0});
    CHECK(u[1] == cplx{0.0, 0.0});
    for (int i = 0; i < 100; ++i) update_memory(sys, std::vector<double>{0.8}, 1.0, u);
    CHECK(u[0] == cplx{0.0, 0.0});
    CHECK(std::abs(u[1]) > 0.0);
}

TEST_CASE("memory under a constant expectation approaches c g* / gamma*") {
    const cplx g{400.0, 0.0}, gamma{60.0, 0.0};
    const auto sys = monomer(0.0, {{g, gamma}});
    const double c = 0.35;
    std::vector<cplx> u{cplx{0.0, 0.0}};
    for (int k = 1; k <= 2000; ++k) {
        update_memory(sys, std::vector<double>{c}, 2.0, u);
        if (k == 100) {
            const double t = 200.0;
            const cplx exact = c * std::conj(g) / std::conj(gamma) * (1.0 - std::exp(-std::conj(gamma) * t / units::hbar));
            CHECK(std::abs(u[0] - exact) < 1e-12 * std::abs(exact));
        }
    }
    const cplx limit = c * std::conj(g) / std::conj(gamma);
    CHECK(std::abs(u[0] - limit) < 1e-6 * std::abs(limit));
    CHECK(memory_drift(sys, u)[0] == u[0]);
}

TEST_CASE("memory derivative is the generator of the exponential update") {
    const auto sys = monomer(0.0, {{cplx{400.0, 30.0}, cplx{60.0, 15.0}}, {cplx{90.0, -5.0}, cplx{20.0, -40.0}}});
    std::vector<cplx> u{cplx{2.0, -1.0}, cplx{0.5, 0.25}}, du(2);
    const std::vector<double> e{0.4};
    memory_derivative(sys, e, u, du);
    const double h = 1e-4;
    auto v = u;
    update_memory(sys, e, h, v);
    for (int j = 0; j < 2; ++j) CHECK(std::abs((v[j] - u[j]) / h - du[j]) < 1e-6 * std::abs(du[j]));
}

TEST_CASE("memory drift sums the modes of each channel") {
    gen::Gen g(3);
    const auto sys = HopsSystem::from_model(g.model(3, 2, false));
    const auto u = g.vector(6);
    const auto xi = memory_drift(sys, u);
    REQUIRE(xi.size() == 3);
    for (std::size_t n = 0; n < 3; ++n) {
        cplx s{0.0, 0.0};
        for (std::size_t j = 0; j < 6; ++j)
            if (sys.modes[j].channel == n) s += u[j];
        CHECK(std::abs(xi[n] - s) < 1e-15);
    }
}

TEST_CASE("basis change onto the same layout is the identity") {
    gen::Gen g(5);
    const auto sys = HopsSystem::from_model(g.model(2, 2));
    const auto L = BasisLayout::full(sys, 2);
    const auto psi = g.vector(L.size());
    CHECK(apply_basis_change(L, psi, L) == psi);
}

TEST_CASE("adding an empty neighbour leaves the physical state unchanged") {
    gen::Gen g(6);
    const auto sys = HopsSystem::from_model(g.model(3, 1));
    const auto small = BasisLayout::build(sys, {0, 1}, {HierarchyIndex{}});
    const auto big = BasisLayout::build(sys, {0, 1, 2}, {HierarchyIndex{}, HierarchyIndex{}.raised(1)});
    const auto psi = g.vector(small.size());
    const auto moved = apply_basis_change(small, psi, big);
    CHECK(moved[0] == psi[0]);
    CHECK(moved[1] == psi[1]);
    CHECK(moved[2] == cplx{0.0, 0.0});
    CHECK(physical_norm2(big, moved) == doctest::Approx(physical_norm2(small, psi)));
    const std::vector<cplx> bra{cplx{0.3, 0.1}, cplx{-0.2, 0.5}, cplx{1.0, 0.0}};
    cplx a{0.0, 0.0}, b{0.0, 0.0};
    for (std::size_t p = 0; p < 2; ++p) a += std::conj(bra[p]) * psi[p];
    for (std::size_t p = 0; p < 3; ++p) b += std::conj(bra[p]) * moved[p];
    CHECK(std::abs(a - b) < 1e-15);
}

TEST_CASE("property: removing elements drops at most their norm") {
    for (auto seed : gen::seeds(20)) {
        gen::Gen g(seed);
        const auto sys = HopsSystem::from_model(g.model(3, 1));
        const auto full = BasisLayout::full(sys, 2);
        std::vector<HierarchyIndex> aux{full.aux[0]};
        for (std::size_t a = 1; a < full.n_aux(); ++a)
            if (g.coin()) aux.push_back(full.aux[a]);
        std::vector<std::size_t> states{0};
        if (g.coin()) states.push_back(1);
        states.push_back(2);
        const auto part = BasisLayout::build(sys, states, aux);
        const auto psi = g.vector(full.size());
        const auto cut = apply_basis_change(full, psi, part);
        double total = 0.0, kept = 0.0, removed = 0.0;
        for (const auto& x : psi) total += std::norm(x);
        for (const auto& x : cut) kept += std::norm(x);
        removed = total - kept;
        CHECK(std::sqrt(total) - std::sqrt(kept) <= std::sqrt(removed) + 1e-12);
        CHECK(kept <= total + 1e-12);
        const auto back = apply_basis_change(part, cut, full);
        for (std::size_t i = 0; i < back.size(); ++i) CHECK((back[i] == psi[i] || back[i] == cplx{0.0, 0.0}));
    }
}

TEST_CASE("system structure from a model") {
    gen::Gen g(8);
    const auto model = g.model(3, 2);
    const auto sys = HopsSystem::from_model(model);
    CHECK(sys.n_states() == 3);
    CHECK(sys.n_channels() == 3);
    CHECK(sys.n_modes() == 6);
    CHECK(sys.channel_of_state(2) == 2);
    const auto gs = HopsSystem::with_ground_state(model);
    CHECK(gs.n_states() == 4);
    CHECK(gs.energies[0] == model.E_g);
    CHECK(gs.couplings[0].empty());
    CHECK(gs.channel_of_state(0) == -1);
    CHECK(gs.channel_of_state(1) == 0);
    CHECK(gs.modes_of_state()[0].empty());
    CHECK(gs.modes_of_state()[3].size() == 2);
    auto copy = sys;
    copy.set_site_energies(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(copy.energies == std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THROWS_AS(copy.set_site_energies(std::vector<double>{1.0}), std::invalid_argument);
    auto bad = sys;
    bad.state_of_channel[1] = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

}
