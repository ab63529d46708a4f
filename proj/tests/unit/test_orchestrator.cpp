#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "adhops/orchestrator.hpp"
#include "oracles.hpp"

using namespace adhops;
using namespace adhops::orchestrator;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("adhops_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

const char* kFig2 = R"({
  "chain": {"n": 4, "E": 0, "V": -100},
  "bath": {"kind": "ishizaki", "lambda": 35, "Gamma": 50, "nu": 10, "T": 295},
  "k_max": 5, "dt": 4, "t_max": 400, "n_ens": 10000,
  "clusters": {"mode": "singleton"}, "seed": 2024
})";

bool has_violation(const ConfigError& e, const std::string& field) {
    for (const auto& v : e.violations())
        if (v.rfind(field, 0) == 0) return true;
    return false;
}

}  // namespace

TEST_SUITE("orchestrator") {

TEST_CASE("minimal config takes defaults") {
    const auto c = parse_config(R"({"chain": {"n": 1, "E": 100}, "bath": {"kind": "ishizaki", "lambda": 35,
                                    "Gamma": 50, "nu": 10, "T": 295}, "t_max": 50})");
    CHECK(c.k_max == 0);
    CHECK(c.dt == 1.0);
    CHECK(c.n_ens == 1);
    CHECK(c.workers == 1);
    CHECK(c.clusters.mode == "full");
    CHECK(c.disorder.policy == "per_trajectory");
    CHECK(c.normalization == hops::Normalization::dyadic);
    CHECK(c.spectrum.zero_pad == 4);
    REQUIRE(c.polarizations.size() == 1);
    CHECK(c.polarizations[0] == exciton::Vec3{1.0, 0.0, 0.0});
    CHECK(c.violations().empty());
}

TEST_CASE("negative k_max is reported by field name") {
    try {
        parse_config(R"({"chain": {"n": 1, "E": 0}, "bath": {"kind": "ishizaki", "lambda": 35, "Gamma": 50,
                         "nu": 10, "T": 295}, "t_max": 10, "k_max": -1})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has_violation(e, "k_max"));
    }
}

TEST_CASE("every violation is listed, unknown keys included") {
    try {
        parse_config(R"({"chain": {"n": 2, "E": 0, "V": 1}, "bath": {"kind": "ishizaki", "lambda": 35,
                         "Gamma": 50, "nu": 10, "T": -5}, "t_max": 10, "dt": 3, "kmax": 2,
                         "disorder": {"sd": -1}, "failure_limit": 2, "seed": "abc"})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has_violation(e, "bath.T"));
        CHECK(has_violation(e, "t_max"));
        CHECK(has_violation(e, "config: unknown key \"kmax\""));
        CHECK(has_violation(e, "disorder.sd"));
        CHECK(has_violation(e, "failure_limit"));
        CHECK(has_violation(e, "seed"));
        CHECK(e.violations().size() >= 6);
    }
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"t_max": 10})"), ConfigError);
}

TEST_CASE("4-site chain configuration round-trips") {
    const auto a = parse_config(kFig2);
    const auto text = serialize_config(a);
    const auto b = parse_config(text);
    CHECK(serialize_config(b) == text);
    CHECK(b.chain->V == -100.0);
    CHECK(b.k_max == 5);
    CHECK(b.bath.T == 295.0);
    CHECK(b.clusters.mode == "singleton");
}

TEST_CASE("isotropic polarization and bath overrides") {
    auto c = parse_config(R"({"chain": {"n": 3, "E": 12000, "V": -500}, "bath": {"kind": "pbi"},
                              "polarizations": "isotropic", "t_max": 10})");
    CHECK(c.polarizations.size() == 3);
    const auto m = resolve_model(c);
    CHECK(m.size() == 3);
    CHECK(m.bath[2].size() == 2);
    CHECK(bcf_evaluate(m.bath[0], 0.0).real() == doctest::Approx(1.72e6));
    c.bath = {"drude_lorentz_ht", 35.0, 50.0, 0.0, 300.0, 500.0};
    CHECK(bcf_evaluate(resolve_model(c).bath[1], 0.0).imag() == 0.0);
}

TEST_CASE("model files resolve against the config directory") {
    const auto dir = scratch("modeldir");
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "m.json") << R"({"E": [100], "V": [[0]], "mu": [[1, 0, 0]],
                                            "bath_all": [{"g": [500, 0], "gamma": [50, 0]}]})";
        std::ofstream(dir / "run.json") << R"({"model_file": "m.json", "t_max": 20})";
    }
    const auto c = load_config((dir / "run.json").string());
    CHECK(std::filesystem::path(c.model_file).is_absolute());
    CHECK(resolve_model(c).E[0] == 100.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("plan with one cluster draws distinct noise seeds") {
    auto c = parse_config(kFig2);
    c.clusters.mode = "full";
    c.n_ens = 50;
    const auto p = build_plan(c);
    std::set<std::uint64_t> seeds, ids;
    for (const auto& e : p.entries) {
        CHECK(e.cluster == 0);
        seeds.insert(e.noise_seed);
        ids.insert(e.id);
    }
    CHECK(seeds.size() == 50);
    CHECK(ids.size() == 50);
    CHECK(p.warnings.empty());
}

TEST_CASE("stratified plan with N_ens = N_D samples each cluster once") {
    auto c = parse_config(kFig2);
    c.n_ens = 4;
    c.stratified = true;
    const auto p = build_plan(c);
    std::multiset<std::size_t> clusters;
    for (const auto& e : p.entries) clusters.insert(e.cluster);
    CHECK(clusters == std::multiset<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("cluster draws pass a chi-square uniformity test") {
    auto c = parse_config(kFig2);
    c.n_ens = 10000;
    const auto p = build_plan(c);
    std::vector<double> counts(4, 0.0);
    for (const auto& e : p.entries) counts[e.cluster] += 1.0;
    double chi2 = 0.0;
    for (double n : counts) chi2 += (n - 2500.0) * (n - 2500.0) / 2500.0;
    CHECK(chi2 < oracle::chi2_critical_99(3));
}

TEST_CASE("plans are reproducible and warn about undersampling") {
    auto c = parse_config(kFig2);
    c.n_ens = 3;
    const auto a = build_plan(c);
    const auto b = build_plan(c);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].noise_seed == b.entries[i].noise_seed);
        CHECK(a.entries[i].cluster == b.entries[i].cluster);
    }
    CHECK_FALSE(a.warnings.empty());
    c.n_ens = 6;
    c.stratified = true;
    CHECK_FALSE(build_plan(c).warnings.empty());
}

TEST_CASE("per-realization disorder shares seeds across trajectories") {
    auto c = parse_config(kFig2);
    c.n_ens = 12;
    c.disorder = {100.0, "per_realization", 3};
    const auto p = build_plan(c);
    std::map<std::uint64_t, int> per_seed;
    for (const auto& e : p.entries) per_seed[e.disorder_seed]++;
    CHECK(per_seed.size() == 3);
    for (const auto& [s, n] : per_seed) CHECK(n == 4);
    c.disorder.policy = "per_trajectory";
    std::set<std::uint64_t> distinct;
    for (const auto& e : build_plan(c).entries) distinct.insert(e.disorder_seed);
    CHECK(distinct.size() == 12);
}

TEST_CASE("greedy partitions come from the couplings") {
    auto c = parse_config(kFig2);
    c.chain->n = 8;
    c.clusters.mode = "greedy";
    c.clusters.size = 4;
    const auto m = resolve_model(c);
    const auto part = resolve_partition(c, m);
    CHECK(part.size() == 2);
    c.clusters.mode = "fixed";
    c.clusters.partition = {{0, 1, 2}, {3, 4, 5, 6, 7}};
    CHECK(resolve_partition(c, m).size() == 2);
    c.clusters.partition = {{0, 1, 2}, {2, 4, 5, 6, 7}};
    CHECK_THROWS(resolve_partition(c, m));
}

TEST_CASE("one uncoupled trajectory gives the analytic spectrum") {
    const auto dir = scratch("run_free");
    auto c = parse_config(R"({"chain": {"n": 1, "E": 100}, "bath": {"kind": "ishizaki", "lambda": 0,
                              "Gamma": 50, "nu": 10, "T": 295}, "t_max": 500, "dt": 2})");
    c.output_dir = dir.string();
    c.spectrum.bootstrap_resamples = 0;
    const auto s = run(build_plan(c), c, true);
    CHECK(s.failures == 0);
    for (std::size_t k = 0; k < s.correlation.size(); ++k) {
        const cplx exact = std::exp(cplx{0.0, -100.0 * s.correlation.t[k] / units::hbar});
        CHECK(std::abs(s.correlation.C[k] - exact) < 1e-9);
    }
    const auto p = response::main_peak(s.spectrum);
    CHECK(std::abs(p.omega - 100.0) < s.spectrum.d_omega());
    for (const char* f : {"config.echo.json", "correlation.txt", "spectrum.txt", "basis_stats.txt", "manifest.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    std::ifstream in(dir / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    CHECK(manifest.contains("config"));
    CHECK(manifest["units"].contains("hbar_cm-1_fs"));
    CHECK(manifest["noise_scheme"] == noise::kCirculantScheme);
    const auto echo = load_config((dir / "config.echo.json").string());
    CHECK(serialize_config(echo) == serialize_config(c));
    std::filesystem::remove_all(dir);
}

TEST_CASE("worker count does not change any trajectory") {
    auto c = parse_config(kFig2);
    c.k_max = 2;
    c.t_max = 100;
    c.n_ens = 12;
    c.delta_A = c.delta_S = 1e-2;
    c.disorder.sd = 50.0;
    c.spectrum.bootstrap_resamples = 10;
    const auto plan = build_plan(c);
    c.workers = 1;
    const auto a = run(plan, c, false);
    c.workers = 4;
    const auto b = run(plan, c, false);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
        CHECK(a.trajectories[i].normalized == b.trajectories[i].normalized);
        CHECK(a.trajectories[i].n_aux == b.trajectories[i].n_aux);
    }
    CHECK(a.correlation.C == b.correlation.C);
    CHECK(a.spectrum.A == b.spectrum.A);
    CHECK(a.bootstrap.errors == b.bootstrap.errors);
}

TEST_CASE("failing trajectories beyond the limit abort the run") {
    auto c = parse_config(R"({"chain": {"n": 2, "E": 0, "V": -100}, "bath": {"kind": "ishizaki",
                              "lambda": 1e9, "Gamma": 50, "nu": 10, "T": 295}, "t_max": 200, "dt": 10,
                              "k_max": 2, "n_ens": 4})");
    c.spectrum.bootstrap_resamples = 0;
    CHECK_THROWS_AS(run(build_plan(c), c, false), RunError);
}

}
