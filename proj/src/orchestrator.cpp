#include "adhops/orchestrator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "adhops/noise.hpp"
#include "adhops/simd/kernels.hpp"

namespace adhops::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kClusterStream = 2;
constexpr std::uint64_t kDisorderStream = 3;

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += "\n  - " + x;
    return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid configuration:" + join(violations)), violations_(std::move(violations)) {}

// --- parsing -------------------------------------------------------------------

namespace {

const char* to_string(hops::NoiseSampling s) { return s == hops::NoiseSampling::hold ? "hold" : "linear"; }
const char* to_string(hops::MemoryScheme m) { return m == hops::MemoryScheme::frozen ? "frozen" : "coupled"; }
const char* to_string(hops::Normalization n) { return n == hops::Normalization::dyadic ? "dyadic" : "standard"; }

class Reader {
public:
    explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

    void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> known) {
        if (!j.is_object()) {
            errors_.push_back(where + ": expected an object");
            return;
        }
        for (const auto& [key, value] : j.items()) {
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) errors_.push_back(where + ": unknown key \"" + key + "\"");
        }
    }

    template <class T>
    void get(const json& j, const char* key, T& out, const std::string& where) {
        if (!j.contains(key)) return;
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            errors_.push_back(where + key + ": wrong type");
        }
    }

private:
    std::vector<std::string>& errors_;
};

exciton::Vec3 polarization_from(const json& p, std::vector<std::string>& errors) {
    if (p.is_string()) {
        const auto s = p.get<std::string>();
        if (s == "x") return {1.0, 0.0, 0.0};
        if (s == "y") return {0.0, 1.0, 0.0};
        if (s == "z") return {0.0, 0.0, 1.0};
        errors.push_back("polarizations: unknown axis \"" + s + "\"");
        return {1.0, 0.0, 0.0};
    }
    if (p.is_array() && p.size() == 3) {
        try {
            return {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
        } catch (const json::exception&) {
        }
    }
    errors.push_back("polarizations: entries must be \"x\", \"y\", \"z\" or [x, y, z]");
    return {1.0, 0.0, 0.0};
}

}  // namespace

std::vector<std::string> RunConfig::violations() const {
    std::vector<std::string> v;
    if (model_file.empty() && !chain) v.push_back("model: give \"model_file\" or \"chain\"");
    if (!model_file.empty() && chain) v.push_back("model: \"model_file\" and \"chain\" are mutually exclusive");
    if (chain && chain->n == 0) v.push_back("chain.n: must be >= 1");
    if (bath.kind != "model" && bath.kind != "ishizaki" && bath.kind != "drude_lorentz_ht" && bath.kind != "pbi") {
        v.push_back("bath.kind: must be model, ishizaki, drude_lorentz_ht or pbi");
    }
    if (bath.kind == "ishizaki" || bath.kind == "drude_lorentz_ht") {
        if (!(bath.T > 0.0)) v.push_back("bath.T: temperature must be > 0 K");
        if (bath.lambda < 0.0) v.push_back("bath.lambda: must be >= 0");
        if (!(bath.Gamma > 0.0)) v.push_back("bath.Gamma: must be > 0");
    }
    if (bath.kind == "ishizaki" && bath.nu == 0.0) v.push_back("bath.nu: must be nonzero");
    if (bath.kind == "drude_lorentz_ht" && !(bath.Gamma_mark > 0.0)) v.push_back("bath.Gamma_mark: must be > 0");
    if (chain && bath.kind == "model") v.push_back("bath: a chain needs an explicit bath kind");
    if (polarizations.empty()) v.push_back("polarizations: need at least one");
    for (const auto& p : polarizations) {
        if (p[0] == 0.0 && p[1] == 0.0 && p[2] == 0.0) v.push_back("polarizations: zero vector");
    }
    if (k_max < 0) v.push_back("k_max: must be >= 0");
    if (!(dt > 0.0)) v.push_back("dt: must be > 0");
    if (!(t_max > 0.0)) v.push_back("t_max: must be > 0");
    if (dt > 0.0 && t_max > 0.0) {
        const double steps = t_max / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps) v.push_back("t_max: must be a multiple of dt");
    }
    if (output_stride < 1) v.push_back("output_stride: must be >= 1");
    if (!(delta_A >= 0.0)) v.push_back("delta_A: must be >= 0");
    if (!(delta_S >= 0.0)) v.push_back("delta_S: must be >= 0");
    if (update_stride < 1) v.push_back("update_stride: must be >= 1");
    if (clusters.mode != "full" && clusters.mode != "singleton" && clusters.mode != "fixed" && clusters.mode != "greedy") {
        v.push_back("clusters.mode: must be full, singleton, fixed or greedy");
    }
    if (clusters.mode == "fixed" && clusters.partition.empty()) v.push_back("clusters.partition: required for mode fixed");
    if (clusters.mode == "greedy" && clusters.size == 0) v.push_back("clusters.size: must be >= 1");
    if (n_ens < 1) v.push_back("n_ens: must be >= 1");
    if (!(disorder.sd >= 0.0)) v.push_back("disorder.sd: must be >= 0");
    if (disorder.policy != "per_trajectory" && disorder.policy != "per_realization") {
        v.push_back("disorder.policy: must be per_trajectory or per_realization");
    }
    if (disorder.realizations < 1) v.push_back("disorder.realizations: must be >= 1");
    if (workers < 1) v.push_back("workers: must be >= 1");
    if (output_dir.empty()) v.push_back("output_dir: must not be empty");
    if (spectrum.zero_pad < 1) v.push_back("spectrum.zero_pad: must be >= 1");
    if (spectrum.apodize_t < 0.0 || spectrum.apodize_t > t_max) v.push_back("spectrum.apodize_t: must lie in [0, t_max]");
    if (spectrum.bootstrap_resamples < 0) v.push_back("spectrum.bootstrap_resamples: must be >= 0");
    if (!(failure_limit >= 0.0 && failure_limit <= 1.0)) v.push_back("failure_limit: must lie in [0, 1]");
    return v;
}

hops::PropagationOptions RunConfig::propagation() const {
    hops::PropagationOptions o;
    o.dt = dt;
    o.t_max = t_max;
    o.output_stride = output_stride;
    o.k_max = k_max;
    o.normalization = normalization;
    o.noise_sampling = noise_sampling;
    o.memory = memory;
    o.adaptive = {delta_A, delta_S, update_stride};
    return o;
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
    std::vector<std::string> errors;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("not valid JSON: ") + e.what()});
    }
    Reader r(errors);
    r.check_keys(j, "config", {"model_file", "chain", "bath", "polarizations", "k_max", "dt", "t_max", "output_stride",
                               "delta_A", "delta_S", "update_stride", "clusters", "stratified", "n_ens", "disorder",
                               "seed", "workers", "output_dir", "integrator", "normalization", "spectrum",
                               "failure_limit", "write_records"});
    if (!j.is_object()) throw ConfigError(errors);

    RunConfig c;
    r.get(j, "model_file", c.model_file, "");
    if (!c.model_file.empty() && fs::path(c.model_file).is_relative()) {
        c.model_file = (fs::path(base_dir) / c.model_file).lexically_normal().string();
    }
    if (j.contains("chain")) {
        const auto& cj = j["chain"];
        r.check_keys(cj, "chain", {"n", "E", "V", "E_g"});
        ChainSpec ch;
        r.get(cj, "n", ch.n, "chain.");
        r.get(cj, "E", ch.E, "chain.");
        r.get(cj, "V", ch.V, "chain.");
        r.get(cj, "E_g", ch.E_g, "chain.");
        c.chain = ch;
    }
    if (j.contains("bath")) {
        const auto& bj = j["bath"];
        r.check_keys(bj, "bath", {"kind", "lambda", "Gamma", "nu", "T", "Gamma_mark"});
        r.get(bj, "kind", c.bath.kind, "bath.");
        r.get(bj, "lambda", c.bath.lambda, "bath.");
        r.get(bj, "Gamma", c.bath.Gamma, "bath.");
        r.get(bj, "nu", c.bath.nu, "bath.");
        r.get(bj, "T", c.bath.T, "bath.");
        r.get(bj, "Gamma_mark", c.bath.Gamma_mark, "bath.");
    }
    if (j.contains("polarizations")) {
        const auto& pj = j["polarizations"];
        c.polarizations.clear();
        if (pj.is_string() && pj.get<std::string>() == "isotropic") {
            c.polarizations = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
        } else if (pj.is_array()) {
            for (const auto& p : pj) c.polarizations.push_back(polarization_from(p, errors));
        } else {
            errors.push_back("polarizations: expected \"isotropic\" or a list");
        }
    }
    r.get(j, "k_max", c.k_max, "");
    r.get(j, "dt", c.dt, "");
    r.get(j, "t_max", c.t_max, "");
    r.get(j, "output_stride", c.output_stride, "");
    r.get(j, "delta_A", c.delta_A, "");
    r.get(j, "delta_S", c.delta_S, "");
    r.get(j, "update_stride", c.update_stride, "");
    if (j.contains("clusters")) {
        const auto& cj = j["clusters"];
        r.check_keys(cj, "clusters", {"mode", "partition", "size"});
        r.get(cj, "mode", c.clusters.mode, "clusters.");
        r.get(cj, "partition", c.clusters.partition, "clusters.");
        r.get(cj, "size", c.clusters.size, "clusters.");
    }
    r.get(j, "stratified", c.stratified, "");
    if (j.contains("n_ens") && j["n_ens"].is_number_integer() && j["n_ens"].get<long long>() < 1) {
        errors.push_back("n_ens: must be >= 1");
    } else {
        r.get(j, "n_ens", c.n_ens, "");
    }
    if (j.contains("disorder")) {
        const auto& dj = j["disorder"];
        r.check_keys(dj, "disorder", {"sd", "policy", "realizations"});
        r.get(dj, "sd", c.disorder.sd, "disorder.");
        r.get(dj, "policy", c.disorder.policy, "disorder.");
        r.get(dj, "realizations", c.disorder.realizations, "disorder.");
    }
    r.get(j, "seed", c.seed, "");
    r.get(j, "workers", c.workers, "");
    r.get(j, "output_dir", c.output_dir, "");
    if (j.contains("integrator")) {
        const auto& ij = j["integrator"];
        r.check_keys(ij, "integrator", {"noise_sampling", "memory"});
        std::string ns = to_string(c.noise_sampling), mem = to_string(c.memory);
        r.get(ij, "noise_sampling", ns, "integrator.");
        r.get(ij, "memory", mem, "integrator.");
        if (ns == "hold") c.noise_sampling = hops::NoiseSampling::hold;
        else if (ns == "linear") c.noise_sampling = hops::NoiseSampling::linear;
        else errors.push_back("integrator.noise_sampling: must be hold or linear");
        if (mem == "frozen") c.memory = hops::MemoryScheme::frozen;
        else if (mem == "coupled") c.memory = hops::MemoryScheme::coupled;
        else errors.push_back("integrator.memory: must be frozen or coupled");
    }
    if (j.contains("normalization")) {
        std::string n = to_string(c.normalization);
        r.get(j, "normalization", n, "");
        if (n == "dyadic") c.normalization = hops::Normalization::dyadic;
        else if (n == "standard") c.normalization = hops::Normalization::standard;
        else errors.push_back("normalization: must be dyadic or standard");
    }
    if (j.contains("spectrum")) {
        const auto& sj = j["spectrum"];
        r.check_keys(sj, "spectrum", {"zero_pad", "apodize_t", "bootstrap_resamples", "w_min", "w_max"});
        r.get(sj, "zero_pad", c.spectrum.zero_pad, "spectrum.");
        r.get(sj, "apodize_t", c.spectrum.apodize_t, "spectrum.");
        r.get(sj, "bootstrap_resamples", c.spectrum.bootstrap_resamples, "spectrum.");
        if (sj.contains("w_min")) {
            double w = 0.0;
            r.get(sj, "w_min", w, "spectrum.");
            c.spectrum.w_min = w;
        }
        if (sj.contains("w_max")) {
            double w = 0.0;
            r.get(sj, "w_max", w, "spectrum.");
            c.spectrum.w_max = w;
        }
    }
    r.get(j, "failure_limit", c.failure_limit, "");
    r.get(j, "write_records", c.write_records, "");

    for (auto& v : c.violations()) errors.push_back(std::move(v));
    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config file " + path});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

std::string serialize_config(const RunConfig& c) {
    json j;
    if (!c.model_file.empty()) j["model_file"] = c.model_file;
    if (c.chain) j["chain"] = {{"n", c.chain->n}, {"E", c.chain->E}, {"V", c.chain->V}, {"E_g", c.chain->E_g}};
    j["bath"] = {{"kind", c.bath.kind}, {"lambda", c.bath.lambda}, {"Gamma", c.bath.Gamma}, {"nu", c.bath.nu},
                 {"T", c.bath.T}, {"Gamma_mark", c.bath.Gamma_mark}};
    json pol = json::array();
    for (const auto& p : c.polarizations) pol.push_back({p[0], p[1], p[2]});
    j["polarizations"] = pol;
    j["k_max"] = c.k_max;
    j["dt"] = c.dt;
    j["t_max"] = c.t_max;
    j["output_stride"] = c.output_stride;
    j["delta_A"] = c.delta_A;
    j["delta_S"] = c.delta_S;
    j["update_stride"] = c.update_stride;
    j["clusters"] = {{"mode", c.clusters.mode}, {"partition", c.clusters.partition}, {"size", c.clusters.size}};
    j["stratified"] = c.stratified;
    j["n_ens"] = c.n_ens;
    j["disorder"] = {{"sd", c.disorder.sd}, {"policy", c.disorder.policy}, {"realizations", c.disorder.realizations}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["output_dir"] = c.output_dir;
    j["integrator"] = {{"noise_sampling", to_string(c.noise_sampling)}, {"memory", to_string(c.memory)}};
    j["normalization"] = to_string(c.normalization);
    json sp = {{"zero_pad", c.spectrum.zero_pad},
               {"apodize_t", c.spectrum.apodize_t},
               {"bootstrap_resamples", c.spectrum.bootstrap_resamples}};
    if (c.spectrum.w_min) sp["w_min"] = *c.spectrum.w_min;
    if (c.spectrum.w_max) sp["w_max"] = *c.spectrum.w_max;
    j["spectrum"] = sp;
    j["failure_limit"] = c.failure_limit;
    j["write_records"] = c.write_records;
    return j.dump(2);
}

// --- model and plan ------------------------------------------------------------

exciton::AggregateModel resolve_model(const RunConfig& c) {
    bath::ModeList modes;
    const auto& b = c.bath;
    if (b.kind == "ishizaki") modes = bath::build_ishizaki_pair(b.lambda, b.Gamma, b.nu, b.T);
    else if (b.kind == "drude_lorentz_ht") modes = bath::build_drude_lorentz_ht(b.lambda, b.Gamma, b.T, b.Gamma_mark);
    else if (b.kind == "pbi") modes = {{cplx{1.2e5, 0.0}, cplx{50.0, 170.0}}, {cplx{1.6e6, 0.0}, cplx{100.0, 1550.0}}};

    exciton::AggregateModel m;
    if (c.chain) {
        m = exciton::make_chain(c.chain->n, c.chain->E, c.chain->V, modes, {1.0, 0.0, 0.0}, c.chain->E_g);
    } else {
        m = exciton::load_model(c.model_file);
        if (b.kind != "model") m.bath.pigments.assign(m.size(), modes);
    }
    m.validate();
    return m;
}

exciton::Partition resolve_partition(const RunConfig& c, const exciton::AggregateModel& m) {
    if (c.clusters.mode == "singleton") return exciton::singleton_partition(m.size());
    if (c.clusters.mode == "greedy") return exciton::greedy_strong_coupling_clusters(m.V, c.clusters.size);
    if (c.clusters.mode == "fixed") {
        exciton::validate_partition(c.clusters.partition, m.size());
        return c.clusters.partition;
    }
    return exciton::full_partition(m.size());
}

SamplePlan build_plan(const RunConfig& c, const exciton::Partition& partition) {
    SamplePlan plan;
    plan.partition = partition;
    const std::size_t nd = partition.size();
    if (c.n_ens < nd) {
        plan.warnings.push_back("n_ens = " + std::to_string(c.n_ens) + " is below the number of clusters (" +
                                std::to_string(nd) + "); some clusters are never sampled");
    }
    if (c.stratified && c.n_ens % nd != 0) {
        plan.warnings.push_back("stratified plan: n_ens is not a multiple of the cluster count");
    }
    plan.entries.reserve(c.n_ens);
    for (std::uint64_t id = 0; id < c.n_ens; ++id) {
        PlanEntry e;
        e.id = id;
        e.noise_seed = noise::subseed(c.seed, id, 0, kNoiseStream);
        if (c.stratified) {
            e.cluster = static_cast<std::size_t>(id % nd);
        } else if (nd > 1) {
            std::mt19937_64 rng(noise::subseed(c.seed, id, 0, kClusterStream));
            e.cluster = std::uniform_int_distribution<std::size_t>(0, nd - 1)(rng);
        }
        const std::uint64_t realization = c.disorder.policy == "per_realization" ? id % c.disorder.realizations : id;
        e.disorder_seed = noise::subseed(c.seed, realization, 0, kDisorderStream);
        plan.entries.push_back(e);
    }
    return plan;
}

SamplePlan build_plan(const RunConfig& c) { return build_plan(c, resolve_partition(c, resolve_model(c))); }

// --- execution -----------------------------------------------------------------

namespace {

TrajectoryResult run_entry(const PlanEntry& entry, const RunConfig& c, const exciton::AggregateModel& model,
                           const hops::HopsSystem& base_system, const exciton::Partition& partition,
                           const noise::NoiseGenerator& generator, const hops::PropagationOptions& options,
                           const std::shared_ptr<const hops::BasisLayout>& layout, std::size_t n_points) {
    TrajectoryResult r;
    r.entry = entry;
    try {
        exciton::AggregateModel m = model;
        hops::HopsSystem sys = base_system;
        if (c.disorder.sd > 0.0) {
            m = exciton::sample_disorder(model, c.disorder.sd, entry.disorder_seed);
            sys.set_site_energies(m.E);
        }
        const noise::NoiseTrajectory z = generator.generate(entry.noise_seed, 0);
        hops::PropagationOptions opt = options;
        opt.e_ref = std::accumulate(model.E.begin(), model.E.end(), 0.0) / static_cast<double>(model.size());
        for (const auto& p : c.polarizations) {
            const auto pol = exciton::Polarization::along(p);
            const auto dec = exciton::decompose_dipole(m, pol, partition);
            const auto& cl = dec.clusters[entry.cluster];
            if (cl.weight == 0.0) {
                r.normalized.emplace_back();
                continue;
            }
            const auto sup = exciton::excited_superposition(m, pol);
            auto rec = hops::propagate_trajectory(sys, cl.state, sup.psi_ex, z, opt, layout);
            rec.info = "cluster " + std::to_string(entry.cluster);
            r.normalized.push_back(response::correlation_from_record(rec, m.E_g));
            if (r.n_aux.empty()) {
                r.n_aux = rec.n_aux;
                r.n_state = rec.n_state;
            }
            if (c.write_records) {
                hops::write_record((fs::path(c.output_dir) / "records" /
                                    ("traj_" + std::to_string(entry.id) + "_pol" + std::to_string(r.normalized.size() - 1) + ".txt"))
                                       .string(),
                                   rec);
            }
        }
        if (r.n_aux.empty()) {
            r.n_aux.assign(n_points, 0);
            r.n_state.assign(n_points, 0);
        }
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

}  // namespace

RunSummary run(const SamplePlan& plan, const RunConfig& c, bool write_outputs,
               const std::function<void(std::size_t, std::size_t)>& progress) {
    const auto violations = c.violations();
    if (!violations.empty()) throw ConfigError(violations);
    if (plan.entries.empty()) throw RunError("run: empty plan");
    const auto started = std::chrono::steady_clock::now();

    const exciton::AggregateModel model = resolve_model(c);
    const hops::HopsSystem system = hops::HopsSystem::from_model(model);
    const hops::PropagationOptions options = c.propagation();
    const std::size_t n_steps = options.n_steps();
    const std::size_t n_points = n_steps / static_cast<std::size_t>(c.output_stride) + 1;
    const noise::NoiseGenerator generator(model.bath, c.dt, n_steps);
    std::shared_ptr<const hops::BasisLayout> layout;
    if (!options.adaptive.enabled()) {
        layout = std::make_shared<const hops::BasisLayout>(hops::BasisLayout::full(system, c.k_max));
    }
    if (write_outputs) {
        fs::create_directories(c.output_dir);
        if (c.write_records) fs::create_directories(fs::path(c.output_dir) / "records");
        std::ofstream(fs::path(c.output_dir) / "config.echo.json") << serialize_config(c) << '\n';
    }

    RunSummary out;
    out.trajectories.resize(plan.entries.size());
    std::atomic<std::size_t> next{0}, done{0};
    std::mutex progress_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= plan.entries.size()) return;
            out.trajectories[i] = run_entry(plan.entries[i], c, model, system, plan.partition, generator, options,
                                            layout, n_points);
            const std::size_t d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, plan.entries.size());
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(c.workers, static_cast<int>(plan.entries.size())));
    std::vector<std::thread> threads;
    for (int w = 1; w < n_workers; ++w) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    // Deterministic reduction in plan order.
    std::vector<double> tgrid(n_points);
    for (std::size_t k = 0; k < n_points; ++k) tgrid[k] = c.dt * static_cast<double>(k * static_cast<std::size_t>(c.output_stride));
    std::vector<std::vector<std::vector<cplx>>> per_pol_terms(c.polarizations.size());
    std::vector<std::vector<cplx>> iso_terms;
    out.mean_n_aux.assign(n_points, 0.0);
    out.mean_n_state.assign(n_points, 0.0);
    std::size_t ok = 0;
    std::vector<double> weights_cache;
    for (const auto& r : out.trajectories) {
        if (!r.ok) {
            ++out.failures;
            continue;
        }
        ++ok;
        for (std::size_t k = 0; k < n_points; ++k) {
            out.mean_n_aux[k] += r.n_aux[k];
            out.mean_n_state[k] += r.n_state[k];
        }
    }
    const double fail_frac = static_cast<double>(out.failures) / static_cast<double>(plan.entries.size());
    if (ok == 0 || fail_frac > c.failure_limit) {
        std::string first;
        for (const auto& r : out.trajectories) {
            if (!r.ok) {
                first = r.error;
                break;
            }
        }
        throw RunError("run: " + std::to_string(out.failures) + " of " + std::to_string(plan.entries.size()) +
                       " trajectories failed (limit " + std::to_string(c.failure_limit) + "); first error: " + first);
    }
    for (std::size_t k = 0; k < n_points; ++k) {
        out.mean_n_aux[k] /= static_cast<double>(ok);
        out.mean_n_state[k] /= static_cast<double>(ok);
    }

    // Estimator terms: mu_tot N_D A_d * normalized, averaged over polarizations.
    const std::size_t nd = plan.partition.size();
    double mu_tot_mean = 0.0;
    std::vector<std::vector<double>> weights(c.polarizations.size());
    std::vector<double> mu_tot(c.polarizations.size());
    for (std::size_t p = 0; p < c.polarizations.size(); ++p) {
        const auto dec = exciton::decompose_dipole(model, exciton::Polarization::along(c.polarizations[p]), plan.partition);
        for (const auto& cl : dec.clusters) weights[p].push_back(cl.weight);
        mu_tot[p] = dec.mu_tot;
        mu_tot_mean += dec.mu_tot / static_cast<double>(c.polarizations.size());
    }
    for (const auto& r : out.trajectories) {
        if (!r.ok) continue;
        std::vector<cplx> x(n_points, cplx{0.0, 0.0});
        for (std::size_t p = 0; p < c.polarizations.size(); ++p) {
            if (r.normalized[p].empty()) continue;
            // with disorder the weights only depend on dipoles, so the model weights apply
            const double scale = mu_tot[p] * static_cast<double>(nd) * weights[p][r.entry.cluster] /
                                 static_cast<double>(c.polarizations.size());
            for (std::size_t k = 0; k < n_points; ++k) x[k] += scale * r.normalized[p][k];
        }
        iso_terms.push_back(std::move(x));
    }
    out.correlation = response::mean_series(iso_terms, tgrid);
    out.correlation.mu_tot = mu_tot_mean;
    out.correlation.n_clusters = nd;
    response::CorrelationSeries windowed = out.correlation;
    if (c.spectrum.apodize_t > 0.0) windowed = response::apodize(windowed, c.spectrum.apodize_t);
    out.spectrum = response::spectrum(windowed, c.spectrum.zero_pad);

    response::SpectralWindow sw;
    sw.zero_pad = c.spectrum.zero_pad;
    sw.apodize_t = c.spectrum.apodize_t;
    if (c.spectrum.w_min) sw.w_min = *c.spectrum.w_min;
    if (c.spectrum.w_max) sw.w_max = *c.spectrum.w_max;
    if (c.spectrum.bootstrap_resamples > 0 && iso_terms.size() >= 2) {
        try {
            out.bootstrap = response::bootstrap_error(iso_terms, tgrid, c.spectrum.bootstrap_resamples,
                                                      noise::subseed(c.seed, 0, 0, 99), sw);
        } catch (const std::domain_error&) {
            // reference spectrum with no positive area in the window; leave the report empty
        }
    }

    if (write_outputs) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::ostringstream meta;
        meta << "seed " << c.seed << " k_max " << c.k_max << " delta_A " << c.delta_A << " delta_S " << c.delta_S
             << " dt " << c.dt << " n_ens " << c.n_ens << " n_ok " << ok;
        const std::vector<std::string> header{meta.str(), "hbar_cm-1_fs " + std::to_string(units::hbar) +
                                                              " k_B_cm-1_per_K " + std::to_string(units::k_boltzmann)};
        response::write_correlation((fs::path(c.output_dir) / "correlation.txt").string(), out.correlation, header);
        response::write_spectrum((fs::path(c.output_dir) / "spectrum.txt").string(), out.spectrum, header);
        {
            std::ofstream bs(fs::path(c.output_dir) / "basis_stats.txt");
            bs << "# t_fs mean_n_aux mean_n_state\n" << std::setprecision(10);
            for (std::size_t k = 0; k < n_points; ++k) bs << tgrid[k] << ' ' << out.mean_n_aux[k] << ' ' << out.mean_n_state[k] << '\n';
        }
        {
            std::ofstream br(fs::path(c.output_dir) / "bootstrap.txt");
            br << "# resamples " << out.bootstrap.errors.size() << '\n' << std::setprecision(10);
            br << "mean_error " << out.bootstrap.mean_error << "\nlower_2.5 " << out.bootstrap.lower << "\nupper_97.5 "
               << out.bootstrap.upper << '\n';
        }
        {
            std::ofstream fl(fs::path(c.output_dir) / "failures.txt");
            for (const auto& r : out.trajectories) {
                if (!r.ok) fl << r.entry.id << ' ' << r.error << '\n';
            }
        }
        json manifest;
        manifest["config"] = json::parse(serialize_config(c));
        manifest["units"] = {{"hbar_cm-1_fs", units::hbar}, {"k_B_cm-1_per_K", units::k_boltzmann}};
        manifest["noise_scheme"] = noise::kCirculantScheme;
        manifest["kernel_isa"] = std::string(simd::isa_name(simd::active().isa));
        manifest["version"] = "0.1.0";
        manifest["trajectories"] = {{"planned", plan.entries.size()}, {"ok", ok}, {"failed", out.failures}};
        manifest["partition"] = plan.partition;
        manifest["warnings"] = plan.warnings;
        manifest["outputs"] = {"correlation.txt", "spectrum.txt", "basis_stats.txt", "bootstrap.txt", "failures.txt"};
        manifest["wall_seconds"] = elapsed;
        std::ofstream(fs::path(c.output_dir) / "manifest.json") << manifest.dump(2) << '\n';
    }
    return out;
}

}  // namespace adhops::orchestrator
