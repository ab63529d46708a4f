#pragma once

// Run configuration, ensemble planning and execution.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adhops/exciton.hpp"
#include "adhops/propagate.hpp"
#include "adhops/response.hpp"

namespace adhops::orchestrator {

// Carries every violation found while parsing or validating a config.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BathSelection {
    std::string kind = "model";  // model | ishizaki | drude_lorentz_ht | pbi
    double lambda = 0.0, Gamma = 0.0, nu = 0.0, T = 0.0, Gamma_mark = 0.0;
};

struct ChainSpec {
    std::size_t n = 0;
    double E = 0.0;
    double V = 0.0;
    double E_g = 0.0;
};

struct ClusterSpec {
    std::string mode = "full";  // full | singleton | fixed | greedy
    exciton::Partition partition;  // fixed
    std::size_t size = 4;          // greedy
};

struct DisorderSpec {
    double sd = 0.0;
    std::string policy = "per_trajectory";  // per_trajectory | per_realization
    std::size_t realizations = 1;
};

struct SpectrumSpec {
    int zero_pad = 4;
    double apodize_t = 0.0;
    int bootstrap_resamples = 200;
    std::optional<double> w_min, w_max;
};

struct RunConfig {
    std::string model_file;                 // resolved against the config directory
    std::optional<ChainSpec> chain;         // alternative to model_file
    BathSelection bath;
    std::vector<exciton::Vec3> polarizations{{1.0, 0.0, 0.0}};
    int k_max = 0;
    double dt = 1.0;
    double t_max = 0.0;
    int output_stride = 1;
    double delta_A = 0.0;
    double delta_S = 0.0;
    int update_stride = 1;
    ClusterSpec clusters;
    bool stratified = false;
    std::size_t n_ens = 1;
    DisorderSpec disorder;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string output_dir = "adhops_out";
    hops::NoiseSampling noise_sampling = hops::NoiseSampling::linear;
    hops::MemoryScheme memory = hops::MemoryScheme::coupled;
    hops::Normalization normalization = hops::Normalization::dyadic;
    SpectrumSpec spectrum;
    double failure_limit = 0.0;  // tolerated fraction of failed trajectories
    bool write_records = false;

    // Every violated invariant, empty when valid.
    std::vector<std::string> violations() const;
    hops::PropagationOptions propagation() const;
};

// Parses JSON text; `base_dir` resolves relative model paths. Throws
// ConfigError listing every problem (unknown keys, wrong types, bad values).
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);

// Model after the bath selection has been applied.
exciton::AggregateModel resolve_model(const RunConfig& config);
exciton::Partition resolve_partition(const RunConfig& config, const exciton::AggregateModel& model);

struct PlanEntry {
    std::uint64_t id = 0;
    std::uint64_t disorder_seed = 0;
    std::size_t cluster = 0;
    std::uint64_t noise_seed = 0;
};

struct SamplePlan {
    std::vector<PlanEntry> entries;
    exciton::Partition partition;
    std::vector<std::string> warnings;
};

SamplePlan build_plan(const RunConfig& config);
SamplePlan build_plan(const RunConfig& config, const exciton::Partition& partition);

// Per-trajectory result used by the reducer.
struct TrajectoryResult {
    PlanEntry entry;
    bool ok = false;
    std::string error;
    // One normalized correlation per polarization (empty when the cluster has zero weight).
    std::vector<std::vector<cplx>> normalized;
    std::vector<std::uint32_t> n_aux, n_state;
};

struct RunSummary {
    response::CorrelationSeries correlation;
    response::Spectrum spectrum;
    response::BootstrapResult bootstrap;
    std::vector<TrajectoryResult> trajectories;
    std::size_t failures = 0;
    std::vector<double> mean_n_aux, mean_n_state;  // per time point
};

// Executes the plan. Writes outputs when `write_outputs` is set. Throws
// RunError when the failure fraction exceeds config.failure_limit.
RunSummary run(const SamplePlan& plan, const RunConfig& config, bool write_outputs = true,
               const std::function<void(std::size_t done, std::size_t total)>& progress = {});

}  // namespace adhops::orchestrator
