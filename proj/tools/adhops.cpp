// adhops: command line front end.
//
//   adhops run <config.json> [--workers N] [--output DIR] [--quiet]
//   adhops validate <config.json>
//   adhops plan <config.json> [--limit N]
//   adhops spectrum <correlation.txt> [--pad 4] [--apodize T] [-o spectrum.txt]
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "adhops/orchestrator.hpp"
#include "adhops/response.hpp"

namespace orch = adhops::orchestrator;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

void print_violations(const orch::ConfigError& e) {
    std::cerr << "invalid configuration:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
}

int cmd_validate(const std::string& path) {
    const auto config = orch::load_config(path);
    const auto model = orch::resolve_model(config);
    const auto partition = orch::resolve_partition(config, model);
    std::cout << "ok: " << model.size() << " pigments, " << model.bath.total_modes() << " bath modes, "
              << partition.size() << " clusters, " << config.n_ens << " trajectories\n";
    return kOk;
}

int cmd_plan(const std::string& path, std::size_t limit) {
    const auto config = orch::load_config(path);
    const auto plan = orch::build_plan(config);
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "# clusters";
    for (const auto& c : plan.partition) {
        std::cout << " {";
        for (std::size_t i = 0; i < c.size(); ++i) std::cout << (i ? "," : "") << c[i];
        std::cout << '}';
    }
    std::cout << "\n# id cluster noise_seed disorder_seed\n";
    std::size_t shown = 0;
    for (const auto& e : plan.entries) {
        if (limit && shown++ >= limit) {
            std::cout << "# ... " << plan.entries.size() - limit << " more\n";
            break;
        }
        std::cout << e.id << ' ' << e.cluster << ' ' << e.noise_seed << ' ' << e.disorder_seed << '\n';
    }
    return kOk;
}

int cmd_run(const std::string& path, int workers, const std::string& output, bool quiet) {
    auto config = orch::load_config(path);
    if (workers > 0) config.workers = workers;
    if (!output.empty()) config.output_dir = output;
    const auto plan = orch::build_plan(config);
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << '\n';
    std::size_t last_pct = 101;
    auto progress = [&](std::size_t done, std::size_t total) {
        if (quiet) return;
        const std::size_t pct = 100 * done / total;
        if (pct != last_pct && (pct % 5 == 0 || done == total)) {
            std::fprintf(stderr, "\r%3zu%% (%zu/%zu)", pct, done, total);
            if (done == total) std::fputc('\n', stderr);
            last_pct = pct;
        }
    };
    const auto summary = orch::run(plan, config, true, progress);
    std::cout << "wrote " << config.output_dir << " (" << summary.trajectories.size() - summary.failures << " ok, "
              << summary.failures << " failed)\n";
    return kOk;
}

int cmd_spectrum(const std::string& path, int pad, double apodize_t, const std::string& output) {
    auto C = adhops::response::read_correlation(path);
    if (apodize_t > 0.0) C = adhops::response::apodize(C, apodize_t);
    const auto A = adhops::response::spectrum(C, pad);
    adhops::response::write_spectrum(output, A, {"source " + path});
    std::cout << "wrote " << output << " (" << A.size() << " points)\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear absorption spectra with adaptive dyadic HOPS"};
    app.require_subcommand(1);

    std::string config_path;
    int workers = 0;
    std::string output;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run the trajectory ensemble described by a config");
    run->add_option("config", config_path, "Run configuration (JSON)")->required();
    run->add_option("-w,--workers", workers, "Worker threads (overrides the config)");
    run->add_option("-o,--output", output, "Output directory (overrides the config)");
    run->add_flag("-q,--quiet", quiet, "No progress output");

    auto* validate = app.add_subcommand("validate", "Check a config and the model it references");
    validate->add_option("config", config_path, "Run configuration (JSON)")->required();

    std::size_t limit = 0;
    auto* plan = app.add_subcommand("plan", "Print the sample plan without running it");
    plan->add_option("config", config_path, "Run configuration (JSON)")->required();
    plan->add_option("-n,--limit", limit, "Print at most this many entries");

    std::string corr_path;
    int pad = 4;
    double apodize_t = 0.0;
    std::string spec_out = "spectrum.txt";
    auto* spec = app.add_subcommand("spectrum", "Transform a stored correlation function");
    spec->add_option("correlation", corr_path, "Correlation file (t, Re C, Im C)")->required();
    spec->add_option("--pad", pad, "Zero padding factor")->check(CLI::PositiveNumber);
    spec->add_option("--apodize", apodize_t, "Cosine window length in fs (0 disables)")->check(CLI::NonNegativeNumber);
    spec->add_option("-o,--output", spec_out, "Spectrum output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*run) return cmd_run(config_path, workers, output, quiet);
        if (*validate) return cmd_validate(config_path);
        if (*plan) return cmd_plan(config_path, limit);
        if (*spec) return cmd_spectrum(corr_path, pad, apodize_t, spec_out);
    } catch (const orch::ConfigError& e) {
        print_violations(e);
        return kInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
