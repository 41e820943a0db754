// memorybeam: simulate | certify | stability | converge
//
// Exit status: 0 success, 1 failed verdict or solver failure, 2 configuration
// or usage error.

#include "memorybeam/memorybeam.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using namespace memorybeam;

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "scenario file (key = value)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "random seed, overrides the config");
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_flag("--quiet", c.quiet, "do not echo the report");
}

ScenarioConfig load(const Common& c) {
    ScenarioConfig cfg;
    if (!c.config.empty()) {
        std::ifstream in(c.config);
        if (!in) throw ConfigError("--config", "cannot read '" + c.config + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = parse_config(ss.str());
    }
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

fs::path base_dir(const Common& c) { return c.config.empty() ? fs::path{} : fs::path(c.config).parent_path(); }

int finish(const ExperimentResult& res, const ScenarioConfig& cfg, const Common& c) {
    write_file_atomic(fs::path(c.out) / cfg.output.report, res.report);
    if (!c.quiet) std::cout << res.report;
    return res.passed ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semilinear fading-memory beam: simulation and stability certificates"};
    app.require_subcommand(1);

    Common common;
    CertifyOverrides overrides;
    auto* simulate = app.add_subcommand("simulate", "solve one scenario, write trajectory CSV and report");
    auto* certify = app.add_subcommand("certify", "evaluate the stability conditions for (C, omega, T)");
    auto* stability = app.add_subcommand("stability", "envelope and attractor checks on a random batch");
    auto* converge = app.add_subcommand("converge", "temporal and spatial refinement study");
    for (auto* cmd : {simulate, certify, stability, converge}) add_common(cmd, common);
    certify->add_option("--C", overrides.C, "Lipschitz constant of the forcing");
    certify->add_option("--omega", overrides.omega, "decay rate of the semigroup (D = 1)");
    certify->add_option("--T", overrides.T, "kernel width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        const auto cfg = load(common);
        if (certify->parsed()) return finish(run_certify(cfg, overrides), cfg, common);
        const auto sc = build_scenario(cfg, base_dir(common));
        if (simulate->parsed()) return finish(run_simulate(sc, common.out), cfg, common);
        if (stability->parsed()) return finish(run_stability(sc, common.out), cfg, common);
        return finish(run_converge(sc, common.out), cfg, common);
    } catch (const ConfigError& e) {
        std::cerr << "memorybeam: configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const ConvergenceError& e) {
        std::cerr << "memorybeam: " << e.what() << "\n";
        return kFail;
    } catch (const std::exception& e) {
        std::cerr << "memorybeam: " << e.what() << "\n";
        return kFail;
    }
}
