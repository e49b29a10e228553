// Command-line front end: one subcommand per experiment.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sburgers/harness.hpp"

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
};

int run(const Globals& g, const std::string& experiment) {
    using namespace sburgers;
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
    cfg.experiment = experiment;
    if (g.seed) cfg.seeds = {*g.seed};
    if (g.out) cfg.out_dir = *g.out;
    if (g.workers) cfg.workers = *g.workers;
    cfg.validate();
    const auto res = run_experiment(cfg);
    std::cout << res.summary.dump(2) << "\n";
    for (const auto& m : res.manifests) std::cerr << "manifest: " << m.string() << "\n";
    if (res.check_failures > 0) {
        std::cerr << "check failed for " << res.check_failures << " run(s)\n";
        return kExitCheck;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomly forced inviscid Burgers on the circle: solvers and diagnostics"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Run a single seed (overrides the config)");
    app.add_option("--out", g.out, "Output directory (overrides the config)");
    app.add_option("--workers", g.workers, "Worker threads for seed-level parallelism")->check(CLI::PositiveNumber);

    const std::pair<const char*, const char*> commands[] = {
        {"profile", "profile"},
        {"mainshock", "mainshock"},
        {"lyapunov", "lyapunov"},
        {"structure", "structure"},
        {"viscous-compare", "viscous_compare"},
        {"merge-stats", "merge_stats"},
        {"mollify", "mollify"},
        {"ensemble", "ensemble"},
        {"ergodicity", "ergodicity"},
    };
    std::string chosen;
    for (const auto& [name, experiment] : commands) {
        auto* sub = app.add_subcommand(name, std::string("Run the ") + experiment + " experiment");
        sub->callback([&chosen, e = std::string(experiment)] { chosen = e; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sburgers::kExitConfig;
    }

    try {
        return run(g, chosen);
    } catch (const sburgers::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return sburgers::kExitConfig;
    } catch (const sburgers::CheckError& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return sburgers::kExitCheck;
    } catch (const sburgers::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return sburgers::kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sburgers::kExitSolver;
    }
}
