#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "omega/scenario.hpp"

int main(int argc, char** argv) {
    using namespace omega;
    CLI::App app{"Omega-ratio pension solver with a VaR floor"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::optional<int> nodes;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool diagnostic = false;
    app.add_option("--quadrature-nodes", nodes, "Quadrature nodes (default 400)")->check(CLI::Range(64, 1 << 20));
    app.add_option("--seed", seed, "Seed for the strategy path");
    app.add_option("--out", out_dir, "Output directory (overrides the config)");
    app.add_flag("--diagnostic", diagnostic, "Evaluate the configured (nu, lambda, beta) triples only");
    std::string command;
    for (const char* name : {"solve", "sweep", "compare"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("config", config_path, "Scenario JSON or run manifest")->required()->check(CLI::ExistingFile);
        sub->callback([&command, name] { command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Failure);
    }

    try {
        ScenarioConfig cfg = load_config(config_path);
        if (nodes) cfg.quad.nodes = *nodes;
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.output = *out_dir;
        if (diagnostic) cfg.diagnostic = true;
        if (command == "sweep" && !cfg.sweep) throw config_error("config field '/sweep': required by the sweep command");

        ScenarioOutcome r = command == "compare" ? compare_modes(cfg) : run_scenario(cfg, command);
        if (r.rescale.mode != "none")
            std::printf("rescale %s factor %.17g window [%.17g, %.17g]\n", r.rescale.mode.c_str(), r.rescale.factor,
                        r.rescale.window_lower, r.rescale.window_upper);
        for (const auto& p : r.points) {
            std::printf("%s", p.verdict.c_str());
            if (!p.label.empty()) std::printf(" %s", p.label.c_str());
            if (p.result && p.result->solution)
                std::printf(" nu=%.10g lambda=%.10g beta=%.10g", p.result->nu, p.result->lambda, p.result->beta);
            if (p.result && p.result->p) std::printf(" sup_P=%.10g", *p.result->p);
            if (!p.error.empty()) std::printf(" error: %s", p.error.c_str());
            std::printf("\n");
        }
        std::printf("artifacts in %s\n", cfg.output.c_str());
        return static_cast<int>(r.code);
    } catch (const config_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return static_cast<int>(ExitCode::Failure);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ExitCode::Numerical);
    }
}
