#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "stefan/config.hpp"
#include "stefan/error.hpp"
#include "stefan/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Inverse one-phase Stefan problem solver"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool dry_run = false;
    app.add_option("--config", config_path, "experiment config (YAML)")->required();
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--seed", seed, "optimizer seed (overrides optimizer.seed)");
    app.add_flag("--dry-run", dry_run, "validate and print the plan without writing anything");

    const std::pair<const char*, const char*> verbs[] = {
        {"forward", "solve the forward problem for the configured controls"},
        {"invert", "minimize the discrete cost at one resolution"},
        {"study", "run the multi-level convergence study"},
        {"check", "run the diagnostics suite"}};
    for (const auto& [name, help] : verbs) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : stefan::kExitConfig;
    }

    stefan::Verb verb = stefan::Verb::Forward;
    const std::string used = app.get_subcommands().front()->get_name();
    if (used == "invert") verb = stefan::Verb::Invert;
    if (used == "study") verb = stefan::Verb::Study;
    if (used == "check") verb = stefan::Verb::Check;

    stefan::ExperimentConfig cfg;
    try {
        cfg = stefan::load_config(config_path);
    } catch (const stefan::Error& e) {
        std::cerr << "config error (" << stefan::to_string(e.kind()) << "): " << e.what() << '\n';
        return stefan::kExitConfig;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed) cfg.optimizer.seed = *seed;
    return stefan::run_experiment(cfg, verb, dry_run, std::cout);
}
