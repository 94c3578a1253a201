// Command-line front end: each subcommand runs one experiment from a config
// file, optionally overriding the output directory and master seed.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aqr/experiments.hpp"

namespace {

struct SubcommandArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    bool seed_set = false;
};

int run(aqr::ExperimentKind kind, const SubcommandArgs& args) {
    aqr::ExperimentConfig cfg = aqr::parse_config(args.config_path);
    if (cfg.experiment != kind)
        throw aqr::ConfigError(std::string("config declares experiment '") +
                               aqr::to_string(cfg.experiment) + "' but subcommand is '" +
                               aqr::to_string(kind) + "'");
    if (!args.out_dir.empty())
        cfg.output_dir = args.out_dir;
    if (args.seed_set)
        cfg.master_seed = static_cast<std::uint64_t>(args.seed);

    const auto files = aqr::run_experiment(cfg);
    std::cout << "experiment " << aqr::to_string(kind) << " wrote " << files.size()
              << " files to " << cfg.output_dir << ":\n";
    for (const auto& f : files)
        std::cout << "  " << f << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive quantile recalibration experiments"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, aqr::ExperimentKind>> subcommands = {
        {"setup", aqr::ExperimentKind::Setup},
        {"adapt", aqr::ExperimentKind::Adapt},
        {"theory-rates", aqr::ExperimentKind::TheoryRates},
        {"tail-ablation", aqr::ExperimentKind::TailAblation},
        {"tail-deviation", aqr::ExperimentKind::TailDeviation},
        {"kde-demo", aqr::ExperimentKind::KdeDemo},
        {"granularity", aqr::ExperimentKind::Granularity},
    };

    std::vector<SubcommandArgs> args(subcommands.size());
    std::vector<CLI::App*> apps;
    for (std::size_t i = 0; i < subcommands.size(); ++i) {
        CLI::App* sub = app.add_subcommand(subcommands[i].first,
                                           "run the " + subcommands[i].first + " experiment");
        sub->add_option("--config", args[i].config_path, "experiment config file")->required();
        sub->add_option("--out", args[i].out_dir, "output directory (overrides config)");
        sub->add_option("--seed", args[i].seed, "master seed (overrides config)");
        apps.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < subcommands.size(); ++i) {
        if (!apps[i]->parsed())
            continue;
        args[i].seed_set = apps[i]->count("--seed") > 0;
        try {
            return run(subcommands[i].second, args[i]);
        } catch (const aqr::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }
    }
    return 1;
}
