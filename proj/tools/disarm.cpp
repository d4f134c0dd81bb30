#include <CLI11.hpp>
#include <iostream>

#include "disarm/cli.hpp"

// disarm <command> --config run.json [--seed N] [--jobs N] [--runs N]
//                  [--variant NAME] [--k N] [--checkpoint PATH]

int main(int argc, char** argv) {
    CLI::App app{"harmful-meme target detection toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<int> jobs;
    std::optional<int> runs;
    std::optional<int> top_k;
    std::string variant;
    std::string checkpoint;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--seed", seed, "override config seed");
        cmd->add_option("--jobs", jobs, "bound internal parallelism");
    };

    CLI::App* build = app.add_subcommand("build-dataset", "validate the manifest and build instance files");
    add_common(build);
    CLI::App* fetch = app.add_subcommand("fetch-contexts", "retrieve and cache meme contexts");
    add_common(fetch);
    CLI::App* train_cmd = app.add_subcommand("train", "train the model and save the best checkpoint");
    add_common(train_cmd);
    train_cmd->add_option("--runs", runs, "independent runs (mean +/- std summary)");
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint per test scenario");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint header path");
    CLI::App* ablate = app.add_subcommand("ablate", "run the ablation grid");
    add_common(ablate);
    ablate->add_option("--variant", variant, "run a single variant");
    CLI::App* stats = app.add_subcommand("stats", "corpus statistics tables and histograms");
    add_common(stats);
    stats->add_option("--k", top_k, "top-k entities per table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints the message; --help exits 0
        return code == 0 ? 0 : 2;
    }

    try {
        disarm::config::RunConfig cfg = disarm::config::load_run_config(config_path);
        if (seed) cfg.seed = *seed, cfg.train.seed = *seed;
        if (jobs) cfg.jobs = *jobs;
        if (runs) cfg.runs = *runs;
        if (top_k) cfg.top_k = *top_k;
        if (cfg.runs < 1 || cfg.jobs < 1 || cfg.top_k < 1)
            throw disarm::ConfigError("runs, jobs and k must be at least 1");

        if (build->parsed()) return disarm::cli::cmd_build_dataset(cfg);
        if (fetch->parsed()) return disarm::cli::cmd_fetch_contexts(cfg);
        if (train_cmd->parsed()) return disarm::cli::cmd_train(cfg);
        if (eval_cmd->parsed()) return disarm::cli::cmd_evaluate(cfg, checkpoint);
        if (ablate->parsed()) return disarm::cli::cmd_ablate(cfg, variant);
        if (stats->parsed()) return disarm::cli::cmd_stats(cfg);
    } catch (const disarm::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
