// Command-line front end for the PAoI toolkit: dataset generation, analytic
// breakdowns, Monte Carlo simulation, policy optimization, network training
// and the experiment/validation harness.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "paoi/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Peak-age-of-information toolkit for slotted D2D networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    std::size_t threads = 0;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--out-dir", out_dir, "override the config output directory");
    app.add_option("--threads", threads, "worker threads (0 = config value)");

    auto* gen = app.add_subcommand("gen", "generate train/test layout datasets");
    auto* analyze = app.add_subcommand("analyze", "closed-form per-link PAoI breakdown");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo slot simulation");
    auto* optimize = app.add_subcommand("optimize", "optimize a slot-access policy");
    auto* train = app.add_subcommand("train", "train the scheduling network");
    auto* infer = app.add_subcommand("infer", "run the trained network on a layout");
    auto* sweep = app.add_subcommand("paoi-vs-lambda", "mean PAoI against arrival rate");
    auto* cdf = app.add_subcommand("paoi-cdf", "per-layout PAoI distribution per method");
    auto* bench = app.add_subcommand("bench-timing", "optimizer wall time against network size");
    auto* validate = app.add_subcommand("validate", "run the oracle validation suite");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        paoi::HarnessConfig cfg =
            config_path.empty() ? paoi::HarnessConfig{} : paoi::load_config(config_path);
        if (seed_set) cfg.gen.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (threads != 0) {
            cfg.threads = threads;
            cfg.net.hyper.threads = threads;
        }

        if (gen->parsed()) paoi::cmd_gen_dataset(cfg);
        else if (analyze->parsed()) paoi::cmd_analyze(cfg);
        else if (simulate->parsed()) paoi::cmd_simulate(cfg);
        else if (optimize->parsed()) paoi::cmd_optimize(cfg);
        else if (train->parsed()) paoi::cmd_train(cfg);
        else if (infer->parsed()) paoi::cmd_infer(cfg);
        else if (sweep->parsed()) paoi::cmd_paoi_vs_lambda(cfg);
        else if (cdf->parsed()) paoi::cmd_paoi_cdf(cfg);
        else if (bench->parsed()) paoi::cmd_bench_timing(cfg);
        else if (validate->parsed()) return paoi::cmd_validate(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
