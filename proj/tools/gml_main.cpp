// Command-line front end: dataset generation, training, evaluation, and
// report rendering for the gossip-mutual-learning benchmark, all driven by
// one JSON config plus a handful of flags.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gml/commands.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_override;
    std::uint64_t seed = 0;
    int threads = std::max(1u, std::thread::hardware_concurrency());
    bool verbose = false;
};

// Shared flags registered on every subcommand so both
// `gml train --config c.json` and `gml --help` read naturally.
void add_common_options(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path,
                    "Experiment config JSON (default: built-in 4-site benchmark)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_override,
                    std::string("Output root (overrides config and $") +
                        gml::kOutputRootEnvVar + ")");
    cmd->add_option("--seed", opts.seed, "Master seed override");
    cmd->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--verbose", opts.verbose, "Print progress details");
}

gml::ExperimentConfig make_config(const CLI::App* cmd, const CommonOpts& opts) {
    gml::ExperimentConfig cfg = opts.config_path.empty()
                                    ? gml::default_experiment_config()
                                    : gml::load_experiment_config(opts.config_path);
    if (cmd->count("--seed") > 0) cfg.master_seed = opts.seed;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gossip mutual learning simulator"};
    app.require_subcommand(1);
    CommonOpts opts;
    std::string method;

    CLI::App* generate = app.add_subcommand("generate-data", "Generate every site's dataset");
    add_common_options(generate, opts);
    generate->callback([&] {
        const gml::ExperimentConfig cfg = make_config(generate, opts);
        const std::filesystem::path root = gml::resolve_output_root(cfg, opts.out_override);
        gml::cmd_generate(cfg, root);
        if (opts.verbose) {
            std::cout << "wrote " << cfg.sites.size() << " site datasets under "
                      << gml::OutputPaths(root).data_dir().string() << "\n";
        }
    });

    CLI::App* train = app.add_subcommand("train", "Train one method on the generated data");
    add_common_options(train, opts);
    train->add_option("--method", method, "One of: gml, fedavg, pooled, individual")
        ->required()
        ->check(CLI::IsMember({"gml", "fedavg", "pooled", "individual"}));
    train->callback([&] {
        const gml::ExperimentConfig cfg = make_config(train, opts);
        const std::filesystem::path root = gml::resolve_output_root(cfg, opts.out_override);
        gml::cmd_train(cfg, method, root, opts.threads);
        if (opts.verbose) {
            std::cout << "trained '" << method << "'; artifacts under " << root.string() << "\n";
        }
    });

    CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate trained models and write the report");
    add_common_options(evaluate, opts);
    evaluate->callback([&] {
        const gml::ExperimentConfig cfg = make_config(evaluate, opts);
        const std::filesystem::path root = gml::resolve_output_root(cfg, opts.out_override);
        const gml::EvalReport report = gml::cmd_evaluate(cfg, root);
        std::cout << gml::render_report_text(report);
    });

    CLI::App* report = app.add_subcommand("report", "Print the stored evaluation report");
    add_common_options(report, opts);
    report->callback([&] {
        const gml::ExperimentConfig cfg = make_config(report, opts);
        std::cout << gml::cmd_report(gml::resolve_output_root(cfg, opts.out_override));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
