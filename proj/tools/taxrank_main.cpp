#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "taxrank/errors.hpp"
#include "taxrank/runner.hpp"
#include "taxrank/version.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> weights;
    std::optional<double> delta_max;
    std::optional<std::string> out_dir;
    bool trace = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Run configuration file (JSON)")
        ->required();
    cmd->add_option("--seed", args.seed, "Override seeds (profiles=N, metamorphic=N+1)");
    cmd->add_option("--weights", args.weights,
                    "Override similarity,majority-vote weights, e.g. 0.6,0.4");
    cmd->add_option("--delta-max", args.delta_max, "Override the tolerance-curve maximum delta");
    cmd->add_option("--out", args.out_dir, "Output directory (overrides config out_dir)");
    cmd->add_flag("--trace", args.trace, "Log generation requests/responses (token-redacted)");
}

taxrank::RunConfig load_config(const CommonArgs& args) {
    taxrank::CliOverrides overrides;
    overrides.seed = args.seed;
    if (args.weights) {
        double w_sim = 0.0, w_mv = 0.0;
        if (std::sscanf(args.weights->c_str(), "%lf,%lf", &w_sim, &w_mv) != 2) {
            throw taxrank::ConfigError("--weights expects two comma-separated values");
        }
        overrides.weights = taxrank::Weights{w_sim, w_mv};
    }
    overrides.delta_max = args.delta_max;
    if (args.out_dir) overrides.out_dir = *args.out_dir;
    overrides.trace = args.trace;
    return taxrank::load_run_config(args.config_path, overrides);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(taxrank::kToolName) +
                 " - consensus ranking and metamorphic validation of candidate tax calculators"};
    app.set_version_flag("--version", std::string(taxrank::kToolVersion));
    app.require_subcommand(1);

    CommonArgs score_args, metatest_args, pipeline_args, report_args;
    std::string candidate_id;

    CLI::App* score = app.add_subcommand("score", "Rank a candidate pool and emit score reports");
    add_common(score, score_args);

    CLI::App* metatest =
        app.add_subcommand("metatest", "Run the metamorphic suite against one candidate");
    add_common(metatest, metatest_args);
    metatest->add_option("--candidate", candidate_id, "Candidate id, e.g. \"Version 1\"")
        ->required();

    CLI::App* pipeline = app.add_subcommand(
        "pipeline", "Iterate generate -> score -> metatest -> feedback until pass");
    add_common(pipeline, pipeline_args);

    CLI::App* report = app.add_subcommand("report", "Print the tables from an existing report");
    add_common(report, report_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : taxrank::kExitUsage;
    }

    try {
        if (score->parsed()) {
            return taxrank::cmd_score(load_config(score_args), std::cout, std::cerr);
        }
        if (metatest->parsed()) {
            return taxrank::cmd_metatest(load_config(metatest_args), candidate_id, std::cout,
                                         std::cerr);
        }
        if (pipeline->parsed()) {
            return taxrank::cmd_pipeline(load_config(pipeline_args), std::cout, std::cerr);
        }
        if (report->parsed()) {
            return taxrank::cmd_report(load_config(report_args), std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return taxrank::kExitUsage;
    }
    return taxrank::kExitUsage;
}
