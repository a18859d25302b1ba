// invseg: investor-behaviour segmentation pipeline.
//
// Subcommands mirror the pipeline stages (synth, ingest, features, cluster,
// sweep, embed, stats, report) plus `run` for the whole chain. Every config
// key can be overridden from the command line; --seed fans out per stage.
// Exit codes: 0 success, 1 stage failure, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "invseg/error.hpp"
#include "invseg/pipeline.hpp"

namespace {

using invseg::pipeline::RunConfig;
using invseg::pipeline::StageRecord;

struct CliOverrides {
    std::optional<std::string> config_path;
    std::optional<std::string> output_dir;
    std::optional<uint64_t> seed;
    std::optional<std::string> clients;
    std::optional<std::string> transactions;
    std::optional<std::string> delimiter;
    std::optional<size_t> n_clients;
    std::optional<std::string> snapshot;
    std::optional<std::string> window_start;
    std::optional<double> sparse_threshold;
    std::optional<bool> standardize;
    std::optional<std::string> account_encoding;
    std::optional<std::string> distance_mode;
    std::optional<int> k;
    std::optional<int> k_min;
    std::optional<int> k_max;
    std::optional<int> restarts;
    std::optional<int> max_iterations;
    std::optional<double> perplexity;
    std::optional<int> embed_iterations;
    std::optional<double> learning_rate;
    std::optional<bool> svg;
    std::optional<size_t> bootstrap_b;
    std::optional<double> bootstrap_level;
    std::optional<std::string> adjustment;
    std::optional<size_t> heatmap_sample;
    std::optional<unsigned> threads;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("-c,--config", o.config_path, "Run configuration file (JSON)");
    cmd->add_option("-o,--output-dir", o.output_dir, "Output directory");
    cmd->add_option("--seed", o.seed, "Master seed, fanned out per stage");
    cmd->add_option("--clients", o.clients, "Client table path (skips synth)");
    cmd->add_option("--transactions", o.transactions, "Transaction table path");
    cmd->add_option("--delimiter", o.delimiter, "Input field delimiter");
    cmd->add_option("--n-clients", o.n_clients, "Synthetic population size");
    cmd->add_option("--snapshot", o.snapshot, "Cross-section date YYYY-MM-DD");
    cmd->add_option("--window-start", o.window_start, "Observation window start");
    cmd->add_option("--sparse-threshold", o.sparse_threshold,
                    "Missing-fraction threshold for dropping columns");
    cmd->add_option("--standardize", o.standardize, "Z-score numeric features");
    cmd->add_option("--account-encoding", o.account_encoding, "modal or proportions");
    cmd->add_option("--distance-mode", o.distance_mode, "l1 (literal) or squared");
    cmd->add_option("-k,--k", o.k, "Fixed cluster count (otherwise the sweep chooses)");
    cmd->add_option("--k-min", o.k_min, "Sweep lower bound");
    cmd->add_option("--k-max", o.k_max, "Sweep upper bound");
    cmd->add_option("--restarts", o.restarts, "Random restarts per fit");
    cmd->add_option("--max-iterations", o.max_iterations, "Iteration cap per restart");
    cmd->add_option("--perplexity", o.perplexity, "t-SNE perplexity");
    cmd->add_option("--embed-iterations", o.embed_iterations, "t-SNE iterations");
    cmd->add_option("--learning-rate", o.learning_rate, "t-SNE learning rate");
    cmd->add_option("--svg", o.svg, "Write the embedding scatter SVG");
    cmd->add_option("--bootstrap-b", o.bootstrap_b, "Bootstrap resamples");
    cmd->add_option("--bootstrap-level", o.bootstrap_level, "CI level in (0,1)");
    cmd->add_option("--adjustment", o.adjustment, "Dunn adjustment: holm, bonferroni, none");
    cmd->add_option("--heatmap-sample", o.heatmap_sample, "Stratified sample size");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
}

RunConfig build_config(const CliOverrides& o) {
    RunConfig config;
    if (o.config_path) config = invseg::pipeline::load_config(*o.config_path);
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (o.seed) config.seed = *o.seed;
    if (o.clients) config.clients_path = *o.clients;
    if (o.transactions) config.transactions_path = *o.transactions;
    if (o.delimiter) {
        if (o.delimiter->size() != 1) {
            throw invseg::ConfigError("delimiter must be a single character");
        }
        config.delimiter = (*o.delimiter)[0];
    }
    if (o.n_clients) config.synth_clients = *o.n_clients;
    if (o.snapshot) {
        const auto d = invseg::parse_date(*o.snapshot);
        if (!d) throw invseg::ConfigError("bad snapshot date '" + *o.snapshot + "'");
        config.snapshot = *d;
    }
    if (o.window_start) {
        const auto d = invseg::parse_date(*o.window_start);
        if (!d) throw invseg::ConfigError("bad window start '" + *o.window_start + "'");
        config.window_start = *d;
    }
    if (o.sparse_threshold) config.sparse_threshold = *o.sparse_threshold;
    if (o.standardize) config.standardize = *o.standardize;
    if (o.account_encoding) {
        if (*o.account_encoding == "modal") {
            config.account_encoding = invseg::features::AccountEncoding::Modal;
        } else if (*o.account_encoding == "proportions") {
            config.account_encoding = invseg::features::AccountEncoding::Proportions;
        } else {
            throw invseg::ConfigError("account encoding must be modal or proportions");
        }
    }
    if (o.distance_mode) {
        config.distance_mode = invseg::cluster::parse_distance_mode(*o.distance_mode);
    }
    if (o.k) config.k = *o.k;
    if (o.k_min) config.sweep_k_min = *o.k_min;
    if (o.k_max) config.sweep_k_max = *o.k_max;
    if (o.restarts) config.restarts = *o.restarts;
    if (o.max_iterations) config.max_iterations = *o.max_iterations;
    if (o.perplexity) config.perplexity = *o.perplexity;
    if (o.embed_iterations) config.embed_iterations = *o.embed_iterations;
    if (o.learning_rate) config.embed_learning_rate = *o.learning_rate;
    if (o.svg) config.write_svg = *o.svg;
    if (o.bootstrap_b) config.bootstrap_b = *o.bootstrap_b;
    if (o.bootstrap_level) config.bootstrap_level = *o.bootstrap_level;
    if (o.adjustment) config.adjustment = invseg::stats::parse_adjustment(*o.adjustment);
    if (o.heatmap_sample) config.heatmap_sample = *o.heatmap_sample;
    if (o.threads) config.threads = *o.threads;
    config.validate();
    return config;
}

int run_single_stage(const RunConfig& config,
                     StageRecord (*stage)(const RunConfig&)) {
    std::filesystem::create_directories(config.output_dir);
    const StageRecord record = stage(config);
    std::cout << record.name << ": " << record.status << '\n';
    for (const auto& output : record.outputs) {
        std::cout << "  " << output.path << " (" << output.bytes << " bytes, fnv64 "
                  << output.fnv64 << ")\n";
    }
    return record.status == "failed" ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Investor-behaviour segmentation pipeline"};
    app.require_subcommand(1);

    CliOverrides o;
    struct Sub {
        CLI::App* cmd;
        StageRecord (*stage)(const RunConfig&);
    };
    std::vector<Sub> subs;
    auto add_stage = [&](const char* name, const char* help,
                         StageRecord (*stage)(const RunConfig&)) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common_options(cmd, o);
        subs.push_back({cmd, stage});
    };

    add_stage("synth", "Generate the synthetic client/transaction tables",
              invseg::pipeline::run_synth);
    add_stage("ingest", "Clean and impute the raw tables", invseg::pipeline::run_ingest);
    add_stage("features", "Engineer the RFMP feature matrix", invseg::pipeline::run_features);
    add_stage("cluster", "Fit the k-prototypes model", invseg::pipeline::run_cluster);
    add_stage("sweep", "Sweep k and score partitions", invseg::pipeline::run_sweep);
    add_stage("embed", "Project clients to 2-D with t-SNE", invseg::pipeline::run_embed);
    add_stage("stats", "Risk-tolerance distribution battery", invseg::pipeline::run_stats);
    add_stage("report", "Stratified heat-map and summaries", invseg::pipeline::run_report);
    CLI::App* run_cmd = app.add_subcommand("run", "Execute every stage in order");
    add_common_options(run_cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig config = build_config(o);
        if (run_cmd->parsed()) {
            const auto manifest = invseg::pipeline::run(config);
            for (const auto& stage : manifest.stages) {
                std::cout << stage.name << ": " << stage.status;
                if (!stage.error.empty()) std::cout << " (" << stage.error << ")";
                std::cout << '\n';
            }
            return manifest.ok ? 0 : 1;
        }
        for (const auto& sub : subs) {
            if (sub.cmd->parsed()) return run_single_stage(config, sub.stage);
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const invseg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
