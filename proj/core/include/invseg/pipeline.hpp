#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "invseg/cluster.hpp"
#include "invseg/dates.hpp"
#include "invseg/features.hpp"
#include "invseg/stats.hpp"
#include "invseg/synth.hpp"

namespace invseg::pipeline {

inline constexpr const char* kVersion = "0.1.0";

// Full run configuration; a JSON file with the same keys, every one
// overridable from the command line. Every stochastic stage has its own seed,
// fanned out from `seed` unless set explicitly.
struct RunConfig {
    std::string output_dir = "out";
    uint64_t seed = 1;
    std::optional<uint64_t> synth_seed;
    std::optional<uint64_t> cluster_seed;
    std::optional<uint64_t> sweep_seed;
    std::optional<uint64_t> embed_seed;
    std::optional<uint64_t> stats_seed;
    std::optional<uint64_t> report_seed;

    // Input tables; when absent the synth stage generates them.
    std::optional<std::string> clients_path;
    std::optional<std::string> transactions_path;
    char delimiter = ',';

    size_t synth_clients = 5000;

    Date snapshot = make_date(2019, 8, 12);
    Date window_start = make_date(2018, 8, 13);

    double sparse_threshold = 0.10;
    bool standardize = true;
    features::AccountEncoding account_encoding = features::AccountEncoding::Modal;

    cluster::DistanceMode distance_mode = cluster::DistanceMode::L1;
    std::optional<int> k;  // fixed k; otherwise the sweep chooses
    int sweep_k_min = 2;
    int sweep_k_max = 8;
    int restarts = 50;
    int max_iterations = 300;
    size_t pairwise_cutoff = 20000;

    double perplexity = 30.0;
    int embed_iterations = 500;
    double embed_learning_rate = 200.0;
    bool write_svg = true;

    size_t bootstrap_b = 1000;
    double bootstrap_level = 0.95;
    stats::Adjustment adjustment = stats::Adjustment::Holm;
    std::vector<double> rt_bin_edges;  // default: nine 0.5-wide bins centred on 1..5
    size_t heatmap_sample = 53;

    unsigned threads = 0;

    uint64_t stage_seed(const std::optional<uint64_t>& explicit_seed, int ordinal) const;
    void validate() const;
};

std::vector<double> default_rt_bin_edges();

RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

struct OutputRecord {
    std::string path;  // relative to output_dir
    uint64_t bytes = 0;
    std::string fnv64;
};

struct StageRecord {
    std::string name;
    std::string status;  // ok | failed | skipped
    std::string error;
    std::vector<OutputRecord> outputs;
};

struct RunManifest {
    std::string config_hash;
    std::vector<StageRecord> stages;
    bool ok = true;
};

// Executes the requested stages in dependency order, writing every table and
// figure data file plus manifest.json. A stage failure marks downstream
// stages skipped and flips ok.
RunManifest run(const RunConfig& config);

// Individual stages, shared by `run` and the matching CLI subcommands. Each
// reads its declared inputs from the output directory (or config paths) and
// writes its outputs there.
StageRecord run_synth(const RunConfig& config);
StageRecord run_ingest(const RunConfig& config);
StageRecord run_features(const RunConfig& config);
StageRecord run_sweep(const RunConfig& config);
StageRecord run_cluster(const RunConfig& config);
StageRecord run_embed(const RunConfig& config);
StageRecord run_stats(const RunConfig& config);
StageRecord run_report(const RunConfig& config);

void write_manifest(const RunManifest& manifest, const RunConfig& config);

// Verifies recorded checksums against the files on disk.
bool verify_manifest(const std::string& manifest_path, const std::string& output_dir);

// Proportional per-cluster counts (largest-remainder rounding), sampled
// without replacement within each stratum. Returns row indices.
std::vector<size_t> stratified_sample(const std::vector<int32_t>& labels, size_t total_n,
                                      uint64_t seed);

// Per column: (x - min) / (max - min); constant columns map to all zeros.
std::vector<std::vector<double>> scale_unit_interval(
    const std::vector<std::vector<double>>& columns);

// Leaf order of an average-linkage (UPGMA) dendrogram over the condensed
// distance matrix; used to order the heat-map rows.
std::vector<size_t> average_linkage_order(const std::vector<double>& condensed, size_t n);

uint64_t fnv1a64_file(const std::string& path);
std::string fnv1a64_hex(uint64_t value);

}  // namespace invseg::pipeline
