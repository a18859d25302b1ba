#include "invseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "invseg/embed.hpp"
#include "invseg/error.hpp"
#include "invseg/model_select.hpp"
#include "invseg/rng.hpp"

namespace invseg::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr uint64_t kSeedFanout = 0x5EED;

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

fs::path out_path(const RunConfig& config, const std::string& name) {
    return fs::path(config.output_dir) / name;
}

OutputRecord record_output(const RunConfig& config, const std::string& name) {
    OutputRecord rec;
    rec.path = name;
    const fs::path full = out_path(config, name);
    rec.bytes = fs::file_size(full);
    rec.fnv64 = fnv1a64_hex(fnv1a64_file(full.string()));
    return rec;
}

StageRecord ok_stage(const RunConfig& config, const std::string& name,
                     const std::vector<std::string>& outputs) {
    StageRecord stage;
    stage.name = name;
    stage.status = "ok";
    for (const auto& file : outputs) stage.outputs.push_back(record_output(config, file));
    return stage;
}

}  // namespace

std::vector<double> default_rt_bin_edges() {
    // Nine half-point bins centred on the score grid 1.0, 1.5, ..., 5.0.
    std::vector<double> edges;
    for (int i = 0; i <= 9; ++i) edges.push_back(0.75 + 0.5 * i);
    return edges;
}

uint64_t RunConfig::stage_seed(const std::optional<uint64_t>& explicit_seed,
                               int ordinal) const {
    return explicit_seed ? *explicit_seed : derive_seed(seed, kSeedFanout, ordinal);
}

void RunConfig::validate() const {
    if (output_dir.empty()) throw ConfigError("config: output_dir must be set");
    if (!(sparse_threshold > 0.0) || sparse_threshold > 1.0) {
        throw ConfigError("config: sparse_threshold must lie in (0, 1]");
    }
    if (clients_path.has_value() != transactions_path.has_value()) {
        throw ConfigError("config: clients and transactions paths must be given together");
    }
    if (clients_path && *clients_path == *transactions_path) {
        throw ConfigError("config: input paths must be distinct");
    }
    if (k && *k < 1) throw ConfigError("config: k must be positive");
    if (sweep_k_min < 2) throw ConfigError("config: sweep k_min must be at least 2");
    if (sweep_k_max < sweep_k_min) throw ConfigError("config: sweep range inverted");
    if (restarts < 1) throw ConfigError("config: restarts must be at least 1");
    if (max_iterations < 1) throw ConfigError("config: max_iterations must be positive");
    if (!(perplexity > 1.0)) throw ConfigError("config: perplexity must exceed 1");
    if (embed_iterations < 1) throw ConfigError("config: embed iterations must be positive");
    if (bootstrap_b < 100) throw ConfigError("config: bootstrap B must be at least 100");
    if (!(bootstrap_level > 0.0) || !(bootstrap_level < 1.0)) {
        throw ConfigError("config: bootstrap level must lie in (0, 1)");
    }
    if (snapshot < window_start) throw ConfigError("config: snapshot precedes window start");
    if (heatmap_sample < 1) throw ConfigError("config: heatmap sample must be positive");
    const auto& edges = rt_bin_edges.empty() ? default_rt_bin_edges() : rt_bin_edges;
    for (size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw ConfigError("config: rt_bin_edges must be strictly increasing");
        }
    }
    if (edges.front() > 1.0 || edges.back() < 5.0) {
        throw ConfigError("config: rt_bin_edges must cover [1, 5]");
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    RunConfig config;
    try {
        if (j.contains("output_dir")) config.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("seed")) config.seed = j["seed"].get<uint64_t>();
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            if (s.contains("synth")) config.synth_seed = s["synth"].get<uint64_t>();
            if (s.contains("cluster")) config.cluster_seed = s["cluster"].get<uint64_t>();
            if (s.contains("sweep")) config.sweep_seed = s["sweep"].get<uint64_t>();
            if (s.contains("embed")) config.embed_seed = s["embed"].get<uint64_t>();
            if (s.contains("stats")) config.stats_seed = s["stats"].get<uint64_t>();
            if (s.contains("report")) config.report_seed = s["report"].get<uint64_t>();
        }
        if (j.contains("input")) {
            const auto& in_cfg = j["input"];
            if (in_cfg.contains("clients")) {
                config.clients_path = in_cfg["clients"].get<std::string>();
            }
            if (in_cfg.contains("transactions")) {
                config.transactions_path = in_cfg["transactions"].get<std::string>();
            }
            if (in_cfg.contains("delimiter")) {
                const std::string d = in_cfg["delimiter"].get<std::string>();
                if (d.size() != 1) throw ConfigError("config: delimiter must be one character");
                config.delimiter = d[0];
            }
        }
        if (j.contains("synth") && j["synth"].contains("n_clients")) {
            config.synth_clients = j["synth"]["n_clients"].get<size_t>();
        }
        if (j.contains("snapshot")) {
            const auto d = parse_date(j["snapshot"].get<std::string>());
            if (!d) throw ConfigError("config: bad snapshot date");
            config.snapshot = *d;
        }
        if (j.contains("window_start")) {
            const auto d = parse_date(j["window_start"].get<std::string>());
            if (!d) throw ConfigError("config: bad window_start date");
            config.window_start = *d;
        }
        if (j.contains("sparse_threshold")) {
            config.sparse_threshold = j["sparse_threshold"].get<double>();
        }
        if (j.contains("standardize")) config.standardize = j["standardize"].get<bool>();
        if (j.contains("account_encoding")) {
            const std::string e = j["account_encoding"].get<std::string>();
            if (e == "modal") config.account_encoding = features::AccountEncoding::Modal;
            else if (e == "proportions") {
                config.account_encoding = features::AccountEncoding::Proportions;
            } else {
                throw ConfigError("config: account_encoding must be modal or proportions");
            }
        }
        if (j.contains("distance_mode")) {
            config.distance_mode =
                cluster::parse_distance_mode(j["distance_mode"].get<std::string>());
        }
        if (j.contains("k") && !j["k"].is_null()) config.k = j["k"].get<int>();
        if (j.contains("sweep")) {
            if (j["sweep"].contains("k_min")) config.sweep_k_min = j["sweep"]["k_min"].get<int>();
            if (j["sweep"].contains("k_max")) config.sweep_k_max = j["sweep"]["k_max"].get<int>();
        }
        if (j.contains("restarts")) config.restarts = j["restarts"].get<int>();
        if (j.contains("max_iterations")) config.max_iterations = j["max_iterations"].get<int>();
        if (j.contains("pairwise_cutoff")) {
            config.pairwise_cutoff = j["pairwise_cutoff"].get<size_t>();
        }
        if (j.contains("embed")) {
            const auto& e = j["embed"];
            if (e.contains("perplexity")) config.perplexity = e["perplexity"].get<double>();
            if (e.contains("iterations")) config.embed_iterations = e["iterations"].get<int>();
            if (e.contains("learning_rate")) {
                config.embed_learning_rate = e["learning_rate"].get<double>();
            }
            if (e.contains("svg")) config.write_svg = e["svg"].get<bool>();
        }
        if (j.contains("bootstrap")) {
            if (j["bootstrap"].contains("B")) config.bootstrap_b = j["bootstrap"]["B"].get<size_t>();
            if (j["bootstrap"].contains("level")) {
                config.bootstrap_level = j["bootstrap"]["level"].get<double>();
            }
        }
        if (j.contains("adjustment")) {
            config.adjustment = stats::parse_adjustment(j["adjustment"].get<std::string>());
        }
        if (j.contains("rt_bin_edges")) {
            config.rt_bin_edges = j["rt_bin_edges"].get<std::vector<double>>();
        }
        if (j.contains("heatmap_sample")) {
            config.heatmap_sample = j["heatmap_sample"].get<size_t>();
        }
        if (j.contains("threads")) config.threads = j["threads"].get<unsigned>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    config.validate();
    return config;
}

std::string config_to_json(const RunConfig& config) {
    json j;
    j["output_dir"] = config.output_dir;
    j["seed"] = config.seed;
    json seeds;
    seeds["synth"] = config.stage_seed(config.synth_seed, 0);
    seeds["cluster"] = config.stage_seed(config.cluster_seed, 1);
    seeds["sweep"] = config.stage_seed(config.sweep_seed, 2);
    seeds["embed"] = config.stage_seed(config.embed_seed, 3);
    seeds["stats"] = config.stage_seed(config.stats_seed, 4);
    seeds["report"] = config.stage_seed(config.report_seed, 5);
    j["seeds"] = seeds;
    if (config.clients_path) {
        j["input"]["clients"] = *config.clients_path;
        j["input"]["transactions"] = *config.transactions_path;
        j["input"]["delimiter"] = std::string(1, config.delimiter);
    }
    j["synth"]["n_clients"] = config.synth_clients;
    j["snapshot"] = format_date(config.snapshot);
    j["window_start"] = format_date(config.window_start);
    j["sparse_threshold"] = config.sparse_threshold;
    j["standardize"] = config.standardize;
    j["account_encoding"] =
        config.account_encoding == features::AccountEncoding::Modal ? "modal" : "proportions";
    j["distance_mode"] = cluster::distance_mode_name(config.distance_mode);
    if (config.k) j["k"] = *config.k;
    j["sweep"]["k_min"] = config.sweep_k_min;
    j["sweep"]["k_max"] = config.sweep_k_max;
    j["restarts"] = config.restarts;
    j["max_iterations"] = config.max_iterations;
    j["pairwise_cutoff"] = config.pairwise_cutoff;
    j["embed"]["perplexity"] = config.perplexity;
    j["embed"]["iterations"] = config.embed_iterations;
    j["embed"]["learning_rate"] = config.embed_learning_rate;
    j["embed"]["svg"] = config.write_svg;
    j["bootstrap"]["B"] = config.bootstrap_b;
    j["bootstrap"]["level"] = config.bootstrap_level;
    j["adjustment"] = stats::adjustment_name(config.adjustment);
    j["rt_bin_edges"] = config.rt_bin_edges.empty() ? default_rt_bin_edges() : config.rt_bin_edges;
    j["heatmap_sample"] = config.heatmap_sample;
    return j.dump(2);
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("fnv1a64: cannot open '" + path + "'");
    uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

std::string fnv1a64_hex(uint64_t value) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::vector<size_t> stratified_sample(const std::vector<int32_t>& labels, size_t total_n,
                                      uint64_t seed) {
    const size_t n = labels.size();
    if (total_n > n) throw Error("stratified_sample: sample larger than population");
    int32_t k = 0;
    for (int32_t l : labels) {
        if (l < 0) throw Error("stratified_sample: negative label");
        k = std::max(k, l + 1);
    }
    std::vector<std::vector<size_t>> strata(k);
    for (size_t i = 0; i < n; ++i) strata[labels[i]].push_back(i);

    // Largest-remainder proportional counts.
    std::vector<size_t> counts(k, 0);
    std::vector<std::pair<double, int32_t>> remainders;
    size_t assigned = 0;
    for (int32_t l = 0; l < k; ++l) {
        const double quota = static_cast<double>(total_n) * strata[l].size() / n;
        counts[l] = static_cast<size_t>(std::floor(quota));
        assigned += counts[l];
        remainders.push_back({quota - std::floor(quota), l});
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // ties to the lower cluster index
    });
    for (size_t i = 0; assigned < total_n; ++i) {
        ++counts[remainders[i % remainders.size()].second];
        ++assigned;
    }

    std::vector<size_t> sample;
    for (int32_t l = 0; l < k; ++l) {
        if (counts[l] > strata[l].size()) counts[l] = strata[l].size();
        Rng rng(derive_seed(seed, static_cast<uint64_t>(l)));
        const auto picks = rng.sample_without_replacement(strata[l].size(), counts[l]);
        for (size_t p : picks) sample.push_back(strata[l][p]);
    }
    std::sort(sample.begin(), sample.end());
    return sample;
}

std::vector<std::vector<double>> scale_unit_interval(
    const std::vector<std::vector<double>>& columns) {
    std::vector<std::vector<double>> scaled(columns.size());
    for (size_t c = 0; c < columns.size(); ++c) {
        const auto& col = columns[c];
        scaled[c].assign(col.size(), 0.0);
        if (col.empty()) continue;
        const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
        const double lo = *lo_it;
        const double range = *hi_it - lo;
        if (range == 0.0) continue;  // constant column maps to all zeros
        for (size_t i = 0; i < col.size(); ++i) scaled[c][i] = (col[i] - lo) / range;
    }
    return scaled;
}

std::vector<size_t> average_linkage_order(const std::vector<double>& condensed, size_t n) {
    if (n == 0) return {};
    if (n == 1) return {0};

    struct Node {
        int left = -1;   // node index, or -1 for leaves
        int right = -1;
        size_t size = 1;
        bool active = true;
        int birth = 0;  // merge step; leaves are 0
    };
    std::vector<Node> nodes(n);
    // Working distances between active nodes, Lance-Williams average update.
    std::map<std::pair<int, int>, double> dist;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            dist[{static_cast<int>(i), static_cast<int>(j)}] =
                model_select::condensed_at(condensed, n, i, j);
        }
    }

    std::vector<int> active(n);
    std::iota(active.begin(), active.end(), 0);
    int step = 0;
    while (active.size() > 1) {
        ++step;
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> best_pair{-1, -1};
        for (size_t a = 0; a < active.size(); ++a) {
            for (size_t b = a + 1; b < active.size(); ++b) {
                const auto key = std::minmax(active[a], active[b]);
                const double d = dist.at({key.first, key.second});
                if (d < best) {
                    best = d;
                    best_pair = {key.first, key.second};
                }
            }
        }
        Node merged;
        merged.left = best_pair.first;
        merged.right = best_pair.second;
        merged.size = nodes[best_pair.first].size + nodes[best_pair.second].size;
        merged.birth = step;
        const int merged_idx = static_cast<int>(nodes.size());

        for (int other : active) {
            if (other == best_pair.first || other == best_pair.second) continue;
            const auto k1 = std::minmax(other, best_pair.first);
            const auto k2 = std::minmax(other, best_pair.second);
            const double d1 = dist.at({k1.first, k1.second});
            const double d2 = dist.at({k2.first, k2.second});
            const double na = static_cast<double>(nodes[best_pair.first].size);
            const double nb = static_cast<double>(nodes[best_pair.second].size);
            dist[{other, merged_idx}] = (na * d1 + nb * d2) / (na + nb);
        }
        nodes[best_pair.first].active = false;
        nodes[best_pair.second].active = false;
        nodes.push_back(merged);
        active.erase(std::remove(active.begin(), active.end(), best_pair.first), active.end());
        active.erase(std::remove(active.begin(), active.end(), best_pair.second), active.end());
        active.push_back(merged_idx);
    }

    // Leaf order by traversal; the older (earlier-born) child leads.
    std::vector<size_t> order;
    std::vector<int> stack = {active[0]};
    while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const Node& node = nodes[idx];
        if (node.left < 0) {
            order.push_back(static_cast<size_t>(idx));
            continue;
        }
        int first = node.left;
        int second = node.right;
        if (nodes[second].birth < nodes[first].birth ||
            (nodes[second].birth == nodes[first].birth && second < first)) {
            std::swap(first, second);
        }
        stack.push_back(second);  // LIFO: 'first' is visited first
        stack.push_back(first);
    }
    return order;
}

// ---------------------------------------------------------------------------
// Stages

StageRecord run_synth(const RunConfig& config) {
    if (config.clients_path) {
        StageRecord stage;
        stage.name = "synth";
        stage.status = "skipped";
        return stage;
    }
    synth::PopulationSpec spec = synth::default_population_spec(config.synth_clients);
    spec.window_start = config.window_start;
    spec.window_end = config.snapshot;
    const uint64_t seed = config.stage_seed(config.synth_seed, 0);
    const synth::Population population = synth::generate_population(spec, seed);
    synth::write_population_csv(population, spec, seed,
                                out_path(config, "clients.csv").string(),
                                out_path(config, "transactions.csv").string());
    return ok_stage(config, "synth", {"clients.csv", "transactions.csv"});
}

namespace {

struct CleanedData {
    std::vector<ingest::ClientRecord> clients;
    std::vector<ingest::TransactionRecord> transactions;
};

std::string clients_input(const RunConfig& config) {
    return config.clients_path ? *config.clients_path
                               : out_path(config, "clients.csv").string();
}

std::string transactions_input(const RunConfig& config) {
    return config.transactions_path ? *config.transactions_path
                                    : out_path(config, "transactions.csv").string();
}

void write_cleaned_clients(const std::vector<ingest::ClientRecord>& records,
                           const std::string& path) {
    RawTable table;
    table.column_names = {"client_id",      "age",           "gender",
                          "residency",      "annual_income", "investment_knowledge",
                          "num_accounts",   "marital_status", "retired",
                          "risk_tolerance", "job_category",  "investment_objective"};
    for (const auto& c : records) {
        std::vector<std::string> row;
        row.push_back(c.client_id);
        row.push_back(c.age ? std::to_string(*c.age) : "");
        row.push_back(c.gender.value_or(""));
        row.push_back(c.residency.value_or(""));
        row.push_back(c.annual_income ? fmt(*c.annual_income) : "");
        row.push_back(c.investment_knowledge ? std::to_string(*c.investment_knowledge) : "");
        row.push_back(c.num_accounts ? std::to_string(*c.num_accounts) : "");
        row.push_back(c.marital_status.value_or(""));
        row.push_back(c.retired ? (*c.retired ? "yes" : "no") : "");
        row.push_back(c.risk_tolerance ? fmt(*c.risk_tolerance) : "");
        row.push_back(c.job_category.value_or(""));
        row.push_back(c.investment_objective.value_or(""));
        table.rows.push_back(std::move(row));
    }
    write_table_file(path, table);
}

void write_cleaned_transactions(const std::vector<ingest::TransactionRecord>& records,
                                const std::string& path) {
    RawTable table;
    table.column_names = {"account_id", "client_id", "account_type", "trade_type",
                          "size",       "unit_value", "order_date",  "status"};
    for (const auto& t : records) {
        table.rows.push_back({t.account_id, t.client_id, t.account_type, t.trade_type,
                              fmt(t.size), fmt(t.unit_value), format_date(t.order_date),
                              t.status});
    }
    write_table_file(path, table);
}

CleanedData load_cleaned(const RunConfig& config) {
    CleanedData data;
    {
        std::ifstream in(out_path(config, "cleaned_clients.csv"));
        if (!in) throw Error("stage input missing: cleaned_clients.csv (run ingest first)");
        auto parsed = ingest::parse_clients(in, {}, ',');
        if (!parsed.issues.empty()) throw Error("cleaned_clients.csv failed to re-parse");
        data.clients = std::move(parsed.records);
    }
    {
        std::ifstream in(out_path(config, "cleaned_transactions.csv"));
        if (!in) throw Error("stage input missing: cleaned_transactions.csv (run ingest first)");
        ingest::TransactionSchema schema;
        auto parsed = ingest::parse_transactions(in, schema, ',');
        if (!parsed.issues.empty()) throw Error("cleaned_transactions.csv failed to re-parse");
        data.transactions = std::move(parsed.records);
    }
    return data;
}

}  // namespace

StageRecord run_ingest(const RunConfig& config) {
    auto client_read = read_table_file(clients_input(config), config.delimiter);
    const auto sparse = ingest::drop_sparse_columns(client_read.table, config.sparse_threshold);
    auto parsed = ingest::parse_clients(client_read.table);
    const size_t client_rows_in = client_read.table.rows.size() + client_read.bad_rows.size();

    auto incomplete = ingest::drop_incomplete_clients(parsed.records);
    ingest::ImputePolicy policy;
    for (const auto& dropped : sparse.dropped) policy.skip.insert(dropped);
    auto imputed = ingest::impute(incomplete.records, policy);
    for (const auto& rec : imputed.records) {
        if (const auto reason = ingest::validate_client(rec)) {
            throw Error("ingest: record " + rec.client_id + " violates invariants: " + *reason);
        }
    }

    ingest::TransactionSchema txn_schema;
    txn_schema.window_start = config.window_start;
    txn_schema.window_end = config.snapshot;
    auto txn_read = read_table_file(transactions_input(config), config.delimiter);
    auto txn_parsed = ingest::parse_transactions(txn_read.table, txn_schema);
    const size_t txn_rows_in = txn_read.table.rows.size() + txn_read.bad_rows.size();
    auto filled = ingest::filter_filled(txn_parsed.records);
    auto kept = ingest::drop_orphan_transactions(filled.records, imputed.records);

    write_cleaned_clients(imputed.records, out_path(config, "cleaned_clients.csv").string());
    write_cleaned_transactions(kept.records,
                               out_path(config, "cleaned_transactions.csv").string());

    {
        std::ofstream issues(out_path(config, "ingest_issues.jsonl"));
        auto emit = [&](const char* table, const ingest::ParseIssue& issue) {
            json line;
            line["table"] = table;
            line["row"] = issue.row;
            line["column"] = issue.column;
            line["reason"] = issue.reason;
            issues << line.dump() << '\n';
        };
        for (const auto& [row, reason] : client_read.bad_rows) {
            emit("clients", {row, "", reason});
        }
        for (const auto& issue : parsed.issues) emit("clients", issue);
        for (const auto& [row, reason] : txn_read.bad_rows) {
            emit("transactions", {row, "", reason});
        }
        for (const auto& issue : txn_parsed.issues) emit("transactions", issue);
    }

    json summary;
    summary["clients"]["rows_in"] = client_rows_in;
    summary["clients"]["parse_issues"] = parsed.issues.size() + client_read.bad_rows.size();
    summary["clients"]["parsed"] = parsed.records.size();
    summary["clients"]["removed_incomplete"] = incomplete.removed;
    summary["clients"]["retained"] = imputed.records.size();
    summary["clients"]["dropped_columns"] = sparse.dropped;
    json imputed_counts;
    for (const auto& [field, count] : imputed.filled) imputed_counts[field] = count;
    summary["clients"]["imputed"] = imputed_counts;
    summary["transactions"]["rows_in"] = txn_rows_in;
    summary["transactions"]["parse_issues"] =
        txn_parsed.issues.size() + txn_read.bad_rows.size();
    summary["transactions"]["parsed"] = txn_parsed.records.size();
    summary["transactions"]["removed_not_filled"] = filled.removed;
    summary["transactions"]["removed_orphaned"] = kept.removed;
    summary["transactions"]["retained"] = kept.records.size();
    std::ofstream summary_out(out_path(config, "ingest_summary.json"));
    summary_out << summary.dump(2) << '\n';

    return ok_stage(config, "ingest",
                    {"cleaned_clients.csv", "cleaned_transactions.csv", "ingest_issues.jsonl",
                     "ingest_summary.json"});
}

StageRecord run_features(const RunConfig& config) {
    CleanedData data = load_cleaned(config);
    features::BuildOptions options;
    options.snapshot = config.snapshot;
    options.window_start = config.window_start;
    options.standardize = config.standardize;
    options.account_encoding = config.account_encoding;
    const features::FeatureMatrix matrix =
        features::build_matrix(data.clients, data.transactions, options);
    features::save_matrix(matrix, out_path(config, "feature_matrix.tsv").string());
    return ok_stage(config, "features", {"feature_matrix.tsv", "feature_matrix.tsv.meta.json"});
}

StageRecord run_sweep(const RunConfig& config) {
    const features::FeatureMatrix matrix =
        features::load_matrix(out_path(config, "feature_matrix.tsv").string());
    model_select::SweepOptions options;
    options.mode = config.distance_mode;
    options.restarts = config.restarts;
    options.seed = config.stage_seed(config.sweep_seed, 2);
    options.max_iterations = config.max_iterations;
    options.pairwise_cutoff = config.pairwise_cutoff;
    options.threads = config.threads;
    const auto sweep = model_select::sweep_k(matrix, config.sweep_k_min, config.sweep_k_max,
                                             options);

    std::ofstream out(out_path(config, "figure6_sweep.tsv"));
    out << "k\tmean_silhouette\tdb_score\n";
    for (const auto& report : sweep.reports) {
        out << report.k << '\t' << fmt(report.mean_silhouette) << '\t' << fmt(report.db_score)
            << '\n';
    }
    out.close();

    json summary;
    summary["chosen_k"] = sweep.chosen_k;
    summary["db_chosen_k"] = sweep.db_chosen_k;
    summary["agree"] = sweep.chosen_k == sweep.db_chosen_k;
    std::ofstream summary_out(out_path(config, "sweep_summary.json"));
    summary_out << summary.dump(2) << '\n';
    return ok_stage(config, "sweep", {"figure6_sweep.tsv", "sweep_summary.json"});
}

namespace {

int resolve_k(const RunConfig& config) {
    if (config.k) return *config.k;
    std::ifstream in(out_path(config, "sweep_summary.json"));
    if (!in) throw Error("cluster: no k configured and no sweep_summary.json present");
    const json summary = json::parse(in);
    return summary.at("chosen_k").get<int>();
}

}  // namespace

StageRecord run_cluster(const RunConfig& config) {
    const features::FeatureMatrix matrix =
        features::load_matrix(out_path(config, "feature_matrix.tsv").string());
    const int k = resolve_k(config);
    cluster::FitOptions options;
    options.mode = config.distance_mode;
    options.restarts = config.restarts;
    options.seed = config.stage_seed(config.cluster_seed, 1);
    options.max_iterations = config.max_iterations;
    options.threads = config.threads;
    const cluster::ClusterModel model = cluster::fit(matrix, k, options);
    cluster::save_model(model, matrix, out_path(config, "cluster_model.txt").string());

    // Table 5 analogue: per-cluster centroid values in raw units.
    std::vector<size_t> sizes(k, 0);
    for (int32_t l : model.labels) ++sizes[l];
    std::ofstream out(out_path(config, "table5_centroids.tsv"));
    out << "attribute";
    for (int l = 1; l <= k; ++l) out << "\tcluster_" << l;
    out << '\n';
    out << "size";
    for (int l = 0; l < k; ++l) out << '\t' << sizes[l];
    out << '\n';
    out << "share";
    for (int l = 0; l < k; ++l) {
        out << '\t' << fmt(static_cast<double>(sizes[l]) / matrix.n(), "%.4f");
    }
    out << '\n';
    for (size_t c = 0; c < matrix.p(); ++c) {
        out << matrix.numeric_names[c];
        for (int l = 0; l < k; ++l) {
            out << '\t'
                << fmt(features::destandardize(matrix, c, model.centroids[l].numeric[c]),
                       "%.6f");
        }
        out << '\n';
    }
    for (size_t c = 0; c < matrix.q(); ++c) {
        out << matrix.categorical_names[c];
        for (int l = 0; l < k; ++l) {
            out << '\t' << matrix.categorical_label(c, model.centroids[l].categorical[c]);
        }
        out << '\n';
    }
    return ok_stage(config, "cluster", {"cluster_model.txt", "table5_centroids.tsv"});
}

namespace {

const char* cluster_color(int32_t label) {
    // Palette follows the paper's figure colours for the first five clusters.
    static const char* kColors[] = {"#4daf4a", "#377eb8", "#984ea3", "#555555",
                                    "#ff7f00", "#e41a1c", "#a65628", "#f781bf"};
    return kColors[label % 8];
}

void write_scatter_svg(const std::string& path, const std::vector<double>& coords,
                       const std::vector<int32_t>& labels, size_t n) {
    double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
    for (size_t i = 0; i < n; ++i) {
        lo_x = std::min(lo_x, coords[2 * i]);
        hi_x = std::max(hi_x, coords[2 * i]);
        lo_y = std::min(lo_y, coords[2 * i + 1]);
        hi_y = std::max(hi_y, coords[2 * i + 1]);
    }
    const double margin = 20.0;
    const double side = 760.0;
    const double span_x = hi_x > lo_x ? hi_x - lo_x : 1.0;
    const double span_y = hi_y > lo_y ? hi_y - lo_y : 1.0;

    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
           "viewBox=\"0 0 800 800\">\n";
    out << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
    for (size_t i = 0; i < n; ++i) {
        const double x = margin + side * (coords[2 * i] - lo_x) / span_x;
        const double y = margin + side * (1.0 - (coords[2 * i + 1] - lo_y) / span_y);
        out << "<circle cx=\"" << fmt(x, "%.2f") << "\" cy=\"" << fmt(y, "%.2f")
            << "\" r=\"2\" fill=\"" << cluster_color(labels.empty() ? 0 : labels[i])
            << "\" fill-opacity=\"0.6\"/>\n";
    }
    out << "</svg>\n";
}

}  // namespace

StageRecord run_embed(const RunConfig& config) {
    const features::FeatureMatrix matrix =
        features::load_matrix(out_path(config, "feature_matrix.tsv").string());
    cluster::LoadedModel loaded =
        cluster::load_model(out_path(config, "cluster_model.txt").string());

    embed::TsneParams params;
    params.perplexity = config.perplexity;
    params.iterations = config.embed_iterations;
    params.learning_rate = config.embed_learning_rate;
    params.seed = config.stage_seed(config.embed_seed, 3);
    params.mode = config.distance_mode;
    params.threads = config.threads;
    const embed::EmbeddingMap map = embed::tsne(matrix, params);

    std::ofstream out(out_path(config, "embedding.tsv"));
    out << "client_id\tx\ty\tcluster\n";
    for (size_t i = 0; i < matrix.n(); ++i) {
        out << matrix.client_ids[i] << '\t' << fmt(map.coords[2 * i]) << '\t'
            << fmt(map.coords[2 * i + 1]) << '\t' << (loaded.model.labels[i] + 1) << '\n';
    }
    out.close();

    std::vector<std::string> outputs = {"embedding.tsv"};
    if (config.write_svg) {
        write_scatter_svg(out_path(config, "embedding.svg").string(), map.coords,
                          loaded.model.labels, matrix.n());
        outputs.push_back("embedding.svg");
    }
    return ok_stage(config, "embed", outputs);
}

StageRecord run_stats(const RunConfig& config) {
    CleanedData data = load_cleaned(config);
    cluster::LoadedModel loaded =
        cluster::load_model(out_path(config, "cluster_model.txt").string());
    const int k = loaded.model.k;

    std::map<std::string, int> cluster_of;
    for (size_t i = 0; i < loaded.client_ids.size(); ++i) {
        cluster_of[loaded.client_ids[i]] = loaded.model.labels[i];
    }

    stats::GroupedScores scores(k);
    for (const auto& rec : data.clients) {
        if (!rec.risk_tolerance) continue;
        const auto it = cluster_of.find(rec.client_id);
        if (it == cluster_of.end()) {
            throw Error("stats: client " + rec.client_id + " missing from the cluster model");
        }
        scores[it->second].push_back(*rec.risk_tolerance);
    }

    const auto anova = stats::one_way_anova(scores);
    const auto tukey = stats::tukey_hsd(scores);
    const auto kruskal = stats::kruskal_wallis(scores);
    const auto dunn = stats::dunn_test(scores, config.adjustment);

    {
        std::ofstream out(out_path(config, "table6_anova.tsv"));
        out << "source\tdf\tsum_sq\tmean_sq\tf_value\tp_value\n";
        out << "cluster\t" << static_cast<int>(anova.df[0]) << '\t' << fmt(anova.ss_between)
            << '\t' << fmt(anova.ms_between) << '\t' << fmt(anova.statistic) << '\t'
            << fmt(anova.p_value) << '\n';
        out << "residuals\t" << static_cast<int>(anova.df[1]) << '\t' << fmt(anova.ss_within)
            << '\t' << fmt(anova.ms_within) << "\t\t\n";
    }
    {
        std::ofstream out(out_path(config, "table7_tukey.tsv"));
        out << "clusters\tdiff\tq\tadjusted_p\n";
        for (const auto& pair : tukey.pairwise) {
            out << pair.label << '\t' << fmt(pair.estimate) << '\t' << fmt(pair.statistic)
                << '\t' << fmt(pair.adjusted_p) << '\n';
        }
    }
    {
        size_t n_scores = 0;
        for (const auto& g : scores) n_scores += g.size();
        std::ofstream out(out_path(config, "table8_kruskal.tsv"));
        out << "n\th_statistic\tdf\tp_value\n";
        out << n_scores << '\t' << fmt(kruskal.statistic) << '\t'
            << static_cast<int>(kruskal.df[0]) << '\t' << fmt(kruskal.p_value) << '\n';
    }
    {
        std::ofstream out(out_path(config, "table9_dunn.tsv"));
        out << "cluster_pair\tn_a\tn_b\tz\tp_value\tadjusted_p\n";
        for (const auto& pair : dunn.pairwise) {
            out << pair.label << '\t' << pair.n_a << '\t' << pair.n_b << '\t'
                << fmt(pair.statistic) << '\t' << fmt(pair.p_value) << '\t'
                << fmt(pair.adjusted_p) << '\n';
        }
    }

    const std::vector<double> edges =
        config.rt_bin_edges.empty() ? default_rt_bin_edges() : config.rt_bin_edges;
    std::vector<stats::HistogramDensity> histograms;
    for (int l = 0; l < k; ++l) histograms.push_back(stats::histogram_density(scores[l], edges));
    {
        std::ofstream out(out_path(config, "figure10_rt_hist.tsv"));
        out << "cluster\tbin_lo\tbin_hi\tdensity\n";
        for (int l = 0; l < k; ++l) {
            for (size_t b = 0; b + 1 < edges.size(); ++b) {
                out << (l + 1) << '\t' << fmt(edges[b]) << '\t' << fmt(edges[b + 1]) << '\t'
                    << fmt(histograms[l].density[b]) << '\n';
            }
        }
    }
    {
        std::ofstream out(out_path(config, "table10_kl.tsv"));
        out << "cluster_pair\tsymmetric_kl\n";
        for (int a = 0; a < k; ++a) {
            for (int b = a + 1; b < k; ++b) {
                out << (a + 1) << '-' << (b + 1) << '\t'
                    << fmt(stats::symmetric_kl(histograms[a], histograms[b])) << '\n';
            }
        }
    }

    // Figure 9: monthly series with bootstrap bands, one block per class.
    std::vector<std::pair<std::string, int>> labels_by_client(cluster_of.begin(),
                                                              cluster_of.end());
    stats::BootstrapParams bootstrap{config.bootstrap_b, config.bootstrap_level,
                                     config.stage_seed(config.stats_seed, 4)};
    const auto class_totals = features::class_totals(data.transactions);
    {
        std::ofstream out(out_path(config, "figure9_monthly.tsv"));
        out << "trade_class\tcluster\tmonth\tn\tmean\tci_lo\tci_hi\n";
        for (features::TradeClass cls :
             {features::TradeClass::ThirdParty, features::TradeClass::Systematic,
              features::TradeClass::Periodic}) {
            const auto series = stats::monthly_cluster_series(
                data.transactions, labels_by_client, k, cls, config.window_start,
                config.snapshot, bootstrap);
            // Conservation: the series totals must reconcile exactly with the
            // feature-module class totals.
            const double expected = cls == features::TradeClass::ThirdParty
                                        ? class_totals.third_party.value()
                                        : cls == features::TradeClass::Systematic
                                              ? class_totals.systematic.value()
                                              : class_totals.periodic.value();
            if (series.class_total != expected) {
                throw Error("stats: class totals failed to reconcile with features");
            }
            for (const auto& cell : series.cells) {
                out << features::trade_class_name(cls) << '\t' << (cell.cluster + 1) << '\t'
                    << cell.month << '\t' << cell.n << '\t';
                if (cell.n == 0) {
                    out << "\t\t\n";  // empty cell marker
                } else {
                    out << fmt(cell.mean) << '\t' << fmt(cell.lo) << '\t' << fmt(cell.hi)
                        << '\n';
                }
            }
        }
    }

    json machine;
    machine["anova"] = {{"f", anova.statistic},
                        {"df", anova.df},
                        {"p", anova.p_value},
                        {"ss_between", anova.ss_between},
                        {"ss_within", anova.ss_within}};
    machine["kruskal_wallis"] = {{"h", kruskal.statistic},
                                 {"df", kruskal.df[0]},
                                 {"p", kruskal.p_value}};
    json tukey_rows = json::array();
    for (const auto& pair : tukey.pairwise) {
        tukey_rows.push_back({{"pair", pair.label},
                              {"diff", pair.estimate},
                              {"q", pair.statistic},
                              {"adjusted_p", pair.adjusted_p}});
    }
    machine["tukey"] = tukey_rows;
    json dunn_rows = json::array();
    for (const auto& pair : dunn.pairwise) {
        dunn_rows.push_back({{"pair", pair.label},
                             {"z", pair.statistic},
                             {"p", pair.p_value},
                             {"adjusted_p", pair.adjusted_p}});
    }
    machine["dunn"] = dunn_rows;
    machine["dunn_adjustment"] = stats::adjustment_name(config.adjustment);
    json kl_rows = json::array();
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            kl_rows.push_back({{"pair", std::to_string(a + 1) + "-" + std::to_string(b + 1)},
                               {"kl", stats::symmetric_kl(histograms[a], histograms[b])}});
        }
    }
    machine["symmetric_kl"] = kl_rows;
    std::ofstream machine_out(out_path(config, "stats.json"));
    machine_out << machine.dump(2) << '\n';

    return ok_stage(config, "stats",
                    {"table6_anova.tsv", "table7_tukey.tsv", "table8_kruskal.tsv",
                     "table9_dunn.tsv", "table10_kl.tsv", "figure10_rt_hist.tsv",
                     "figure9_monthly.tsv", "stats.json"});
}

StageRecord run_report(const RunConfig& config) {
    const features::FeatureMatrix matrix =
        features::load_matrix(out_path(config, "feature_matrix.tsv").string());
    cluster::LoadedModel loaded =
        cluster::load_model(out_path(config, "cluster_model.txt").string());

    const size_t total = std::min(config.heatmap_sample, matrix.n());
    const auto sample = stratified_sample(loaded.model.labels, total,
                                          config.stage_seed(config.report_seed, 5));

    // Pairwise mixed distances between sampled rows drive the dendrogram order.
    const size_t m = sample.size();
    std::vector<double> condensed(m * (m - 1) / 2, 0.0);
    for (size_t a = 0; a < m; ++a) {
        for (size_t b = a + 1; b < m; ++b) {
            model_select::condensed_at(condensed, m, a, b) =
                cluster::row_distance(matrix, sample[a], sample[b], config.distance_mode);
        }
    }
    const auto order = average_linkage_order(condensed, m);

    // Raw attribute values scaled to [0, 1] per column.
    std::vector<std::vector<double>> columns(matrix.p());
    for (size_t c = 0; c < matrix.p(); ++c) {
        columns[c].reserve(m);
        for (size_t i : sample) {
            columns[c].push_back(
                features::destandardize(matrix, c, matrix.numeric[i * matrix.p() + c]));
        }
    }
    const auto scaled = scale_unit_interval(columns);

    std::ofstream out(out_path(config, "figure7_heatmap.tsv"));
    out << "client_id\tcluster";
    for (const auto& name : matrix.numeric_names) out << '\t' << name;
    for (const auto& name : matrix.categorical_names) out << '\t' << name;
    out << '\n';
    for (size_t pos : order) {
        const size_t row = sample[pos];
        out << matrix.client_ids[row] << '\t' << (loaded.model.labels[row] + 1);
        for (size_t c = 0; c < matrix.p(); ++c) out << '\t' << fmt(scaled[c][pos], "%.6f");
        for (size_t c = 0; c < matrix.q(); ++c) {
            out << '\t' << matrix.categorical_label(c, matrix.categorical[row * matrix.q() + c]);
        }
        out << '\n';
    }
    out.close();
    return ok_stage(config, "report", {"figure7_heatmap.tsv"});
}

void write_manifest(const RunManifest& manifest, const RunConfig& config) {
    json j;
    j["tool"] = "invseg";
    j["version"] = kVersion;
    j["config_hash"] = manifest.config_hash;
    j["ok"] = manifest.ok;
    json stages = json::array();
    for (const auto& stage : manifest.stages) {
        json s;
        s["name"] = stage.name;
        s["status"] = stage.status;
        if (!stage.error.empty()) s["error"] = stage.error;
        json outputs = json::array();
        for (const auto& output : stage.outputs) {
            outputs.push_back({{"path", output.path},
                               {"bytes", output.bytes},
                               {"fnv64", output.fnv64}});
        }
        s["outputs"] = outputs;
        stages.push_back(s);
    }
    j["stages"] = stages;
    std::ofstream out(out_path(config, "manifest.json"));
    out << j.dump(2) << '\n';
}

bool verify_manifest(const std::string& manifest_path, const std::string& output_dir) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("verify_manifest: cannot open '" + manifest_path + "'");
    const json j = json::parse(in);
    for (const auto& stage : j.at("stages")) {
        for (const auto& output : stage.at("outputs")) {
            const fs::path path = fs::path(output_dir) / output.at("path").get<std::string>();
            if (!fs::exists(path)) return false;
            if (fnv1a64_hex(fnv1a64_file(path.string())) != output.at("fnv64").get<std::string>()) {
                return false;
            }
        }
    }
    return true;
}

RunManifest run(const RunConfig& config) {
    config.validate();
    fs::create_directories(config.output_dir);

    RunManifest manifest;
    {
        // Resolved configuration is itself an artifact.
        std::ofstream out(out_path(config, "resolved_config.json"));
        out << config_to_json(config) << '\n';
    }
    {
        uint64_t hash = 0xcbf29ce484222325ULL;
        for (const char c : config_to_json(config)) {
            hash ^= static_cast<unsigned char>(c);
            hash *= 0x100000001b3ULL;
        }
        manifest.config_hash = fnv1a64_hex(hash);
    }

    struct StageSpec {
        const char* name;
        StageRecord (*fn)(const RunConfig&);
        bool enabled;
    };
    const std::vector<StageSpec> stages = {
        {"synth", run_synth, true},
        {"ingest", run_ingest, true},
        {"features", run_features, true},
        {"sweep", run_sweep, !config.k.has_value()},
        {"cluster", run_cluster, true},
        {"embed", run_embed, true},
        {"stats", run_stats, true},
        {"report", run_report, true},
    };

    bool failed = false;
    for (const auto& spec : stages) {
        StageRecord record;
        record.name = spec.name;
        if (!spec.enabled) {
            record.status = "skipped";
        } else if (failed) {
            record.status = "skipped";
            record.error = "upstream stage failed";
        } else {
            try {
                record = spec.fn(config);
            } catch (const std::exception& e) {
                record.status = "failed";
                record.error = e.what();
                failed = true;
            }
        }
        manifest.stages.push_back(std::move(record));
    }
    manifest.ok = !failed;
    manifest.stages.push_back([&] {
        StageRecord rec;
        rec.name = "manifest";
        rec.status = "ok";
        return rec;
    }());
    write_manifest(manifest, config);
    return manifest;
}

}  // namespace invseg::pipeline
