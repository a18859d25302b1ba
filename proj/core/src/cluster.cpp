#include "invseg/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "invseg/error.hpp"
#include "invseg/exact_sum.hpp"
#include "invseg/parallel.hpp"
#include "invseg/rng.hpp"

namespace invseg::cluster {

DistanceMode parse_distance_mode(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "l1" || n == "literal") return DistanceMode::L1;
    if (n == "squared" || n == "squared_euclidean" || n == "sq") {
        return DistanceMode::SquaredEuclidean;
    }
    throw ConfigError("unknown distance mode '" + name + "' (expected l1 or squared)");
}

std::string distance_mode_name(DistanceMode mode) {
    return mode == DistanceMode::L1 ? "l1" : "squared";
}

namespace {

inline double numeric_term(const double* x, const double* c, size_t p, DistanceMode mode) {
    double acc = 0.0;
    if (mode == DistanceMode::L1) {
        for (size_t i = 0; i < p; ++i) acc += std::abs(x[i] - c[i]);
    } else {
        for (size_t i = 0; i < p; ++i) {
            const double d = x[i] - c[i];
            acc += d * d;
        }
    }
    return acc;
}

inline double categorical_term(const int32_t* x, const int32_t* c, size_t q) {
    double acc = 0.0;
    for (size_t i = 0; i < q; ++i) acc += (x[i] != c[i]) ? 1.0 : 0.0;
    return acc;
}

}  // namespace

double mixed_distance(std::span<const double> x_numeric,
                      std::span<const int32_t> x_categorical, const Centroid& c,
                      DistanceMode mode) {
    if (x_numeric.size() != c.numeric.size() || x_categorical.size() != c.categorical.size()) {
        throw Error("mixed_distance: layout mismatch between vector and centroid");
    }
    return numeric_term(x_numeric.data(), c.numeric.data(), x_numeric.size(), mode) +
           categorical_term(x_categorical.data(), c.categorical.data(), x_categorical.size());
}

double mixed_distance(const features::FeatureMatrix& m, size_t row, const Centroid& c,
                      DistanceMode mode) {
    if (c.numeric.size() != m.p() || c.categorical.size() != m.q()) {
        throw Error("mixed_distance: layout mismatch between matrix and centroid");
    }
    return numeric_term(m.numeric_row(row), c.numeric.data(), m.p(), mode) +
           categorical_term(m.categorical_row(row), c.categorical.data(), m.q());
}

double centroid_distance(const Centroid& a, const Centroid& b, DistanceMode mode) {
    if (a.numeric.size() != b.numeric.size() || a.categorical.size() != b.categorical.size()) {
        throw Error("centroid_distance: layout mismatch");
    }
    return numeric_term(a.numeric.data(), b.numeric.data(), a.numeric.size(), mode) +
           categorical_term(a.categorical.data(), b.categorical.data(), a.categorical.size());
}

double row_distance(const features::FeatureMatrix& m, size_t i, size_t j, DistanceMode mode) {
    return numeric_term(m.numeric_row(i), m.numeric_row(j), m.p(), mode) +
           categorical_term(m.categorical_row(i), m.categorical_row(j), m.q());
}

std::vector<int32_t> assign(const features::FeatureMatrix& m,
                            const std::vector<Centroid>& centroids, DistanceMode mode) {
    if (centroids.empty()) throw Error("assign: need at least one centroid");
    const size_t n = m.n();
    std::vector<int32_t> labels(n, 0);
    for (size_t i = 0; i < n; ++i) {
        double best = mixed_distance(m, i, centroids[0], mode);
        int32_t best_l = 0;
        for (size_t l = 1; l < centroids.size(); ++l) {
            const double d = mixed_distance(m, i, centroids[l], mode);
            if (d < best) {  // strict: ties stay with the lowest index
                best = d;
                best_l = static_cast<int32_t>(l);
            }
        }
        labels[i] = best_l;
    }
    return labels;
}

std::vector<Centroid> update_centroids(const features::FeatureMatrix& m,
                                       const std::vector<int32_t>& labels,
                                       const std::vector<Centroid>& previous,
                                       DistanceMode mode) {
    const size_t k = previous.size();
    const size_t n = m.n();
    const size_t p = m.p();
    const size_t q = m.q();
    if (labels.size() != n) throw Error("update_centroids: label count mismatch");

    std::vector<size_t> counts(k, 0);
    std::vector<std::vector<double>> numeric_sums(k, std::vector<double>(p, 0.0));
    // counts per (cluster, column, code)
    std::vector<std::vector<std::map<int32_t, size_t>>> cat_counts(
        k, std::vector<std::map<int32_t, size_t>>(q));

    for (size_t i = 0; i < n; ++i) {
        const int32_t l = labels[i];
        if (l < 0 || static_cast<size_t>(l) >= k) throw Error("update_centroids: label out of range");
        ++counts[l];
        const double* xn = m.numeric_row(i);
        for (size_t c = 0; c < p; ++c) numeric_sums[l][c] += xn[c];
        const int32_t* xc = m.categorical_row(i);
        for (size_t c = 0; c < q; ++c) ++cat_counts[l][c][xc[c]];
    }

    std::vector<Centroid> out(k);
    std::vector<size_t> empty_clusters;
    for (size_t l = 0; l < k; ++l) {
        out[l].numeric.resize(p);
        out[l].categorical.resize(q);
        if (counts[l] == 0) {
            empty_clusters.push_back(l);
            out[l] = previous[l];
            continue;
        }
        for (size_t c = 0; c < p; ++c) {
            out[l].numeric[c] = numeric_sums[l][c] / static_cast<double>(counts[l]);
        }
        for (size_t c = 0; c < q; ++c) {
            // Smallest code wins ties; codes are in lexicographic label order.
            int32_t best_code = 0;
            size_t best_count = 0;
            for (const auto& [code, count] : cat_counts[l][c]) {
                if (count > best_count) {
                    best_code = code;
                    best_count = count;
                }
            }
            out[l].categorical[c] = best_code;
        }
    }

    // Empty-cluster repair: reseed with the point farthest from the stale
    // centroid; each repaired cluster takes a distinct point.
    std::vector<bool> taken(n, false);
    for (const size_t l : empty_clusters) {
        double best = -1.0;
        size_t best_i = 0;
        bool found = false;
        for (size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double d = mixed_distance(m, i, previous[l], mode);
            if (d > best) {
                best = d;
                best_i = i;
                found = true;
            }
        }
        if (!found) throw Error("update_centroids: cannot reseed empty cluster");
        taken[best_i] = true;
        out[l].numeric.assign(m.numeric_row(best_i), m.numeric_row(best_i) + p);
        out[l].categorical.assign(m.categorical_row(best_i), m.categorical_row(best_i) + q);
    }
    return out;
}

double total_cost(const features::FeatureMatrix& m, const std::vector<int32_t>& labels,
                  const std::vector<Centroid>& centroids, DistanceMode mode) {
    if (labels.size() != m.n()) throw Error("total_cost: label count mismatch");
    ExactSum acc;
    for (size_t i = 0; i < m.n(); ++i) {
        acc.add(mixed_distance(m, i, centroids[labels[i]], mode));
    }
    return acc.value();
}

namespace {

struct RestartResult {
    std::vector<Centroid> centroids;
    std::vector<int32_t> labels;
    double cost = std::numeric_limits<double>::infinity();
    std::vector<double> cost_trace;
    int iterations = 0;
    bool converged = false;
    uint64_t seed = 0;
};

RestartResult run_restart(const features::FeatureMatrix& m, int k, DistanceMode mode,
                          uint64_t restart_seed, int max_iterations) {
    RestartResult r;
    r.seed = restart_seed;
    Rng rng(restart_seed);

    // Initial prototypes: k distinct clients.
    const auto picks = rng.sample_without_replacement(m.n(), static_cast<size_t>(k));
    std::vector<Centroid> centroids(k);
    for (int l = 0; l < k; ++l) {
        const size_t i = picks[l];
        centroids[l].numeric.assign(m.numeric_row(i), m.numeric_row(i) + m.p());
        centroids[l].categorical.assign(m.categorical_row(i), m.categorical_row(i) + m.q());
    }

    std::vector<int32_t> labels = assign(m, centroids, mode);
    double cost = total_cost(m, labels, centroids, mode);
    r.cost_trace.push_back(cost);

    for (int iter = 1; iter <= max_iterations; ++iter) {
        std::vector<Centroid> next = update_centroids(m, labels, centroids, mode);
        std::vector<int32_t> next_labels = assign(m, next, mode);
        const double next_cost = total_cost(m, next_labels, next, mode);
        // Mean updates are not L1-optimal, so a step can raise J; stopping
        // before accepting such a step keeps the trace non-increasing in both
        // distance modes.
        if (next_cost > cost) {
            r.converged = true;
            r.iterations = iter;
            break;
        }
        const bool fixpoint = next_labels == labels;
        centroids = std::move(next);
        labels = std::move(next_labels);
        cost = next_cost;
        r.cost_trace.push_back(cost);
        r.iterations = iter;
        if (fixpoint) {
            r.converged = true;
            break;
        }
    }

    r.centroids = std::move(centroids);
    r.labels = std::move(labels);
    r.cost = cost;
    return r;
}

}  // namespace

ClusterModel fit(const features::FeatureMatrix& m, int k, const FitOptions& options) {
    if (k < 1) throw Error("fit: k must be at least 1");
    if (static_cast<size_t>(k) > m.n()) throw Error("fit: k exceeds the number of clients");
    if (options.restarts < 1) throw Error("fit: need at least one restart");

    std::vector<RestartResult> results(options.restarts);
    parallel_for(static_cast<size_t>(options.restarts), [&](size_t r) {
        results[r] = run_restart(m, k, options.mode, derive_seed(options.seed, r),
                                 options.max_iterations);
    }, options.threads);

    size_t best = 0;
    for (size_t r = 1; r < results.size(); ++r) {
        if (results[r].cost < results[best].cost) best = r;  // ties keep the lowest index
    }

    ClusterModel model;
    model.k = k;
    model.mode = options.mode;
    model.centroids = std::move(results[best].centroids);
    model.labels = std::move(results[best].labels);
    model.cost = results[best].cost;
    model.iterations = results[best].iterations;
    model.seed = options.seed;
    model.restart_seed = results[best].seed;
    model.restart_index = static_cast<int>(best);
    model.cost_trace = std::move(results[best].cost_trace);
    model.converged = results[best].converged;
    return model;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void save_model(const ClusterModel& model, const features::FeatureMatrix& m,
                const std::string& path) {
    if (model.labels.size() != m.n()) throw Error("save_model: label/matrix size mismatch");
    std::ofstream out(path);
    if (!out) throw Error("save_model: cannot write '" + path + "'");
    out << "# invseg cluster model v1\n";
    out << "k=" << model.k << " p=" << m.p() << " q=" << m.q()
        << " mode=" << distance_mode_name(model.mode) << " seed=" << model.seed
        << " restart_seed=" << model.restart_seed << " restart_index=" << model.restart_index
        << " iterations=" << model.iterations << " converged=" << (model.converged ? 1 : 0)
        << " cost=" << format_double(model.cost) << '\n';
    out << "# columns";
    for (const auto& name : m.numeric_names) out << '\t' << name;
    for (const auto& name : m.categorical_names) out << '\t' << name;
    out << '\n';
    for (int l = 0; l < model.k; ++l) {
        out << "centroid\t" << (l + 1);
        for (double v : model.centroids[l].numeric) out << '\t' << format_double(v);
        for (size_t c = 0; c < m.q(); ++c) {
            out << '\t' << m.categorical_label(c, model.centroids[l].categorical[c]);
        }
        out << '\n';
    }
    out << "cost_trace";
    for (double v : model.cost_trace) out << '\t' << format_double(v);
    out << '\n';
    for (size_t i = 0; i < m.n(); ++i) {
        out << "label\t" << m.client_ids[i] << '\t' << (model.labels[i] + 1) << '\n';
    }
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_model: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "# invseg cluster model v1") {
        throw Error("load_model: '" + path + "' is not a v1 cluster model file");
    }
    if (!std::getline(in, line)) throw Error("load_model: missing header");

    LoadedModel out;
    size_t p = 0, q = 0;
    {
        std::stringstream ss(line);
        std::string kv;
        while (ss >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            if (key == "k") out.model.k = std::stoi(value);
            else if (key == "p") p = std::stoul(value);
            else if (key == "q") q = std::stoul(value);
            else if (key == "mode") out.model.mode = parse_distance_mode(value);
            else if (key == "seed") out.model.seed = std::stoull(value);
            else if (key == "restart_seed") out.model.restart_seed = std::stoull(value);
            else if (key == "restart_index") out.model.restart_index = std::stoi(value);
            else if (key == "iterations") out.model.iterations = std::stoi(value);
            else if (key == "converged") out.model.converged = value == "1";
            else if (key == "cost") out.model.cost = std::stod(value);
        }
    }
    if (out.model.k < 1) throw Error("load_model: bad k");

    // Centroid categorical labels round-trip as strings; rebuild codes per
    // column from the labels present in the file.
    std::vector<std::vector<std::string>> centroid_labels;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tag;
        std::getline(ss, tag, '\t');
        if (tag == "centroid") {
            std::string cell;
            std::getline(ss, cell, '\t');  // index
            Centroid c;
            std::vector<std::string> cats;
            size_t col = 0;
            while (std::getline(ss, cell, '\t')) {
                if (col < p) c.numeric.push_back(std::stod(cell));
                else cats.push_back(cell);
                ++col;
            }
            if (c.numeric.size() != p || cats.size() != q) {
                throw Error("load_model: centroid row layout mismatch");
            }
            out.model.centroids.push_back(std::move(c));
            centroid_labels.push_back(std::move(cats));
        } else if (tag == "cost_trace") {
            std::string cell;
            while (std::getline(ss, cell, '\t')) out.model.cost_trace.push_back(std::stod(cell));
        } else if (tag == "label") {
            std::string id, value;
            std::getline(ss, id, '\t');
            std::getline(ss, value, '\t');
            out.client_ids.push_back(id);
            out.model.labels.push_back(static_cast<int32_t>(std::stoi(value) - 1));
        }
    }
    if (out.model.centroids.size() != static_cast<size_t>(out.model.k)) {
        throw Error("load_model: centroid count mismatch");
    }
    for (size_t c = 0; c < q; ++c) {
        std::map<std::string, int32_t> codes;
        for (const auto& cats : centroid_labels) codes.emplace(cats[c], 0);
        int32_t next = 0;
        for (auto& [label, code] : codes) code = next++;
        for (size_t l = 0; l < centroid_labels.size(); ++l) {
            out.model.centroids[l].categorical.push_back(codes[centroid_labels[l][c]]);
        }
    }
    out.centroid_categories = std::move(centroid_labels);
    return out;
}

void LoadedModel::align_to(const features::FeatureMatrix& m) {
    for (size_t l = 0; l < centroid_categories.size(); ++l) {
        for (size_t c = 0; c < centroid_categories[l].size(); ++c) {
            const auto& levels = m.category_levels.at(c);
            const auto it =
                std::find(levels.begin(), levels.end(), centroid_categories[l][c]);
            if (it == levels.end()) {
                throw Error("load_model: centroid category '" + centroid_categories[l][c] +
                            "' not present in the feature matrix");
            }
            model.centroids[l].categorical[c] = static_cast<int32_t>(it - levels.begin());
        }
    }
}

}  // namespace invseg::cluster
