#include "invseg/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "invseg/error.hpp"
#include "invseg/parallel.hpp"
#include "invseg/rng.hpp"

namespace invseg::model_select {

std::vector<double> pairwise_distances(const features::FeatureMatrix& m,
                                       cluster::DistanceMode mode) {
    const size_t n = m.n();
    std::vector<double> d(n * (n - 1) / 2);
    parallel_for(n, [&](size_t i) {
        for (size_t j = i + 1; j < n; ++j) {
            condensed_at(d, n, i, j) = cluster::row_distance(m, i, j, mode);
        }
    });
    return d;
}

namespace {

int cluster_count(const std::vector<int32_t>& labels) {
    int32_t max_label = -1;
    for (int32_t l : labels) {
        if (l < 0) throw Error("labels must be nonnegative");
        max_label = std::max(max_label, l);
    }
    return max_label + 1;
}

}  // namespace

SilhouetteResult silhouette(const features::FeatureMatrix& m,
                            const std::vector<int32_t>& labels,
                            cluster::DistanceMode mode,
                            const std::vector<double>* precomputed) {
    const size_t n = m.n();
    if (labels.size() != n) throw Error("silhouette: label count mismatch");
    const int k = cluster_count(labels);
    if (k < 2) throw Error("silhouette: needs at least two clusters");

    std::vector<size_t> sizes(k, 0);
    for (int32_t l : labels) ++sizes[l];

    // sum of distances from point i to every member of each cluster
    std::vector<double> sums(n * k, 0.0);
    if (precomputed) {
        const auto& d = *precomputed;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                const double dist = condensed_at(d, n, i, j);
                sums[i * k + labels[j]] += dist;
                sums[j * k + labels[i]] += dist;
            }
        }
    } else {
        parallel_for(n, [&](size_t i) {
            double* row = sums.data() + i * k;
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                row[labels[j]] += cluster::row_distance(m, i, j, mode);
            }
        });
    }

    SilhouetteResult result;
    result.per_point.resize(n, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const int own = labels[i];
        double s_i = 0.0;
        if (sizes[own] > 1) {
            const double a = sums[i * k + own] / static_cast<double>(sizes[own] - 1);
            double b = std::numeric_limits<double>::infinity();
            for (int g = 0; g < k; ++g) {
                if (g == own || sizes[g] == 0) continue;
                b = std::min(b, sums[i * k + g] / static_cast<double>(sizes[g]));
            }
            const double denom = std::max(a, b);
            s_i = denom > 0.0 ? (b - a) / denom : 0.0;  // coincident-points convention
        }
        // Singletons score 0 by convention.
        result.per_point[i] = s_i;
        total += s_i;
    }
    result.mean = total / static_cast<double>(n);
    return result;
}

double davies_bouldin(const features::FeatureMatrix& m, const std::vector<int32_t>& labels,
                      const std::vector<Centroid>& centroids, cluster::DistanceMode mode) {
    const size_t n = m.n();
    if (labels.size() != n) throw Error("davies_bouldin: label count mismatch");
    const size_t k = centroids.size();
    if (k < 2) throw Error("davies_bouldin: needs at least two clusters");

    std::vector<size_t> sizes(k, 0);
    std::vector<double> spread(k, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const int32_t l = labels[i];
        if (l < 0 || static_cast<size_t>(l) >= k) throw Error("davies_bouldin: label out of range");
        ++sizes[l];
        spread[l] += cluster::mixed_distance(m, i, centroids[l], mode);
    }
    for (size_t l = 0; l < k; ++l) {
        if (sizes[l] == 0) throw Error("davies_bouldin: empty cluster " + std::to_string(l + 1));
        spread[l] /= static_cast<double>(sizes[l]);
    }

    double total = 0.0;
    for (size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            const double separation = cluster::centroid_distance(centroids[i], centroids[j], mode);
            if (separation == 0.0) {
                throw Error("davies_bouldin: coincident centroids " + std::to_string(i + 1) +
                            " and " + std::to_string(j + 1) + " (degenerate clustering)");
            }
            worst = std::max(worst, (spread[i] + spread[j]) / separation);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

SweepResult sweep_k(const features::FeatureMatrix& m, int k_min, int k_max,
                    const SweepOptions& options) {
    if (k_min < 2) throw Error("sweep_k: k_min must be at least 2");
    if (k_max < k_min) throw Error("sweep_k: k_max below k_min");
    if (static_cast<size_t>(k_max) > m.n()) throw Error("sweep_k: k_max exceeds client count");

    std::vector<double> condensed;
    const std::vector<double>* dist = nullptr;
    if (m.n() <= options.pairwise_cutoff) {
        condensed = pairwise_distances(m, options.mode);
        dist = &condensed;
    }

    SweepResult result;
    for (int k = k_min; k <= k_max; ++k) {
        cluster::FitOptions fit_options;
        fit_options.mode = options.mode;
        fit_options.restarts = options.restarts;
        fit_options.seed = derive_seed(options.seed, static_cast<uint64_t>(k));
        fit_options.max_iterations = options.max_iterations;
        fit_options.threads = options.threads;
        cluster::ClusterModel model = cluster::fit(m, k, fit_options);

        ValidityReport report;
        report.k = k;
        SilhouetteResult sil = silhouette(m, model.labels, options.mode, dist);
        report.mean_silhouette = sil.mean;
        report.per_point_silhouette = std::move(sil.per_point);
        report.db_score = davies_bouldin(m, model.labels, model.centroids, options.mode);
        result.reports.push_back(std::move(report));
        result.models.push_back(std::move(model));
    }

    size_t best_sil = 0;
    size_t best_db = 0;
    for (size_t i = 1; i < result.reports.size(); ++i) {
        if (result.reports[i].mean_silhouette > result.reports[best_sil].mean_silhouette) {
            best_sil = i;
        }
        if (result.reports[i].db_score < result.reports[best_db].db_score) best_db = i;
    }
    result.chosen_k = result.reports[best_sil].k;
    result.db_chosen_k = result.reports[best_db].k;
    return result;
}

}  // namespace invseg::model_select
