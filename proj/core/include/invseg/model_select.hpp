#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "invseg/cluster.hpp"
#include "invseg/features.hpp"

namespace invseg::model_select {

using cluster::Centroid;

struct SilhouetteResult {
    std::vector<double> per_point;  // each in [-1, 1]
    double mean = 0.0;
};

struct ValidityReport {
    int k = 0;
    double mean_silhouette = 0.0;
    double db_score = 0.0;
    std::vector<double> per_point_silhouette;
};

// Condensed pairwise distance matrix (i < j), materialized when n is small
// enough to afford n(n-1)/2 doubles.
std::vector<double> pairwise_distances(const features::FeatureMatrix& m,
                                       cluster::DistanceMode mode);

inline double& condensed_at(std::vector<double>& d, size_t n, size_t i, size_t j) {
    return d[i * n - i * (i + 1) / 2 + (j - i - 1)];
}
inline double condensed_at(const std::vector<double>& d, size_t n, size_t i, size_t j) {
    return d[i * n - i * (i + 1) / 2 + (j - i - 1)];
}

// Point-to-point silhouette. Singleton clusters score 0. Requires k >= 2.
// Distances are streamed when `precomputed` is null.
SilhouetteResult silhouette(const features::FeatureMatrix& m,
                            const std::vector<int32_t>& labels,
                            cluster::DistanceMode mode,
                            const std::vector<double>* precomputed = nullptr);

// Point-to-centroid Davies-Bouldin score; coincident centroids are fatal.
double davies_bouldin(const features::FeatureMatrix& m, const std::vector<int32_t>& labels,
                      const std::vector<Centroid>& centroids, cluster::DistanceMode mode);

struct SweepOptions {
    cluster::DistanceMode mode = cluster::DistanceMode::L1;
    int restarts = 50;
    uint64_t seed = 0;
    int max_iterations = 300;
    // Materialize the pairwise matrix for silhouettes up to this many rows.
    size_t pairwise_cutoff = 20000;
    unsigned threads = 0;
};

struct SweepResult {
    std::vector<ValidityReport> reports;  // ascending k
    std::vector<cluster::ClusterModel> models;  // aligned with reports
    int chosen_k = 0;     // argmax of mean silhouette
    int db_chosen_k = 0;  // argmin of the DB score, reported alongside
};

// Fits every k in [k_min, k_max] with the same restart budget and scores the
// partitions; the silhouette argmax wins when the two indices disagree.
SweepResult sweep_k(const features::FeatureMatrix& m, int k_min, int k_max,
                    const SweepOptions& options);

}  // namespace invseg::model_select
