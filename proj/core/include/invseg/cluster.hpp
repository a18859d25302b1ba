#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "invseg/features.hpp"

namespace invseg::cluster {

// Numeric term of the mixed distance. L1 is the literal reading of the
// displayed formula (sum of sqrt((x-c)^2) terms); SquaredEuclidean is the
// selectable alternative matching the "usual Euclidean distance" prose.
enum class DistanceMode { L1, SquaredEuclidean };

DistanceMode parse_distance_mode(const std::string& name);
std::string distance_mode_name(DistanceMode mode);

struct Centroid {
    std::vector<double> numeric;       // p
    std::vector<int32_t> categorical;  // q category codes
};

// Numeric gaps plus 0/1 categorical mismatches; layouts must agree.
double mixed_distance(std::span<const double> x_numeric,
                      std::span<const int32_t> x_categorical, const Centroid& c,
                      DistanceMode mode);

double mixed_distance(const features::FeatureMatrix& m, size_t row, const Centroid& c,
                      DistanceMode mode);

double centroid_distance(const Centroid& a, const Centroid& b, DistanceMode mode);

// Point-to-point distance between two rows (used by silhouette and t-SNE).
double row_distance(const features::FeatureMatrix& m, size_t i, size_t j,
                    DistanceMode mode);

// Nearest-centroid labels, ties broken by lowest cluster index. 0-based.
std::vector<int32_t> assign(const features::FeatureMatrix& m,
                            const std::vector<Centroid>& centroids, DistanceMode mode);

// Numeric attributes move to the within-cluster mean, categorical to the
// within-cluster mode (ties: lexicographically smallest label). An empty
// cluster is reseeded with the point farthest from its stale centroid.
std::vector<Centroid> update_centroids(const features::FeatureMatrix& m,
                                       const std::vector<int32_t>& labels,
                                       const std::vector<Centroid>& previous,
                                       DistanceMode mode);

// J: total distance of every point to its assigned centroid.
double total_cost(const features::FeatureMatrix& m, const std::vector<int32_t>& labels,
                  const std::vector<Centroid>& centroids, DistanceMode mode);

struct ClusterModel {
    int k = 0;
    DistanceMode mode = DistanceMode::L1;
    std::vector<Centroid> centroids;
    std::vector<int32_t> labels;  // 0-based in memory, serialized 1-based
    double cost = 0.0;
    int iterations = 0;
    uint64_t seed = 0;          // the fit-level seed
    uint64_t restart_seed = 0;  // derived seed of the winning restart
    int restart_index = 0;
    std::vector<double> cost_trace;  // non-increasing
    bool converged = true;           // false = stopped at max_iterations
};

struct FitOptions {
    DistanceMode mode = DistanceMode::L1;
    int restarts = 50;
    uint64_t seed = 0;
    int max_iterations = 300;
    unsigned threads = 0;  // 0 = hardware default; restarts are independent
};

// Multi-restart alternating minimization. Each restart seeds its centroids
// from k distinct clients; the best final cost wins, ties to the lowest
// restart index. Deterministic given (seed, restarts).
ClusterModel fit(const features::FeatureMatrix& m, int k, const FitOptions& options);

// Versioned text format: header, centroid table, labels keyed by client_id.
void save_model(const ClusterModel& model, const features::FeatureMatrix& m,
                const std::string& path);

struct LoadedModel {
    ClusterModel model;  // categorical codes are file-local until aligned
    std::vector<std::string> client_ids;
    std::vector<std::vector<std::string>> centroid_categories;  // k x q labels

    // Rewrites centroid categorical codes to match the matrix's level tables.
    void align_to(const features::FeatureMatrix& m);
};

LoadedModel load_model(const std::string& path);

}  // namespace invseg::cluster
