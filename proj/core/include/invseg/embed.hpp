#pragma once

#include <cstdint>
#include <vector>

#include "invseg/cluster.hpp"
#include "invseg/features.hpp"

namespace invseg::embed {

// Row-stochastic conditional affinities: per-row Gaussian bandwidths found by
// bisection so the row perplexity matches the target within 1e-4; rows whose
// distances are all equal fall back to uniform.
std::vector<double> conditional_rows(const std::vector<double>& distances, size_t n,
                                     double perplexity, unsigned threads = 0);

// Symmetrized affinities over a precomputed distance matrix (n*n row-major,
// symmetric, zero diagonal): p_ij = (p_j|i + p_i|j) / 2n. Entries sum to 1.
std::vector<double> conditional_affinities(const std::vector<double>& distances, size_t n,
                                           double perplexity, unsigned threads = 0);

// Achieved perplexity of row i of the conditional (row-normalized) matrix;
// exposed for verification.
double row_perplexity(const std::vector<double>& conditional, size_t n, size_t i);

struct TsneParams {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    uint64_t seed = 0;
    double early_exaggeration = 12.0;
    int exaggeration_end = 250;      // iterations of exaggerated P
    double initial_momentum = 0.5;
    double final_momentum = 0.8;     // after exaggeration_end
    int kl_record_every = 50;        // 0 = final value only
    cluster::DistanceMode mode = cluster::DistanceMode::L1;
    unsigned threads = 0;            // affinity rows only; the descent is serial
};

struct EmbeddingMap {
    std::vector<double> coords;  // n*2 row-major
    double perplexity = 0.0;
    int iterations = 0;
    double final_kl = 0.0;
    uint64_t seed = 0;
    std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL vs true P)
};

// Exact O(n^2) t-SNE on the mixed distance: KL(P||Q) descent with the
// Student-t kernel, early exaggeration and a momentum schedule. Deterministic
// under the seed.
EmbeddingMap tsne(const features::FeatureMatrix& m, const TsneParams& params);

// Variant over an explicit distance matrix (n*n row-major).
EmbeddingMap tsne_from_distances(const std::vector<double>& distances, size_t n,
                                 const TsneParams& params);

// KL(P||Q) for a coordinate configuration; P is the n*n affinity matrix.
double kl_divergence(const std::vector<double>& P, const std::vector<double>& coords,
                     size_t n);

// Max relative error between the analytic KL gradient and central finite
// differences (step 1e-5). Intended for small n.
double gradient_check(const std::vector<double>& P, const std::vector<double>& coords,
                      size_t n);

}  // namespace invseg::embed
