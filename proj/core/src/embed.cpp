#include "invseg/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "invseg/error.hpp"
#include "invseg/parallel.hpp"
#include "invseg/rng.hpp"

namespace invseg::embed {

namespace {

// Conditional row i for a given precision beta = 1/(2 sigma^2), stabilized by
// shifting the squared distances. Returns the achieved perplexity.
double fill_row(const double* d2, size_t n, size_t i, double beta, double* out) {
    double shift = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) {
        if (j != i) shift = std::min(shift, d2[j]);
    }
    double sum_w = 0.0;
    double sum_wd = 0.0;
    for (size_t j = 0; j < n; ++j) {
        if (j == i) {
            out[j] = 0.0;
            continue;
        }
        const double w = std::exp(-beta * (d2[j] - shift));
        out[j] = w;
        sum_w += w;
        sum_wd += w * (d2[j] - shift);
    }
    for (size_t j = 0; j < n; ++j) out[j] /= sum_w;
    // Shannon entropy in nats; perplexity = exp(H).
    const double entropy = std::log(sum_w) + beta * sum_wd / sum_w;
    return std::exp(entropy);
}

}  // namespace

std::vector<double> conditional_rows(const std::vector<double>& distances, size_t n,
                                     double perplexity, unsigned threads) {
    if (distances.size() != n * n) throw Error("conditional_affinities: matrix size mismatch");
    if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n))) {
        throw Error("conditional_affinities: perplexity must lie in (1, N)");
    }

    std::vector<double> conditional(n * n, 0.0);
    parallel_for(n, [&](size_t i) {
        std::vector<double> d2(n);
        double lo_d = std::numeric_limits<double>::infinity();
        double hi_d = 0.0;
        for (size_t j = 0; j < n; ++j) {
            const double d = distances[i * n + j];
            d2[j] = d * d;
            if (j != i) {
                lo_d = std::min(lo_d, d2[j]);
                hi_d = std::max(hi_d, d2[j]);
            }
        }
        double* row = conditional.data() + i * n;

        // All-equal distances carry no neighbourhood information; the row is
        // uniform for every bandwidth, so take it as such.
        if (hi_d - lo_d <= 1e-12 * std::max(1.0, hi_d)) {
            for (size_t j = 0; j < n; ++j) row[j] = (j == i) ? 0.0 : 1.0 / (n - 1);
            return;
        }

        // Achieved perplexity decreases in beta; bracket then bisect.
        double beta = 1.0;
        double beta_lo = 0.0;
        double beta_hi = std::numeric_limits<double>::infinity();
        double achieved = fill_row(d2.data(), n, i, beta, row);
        int steps = 0;
        while (std::abs(achieved - perplexity) > 1e-4) {
            if (++steps > 200) {
                throw Error("conditional_affinities: bisection failed for row " +
                            std::to_string(i) + " (achieved " + std::to_string(achieved) + ")");
            }
            if (achieved > perplexity) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
            } else {
                beta_hi = beta;
                beta = beta_lo == 0.0 ? beta * 0.5 : 0.5 * (beta_lo + beta_hi);
            }
            achieved = fill_row(d2.data(), n, i, beta, row);
        }
    }, threads);
    return conditional;
}

std::vector<double> conditional_affinities(const std::vector<double>& distances, size_t n,
                                           double perplexity, unsigned threads) {
    const std::vector<double> conditional = conditional_rows(distances, n, perplexity, threads);

    // Symmetrize; entries sum to 1.
    std::vector<double> P(n * n, 0.0);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double p = (conditional[i * n + j] + conditional[j * n + i]) * scale;
            P[i * n + j] = p;
            P[j * n + i] = p;
        }
    }
    return P;
}

double row_perplexity(const std::vector<double>& conditional, size_t n, size_t i) {
    double entropy = 0.0;
    for (size_t j = 0; j < n; ++j) {
        const double p = conditional[i * n + j];
        if (j != i && p > 0.0) entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

namespace {

double student_t_mass(const std::vector<double>& coords, size_t n) {
    double W = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double xi = coords[2 * i];
        const double yi = coords[2 * i + 1];
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = xi - coords[2 * j];
            const double dy = yi - coords[2 * j + 1];
            W += 2.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    return W;
}

}  // namespace

double kl_divergence(const std::vector<double>& P, const std::vector<double>& coords,
                     size_t n) {
    const double W = student_t_mass(coords, n);
    const double log_W = std::log(W);
    double kl = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double xi = coords[2 * i];
        const double yi = coords[2 * i + 1];
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double p = P[i * n + j];
            if (p <= 0.0) continue;
            const double dx = xi - coords[2 * j];
            const double dy = yi - coords[2 * j + 1];
            const double log_w = -std::log1p(dx * dx + dy * dy);
            kl += p * (std::log(p) - log_w + log_W);
        }
    }
    return kl;
}

namespace {

// 4 * [sum_j p_ij w_ij (y_i - y_j) - (1/W) sum_j w_ij^2 (y_i - y_j)]
void tsne_gradient(const std::vector<double>& P, double exaggeration,
                   const std::vector<double>& coords, size_t n, std::vector<double>& grad) {
    const double W = student_t_mass(coords, n);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double xi = coords[2 * i];
        const double yi = coords[2 * i + 1];
        double gx = 0.0;
        double gy = 0.0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = xi - coords[2 * j];
            const double dy = yi - coords[2 * j + 1];
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            const double coeff = exaggeration * P[i * n + j] * w - (w * w) / W;
            gx += coeff * dx;
            gy += coeff * dy;
        }
        grad[2 * i] = 4.0 * gx;
        grad[2 * i + 1] = 4.0 * gy;
    }
}

}  // namespace

EmbeddingMap tsne_from_distances(const std::vector<double>& distances, size_t n,
                                 const TsneParams& params) {
    if (n < 4) throw Error("tsne: need at least 4 points");
    if (params.iterations < 1) throw Error("tsne: iterations must be positive");

    const std::vector<double> P = conditional_affinities(distances, n, params.perplexity,
                                                         params.threads);

    EmbeddingMap map;
    map.perplexity = params.perplexity;
    map.iterations = params.iterations;
    map.seed = params.seed;

    Rng rng(params.seed);
    std::vector<double> coords(2 * n);
    for (double& c : coords) c = rng.normal(0.0, 1e-4);
    std::vector<double> velocity(2 * n, 0.0);
    std::vector<double> grad(2 * n, 0.0);

    const int exaggeration_end = std::min(params.exaggeration_end, params.iterations);
    for (int iter = 1; iter <= params.iterations; ++iter) {
        const double exaggeration = iter <= exaggeration_end ? params.early_exaggeration : 1.0;
        const double momentum =
            iter <= params.exaggeration_end ? params.initial_momentum : params.final_momentum;

        tsne_gradient(P, exaggeration, coords, n, grad);
        for (double g : grad) {
            if (!std::isfinite(g)) {
                throw Error("tsne: non-finite gradient at iteration " + std::to_string(iter));
            }
        }
        double mean_x = 0.0;
        double mean_y = 0.0;
        for (size_t i = 0; i < n; ++i) {
            velocity[2 * i] = momentum * velocity[2 * i] - params.learning_rate * grad[2 * i];
            velocity[2 * i + 1] =
                momentum * velocity[2 * i + 1] - params.learning_rate * grad[2 * i + 1];
            coords[2 * i] += velocity[2 * i];
            coords[2 * i + 1] += velocity[2 * i + 1];
            mean_x += coords[2 * i];
            mean_y += coords[2 * i + 1];
        }
        mean_x /= static_cast<double>(n);
        mean_y /= static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) {
            coords[2 * i] -= mean_x;
            coords[2 * i + 1] -= mean_y;
        }

        if (params.kl_record_every > 0 && iter % params.kl_record_every == 0 &&
            iter != params.iterations) {
            // Recorded KL is always against the true (unexaggerated) P.
            map.kl_trace.emplace_back(iter, kl_divergence(P, coords, n));
        }
    }

    map.final_kl = kl_divergence(P, coords, n);
    map.kl_trace.emplace_back(params.iterations, map.final_kl);
    map.coords = std::move(coords);
    return map;
}

EmbeddingMap tsne(const features::FeatureMatrix& m, const TsneParams& params) {
    const size_t n = m.n();
    std::vector<double> distances(n * n, 0.0);
    parallel_for(n, [&](size_t i) {
        for (size_t j = 0; j < n; ++j) {
            if (j != i) distances[i * n + j] = cluster::row_distance(m, i, j, params.mode);
        }
    }, params.threads);
    return tsne_from_distances(distances, n, params);
}

double gradient_check(const std::vector<double>& P, const std::vector<double>& coords,
                      size_t n) {
    std::vector<double> analytic(2 * n, 0.0);
    tsne_gradient(P, 1.0, coords, n, analytic);

    const double h = 1e-5;
    double worst = 0.0;
    std::vector<double> perturbed = coords;
    for (size_t c = 0; c < 2 * n; ++c) {
        perturbed[c] = coords[c] + h;
        const double up = kl_divergence(P, perturbed, n);
        perturbed[c] = coords[c] - h;
        const double down = kl_divergence(P, perturbed, n);
        perturbed[c] = coords[c];
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max(1e-8, std::abs(analytic[c]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[c] - numeric) / denom);
    }
    return worst;
}

}  // namespace invseg::embed
