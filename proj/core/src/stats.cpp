#include "invseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "invseg/error.hpp"
#include "invseg/exact_sum.hpp"
#include "invseg/rng.hpp"
#include "invseg/special_functions.hpp"

namespace invseg::stats {

namespace {

void check_groups(const GroupedScores& groups, size_t min_group_size) {
    if (groups.size() < 2) throw Error("stats: need at least two groups");
    for (size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < min_group_size) {
            throw Error("stats: group " + std::to_string(g + 1) + " has fewer than " +
                        std::to_string(min_group_size) + " observations");
        }
        for (double v : groups[g]) {
            if (!std::isfinite(v)) throw Error("stats: non-finite score in group " +
                                               std::to_string(g + 1));
        }
    }
}

double group_mean(const std::vector<double>& xs) {
    ExactSum sum;
    for (double x : xs) sum.add(x);
    return sum.value() / static_cast<double>(xs.size());
}

// Sum over tie groups of (t^3 - t) for the pooled sample.
double tie_term(std::vector<double> pooled) {
    std::sort(pooled.begin(), pooled.end());
    double total = 0.0;
    size_t i = 0;
    while (i < pooled.size()) {
        size_t j = i;
        while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
        const double t = static_cast<double>(j - i);
        total += t * t * t - t;
        i = j;
    }
    return total;
}

std::string pair_label(int first, int second) {
    return std::to_string(first) + "-" + std::to_string(second);
}

}  // namespace

Adjustment parse_adjustment(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "holm") return Adjustment::Holm;
    if (n == "bonferroni") return Adjustment::Bonferroni;
    if (n == "none") return Adjustment::None;
    throw ConfigError("unknown adjustment '" + name + "' (expected holm, bonferroni, none)");
}

std::string adjustment_name(Adjustment a) {
    switch (a) {
        case Adjustment::Holm: return "holm";
        case Adjustment::Bonferroni: return "bonferroni";
        case Adjustment::None: return "none";
    }
    return "?";
}

std::vector<double> midranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        // Average of ranks i+1 .. j (1-based).
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (size_t t = i; t < j; ++t) ranks[order[t]] = rank;
        i = j;
    }
    return ranks;
}

std::vector<double> adjust_p_values(const std::vector<double>& p, Adjustment method) {
    const size_t m = p.size();
    std::vector<double> adjusted(m);
    switch (method) {
        case Adjustment::None:
            adjusted = p;
            break;
        case Adjustment::Bonferroni:
            for (size_t i = 0; i < m; ++i) adjusted[i] = std::min(1.0, p[i] * static_cast<double>(m));
            break;
        case Adjustment::Holm: {
            std::vector<size_t> order(m);
            std::iota(order.begin(), order.end(), size_t{0});
            std::sort(order.begin(), order.end(),
                      [&](size_t a, size_t b) { return p[a] < p[b]; });
            double running = 0.0;
            for (size_t rank = 0; rank < m; ++rank) {
                const double scaled = std::min(1.0, p[order[rank]] * static_cast<double>(m - rank));
                running = std::max(running, scaled);
                adjusted[order[rank]] = running;
            }
            break;
        }
    }
    return adjusted;
}

AnovaReport one_way_anova(const GroupedScores& groups) {
    check_groups(groups, 2);
    const size_t k = groups.size();
    size_t n_total = 0;
    ExactSum grand;
    for (const auto& g : groups) {
        n_total += g.size();
        for (double v : g) grand.add(v);
    }
    const double grand_mean = grand.value() / static_cast<double>(n_total);

    ExactSum ssb_acc, ssw_acc;
    for (const auto& g : groups) {
        const double mean = group_mean(g);
        const double d = mean - grand_mean;
        ssb_acc.add(static_cast<double>(g.size()) * d * d);
        for (double v : g) {
            const double e = v - mean;
            ssw_acc.add(e * e);
        }
    }

    AnovaReport report;
    report.ss_between = ssb_acc.value();
    report.ss_within = ssw_acc.value();
    report.df = {static_cast<double>(k - 1), static_cast<double>(n_total - k)};
    report.ms_between = report.ss_between / report.df[0];
    report.ms_within = report.ss_within / report.df[1];
    if (report.ms_within == 0.0) {
        // Degenerate-variance conventions.
        if (report.ss_between == 0.0) {
            report.statistic = 0.0;
            report.p_value = 1.0;
        } else {
            report.statistic = std::numeric_limits<double>::infinity();
            report.p_value = 0.0;
        }
        return report;
    }
    report.statistic = report.ms_between / report.ms_within;
    report.p_value = sf::f_sf(report.statistic, report.df[0], report.df[1]);
    return report;
}

TestReport tukey_hsd(const GroupedScores& groups) {
    const AnovaReport anova = one_way_anova(groups);
    const size_t k = groups.size();
    std::vector<double> means(k);
    for (size_t g = 0; g < k; ++g) means[g] = group_mean(groups[g]);

    TestReport report;
    report.statistic = anova.statistic;
    report.df = anova.df;
    report.p_value = anova.p_value;

    for (size_t a = 0; a < k; ++a) {
        for (size_t b = a + 1; b < k; ++b) {
            PairComparison pair;
            pair.group_a = static_cast<int>(a);
            pair.group_b = static_cast<int>(b);
            // Table rows read "2-1, 3-1, ...": difference of the later group
            // minus the earlier one.
            pair.label = pair_label(static_cast<int>(b + 1), static_cast<int>(a + 1));
            pair.n_a = groups[a].size();
            pair.n_b = groups[b].size();
            pair.estimate = means[b] - means[a];
            if (anova.ms_within == 0.0) {
                pair.statistic = pair.estimate == 0.0
                                     ? 0.0
                                     : std::numeric_limits<double>::infinity();
                pair.p_value = pair.estimate == 0.0 ? 1.0 : 0.0;
            } else {
                // Tukey-Kramer standard error for unequal group sizes.
                const double se = std::sqrt(0.5 * anova.ms_within *
                                            (1.0 / static_cast<double>(pair.n_a) +
                                             1.0 / static_cast<double>(pair.n_b)));
                pair.statistic = std::abs(pair.estimate) / se;
                pair.p_value = sf::studentized_range_sf(pair.statistic, static_cast<int>(k),
                                                        anova.df[1]);
            }
            pair.adjusted_p = pair.p_value;  // the range distribution is already familywise
            report.pairwise.push_back(std::move(pair));
        }
    }
    return report;
}

namespace {

struct RankSummary {
    std::vector<double> mean_ranks;
    std::vector<size_t> sizes;
    size_t n = 0;
    double tie_correction_divisor = 0.0;  // 1 - sum(t^3-t)/(N^3-N)
    double tie_sum = 0.0;                 // sum(t^3-t)
    double h_raw = 0.0;
    double h_corrected = 0.0;
};

RankSummary rank_summary(const GroupedScores& groups) {
    RankSummary s;
    std::vector<double> pooled;
    for (const auto& g : groups) {
        s.sizes.push_back(g.size());
        for (double v : g) pooled.push_back(v);
    }
    s.n = pooled.size();
    const std::vector<double> ranks = midranks(pooled);

    size_t offset = 0;
    for (const auto& g : groups) {
        ExactSum sum;
        for (size_t i = 0; i < g.size(); ++i) sum.add(ranks[offset + i]);
        s.mean_ranks.push_back(sum.value() / static_cast<double>(g.size()));
        offset += g.size();
    }

    const double n = static_cast<double>(s.n);
    ExactSum h_acc;
    offset = 0;
    for (size_t g = 0; g < groups.size(); ++g) {
        ExactSum sum;
        for (size_t i = 0; i < groups[g].size(); ++i) sum.add(ranks[offset + i]);
        const double r = sum.value();
        h_acc.add(r * r / static_cast<double>(groups[g].size()));
        offset += groups[g].size();
    }
    s.h_raw = 12.0 / (n * (n + 1.0)) * h_acc.value() - 3.0 * (n + 1.0);
    s.tie_sum = tie_term(pooled);
    s.tie_correction_divisor = 1.0 - s.tie_sum / (n * n * n - n);
    s.h_corrected =
        s.tie_correction_divisor > 0.0 ? s.h_raw / s.tie_correction_divisor : 0.0;
    return s;
}

}  // namespace

TestReport kruskal_wallis(const GroupedScores& groups) {
    check_groups(groups, 1);
    size_t n_total = 0;
    for (const auto& g : groups) n_total += g.size();
    if (n_total < 3) throw Error("kruskal_wallis: need at least three observations");

    const RankSummary s = rank_summary(groups);
    TestReport report;
    report.df = {static_cast<double>(groups.size() - 1)};
    if (s.tie_correction_divisor <= 0.0) {
        // Every observation identical.
        report.statistic = 0.0;
        report.p_value = 1.0;
        return report;
    }
    report.statistic = s.h_corrected;
    report.p_value = sf::chi_square_sf(report.statistic, report.df[0]);
    return report;
}

TestReport dunn_test(const GroupedScores& groups, Adjustment adjustment) {
    check_groups(groups, 1);
    size_t n_total = 0;
    for (const auto& g : groups) n_total += g.size();
    if (n_total < 3) throw Error("dunn_test: need at least three observations");

    const RankSummary s = rank_summary(groups);
    const size_t k = groups.size();
    const double n = static_cast<double>(s.n);
    // Tie-corrected variance term of the mean-rank difference.
    const double base_var = n * (n + 1.0) / 12.0 - s.tie_sum / (12.0 * (n - 1.0));

    TestReport report;
    report.statistic = s.tie_correction_divisor > 0.0 ? s.h_corrected : 0.0;
    report.df = {static_cast<double>(k - 1)};
    report.p_value = s.tie_correction_divisor > 0.0
                         ? sf::chi_square_sf(report.statistic, report.df[0])
                         : 1.0;

    std::vector<double> raw_p;
    for (size_t a = 0; a < k; ++a) {
        for (size_t b = a + 1; b < k; ++b) {
            PairComparison pair;
            pair.group_a = static_cast<int>(a);
            pair.group_b = static_cast<int>(b);
            pair.label = pair_label(static_cast<int>(a + 1), static_cast<int>(b + 1));
            pair.n_a = groups[a].size();
            pair.n_b = groups[b].size();
            pair.estimate = s.mean_ranks[a] - s.mean_ranks[b];
            const double var = base_var * (1.0 / static_cast<double>(pair.n_a) +
                                           1.0 / static_cast<double>(pair.n_b));
            if (var <= 0.0) {
                pair.statistic = 0.0;
                pair.p_value = 1.0;
            } else {
                pair.statistic = pair.estimate / std::sqrt(var);
                pair.p_value = 2.0 * sf::normal_sf(std::abs(pair.statistic));
            }
            raw_p.push_back(pair.p_value);
            report.pairwise.push_back(std::move(pair));
        }
    }
    const std::vector<double> adjusted = adjust_p_values(raw_p, adjustment);
    for (size_t i = 0; i < adjusted.size(); ++i) report.pairwise[i].adjusted_p = adjusted[i];
    return report;
}

HistogramDensity histogram_density(const std::vector<double>& scores,
                                   const std::vector<double>& edges) {
    if (edges.size() < 2) throw Error("histogram_density: need at least two edges");
    for (size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw Error("histogram_density: edges must be strictly increasing");
        }
    }
    if (scores.empty()) throw Error("histogram_density: no scores to bin");

    const size_t m = edges.size() - 1;
    std::vector<size_t> counts(m, 0);
    for (double v : scores) {
        if (v < edges.front() || v > edges.back()) {
            throw Error("histogram_density: score outside the bin edges");
        }
        // Bins [e_i, e_{i+1}); the last bin is right-closed.
        size_t bin = m - 1;
        if (v < edges.back()) {
            bin = static_cast<size_t>(
                std::upper_bound(edges.begin(), edges.end(), v) - edges.begin() - 1);
        }
        ++counts[bin];
    }
    HistogramDensity h;
    h.edges = edges;
    h.density.resize(m);
    const double n = static_cast<double>(scores.size());
    for (size_t b = 0; b < m; ++b) {
        h.density[b] = static_cast<double>(counts[b]) / (n * (edges[b + 1] - edges[b]));
    }
    return h;
}

double symmetric_kl(const HistogramDensity& p, const HistogramDensity& q, double epsilon) {
    if (p.edges != q.edges) throw Error("symmetric_kl: densities use different binnings");
    if (!(epsilon > 0.0)) throw Error("symmetric_kl: epsilon must be positive");
    const size_t m = p.density.size();

    // Epsilon-smoothing: floor each bin, renormalize to unit integral.
    auto smooth = [&](const std::vector<double>& density) {
        std::vector<double> out(m);
        double integral = 0.0;
        for (size_t b = 0; b < m; ++b) {
            out[b] = std::max(density[b], epsilon);
            integral += out[b] * (p.edges[b + 1] - p.edges[b]);
        }
        for (double& v : out) v /= integral;
        return out;
    };
    const std::vector<double> ps = smooth(p.density);
    const std::vector<double> qs = smooth(q.density);

    double forward = 0.0;
    double backward = 0.0;
    for (size_t b = 0; b < m; ++b) {
        const double w = p.edges[b + 1] - p.edges[b];
        const double log_ratio = std::log(ps[b]) - std::log(qs[b]);
        forward += w * ps[b] * log_ratio;
        backward -= w * qs[b] * log_ratio;
    }
    return 0.5 * (forward + backward);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, size_t B,
                                       double level, uint64_t seed) {
    if (samples.size() < 2) throw Error("bootstrap_ci: need at least two samples");
    if (B < 100) throw Error("bootstrap_ci: need at least 100 resamples");
    if (!(level > 0.0) || !(level < 1.0)) throw Error("bootstrap_ci: level must lie in (0, 1)");

    const size_t n = samples.size();
    Rng rng(seed);
    std::vector<double> means(B);
    for (size_t b = 0; b < B; ++b) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) sum += samples[rng.below(n)];
        means[b] = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());

    // Percentile interval with linear interpolation between order statistics.
    auto quantile = [&](double prob) {
        const double h = prob * static_cast<double>(B - 1);
        const size_t lo = static_cast<size_t>(std::floor(h));
        const size_t hi = std::min(lo + 1, B - 1);
        const double frac = h - static_cast<double>(lo);
        return means[lo] + frac * (means[hi] - means[lo]);
    };
    const double alpha = 1.0 - level;
    return {quantile(0.5 * alpha), quantile(1.0 - 0.5 * alpha)};
}

MonthlySeries monthly_cluster_series(
    const std::vector<ingest::TransactionRecord>& txns,
    const std::vector<std::pair<std::string, int>>& labels_by_client, int k,
    features::TradeClass trade_class, Date window_start, Date window_end,
    const BootstrapParams& bootstrap) {
    if (k < 1) throw Error("monthly_cluster_series: need at least one cluster");
    if (window_end < window_start) throw Error("monthly_cluster_series: empty window");

    std::unordered_map<std::string, int> cluster_of;
    cluster_of.reserve(labels_by_client.size());
    for (const auto& [id, label] : labels_by_client) {
        if (label < 0 || label >= k) throw Error("monthly_cluster_series: label out of range");
        cluster_of[id] = label;
    }

    const int month_lo = month_index(window_start);
    const int month_hi = month_index(window_end);
    const size_t months = static_cast<size_t>(month_hi - month_lo + 1);

    std::vector<std::vector<double>> amounts(static_cast<size_t>(k) * months);
    MonthlySeries series;
    series.trade_class = trade_class;
    ExactSum class_total;

    for (const auto& t : txns) {
        if (features::classify_trade(t.trade_type) != trade_class) continue;
        const double amount = features::trade_amount(t);
        class_total.add(amount);
        const auto it = cluster_of.find(t.client_id);
        if (it == cluster_of.end()) {
            throw Error("monthly_cluster_series: transaction for unlabeled client '" +
                        t.client_id + "'");
        }
        const int mi = month_index(t.order_date);
        if (mi < month_lo || mi > month_hi) {
            throw Error("monthly_cluster_series: transaction outside the window");
        }
        amounts[static_cast<size_t>(it->second) * months + (mi - month_lo)].push_back(amount);
    }
    series.class_total = class_total.value();

    for (int cluster = 0; cluster < k; ++cluster) {
        for (size_t mo = 0; mo < months; ++mo) {
            MonthlyCell cell;
            cell.cluster = cluster;
            const int mi = month_lo + static_cast<int>(mo);
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02d", mi / 12, mi % 12 + 1);
            cell.month = buf;
            auto& cell_amounts = amounts[static_cast<size_t>(cluster) * months + mo];
            // Canonical within-cell order: identical amount multisets yield
            // identical bands regardless of whichever cluster holds them.
            std::sort(cell_amounts.begin(), cell_amounts.end());
            cell.n = cell_amounts.size();
            if (cell.n > 0) {
                ExactSum total;
                for (double a : cell_amounts) total.add(a);
                cell.total = total.value();
                cell.mean = cell.total / static_cast<double>(cell.n);
                if (cell.n == 1) {
                    cell.lo = cell.hi = cell.mean;  // degenerate band
                } else {
                    // Seeded per (month, class) so equal cells band equally.
                    const uint64_t cell_seed =
                        derive_seed(bootstrap.seed, static_cast<uint64_t>(mo),
                                    static_cast<uint64_t>(trade_class));
                    std::tie(cell.lo, cell.hi) =
                        bootstrap_ci(cell_amounts, bootstrap.B, bootstrap.level, cell_seed);
                }
            }
            series.cells.push_back(std::move(cell));
        }
    }
    return series;
}

}  // namespace invseg::stats
