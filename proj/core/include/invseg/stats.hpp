#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invseg/dates.hpp"
#include "invseg/features.hpp"
#include "invseg/ingest.hpp"

namespace invseg::stats {

// k groups of risk-tolerance scores, one list per cluster.
using GroupedScores = std::vector<std::vector<double>>;

struct PairComparison {
    int group_a = 0;  // 0-based
    int group_b = 0;
    std::string label;   // "2-1" (Tukey) or "1-2" (Dunn) style, 1-based
    size_t n_a = 0;
    size_t n_b = 0;
    double estimate = 0.0;   // mean difference / mean-rank difference
    double statistic = 0.0;  // q or z
    double p_value = 1.0;
    double adjusted_p = 1.0;
};

struct TestReport {
    double statistic = 0.0;
    std::vector<double> df;
    double p_value = 1.0;
    std::vector<PairComparison> pairwise;
};

struct AnovaReport : TestReport {
    double ss_between = 0.0;
    double ss_within = 0.0;
    double ms_between = 0.0;
    double ms_within = 0.0;
};

enum class Adjustment { Holm, Bonferroni, None };

Adjustment parse_adjustment(const std::string& name);
std::string adjustment_name(Adjustment a);

// Midranks of the pooled sample (average rank over ties), 1-based.
std::vector<double> midranks(const std::vector<double>& values);

// Multiplicity adjustment; every adjusted value is >= the raw one.
std::vector<double> adjust_p_values(const std::vector<double>& p, Adjustment method);

// Classic F test on group means, p via the regularized incomplete beta.
AnovaReport one_way_anova(const GroupedScores& groups);

// All-pairs comparison with studentized-range p-values (Tukey-Kramer SE for
// unequal sizes). Rows ordered "2-1, 3-1, ...".
TestReport tukey_hsd(const GroupedScores& groups);

// Rank-based omnibus test with the tie-correction divisor.
TestReport kruskal_wallis(const GroupedScores& groups);

// Pairwise z on mean ranks with tie-corrected SE; rows ordered "1-2, 1-3, ...".
TestReport dunn_test(const GroupedScores& groups, Adjustment adjustment = Adjustment::Holm);

struct HistogramDensity {
    std::vector<double> edges;    // size m+1, strictly increasing
    std::vector<double> density;  // size m, sums to 1 when weighted by width
};

// Counts normalized so sum(density * bin_width) == 1. The last bin is
// right-closed; scores outside the edges are fatal.
HistogramDensity histogram_density(const std::vector<double>& scores,
                                   const std::vector<double>& edges);

// 0.5*[KL(p||q) + KL(q||p)] on epsilon-smoothed, renormalized densities.
double symmetric_kl(const HistogramDensity& p, const HistogramDensity& q,
                    double epsilon = 1e-10);

// Percentile interval for the mean from B seeded resamples.
std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, size_t B,
                                       double level, uint64_t seed);

struct MonthlyCell {
    int cluster = 0;  // 0-based
    std::string month;  // "YYYY-MM"
    size_t n = 0;
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double total = 0.0;  // exact sum of the cell's amounts
};

struct MonthlySeries {
    features::TradeClass trade_class;
    std::vector<MonthlyCell> cells;  // cluster-major, month ascending; n==0 cells are empty markers
    double class_total = 0.0;        // exact sum over every amount of this class,
                                     // reconciles with features::class_totals
};

struct BootstrapParams {
    size_t B = 1000;
    double level = 0.95;
    uint64_t seed = 0;
};

// Calendar-month mean trade amounts per cluster for one trade class, with
// bootstrap CI bands. labels_by_client maps client_id -> 0-based cluster.
MonthlySeries monthly_cluster_series(
    const std::vector<ingest::TransactionRecord>& txns,
    const std::vector<std::pair<std::string, int>>& labels_by_client, int k,
    features::TradeClass trade_class, Date window_start, Date window_end,
    const BootstrapParams& bootstrap);

}  // namespace invseg::stats
