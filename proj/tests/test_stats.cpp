#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "invseg/error.hpp"
#include "invseg/rng.hpp"
#include "invseg/special_functions.hpp"
#include "invseg/stats.hpp"

using namespace invseg;
using stats::GroupedScores;

namespace {

// Brute-force sum-of-squares decomposition, straight from the textbook
// formulas and independent of the implementation path.
struct AnovaOracle {
    double ss_between = 0.0;
    double ss_within = 0.0;
    double f = 0.0;
};

AnovaOracle oracle_anova(const GroupedScores& groups) {
    AnovaOracle o;
    double grand = 0.0;
    size_t n = 0;
    for (const auto& g : groups) {
        for (double v : g) grand += v;
        n += g.size();
    }
    grand /= static_cast<double>(n);
    for (const auto& g : groups) {
        double mean = 0.0;
        for (double v : g) mean += v;
        mean /= static_cast<double>(g.size());
        o.ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
        for (double v : g) o.ss_within += (v - mean) * (v - mean);
    }
    const double df1 = static_cast<double>(groups.size() - 1);
    const double df2 = static_cast<double>(n - groups.size());
    o.f = (o.ss_between / df1) / (o.ss_within / df2);
    return o;
}

// Independent midrank computation (sort + averaged tied ranks).
std::vector<double> oracle_midranks(const std::vector<double>& values) {
    std::vector<size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        double sum = 0.0;
        for (size_t t = i; t < j; ++t) sum += static_cast<double>(t + 1);
        const double avg = sum / static_cast<double>(j - i);
        for (size_t t = i; t < j; ++t) ranks[idx[t]] = avg;
        i = j;
    }
    return ranks;
}

double oracle_kruskal_h(const GroupedScores& groups, bool tie_correct) {
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const auto ranks = oracle_midranks(pooled);
    const double n = static_cast<double>(pooled.size());
    double h = 0.0;
    size_t offset = 0;
    for (const auto& g : groups) {
        double r = 0.0;
        for (size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
        h += r * r / static_cast<double>(g.size());
        offset += g.size();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    if (!tie_correct) return h;
    std::sort(pooled.begin(), pooled.end());
    double ties = 0.0;
    size_t i = 0;
    while (i < pooled.size()) {
        size_t j = i;
        while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    return h / (1.0 - ties / (n * n * n - n));
}

GroupedScores random_groups(uint64_t seed, size_t k, size_t lo, size_t hi, bool tied) {
    Rng rng(seed);
    GroupedScores groups(k);
    for (auto& g : groups) {
        const size_t n = lo + rng.below(hi - lo + 1);
        for (size_t i = 0; i < n; ++i) {
            g.push_back(tied ? 1.0 + 0.5 * static_cast<double>(rng.below(9))
                             : rng.normal(3.0, 0.8));
        }
    }
    return groups;
}

ingest::TransactionRecord txn(const std::string& client, const std::string& type,
                              double size, double value, const std::string& date) {
    ingest::TransactionRecord t;
    t.account_id = "A" + client;
    t.client_id = client;
    t.trade_type = type;
    t.account_type = "RSP";
    t.size = size;
    t.unit_value = value;
    t.order_date = *parse_date(date);
    t.status = "filled";
    return t;
}

}  // namespace

TEST_CASE("anova identical groups") {
    const auto r = stats::one_way_anova({{1, 2, 3}, {1, 2, 3}});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("anova hand-computed decomposition") {
    const auto r = stats::one_way_anova({{1, 2}, {5, 6}});
    CHECK(r.ss_between == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(r.ss_within == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.statistic == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(r.df[0] == 1.0);
    CHECK(r.df[1] == 2.0);
    // Exact p through the F(1,2) <-> t(2) closed form: 1 - sqrt(F/(F+2)).
    CHECK(r.p_value == doctest::Approx(1.0 - std::sqrt(32.0 / 34.0)).epsilon(1e-12));
}

TEST_CASE("anova df shape for five groups") {
    GroupedScores groups(5);
    Rng rng(3);
    for (auto& g : groups) {
        for (int i = 0; i < 12; ++i) g.push_back(rng.normal(3.0, 0.7));
    }
    const auto r = stats::one_way_anova(groups);
    CHECK(r.df[0] == 4.0);
    CHECK(r.df[1] == static_cast<double>(60 - 5));
}

TEST_CASE("anova degenerate variance conventions") {
    const auto same = stats::one_way_anova({{1, 1}, {1, 1}});
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    const auto separated = stats::one_way_anova({{1, 1}, {2, 2}});
    CHECK(separated.p_value == 0.0);
}

TEST_CASE("anova matches brute force on random instances") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        const auto groups = random_groups(seed, 2 + seed % 3, 2, 5, seed % 2 == 0);
        const auto oracle = oracle_anova(groups);
        if (oracle.ss_within == 0.0) continue;
        const auto r = stats::one_way_anova(groups);
        CHECK(r.statistic == doctest::Approx(oracle.f).epsilon(1e-10));
        CHECK(r.ss_between == doctest::Approx(oracle.ss_between).epsilon(1e-10));
        // Decomposition identity: SS_total = SS_between + SS_within.
        double grand = 0.0;
        size_t n = 0;
        for (const auto& g : groups) {
            for (double v : g) grand += v;
            n += g.size();
        }
        grand /= static_cast<double>(n);
        double ss_total = 0.0;
        for (const auto& g : groups) {
            for (double v : g) ss_total += (v - grand) * (v - grand);
        }
        CHECK(r.ss_between + r.ss_within == doctest::Approx(ss_total).epsilon(1e-9));
    }
}

TEST_CASE("anova invariances") {
    const auto base = random_groups(11, 3, 3, 6, false);
    const auto r0 = stats::one_way_anova(base);
    GroupedScores shifted = base, scaled = base;
    for (auto& g : shifted) {
        for (double& v : g) v += 17.5;
    }
    for (auto& g : scaled) {
        for (double& v : g) v *= 3.25;
    }
    CHECK(stats::one_way_anova(shifted).statistic ==
          doctest::Approx(r0.statistic).epsilon(1e-9));
    CHECK(stats::one_way_anova(scaled).statistic ==
          doctest::Approx(r0.statistic).epsilon(1e-9));
}

TEST_CASE("tukey identical groups") {
    const auto r = stats::tukey_hsd({{2, 2, 2}, {2, 2, 2}, {2, 2, 2}});
    for (const auto& pair : r.pairwise) {
        CHECK(pair.estimate == 0.0);
        CHECK(pair.adjusted_p == 1.0);
    }
}

TEST_CASE("tukey two groups equals pooled t test") {
    const GroupedScores groups = {{3.1, 2.7, 3.4, 2.9, 3.3}, {3.6, 3.9, 3.2, 3.8}};
    const auto r = stats::tukey_hsd(groups);
    REQUIRE(r.pairwise.size() == 1);

    // Pooled two-sample t from scratch.
    const auto mean = [](const std::vector<double>& g) {
        double s = 0.0;
        for (double v : g) s += v;
        return s / static_cast<double>(g.size());
    };
    const double m1 = mean(groups[0]);
    const double m2 = mean(groups[1]);
    double ss = 0.0;
    for (double v : groups[0]) ss += (v - m1) * (v - m1);
    for (double v : groups[1]) ss += (v - m2) * (v - m2);
    const double df = 5 + 4 - 2;
    const double pooled_var = ss / df;
    const double se = std::sqrt(pooled_var * (1.0 / 5.0 + 1.0 / 4.0));
    const double t = std::abs(m2 - m1) / se;
    const double p_t = sf::student_t_sf_two_sided(t, df);

    CHECK(r.pairwise[0].statistic == doctest::Approx(std::sqrt(2.0) * t).epsilon(1e-12));
    CHECK(r.pairwise[0].adjusted_p == doctest::Approx(p_t).epsilon(1e-6));
}

TEST_CASE("tukey row order matches the table layout") {
    GroupedScores groups(4);
    Rng rng(5);
    for (auto& g : groups) {
        for (int i = 0; i < 4; ++i) g.push_back(rng.normal(3.0, 0.5));
    }
    const auto r = stats::tukey_hsd(groups);
    const std::vector<std::string> expected = {"2-1", "3-1", "4-1", "3-2", "4-2", "4-3"};
    REQUIRE(r.pairwise.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) CHECK(r.pairwise[i].label == expected[i]);
}

TEST_CASE("tukey kramer brute force on unequal sizes") {
    const auto groups = random_groups(21, 3, 2, 6, false);
    const auto anova = stats::one_way_anova(groups);
    const auto r = stats::tukey_hsd(groups);
    size_t idx = 0;
    for (size_t a = 0; a < groups.size(); ++a) {
        for (size_t b = a + 1; b < groups.size(); ++b, ++idx) {
            double ma = 0.0, mb = 0.0;
            for (double v : groups[a]) ma += v;
            for (double v : groups[b]) mb += v;
            ma /= static_cast<double>(groups[a].size());
            mb /= static_cast<double>(groups[b].size());
            const double se = std::sqrt(
                0.5 * anova.ms_within *
                (1.0 / groups[a].size() + 1.0 / groups[b].size()));
            const double q = std::abs(mb - ma) / se;
            CHECK(r.pairwise[idx].statistic == doctest::Approx(q).epsilon(1e-10));
            CHECK(r.pairwise[idx].adjusted_p ==
                  doctest::Approx(sf::studentized_range_sf(
                                      q, static_cast<int>(groups.size()), anova.df[1]))
                      .epsilon(1e-8));
        }
    }
}

TEST_CASE("kruskal-wallis exchangeable groups") {
    const auto r = stats::kruskal_wallis({{1, 2}, {1, 2}});
    CHECK(r.statistic == doctest::Approx(0.0));
    CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("kruskal-wallis textbook instance matches midrank oracle") {
    const GroupedScores groups = {{27, 2, 4}, {5, 18, 1}, {37, 42, 9}};
    const auto r = stats::kruskal_wallis(groups);
    CHECK(r.statistic == doctest::Approx(oracle_kruskal_h(groups, true)).epsilon(1e-12));
    CHECK(r.df[0] == 2.0);
    CHECK(r.p_value == doctest::Approx(sf::chi_square_sf(r.statistic, 2.0)).epsilon(1e-12));
}

TEST_CASE("kruskal-wallis tie correction increases H") {
    for (uint64_t seed = 100; seed < 110; ++seed) {
        const auto groups = random_groups(seed, 3, 4, 8, true);
        const double uncorrected = oracle_kruskal_h(groups, false);
        if (uncorrected <= 0.0) continue;
        const auto r = stats::kruskal_wallis(groups);
        CHECK(r.statistic > uncorrected);
        CHECK(r.statistic == doctest::Approx(oracle_kruskal_h(groups, true)).epsilon(1e-10));
    }
}

TEST_CASE("kruskal-wallis all identical") {
    const auto r = stats::kruskal_wallis({{2, 2, 2}, {2, 2}});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("kruskal-wallis invariant under monotone transforms") {
    const auto groups = random_groups(31, 3, 4, 7, true);
    const auto r0 = stats::kruskal_wallis(groups);
    GroupedScores transformed = groups;
    for (auto& g : transformed) {
        for (double& v : g) v = std::exp(2.0 * v + 1.0);
    }
    CHECK(stats::kruskal_wallis(transformed).statistic ==
          doctest::Approx(r0.statistic).epsilon(1e-10));
}

TEST_CASE("dunn identical groups") {
    const auto r = stats::dunn_test({{3, 3, 3}, {3, 3, 3}});
    for (const auto& pair : r.pairwise) {
        CHECK(pair.statistic == 0.0);
        CHECK(pair.adjusted_p == 1.0);
    }
}

TEST_CASE("dunn z squared equals tie-corrected H for two groups") {
    for (uint64_t seed = 40; seed < 50; ++seed) {
        const auto groups = random_groups(seed, 2, 3, 8, true);
        const auto kw = stats::kruskal_wallis(groups);
        const auto dunn = stats::dunn_test(groups);
        REQUIRE(dunn.pairwise.size() == 1);
        const double z = dunn.pairwise[0].statistic;
        CHECK(z * z == doctest::Approx(kw.statistic).epsilon(1e-9));
    }
}

TEST_CASE("dunn adjustment monotonicity and order") {
    const auto groups = random_groups(55, 4, 3, 7, true);
    for (auto method : {stats::Adjustment::Holm, stats::Adjustment::Bonferroni,
                        stats::Adjustment::None}) {
        const auto r = stats::dunn_test(groups, method);
        for (const auto& pair : r.pairwise) {
            CHECK(pair.adjusted_p >= pair.p_value);
            CHECK(pair.adjusted_p <= 1.0);
        }
    }
    const auto r = stats::dunn_test(groups);
    const std::vector<std::string> expected = {"1-2", "1-3", "1-4", "2-3", "2-4", "3-4"};
    for (size_t i = 0; i < expected.size(); ++i) CHECK(r.pairwise[i].label == expected[i]);
}

TEST_CASE("holm adjustment known example") {
    const std::vector<double> p = {0.01, 0.04, 0.03, 0.005};
    const auto holm = stats::adjust_p_values(p, stats::Adjustment::Holm);
    CHECK(holm[0] == doctest::Approx(0.03));
    CHECK(holm[1] == doctest::Approx(0.06));
    CHECK(holm[2] == doctest::Approx(0.06));
    CHECK(holm[3] == doctest::Approx(0.02));
    const auto bonf = stats::adjust_p_values(p, stats::Adjustment::Bonferroni);
    for (size_t i = 0; i < p.size(); ++i) CHECK(holm[i] <= bonf[i]);
}

TEST_CASE("histogram density") {
    const std::vector<double> edges = {1, 2, 3, 4, 5};
    const auto uniform = stats::histogram_density({1.5, 2.5, 3.5, 4.5}, edges);
    for (double d : uniform.density) CHECK(d == doctest::Approx(0.25));

    const auto spike = stats::histogram_density({2.2, 2.4}, {1.0, 2.0, 2.5, 5.0});
    CHECK(spike.density[0] == 0.0);
    CHECK(spike.density[1] == doctest::Approx(1.0 / 0.5));
    CHECK(spike.density[2] == 0.0);

    // Interior edges are right-open; the last edge is included.
    const auto boundary = stats::histogram_density({2.0, 5.0}, edges);
    CHECK(boundary.density[1] == doctest::Approx(0.5));
    CHECK(boundary.density[3] == doctest::Approx(0.5));

    CHECK_THROWS_AS(stats::histogram_density({0.5}, edges), Error);
    CHECK_THROWS_AS(stats::histogram_density({}, edges), Error);
    CHECK_THROWS_AS(stats::histogram_density({2.0}, {1.0, 1.0, 2.0}), Error);

    // Integrates to one on random inputs.
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> scores;
        for (int i = 0; i < 50; ++i) scores.push_back(1.0 + 4.0 * rng.uniform());
        const auto h = stats::histogram_density(scores, {1.0, 1.8, 2.1, 3.0, 4.4, 5.0});
        double integral = 0.0;
        for (size_t b = 0; b < h.density.size(); ++b) {
            integral += h.density[b] * (h.edges[b + 1] - h.edges[b]);
        }
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("symmetric kl") {
    const std::vector<double> edges = {0.0, 1.0, 2.0};
    const stats::HistogramDensity p{edges, {0.5, 0.5}};
    const stats::HistogramDensity q{edges, {0.25, 0.75}};

    CHECK(stats::symmetric_kl(p, p) == 0.0);
    CHECK(stats::symmetric_kl(p, q) ==
          doctest::Approx(stats::symmetric_kl(q, p)).epsilon(1e-12));

    // Closed form 0.5 [sum p ln(p/q) + sum q ln(q/p)].
    const double expected =
        0.5 * ((0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75)) +
               (0.25 * std::log(0.25 / 0.5) + 0.75 * std::log(0.75 / 0.5)));
    CHECK(stats::symmetric_kl(p, q) == doctest::Approx(expected).epsilon(1e-10));

    // Zero bins survive via epsilon smoothing.
    const stats::HistogramDensity z{edges, {1.0, 0.0}};
    CHECK(std::isfinite(stats::symmetric_kl(p, z)));
    CHECK(stats::symmetric_kl(p, z) > 0.0);

    const stats::HistogramDensity other{{0.0, 0.5, 2.0}, {1.0, 0.5}};
    CHECK_THROWS_AS(stats::symmetric_kl(p, other), Error);
}

TEST_CASE("bootstrap ci") {
    const auto constant = stats::bootstrap_ci({4.2, 4.2, 4.2, 4.2}, 200, 0.95, 9);
    CHECK(constant.first == 4.2);
    CHECK(constant.second == 4.2);

    Rng rng(13);
    std::vector<double> data;
    for (int i = 0; i < 40; ++i) data.push_back(rng.normal(10.0, 2.0));

    const auto narrow = stats::bootstrap_ci(data, 2000, 0.90, 1234);
    const auto mid = stats::bootstrap_ci(data, 2000, 0.95, 1234);
    const auto wide = stats::bootstrap_ci(data, 2000, 0.99, 1234);
    CHECK(narrow.second - narrow.first < mid.second - mid.first);
    CHECK(mid.second - mid.first < wide.second - wide.first);
    CHECK(narrow.first <= narrow.second);

    const auto again = stats::bootstrap_ci(data, 2000, 0.95, 1234);
    CHECK(again == mid);

    CHECK_THROWS_AS(stats::bootstrap_ci({1.0}, 200, 0.95, 1), Error);
    CHECK_THROWS_AS(stats::bootstrap_ci(data, 50, 0.95, 1), Error);
    CHECK_THROWS_AS(stats::bootstrap_ci(data, 200, 1.5, 1), Error);
}

TEST_CASE("monthly series basics") {
    const Date start = *parse_date("2019-01-01");
    const Date end = *parse_date("2019-03-31");
    std::vector<ingest::TransactionRecord> txns = {
        txn("c1", "Buy", 10, 25.5, "2019-01-10"),
        txn("c1", "Buy", 4, 10.0, "2019-03-05"),
        txn("c1", "Dividend", 30, 1.0, "2019-02-01"),
    };
    stats::BootstrapParams bp{200, 0.95, 7};
    const auto series = stats::monthly_cluster_series(
        txns, {{"c1", 0}}, 1, features::TradeClass::Periodic, start, end, bp);
    REQUIRE(series.cells.size() == 3);
    CHECK(series.cells[0].n == 1);
    CHECK(series.cells[0].mean == doctest::Approx(255.0));
    CHECK(series.cells[0].lo == series.cells[0].mean);  // degenerate band
    CHECK(series.cells[1].n == 0);  // dividend is third-party: empty marker
    CHECK(series.cells[2].n == 1);
    CHECK(series.class_total == doctest::Approx(295.0));
}

TEST_CASE("monthly series symmetry for identical transactions") {
    const Date start = *parse_date("2019-01-01");
    const Date end = *parse_date("2019-02-28");
    std::vector<ingest::TransactionRecord> txns;
    for (const auto& client : {"a", "b"}) {
        txns.push_back(txn(client, "Buy", 10, 11.0, "2019-01-03"));
        txns.push_back(txn(client, "Buy", 3, 90.0, "2019-01-21"));
        txns.push_back(txn(client, "Sell", 5, 40.0, "2019-02-14"));
    }
    stats::BootstrapParams bp{500, 0.95, 99};
    const auto series = stats::monthly_cluster_series(
        txns, {{"a", 0}, {"b", 1}}, 2, features::TradeClass::Periodic, start, end, bp);
    REQUIRE(series.cells.size() == 4);
    // Cluster blocks are identical because the transactions are.
    CHECK(series.cells[0].mean == series.cells[2].mean);
    CHECK(series.cells[0].lo == series.cells[2].lo);
    CHECK(series.cells[0].hi == series.cells[2].hi);
    CHECK(series.cells[1].mean == series.cells[3].mean);
    CHECK(series.cells[1].lo == series.cells[3].lo);
}

TEST_CASE("p-values stay in range across the battery") {
    for (uint64_t seed = 200; seed < 220; ++seed) {
        const auto groups = random_groups(seed, 2 + seed % 4, 2, 6, seed % 2 == 1);
        const auto anova = stats::one_way_anova(groups);
        CHECK(anova.p_value >= 0.0);
        CHECK(anova.p_value <= 1.0);
        const auto kw = stats::kruskal_wallis(groups);
        CHECK(kw.p_value >= 0.0);
        CHECK(kw.p_value <= 1.0);
        for (const auto& pair : stats::tukey_hsd(groups).pairwise) {
            CHECK(pair.adjusted_p >= 0.0);
            CHECK(pair.adjusted_p <= 1.0);
        }
        for (const auto& pair : stats::dunn_test(groups).pairwise) {
            CHECK(pair.adjusted_p >= pair.p_value);
            CHECK(pair.adjusted_p <= 1.0);
        }
    }
}
