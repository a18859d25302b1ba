#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "invseg/error.hpp"
#include "invseg/features.hpp"

using namespace invseg;
using namespace invseg::features;

namespace {

ingest::ClientRecord client(const std::string& id, int age = 40) {
    ingest::ClientRecord c;
    c.client_id = id;
    c.age = age;
    c.gender = "F";
    c.residency = "ON";
    c.annual_income = 50000;
    c.investment_knowledge = 2;
    c.num_accounts = 2;
    c.marital_status = "M";
    c.retired = false;
    c.job_category = "trades";
    c.investment_objective = "growth";
    return c;
}

ingest::TransactionRecord txn(const std::string& client_id, const std::string& type,
                              double size, double value, const std::string& date,
                              const std::string& account = "", const std::string& acct_type = "RSP") {
    ingest::TransactionRecord t;
    t.account_id = account.empty() ? "A_" + client_id : account;
    t.client_id = client_id;
    t.trade_type = type;
    t.account_type = acct_type;
    t.size = size;
    t.unit_value = value;
    t.order_date = *parse_date(date);
    t.status = "filled";
    return t;
}

const Date kSnapshot = *parse_date("2019-08-12");
const Date kWindowStart = *parse_date("2018-08-13");

BuildOptions options(bool standardize = true) {
    BuildOptions o;
    o.snapshot = kSnapshot;
    o.window_start = kWindowStart;
    o.standardize = standardize;
    return o;
}

}  // namespace

TEST_CASE("trade amount") {
    CHECK(trade_amount(txn("c", "Buy", 10, 25.5, "2019-01-01")) == doctest::Approx(255.0));
    CHECK(trade_amount(txn("c", "Buy", 0, 25.5, "2019-01-01")) == 0.0);
    CHECK(trade_amount(txn("c", "Buy", 1, 17.25, "2019-01-01")) == 17.25);
}

TEST_CASE("trade classification over the full vocabulary") {
    CHECK(classify_trade("Dividend") == TradeClass::ThirdParty);
    CHECK(classify_trade("Reinvest Dividend") == TradeClass::Systematic);
    CHECK(classify_trade("Redeem") == TradeClass::Periodic);
    // Case and punctuation insensitive.
    CHECK(classify_trade("pre-authorized contribution") == TradeClass::Systematic);
    CHECK(classify_trade("PRE AUTHORIZED CONTRIBUTION") == TradeClass::Systematic);
    CHECK(classify_trade("EFT Withdrawal") == TradeClass::Periodic);

    // Exhaustive and total over the vocabulary.
    size_t third = 0, systematic = 0, periodic = 0;
    for (const auto& type : trade_type_vocabulary()) {
        CHECK(is_known_trade_type(type));
        switch (classify_trade(type)) {
            case TradeClass::ThirdParty: ++third; break;
            case TradeClass::Systematic: ++systematic; break;
            case TradeClass::Periodic: ++periodic; break;
        }
    }
    CHECK(third == 3);
    CHECK(systematic == 4);
    CHECK(periodic == 11);

    CHECK_THROWS_WITH_AS(classify_trade("Margin call"),
                         "classify_trade: unknown trade type 'Margin call'", Error);
    CHECK_FALSE(is_known_trade_type("Margin call"));
}

TEST_CASE("recency") {
    CHECK(recency({txn("c", "Buy", 1, 1, "2019-08-12")}, kSnapshot) == 0);
    CHECK(recency({txn("c", "Buy", 1, 1, "2019-06-16")}, kSnapshot) == 57);
    // The most recent trade counts.
    CHECK(recency({txn("c", "Buy", 1, 1, "2019-01-01"), txn("c", "Buy", 1, 1, "2019-08-01")},
                  kSnapshot) == 11);
    CHECK_THROWS_AS(recency({}, kSnapshot), Error);
}

TEST_CASE("frequency stats") {
    // Ten trades, first one 100 days before the snapshot.
    std::vector<ingest::TransactionRecord> txns;
    txns.push_back(txn("c", "Buy", 1, 1, "2019-05-04"));  // snapshot - 100
    for (int i = 0; i < 9; ++i) txns.push_back(txn("c", "Buy", 1, 1, "2019-06-01"));
    const auto f = frequency_stats(txns, kSnapshot);
    CHECK(f.trade_count == 10);
    CHECK(f.avg_days_between == doctest::Approx(10.0));
    CHECK(f.trades_per_day == doctest::Approx(0.1));

    // Single trade on the snapshot day: span clamps to one day.
    const auto single = frequency_stats({txn("c", "Buy", 1, 1, "2019-08-12")}, kSnapshot);
    CHECK(single.trades_per_day == doctest::Approx(1.0));
    CHECK(single.avg_days_between == doctest::Approx(1.0));
}

TEST_CASE("monetary stats per class") {
    const std::vector<ingest::TransactionRecord> txns = {
        txn("c", "Dividend", 100, 1.0, "2019-01-01"),
        txn("c", "Dividend", 200, 1.0, "2019-02-01"),
        txn("c", "Buy", 10, 30.0, "2019-03-01"),
        txn("c", "Sell", 2, 45.0, "2019-04-01"),
    };
    const auto m = monetary_stats(txns);
    CHECK(m.third_party.mean == doctest::Approx(150.0));
    CHECK(m.third_party.sd == doctest::Approx(50.0));  // population SD
    CHECK(m.third_party.min == 100.0);
    CHECK(m.third_party.max == 200.0);
    CHECK(m.third_party.total == 300.0);
    // Empty class reports the all-zero block.
    CHECK(m.systematic.mean == 0.0);
    CHECK(m.systematic.sd == 0.0);
    CHECK(m.systematic.total == 0.0);
    // Single amount: SD 0.
    CHECK(m.periodic.sd > 0.0);  // two periodic amounts here
    const auto single = monetary_stats({txn("c", "Buy", 5, 10.0, "2019-01-01")});
    CHECK(single.periodic.mean == 50.0);
    CHECK(single.periodic.sd == 0.0);
    // Buy/sell blocks.
    CHECK(m.buy_total == doctest::Approx(300.0));
    CHECK(m.sell_total == doctest::Approx(90.0));
    CHECK(m.buy_min == doctest::Approx(300.0));
    CHECK(m.buy_max == doctest::Approx(300.0));
}

TEST_CASE("partition of money is exact") {
    // Amounts chosen to exercise float non-associativity.
    std::vector<ingest::TransactionRecord> txns;
    const char* types[] = {"Dividend", "Pre-authorized contribution", "Buy"};
    for (int i = 0; i < 300; ++i) {
        txns.push_back(txn("c", types[i % 3], 0.1 + i * 1e9, 0.3333333333333333, "2019-01-01"));
    }
    const auto totals = class_totals(txns);
    ExactSum all;
    for (const auto& t : txns) all.add(trade_amount(t));
    // Exact-domain identity: sum of the three class accumulators equals the
    // grand total bit for bit.
    CHECK(totals.all() == all.value());
}

TEST_CASE("build matrix shapes and conventions") {
    std::vector<ingest::ClientRecord> clients = {client("c1", 30), client("c2", 50)};
    std::vector<ingest::TransactionRecord> txns = {
        txn("c1", "Buy", 10, 25.5, "2019-08-01"),
        txn("c1", "Dividend", 40, 1.0, "2019-05-01"),
    };

    const auto m = build_matrix(clients, txns, options(false));
    CHECK(m.n() == 2);
    CHECK(m.p() == 20);
    CHECK(m.q() == 5);
    CHECK(m.client_ids == std::vector<std::string>{"c1", "c2"});

    // Raw values pass through when standardization is off.
    CHECK(m.numeric_row(0)[0] == 30.0);
    CHECK(m.numeric_row(1)[0] == 50.0);

    // c2 has no transactions: recency equals the window span, stats zero.
    CHECK(m.numeric_row(1)[4] == doctest::Approx(364.0));
    CHECK(m.numeric_row(1)[5] == 0.0);
    CHECK(m.numeric_row(1)[6] == 0.0);
    // Modal account type NONE for the silent client.
    const size_t acct_col = 4;
    CHECK(m.categorical_label(acct_col, m.categorical_row(1)[acct_col]) == "NONE");
    CHECK(m.categorical_label(acct_col, m.categorical_row(0)[acct_col]) == "RSP");
}

TEST_CASE("build matrix standardization") {
    std::vector<ingest::ClientRecord> clients = {client("c1", 30), client("c2", 50)};
    const auto m = build_matrix(clients, {}, options(true));
    // Column values {30, 50} standardize to {-1, +1}.
    CHECK(m.numeric_row(0)[0] == doctest::Approx(-1.0));
    CHECK(m.numeric_row(1)[0] == doctest::Approx(1.0));
    // Constant columns stay zero.
    CHECK(m.numeric_row(0)[1] == 0.0);
    CHECK(m.scaling.columns[1].sd == 0.0);

    // Standardized columns have mean ~0 and sd in {0, 1}.
    for (size_t c = 0; c < m.p(); ++c) {
        double mean = 0.0;
        for (size_t i = 0; i < m.n(); ++i) mean += m.numeric_row(i)[c];
        mean /= static_cast<double>(m.n());
        CHECK(std::abs(mean) < 1e-9);
        double var = 0.0;
        for (size_t i = 0; i < m.n(); ++i) {
            var += (m.numeric_row(i)[c] - mean) * (m.numeric_row(i)[c] - mean);
        }
        const double sd = std::sqrt(var / static_cast<double>(m.n()));
        if (m.scaling.columns[c].sd == 0.0) {
            CHECK(sd == 0.0);
        } else {
            CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    // Round-tripping the scaling metadata recovers raw values.
    const auto raw = build_matrix(clients, {}, options(false));
    for (size_t c = 0; c < m.p(); ++c) {
        for (size_t i = 0; i < m.n(); ++i) {
            const double recovered = destandardize(m, c, m.numeric_row(i)[c]);
            const double expected = raw.numeric_row(i)[c];
            CHECK(recovered == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("build matrix errors") {
    std::vector<ingest::ClientRecord> dup = {client("c1"), client("c1")};
    CHECK_THROWS_AS(build_matrix(dup, {}, options()), Error);

    std::vector<ingest::ClientRecord> one = {client("c1")};
    std::vector<ingest::TransactionRecord> orphan = {txn("ghost", "Buy", 1, 1, "2019-01-01")};
    CHECK_THROWS_AS(build_matrix(one, orphan, options()), Error);

    std::vector<ingest::ClientRecord> incomplete = {client("c1")};
    incomplete[0].gender.reset();
    CHECK_THROWS_AS(build_matrix(incomplete, {}, options()), Error);
}

TEST_CASE("modal account type ties break lexicographically") {
    std::vector<ingest::ClientRecord> clients = {client("c1")};
    std::vector<ingest::TransactionRecord> txns = {
        txn("c1", "Buy", 1, 1, "2019-01-01", "A1", "TFSA"),
        txn("c1", "Buy", 1, 1, "2019-02-01", "A2", "CASH"),
    };
    const auto m = build_matrix(clients, txns, options(false));
    CHECK(m.categorical_label(4, m.categorical_row(0)[4]) == "CASH");
}

TEST_CASE("proportion account encoding") {
    std::vector<ingest::ClientRecord> clients = {client("c1")};
    std::vector<ingest::TransactionRecord> txns = {
        txn("c1", "Buy", 1, 1, "2019-01-01", "A1", "TFSA"),
        txn("c1", "Buy", 1, 1, "2019-02-01", "A2", "CASH"),
        txn("c1", "Buy", 1, 1, "2019-03-01", "A3", "TFSA"),
    };
    BuildOptions o = options(false);
    o.account_encoding = AccountEncoding::Proportions;
    const auto m = build_matrix(clients, txns, o);
    CHECK(m.p() == 26);
    CHECK(m.q() == 4);  // account_type column replaced by share columns
    // Shares: CASH 1/3, TFSA 2/3 over distinct accounts.
    const auto share = [&](const std::string& name) {
        for (size_t c = 0; c < m.p(); ++c) {
            if (m.numeric_names[c] == name) return m.numeric_row(0)[c];
        }
        FAIL("missing column ", name);
        return 0.0;
    };
    CHECK(share("share_CASH") == doctest::Approx(1.0 / 3.0));
    CHECK(share("share_TFSA") == doctest::Approx(2.0 / 3.0));
    CHECK(share("share_RSP") == 0.0);
}

TEST_CASE("feature matrix save/load round trip") {
    std::vector<ingest::ClientRecord> clients = {client("c1", 30), client("c2", 50),
                                                 client("c3", 71)};
    std::vector<ingest::TransactionRecord> txns = {
        txn("c1", "Buy", 10, 25.5, "2019-08-01"),
        txn("c2", "Dividend", 40, 1.0, "2019-05-01"),
        txn("c3", "Redeem", 3.7, 101.25, "2018-09-13"),
    };
    const auto m = build_matrix(clients, txns, options(true));
    const std::string path = (std::filesystem::temp_directory_path() / "invseg_fm.tsv").string();
    save_matrix(m, path);
    const auto loaded = load_matrix(path);

    CHECK(loaded.client_ids == m.client_ids);
    CHECK(loaded.numeric_names == m.numeric_names);
    CHECK(loaded.categorical_names == m.categorical_names);
    REQUIRE(loaded.numeric.size() == m.numeric.size());
    for (size_t i = 0; i < m.numeric.size(); ++i) CHECK(loaded.numeric[i] == m.numeric[i]);
    CHECK(loaded.categorical == m.categorical);
    CHECK(loaded.category_levels == m.category_levels);
    CHECK(loaded.scaling.standardized == m.scaling.standardized);
    for (size_t c = 0; c < m.p(); ++c) {
        CHECK(loaded.scaling.columns[c].mean == m.scaling.columns[c].mean);
        CHECK(loaded.scaling.columns[c].sd == m.scaling.columns[c].sd);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".meta.json");
}
