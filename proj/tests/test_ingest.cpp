#include <doctest.h>

#include <sstream>

#include "invseg/error.hpp"
#include "invseg/ingest.hpp"

using namespace invseg;
using namespace invseg::ingest;

namespace {

RawTable client_table(const std::vector<std::vector<std::string>>& rows) {
    RawTable t;
    t.column_names = {"client_id", "age", "gender", "residency", "annual_income",
                      "investment_knowledge", "num_accounts", "marital_status", "retired",
                      "risk_tolerance", "job_category", "investment_objective"};
    t.rows = rows;
    return t;
}

std::vector<std::string> client_row(
    const std::string& id, const std::string& age, const std::string& gender = "F",
    const std::string& residency = "ON", const std::string& income = "50000",
    const std::string& knowledge = "2", const std::string& accounts = "2",
    const std::string& marital = "M", const std::string& retired = "no",
    const std::string& rt = "3.0", const std::string& job = "trades",
    const std::string& objective = "growth") {
    return {id, age, gender, residency, income, knowledge, accounts, marital, retired,
            rt, job, objective};
}

}  // namespace

TEST_CASE("parse_clients empty input") {
    std::istringstream in("client_id,age\n");
    const auto result = parse_clients(in);
    CHECK(result.records.empty());
    CHECK(result.issues.empty());
}

TEST_CASE("parse_clients field handling") {
    const auto table = client_table({
        client_row("c1", "31"),
        client_row("c2", "17"),   // below the legal minimum
        client_row("c3", "99"),   // above the maximum
        client_row("c4", "*"),    // missing age recorded, row kept
        client_row("c5", "abc"),  // unreadable age
    });
    const auto result = parse_clients(table);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].client_id == "c1");
    CHECK(result.records[0].age == 31);
    CHECK(result.records[1].client_id == "c4");
    CHECK_FALSE(result.records[1].age.has_value());
    REQUIRE(result.issues.size() == 3);
    CHECK(result.issues[0].row == 2);
    CHECK(result.issues[0].column == "age");
    CHECK(result.issues[0].reason.find("legal minimum") != std::string::npos);
    // Conservation: rows in = records + issues.
    CHECK(table.rows.size() == result.records.size() + result.issues.size());
}

TEST_CASE("parse_clients validates ranges") {
    const auto table = client_table({
        client_row("c1", "40", "M", "ON", "50000", "5"),          // knowledge out of range
        client_row("c2", "40", "M", "ON", "50000", "2", "0"),     // accounts below 1
        client_row("c3", "40", "M", "ON", "50000", "2", "2", "M", "no", "7.5"),  // rt > 5
        client_row("c4", "40", "M", "ON", "-1"),                  // negative income
    });
    const auto result = parse_clients(table);
    CHECK(result.records.empty());
    CHECK(result.issues.size() == 4);
}

TEST_CASE("parse_clients requires mapped id column") {
    RawTable t;
    t.column_names = {"age"};
    t.rows = {{"31"}};
    CHECK_THROWS_AS(parse_clients(t), Error);
}

TEST_CASE("drop_sparse_columns thresholds") {
    // 10000 rows scaled down: 1416 of 10000 = 14.16% missing.
    RawTable t;
    t.column_names = {"keep", "boundary", "drop"};
    const size_t n = 10000;
    for (size_t i = 0; i < n; ++i) {
        std::vector<std::string> row(3);
        row[0] = "v";                          // 0% missing
        row[1] = i < 1000 ? "" : "v";          // exactly 10.0%
        row[2] = i < 1416 ? "*" : "v";         // 14.16%, the risk-tolerance case
        t.rows.push_back(std::move(row));
    }
    const auto result = drop_sparse_columns(t, 0.10);
    CHECK(result.dropped == std::vector<std::string>{"drop"});
    REQUIRE(result.table.column_names.size() == 2);
    CHECK(result.table.column_names[0] == "keep");
    CHECK(result.table.column_names[1] == "boundary");  // <= comparison survives
    // Surviving cells unchanged.
    CHECK(result.table.rows[0][0] == "v");
    CHECK(result.table.rows[0][1] == "");
    CHECK(result.table.rows.size() == n);

    CHECK_THROWS_AS(drop_sparse_columns(t, 0.0), Error);
    CHECK_THROWS_AS(drop_sparse_columns(t, 1.5), Error);
}

TEST_CASE("drop_incomplete_clients") {
    ClientRecord complete;
    complete.client_id = "a";
    complete.gender = "F";
    complete.investment_knowledge = 2;
    complete.investment_objective = "growth";
    ClientRecord no_gender = complete;
    no_gender.client_id = "b";
    no_gender.gender.reset();

    const auto result = drop_incomplete_clients({complete, no_gender});
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].client_id == "a");
    CHECK(result.removed == 1);

    const auto none_removed = drop_incomplete_clients({complete, complete});
    CHECK(none_removed.removed == 0);
}

TEST_CASE("impute fills gaps deterministically") {
    std::vector<ClientRecord> records(3);
    records[0].client_id = "a";
    records[0].age = 20;
    records[0].residency = "ON";
    records[0].annual_income = 40000;
    records[0].job_category = "trades";
    records[1].client_id = "b";
    records[1].age = 30;
    records[1].residency = "ON";
    records[1].annual_income = 60000;
    records[1].job_category = "trades";
    records[2].client_id = "c";  // age, residency, income missing
    records[2].job_category = "finance";

    // Make the remaining fields complete so only the targets are imputed.
    for (auto& r : records) {
        r.gender = "F";
        r.marital_status = "M";
        r.retired = false;
        r.investment_knowledge = 2;
        r.num_accounts = 1;
        r.investment_objective = "growth";
    }

    const auto result = impute(records);
    CHECK(result.records[2].age == 25);  // arithmetic mean
    CHECK(result.records[2].residency == "ON");  // mode
    // finance has no observed incomes: global mean fallback.
    CHECK(result.records[2].annual_income == doctest::Approx(50000.0));

    // Idempotence: a second pass changes nothing.
    const auto twice = impute(result.records);
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(twice.records[i].age == result.records[i].age);
        CHECK(twice.records[i].annual_income == result.records[i].annual_income);
        CHECK(twice.records[i].residency == result.records[i].residency);
    }
    CHECK(twice.filled.empty());

    // Job-category mean is preferred when observed.
    std::vector<ClientRecord> by_job = records;
    by_job[2].job_category = "trades";
    const auto r2 = impute(by_job);
    CHECK(r2.records[2].annual_income == doctest::Approx(50000.0));  // trades mean

    // risk_tolerance is never imputed.
    CHECK_FALSE(result.records[2].risk_tolerance.has_value());
}

TEST_CASE("impute skip policy and fatal column") {
    std::vector<ClientRecord> records(2);
    records[0].client_id = "a";
    records[1].client_id = "b";
    // Every age missing and not skipped: fatal.
    CHECK_THROWS_AS(impute(records), Error);

    ImputePolicy policy;
    policy.skip = {"risk_tolerance", "age",          "gender",
                   "residency",      "annual_income", "investment_knowledge",
                   "num_accounts",   "marital_status", "retired",
                   "job_category",   "investment_objective"};
    const auto result = impute(records, policy);
    CHECK_FALSE(result.records[0].age.has_value());
}

TEST_CASE("parse_transactions and filters") {
    RawTable t;
    t.column_names = {"account_id", "client_id", "account_type", "trade_type",
                      "size",       "unit_value", "order_date",  "status"};
    t.rows = {
        {"a1", "c1", "RSP", "Buy", "10", "25.5", "2019-01-10", "filled"},
        {"a1", "c1", "RSP", "Sell", "5", "11", "2019-02-01", "cancelled"},
        {"a1", "c1", "RSP", "Flip", "5", "11", "2019-02-01", "filled"},   // unknown type
        {"a1", "c1", "RSP", "Buy", "x", "11", "2019-02-01", "filled"},    // bad size
        {"a1", "c1", "RSP", "Buy", "5", "11", "2019-13-01", "filled"},    // bad date
        {"a2", "c2", "TFSA", "Dividend", "30", "1.0", "2019-03-04", "Filled"},
    };
    const auto result = parse_transactions(t);
    CHECK(result.records.size() == 3);
    CHECK(result.issues.size() == 3);
    CHECK(result.records[2].status == "filled");  // lower-cased

    const auto filled = filter_filled(result.records);
    CHECK(filled.records.size() == 2);
    CHECK(filled.removed == 1);

    ClientRecord c1;
    c1.client_id = "c1";
    const auto kept = drop_orphan_transactions(filled.records, {c1});
    CHECK(kept.records.size() == 1);
    CHECK(kept.removed == 1);
}

TEST_CASE("parse_transactions window check") {
    RawTable t;
    t.column_names = {"account_id", "client_id", "account_type", "trade_type",
                      "size",       "unit_value", "order_date",  "status"};
    t.rows = {
        {"a1", "c1", "RSP", "Buy", "1", "1", "2018-08-12", "filled"},  // before window
        {"a1", "c1", "RSP", "Buy", "1", "1", "2018-08-13", "filled"},
        {"a1", "c1", "RSP", "Buy", "1", "1", "2019-08-12", "filled"},
        {"a1", "c1", "RSP", "Buy", "1", "1", "2019-08-13", "filled"},  // after window
    };
    TransactionSchema schema;
    schema.window_start = parse_date("2018-08-13");
    schema.window_end = parse_date("2019-08-12");
    const auto result = parse_transactions(t, schema);
    CHECK(result.records.size() == 2);
    CHECK(result.issues.size() == 2);
}

TEST_CASE("validate_client invariants") {
    ClientRecord ok;
    ok.client_id = "a";
    ok.age = 50;
    ok.investment_knowledge = 3;
    ok.num_accounts = 2;
    ok.risk_tolerance = 4.5;
    CHECK_FALSE(validate_client(ok).has_value());

    ClientRecord bad = ok;
    bad.age = 120;
    CHECK(validate_client(bad).has_value());
    bad = ok;
    bad.risk_tolerance = 0.5;
    CHECK(validate_client(bad).has_value());
    bad = ok;
    bad.num_accounts = 0;
    CHECK(validate_client(bad).has_value());
}
