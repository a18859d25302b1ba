#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "invseg/error.hpp"
#include "invseg/features.hpp"
#include "invseg/ingest.hpp"
#include "invseg/synth.hpp"

using namespace invseg;
using namespace invseg::synth;

TEST_CASE("empty population") {
    const auto population = generate_population(default_population_spec(0), 1);
    CHECK(population.clients.empty());
    CHECK(population.transactions.empty());
}

TEST_CASE("population is deterministic under the seed") {
    const auto spec = default_population_spec(200);
    const auto a = generate_population(spec, 42);
    const auto b = generate_population(spec, 42);
    REQUIRE(a.clients.size() == b.clients.size());
    for (size_t i = 0; i < a.clients.size(); ++i) {
        CHECK(a.clients[i].client_id == b.clients[i].client_id);
        CHECK(a.clients[i].age == b.clients[i].age);
        CHECK(a.clients[i].annual_income == b.clients[i].annual_income);
        CHECK(a.clients[i].risk_tolerance == b.clients[i].risk_tolerance);
    }
    REQUIRE(a.transactions.size() == b.transactions.size());
    for (size_t i = 0; i < a.transactions.size(); ++i) {
        CHECK(a.transactions[i].size == b.transactions[i].size);
        CHECK(a.transactions[i].order_date == b.transactions[i].order_date);
    }
    const auto c = generate_population(spec, 43);
    CHECK(c.transactions.size() != a.transactions.size());
}

TEST_CASE("population marginals match the target shape") {
    const auto spec = default_population_spec(20000);
    const auto population = generate_population(spec, 7);

    double age_sum = 0.0;
    size_t age_n = 0;
    size_t on_count = 0, residency_n = 0;
    std::map<int, size_t> accounts;
    double income_sum = 0.0;
    size_t income_n = 0;
    std::map<double, size_t> spikes;
    size_t marital_u = 0, marital_n = 0;

    for (const auto& c : population.clients) {
        if (c.age) {
            CHECK(*c.age >= 18);
            CHECK(*c.age <= 98);
            age_sum += *c.age;
            ++age_n;
        }
        if (c.residency) {
            ++residency_n;
            if (*c.residency == "ON") ++on_count;
        }
        if (c.num_accounts) ++accounts[*c.num_accounts];
        if (c.annual_income) {
            income_sum += *c.annual_income;
            ++income_n;
            ++spikes[*c.annual_income];
        }
        if (c.marital_status) {
            ++marital_n;
            if (*c.marital_status == "U") ++marital_u;
        }
        if (c.risk_tolerance) {
            CHECK(*c.risk_tolerance >= 1.0);
            CHECK(*c.risk_tolerance <= 5.0);
            // Half-point grid.
            CHECK(std::abs(*c.risk_tolerance * 2.0 - std::round(*c.risk_tolerance * 2.0)) <
                  1e-9);
        }
        CHECK_FALSE(ingest::validate_client(c).has_value());
    }

    const double age_mean = age_sum / static_cast<double>(age_n);
    CHECK(std::abs(age_mean - 58.1) < 0.5);
    double age_var = 0.0;
    for (const auto& c : population.clients) {
        if (c.age) age_var += (*c.age - age_mean) * (*c.age - age_mean);
    }
    CHECK(std::abs(std::sqrt(age_var / age_n) - 14.1) < 0.5);

    CHECK(std::abs(static_cast<double>(on_count) / residency_n - 0.6519) < 0.02);

    // Accounts-per-client mode is 2.
    int mode_accounts = 0;
    size_t best = 0;
    for (const auto& [count, freq] : accounts) {
        if (freq > best) {
            best = freq;
            mode_accounts = count;
        }
    }
    CHECK(mode_accounts == 2);

    CHECK(std::abs(income_sum / income_n - 70658.0) < 2000.0);
    // Round-value spikes stand out.
    for (double spike : {50000.0, 100000.0, 150000.0, 200000.0}) {
        CHECK(spikes[spike] > income_n / 200);
    }

    // Marital 'U' is an explicit category, roughly 11%.
    CHECK(std::abs(static_cast<double>(marital_u) / marital_n - 0.11) < 0.02);

    // Missingness injection near the imputation-table rates.
    size_t rt_missing = 0;
    for (const auto& c : population.clients) rt_missing += !c.risk_tolerance;
    CHECK(std::abs(static_cast<double>(rt_missing) / population.clients.size() - 0.1416) <
          0.02);
}

TEST_CASE("transactions classify cleanly and respect the window") {
    const auto spec = default_population_spec(300);
    const auto population = generate_population(spec, 11);
    CHECK(population.transactions.size() > 1000);
    size_t filled = 0;
    for (const auto& t : population.transactions) {
        CHECK(features::is_known_trade_type(t.trade_type));
        CHECK(t.order_date >= spec.window_start);
        CHECK(t.order_date <= spec.window_end);
        CHECK(std::isfinite(features::trade_amount(t)));
        filled += t.status == "filled";
    }
    // Non-filled statuses appear but stay rare.
    CHECK(filled < population.transactions.size());
    CHECK(filled > population.transactions.size() * 9 / 10);

    // Some silent clients exist (sparse early savers).
    std::set<std::string> active;
    for (const auto& t : population.transactions) active.insert(t.client_id);
    CHECK(active.size() < population.clients.size());
}

TEST_CASE("population round-trips through the ingest format") {
    namespace fs = std::filesystem;
    const auto spec = default_population_spec(120);
    const auto population = generate_population(spec, 3);
    const auto dir = fs::temp_directory_path();
    const std::string clients_path = (dir / "synth_clients.csv").string();
    const std::string txns_path = (dir / "synth_txns.csv").string();
    write_population_csv(population, spec, 3, clients_path, txns_path);

    const auto read = read_table_file(clients_path);
    CHECK(read.bad_rows.empty());
    const auto parsed = ingest::parse_clients(read.table);
    CHECK(parsed.issues.empty());
    REQUIRE(parsed.records.size() == population.clients.size());
    for (size_t i = 0; i < parsed.records.size(); ++i) {
        CHECK(parsed.records[i].client_id == population.clients[i].client_id);
        CHECK(parsed.records[i].age == population.clients[i].age);
        CHECK(parsed.records[i].gender == population.clients[i].gender);
        CHECK(parsed.records[i].risk_tolerance.has_value() ==
              population.clients[i].risk_tolerance.has_value());
    }

    ingest::TransactionSchema schema;
    schema.window_start = spec.window_start;
    schema.window_end = spec.window_end;
    const auto txn_read = read_table_file(txns_path);
    CHECK(txn_read.bad_rows.empty());
    const auto txns = ingest::parse_transactions(txn_read.table, schema);
    CHECK(txns.issues.empty());
    CHECK(txns.records.size() == population.transactions.size());

    fs::remove(clients_path);
    fs::remove(txns_path);
}

TEST_CASE("planted labels are stratified and recoverable") {
    const auto spec = default_planted_spec(4, 4, 2, 100.0);
    const auto planted = generate_planted(spec, 25, 5);
    CHECK(planted.matrix.n() == 100);
    std::vector<size_t> counts(4, 0);
    for (int32_t l : planted.labels) ++counts[l];
    for (size_t c : counts) CHECK(c == 25);

    // Separation 0 with shared categoricals leaves no structure.
    auto flat = default_planted_spec(3, 2, 0, 0.0);
    const auto unstructured = generate_planted(flat, 10, 6);
    CHECK(unstructured.matrix.n() == 30);
}

TEST_CASE("adjusted rand index") {
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    // Relabeling invariance.
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
    // Hand-computed 6-point contingency case.
    CHECK(adjusted_rand_index({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 1, 1}) ==
          doctest::Approx(1.2 / 3.7).epsilon(1e-12));
    CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0}), Error);
}

TEST_CASE("spec validation") {
    auto spec = default_population_spec(10);
    spec.age.sd = -1.0;
    CHECK_THROWS_AS(generate_population(spec, 1), Error);

    auto bad_arch = default_population_spec(10);
    bad_arch.archetypes[0].weight += 0.5;
    CHECK_THROWS_AS(generate_population(bad_arch, 1), Error);

    auto planted = default_planted_spec(2, 2, 1, 1.0);
    planted.numeric_sds[0][0] = 0.0;
    CHECK_THROWS_AS(generate_planted(planted, 5, 1), Error);
    CHECK_THROWS_AS(generate_planted(default_planted_spec(2, 2, 1, 1.0), 0, 1), Error);
}
