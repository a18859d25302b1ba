#include "invseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "invseg/error.hpp"
#include "invseg/parallel.hpp"
#include "invseg/rng.hpp"

namespace invseg::synth {

namespace {

constexpr uint64_t kClientStream = 0x10;
constexpr uint64_t kMarkerStream = 0x20;

std::vector<double> weights_of(const std::vector<std::pair<std::string, double>>& pairs) {
    std::vector<double> w;
    w.reserve(pairs.size());
    for (const auto& [name, weight] : pairs) w.push_back(weight);
    return w;
}

double round_to(double value, double step) {
    return std::round(value / step) * step;
}

std::string format_money(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

}  // namespace

void PopulationSpec::validate() const {
    if (age.sd <= 0.0) throw Error("synth: age sd must be positive");
    if (age.lo >= age.hi) throw Error("synth: age bounds inverted");
    if (income.log_sigma <= 0.0) throw Error("synth: income log-sigma must be positive");
    if (income.spike_prob < 0.0 || income.spike_prob > 1.0) {
        throw Error("synth: spike probability outside [0, 1]");
    }
    if (residency_weights.empty() || marital_weights.empty() || objective_weights.empty() ||
        job_weights.empty() || accounts_weights.empty()) {
        throw Error("synth: empty categorical distribution");
    }
    if (archetypes.empty()) throw Error("synth: need at least one archetype");
    double total = 0.0;
    for (const auto& a : archetypes) {
        if (a.weight < 0.0) throw Error("synth: negative archetype weight");
        total += a.weight;
        if (a.account_type_weights.empty()) {
            throw Error("synth: archetype '" + a.name + "' lacks account types");
        }
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("synth: archetype weights must sum to 1");
    if (window_end < window_start) throw Error("synth: observation window inverted");
    if (nonfilled_prob < 0.0 || nonfilled_prob >= 1.0) {
        throw Error("synth: non-filled probability outside [0, 1)");
    }
}

PopulationSpec default_population_spec(size_t n_clients) {
    PopulationSpec spec;
    spec.n_clients = n_clients;

    // Income: log-normal base with point masses at the round salaries.
    spec.income.log_median = std::log(55000.0);
    spec.income.log_sigma = 0.62;
    spec.income.spike_prob = 0.18;
    spec.income.spikes = {{50000.0, 0.50}, {100000.0, 0.30}, {150000.0, 0.12}, {200000.0, 0.08}};

    spec.residency_weights = {{"ON", 0.6519}, {"BC", 0.1463}, {"AB", 0.1200},
                              {"MB", 0.0394}, {"NS", 0.0259}, {"OtherCA", 0.0092},
                              {"USA", 0.0026}, {"UK", 0.0006}};
    spec.knowledge_weights = {0.02, 0.44, 0.37, 0.17};
    spec.accounts_weights = {5475, 7659, 6661, 3051, 775, 222, 79, 40, 4, 4};
    spec.marital_weights = {{"M", 0.67}, {"S", 0.18}, {"U", 0.11}, {"D", 0.04}};
    spec.objective_weights = {{"growth", 0.35}, {"balanced", 0.30}, {"income", 0.20},
                              {"preservation", 0.10}, {"speculation", 0.05}};
    spec.job_weights = {{"management", 0.12}, {"professional", 0.22}, {"sales", 0.10},
                        {"service", 0.13},    {"trades", 0.12},       {"education", 0.08},
                        {"health", 0.09},     {"finance", 0.06},      {"other", 0.08}};

    ArchetypeSpec active;
    active.name = "active_trader";
    active.weight = 0.19;
    active.periodic_per_year = 80.0;
    active.periodic_log_mean = std::log(20000.0);
    active.periodic_log_sigma = 1.0;
    active.systematic_interval_days = 30.0;
    active.systematic_log_mean = std::log(350.0);
    active.systematic_log_sigma = 0.4;
    active.third_party_per_year = 12.0;
    active.third_party_log_mean = std::log(95.0);
    active.third_party_log_sigma = 0.7;
    active.periodic_type_weights = {{"Buy", 0.40},         {"Sell", 0.30},
                                    {"Exchange", 0.08},    {"Contribution", 0.07},
                                    {"TFSA", 0.05},        {"Redeem", 0.04},
                                    {"Payment", 0.02},     {"EFT deposit", 0.02},
                                    {"EFT withdrawal", 0.01}, {"Withdrawal", 0.005},
                                    {"Spousal contribution", 0.005}};
    active.systematic_type_weights = {{"Asset allocation", 0.40}, {"Reinvest dividend", 0.40},
                                      {"Pre-authorized contribution", 0.10},
                                      {"Auto withdrawal", 0.10}};
    active.third_party_type_weights = {{"Dividend", 0.60}, {"Income distribution", 0.25},
                                       {"Interest", 0.15}};
    active.account_type_weights = {{"RSP", 0.40}, {"TFSA", 0.30}, {"CASH", 0.10},
                                   {"RIF", 0.05}, {"RESP", 0.05}, {"OTHER", 0.10}};
    active.rt_mean = 3.19;
    active.rt_sd = 0.63;

    ArchetypeSpec saver;
    saver.name = "early_saver";
    saver.weight = 0.36;
    saver.periodic_per_year = 0.5;
    saver.periodic_log_mean = std::log(70.0);
    saver.periodic_log_sigma = 0.6;
    saver.systematic_interval_days = 0.0;  // sparse Poisson activity instead
    saver.systematic_per_year = 1.8;
    saver.systematic_log_mean = std::log(22.0);
    saver.systematic_log_sigma = 0.15;
    saver.third_party_per_year = 0.8;
    saver.third_party_log_mean = std::log(17.0);
    saver.third_party_log_sigma = 0.4;
    saver.periodic_type_weights = {{"Contribution", 0.45}, {"Buy", 0.25}, {"TFSA", 0.20},
                                   {"EFT deposit", 0.10}};
    saver.systematic_type_weights = {{"Pre-authorized contribution", 0.70},
                                     {"Auto withdrawal", 0.15},
                                     {"Reinvest dividend", 0.15}};
    saver.third_party_type_weights = {{"Dividend", 0.50}, {"Income distribution", 0.30},
                                      {"Interest", 0.20}};
    saver.account_type_weights = {{"CASH", 0.45}, {"TFSA", 0.25}, {"RSP", 0.20},
                                  {"RESP", 0.05}, {"OTHER", 0.05}};
    saver.rt_mean = 3.18;
    saver.rt_sd = 0.75;

    ArchetypeSpec jit;
    jit.name = "just_in_time";
    jit.weight = 0.26;
    jit.periodic_per_year = 4.0;
    jit.periodic_log_mean = std::log(9000.0);
    jit.periodic_log_sigma = 1.0;
    jit.systematic_interval_days = 120.0;
    jit.systematic_log_mean = std::log(290.0);
    jit.systematic_log_sigma = 0.1;
    jit.third_party_per_year = 8.0;
    jit.third_party_log_mean = std::log(100.0);
    jit.third_party_log_sigma = 0.6;
    jit.periodic_type_weights = {{"Buy", 0.35}, {"Sell", 0.25}, {"Redeem", 0.12},
                                 {"Contribution", 0.10}, {"Exchange", 0.08},
                                 {"Payment", 0.05}, {"Withdrawal", 0.05}};
    jit.systematic_type_weights = {{"Reinvest dividend", 0.60}, {"Asset allocation", 0.40}};
    jit.third_party_type_weights = {{"Dividend", 0.55}, {"Income distribution", 0.30},
                                    {"Interest", 0.15}};
    jit.account_type_weights = {{"RSP", 0.35}, {"TFSA", 0.30}, {"CASH", 0.15},
                                {"RIF", 0.05}, {"RESP", 0.05}, {"OTHER", 0.10}};
    jit.rt_mean = 3.12;
    jit.rt_sd = 0.73;

    ArchetypeSpec older;
    older.name = "older_investor";
    older.weight = 0.07;
    older.periodic_per_year = 2.0;
    older.periodic_log_mean = std::log(8000.0);
    older.periodic_log_sigma = 0.8;
    older.systematic_interval_days = 30.0;
    older.systematic_log_mean = std::log(900.0);
    older.systematic_log_sigma = 0.5;
    older.third_party_per_year = 20.0;
    older.third_party_log_mean = std::log(60.0);
    older.third_party_log_sigma = 0.7;
    older.periodic_type_weights = {{"Withdrawal", 0.30}, {"Sell", 0.25}, {"Redeem", 0.20},
                                   {"Payment", 0.10}, {"EFT withdrawal", 0.10}, {"Buy", 0.05}};
    older.systematic_type_weights = {{"Auto withdrawal", 0.70}, {"Asset allocation", 0.15},
                                     {"Reinvest dividend", 0.15}};
    older.third_party_type_weights = {{"Dividend", 0.45}, {"Income distribution", 0.30},
                                      {"Interest", 0.25}};
    older.account_type_weights = {{"RIF", 0.50}, {"RSP", 0.20}, {"CASH", 0.15},
                                  {"TFSA", 0.10}, {"OTHER", 0.05}};
    older.rt_mean = 2.95;
    older.rt_sd = 0.71;

    ArchetypeSpec systematic;
    systematic.name = "systematic_saver";
    systematic.weight = 0.12;
    systematic.periodic_per_year = 6.0;
    systematic.periodic_log_mean = std::log(4000.0);
    systematic.periodic_log_sigma = 0.8;
    systematic.systematic_interval_days = 75.0;
    systematic.systematic_log_mean = std::log(250.0);
    systematic.systematic_log_sigma = 0.3;
    systematic.third_party_per_year = 10.0;
    systematic.third_party_log_mean = std::log(100.0);
    systematic.third_party_log_sigma = 0.6;
    systematic.periodic_type_weights = {{"Buy", 0.35}, {"Contribution", 0.25}, {"Sell", 0.15},
                                        {"TFSA", 0.10}, {"Exchange", 0.05},
                                        {"Spousal contribution", 0.05}, {"EFT deposit", 0.05}};
    systematic.systematic_type_weights = {{"Pre-authorized contribution", 0.50},
                                          {"Asset allocation", 0.25},
                                          {"Reinvest dividend", 0.25}};
    systematic.third_party_type_weights = {{"Dividend", 0.55}, {"Income distribution", 0.30},
                                           {"Interest", 0.15}};
    systematic.account_type_weights = {{"RSP", 0.35}, {"TFSA", 0.35}, {"CASH", 0.10},
                                       {"RIF", 0.05}, {"RESP", 0.05}, {"OTHER", 0.10}};
    systematic.rt_mean = 3.19;
    systematic.rt_sd = 0.76;

    spec.archetypes = {active, saver, jit, older, systematic};
    return spec;
}

namespace {

int draw_age(Rng& rng, const TruncNormalSpec& spec) {
    for (;;) {
        const double v = rng.normal(spec.mean, spec.sd);
        if (v >= spec.lo && v <= spec.hi) {
            const int age = static_cast<int>(std::llround(v));
            if (age >= static_cast<int>(spec.lo) && age <= static_cast<int>(spec.hi)) return age;
        }
    }
}

double draw_income(Rng& rng, const IncomeSpec& spec) {
    double value;
    if (rng.uniform() < spec.spike_prob) {
        std::vector<double> w;
        for (const auto& [amount, weight] : spec.spikes) w.push_back(weight);
        value = spec.spikes[rng.categorical(w)].first;
    } else {
        value = rng.lognormal(spec.log_median, spec.log_sigma);
        value = std::clamp(round_to(value, spec.round_to), spec.lo, spec.hi);
    }
    return value;
}

double draw_rt_score(Rng& rng, const ArchetypeSpec& archetype) {
    const double raw = rng.normal(archetype.rt_mean, archetype.rt_sd);
    return std::clamp(round_to(raw, 0.5), 1.0, 5.0);
}

std::string pad_id(char prefix, uint64_t value, int width) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%c%0*llu", prefix, width,
                  static_cast<unsigned long long>(value));
    return buf;
}

const std::vector<std::string> kNonFilledStatuses = {"cancelled", "rejected", "expired",
                                                     "active"};

struct TxnDraw {
    const ArchetypeSpec* archetype;
    const std::vector<std::string>* account_ids;
    const std::vector<std::string>* account_types;
    Date window_start;
    Date window_end;
    double nonfilled_prob;
};

void emit_transaction(Rng& rng, const TxnDraw& ctx, const std::string& client_id,
                      const std::vector<std::pair<std::string, double>>& type_weights,
                      double log_mean, double log_sigma, Date date,
                      std::vector<ingest::TransactionRecord>& out) {
    static const std::vector<std::string> kUnitTypes = {"Buy", "Sell", "Exchange", "Redeem"};
    ingest::TransactionRecord t;
    const size_t account = ctx.account_ids->size() == 1
                               ? 0
                               : static_cast<size_t>(rng.below(ctx.account_ids->size()));
    t.account_id = (*ctx.account_ids)[account];
    t.account_type = (*ctx.account_types)[account];
    t.client_id = client_id;
    t.trade_type = type_weights[rng.categorical(weights_of(type_weights))].first;
    const double amount = rng.lognormal(log_mean, log_sigma);
    if (std::find(kUnitTypes.begin(), kUnitTypes.end(), t.trade_type) != kUnitTypes.end()) {
        // Securities and funds trade in units at a per-unit price.
        const double price = round_to(rng.uniform(5.0, 150.0), 0.01);
        t.unit_value = price;
        t.size = round_to(amount / price, 0.0001);
    } else {
        t.unit_value = 1.0;
        t.size = round_to(amount, 0.01);
    }
    t.order_date = date;
    t.status = rng.uniform() < ctx.nonfilled_prob
                   ? kNonFilledStatuses[rng.below(kNonFilledStatuses.size())]
                   : "filled";
    out.push_back(std::move(t));
}

}  // namespace

Population generate_population(const PopulationSpec& spec, uint64_t seed) {
    spec.validate();
    Population population;
    population.clients.resize(spec.n_clients);
    population.archetype_by_client.resize(spec.n_clients);
    std::vector<std::vector<ingest::TransactionRecord>> txns_by_client(spec.n_clients);

    const int window_days = spec.window_end - spec.window_start;
    const double years = (window_days + 1) / 365.0;
    const std::vector<double> archetype_weights = [&] {
        std::vector<double> w;
        for (const auto& a : spec.archetypes) w.push_back(a.weight);
        return w;
    }();

    parallel_for(spec.n_clients, [&](size_t i) {
        Rng rng(derive_seed(seed, kClientStream, i));
        ingest::ClientRecord& rec = population.clients[i];
        rec.client_id = pad_id('C', i + 1, 6);

        const size_t archetype_idx = rng.categorical(archetype_weights);
        const ArchetypeSpec& archetype = spec.archetypes[archetype_idx];
        population.archetype_by_client[i] = static_cast<int>(archetype_idx);

        const int age = draw_age(rng, spec.age);
        rec.age = age;
        rec.gender = rng.uniform() < spec.male_prob ? "M" : "F";
        rec.residency = spec.residency_weights[rng.categorical(weights_of(spec.residency_weights))].first;
        rec.annual_income = draw_income(rng, spec.income);
        rec.investment_knowledge =
            static_cast<int>(rng.categorical({spec.knowledge_weights.begin(),
                                              spec.knowledge_weights.end()})) + 1;
        const int num_accounts = static_cast<int>(rng.categorical(spec.accounts_weights)) + 1;
        rec.num_accounts = num_accounts;
        rec.marital_status = spec.marital_weights[rng.categorical(weights_of(spec.marital_weights))].first;
        const double retire_p = age >= 65 ? 0.85 : (age >= 55 ? 0.25 : 0.03);
        rec.retired = rng.uniform() < retire_p;
        rec.risk_tolerance = draw_rt_score(rng, archetype);
        rec.job_category = spec.job_weights[rng.categorical(weights_of(spec.job_weights))].first;
        rec.investment_objective =
            spec.objective_weights[rng.categorical(weights_of(spec.objective_weights))].first;

        // Missing-value injection per the imputation table rates.
        const auto knock = [&](double rate) { return rng.uniform() < rate; };
        if (knock(spec.missing.age)) rec.age.reset();
        if (knock(spec.missing.residency)) rec.residency.reset();
        if (knock(spec.missing.risk_tolerance)) rec.risk_tolerance.reset();
        if (knock(spec.missing.investment_objective)) rec.investment_objective.reset();
        if (knock(spec.missing.investment_knowledge)) rec.investment_knowledge.reset();
        if (knock(spec.missing.gender)) rec.gender.reset();
        if (knock(spec.missing.annual_income)) rec.annual_income.reset();

        // Accounts, one type each.
        std::vector<std::string> account_ids(num_accounts);
        std::vector<std::string> account_types(num_accounts);
        const auto account_weights = weights_of(archetype.account_type_weights);
        for (int a = 0; a < num_accounts; ++a) {
            account_ids[a] = pad_id('A', (i + 1) * 16 + a, 7);
            account_types[a] = archetype.account_type_weights[rng.categorical(account_weights)].first;
        }

        TxnDraw ctx{&archetype, &account_ids, &account_types, spec.window_start,
                    spec.window_end, spec.nonfilled_prob};
        auto& out = txns_by_client[i];

        // Scheduled systematic transactions (or sparse Poisson when no schedule).
        if (archetype.systematic_interval_days > 0.0) {
            double day = rng.uniform(0.0, archetype.systematic_interval_days);
            while (day <= window_days) {
                emit_transaction(rng, ctx, rec.client_id, archetype.systematic_type_weights,
                                 archetype.systematic_log_mean, archetype.systematic_log_sigma,
                                 spec.window_start + static_cast<int32_t>(day), out);
                day += archetype.systematic_interval_days;
            }
        } else {
            const uint64_t count = rng.poisson(archetype.systematic_per_year * years);
            for (uint64_t t = 0; t < count; ++t) {
                emit_transaction(rng, ctx, rec.client_id, archetype.systematic_type_weights,
                                 archetype.systematic_log_mean, archetype.systematic_log_sigma,
                                 spec.window_start + static_cast<int32_t>(rng.below(window_days + 1)),
                                 out);
            }
        }

        // Periodic: client/advisor-initiated, unscheduled.
        const uint64_t periodic_count = rng.poisson(archetype.periodic_per_year * years);
        for (uint64_t t = 0; t < periodic_count; ++t) {
            emit_transaction(rng, ctx, rec.client_id, archetype.periodic_type_weights,
                             archetype.periodic_log_mean, archetype.periodic_log_sigma,
                             spec.window_start + static_cast<int32_t>(rng.below(window_days + 1)),
                             out);
        }

        // Third-party: dividend-style, biased toward month starts.
        const uint64_t third_count = rng.poisson(archetype.third_party_per_year * years);
        for (uint64_t t = 0; t < third_count; ++t) {
            Date date = spec.window_start + static_cast<int32_t>(rng.below(window_days + 1));
            if (rng.uniform() < 0.7) {
                const CivilDate c = civil_from_days(date.days);
                Date snapped = make_date(c.year, c.month, 1) + static_cast<int32_t>(rng.below(5));
                if (snapped >= spec.window_start && snapped <= spec.window_end) date = snapped;
            }
            emit_transaction(rng, ctx, rec.client_id, archetype.third_party_type_weights,
                             archetype.third_party_log_mean, archetype.third_party_log_sigma,
                             date, out);
        }
    });

    size_t total = 0;
    for (const auto& list : txns_by_client) total += list.size();
    population.transactions.reserve(total);
    for (auto& list : txns_by_client) {
        for (auto& t : list) population.transactions.push_back(std::move(t));
    }
    // Global date order with a stable tiebreak keeps the file deterministic.
    std::stable_sort(population.transactions.begin(), population.transactions.end(),
                     [](const auto& a, const auto& b) { return a.order_date < b.order_date; });
    return population;
}

void write_population_csv(const Population& population, const PopulationSpec& spec,
                          uint64_t seed, const std::string& clients_path,
                          const std::string& transactions_path) {
    static const std::vector<std::string> kMarkers = {"", "*", "unknown"};

    RawTable clients;
    clients.column_names = {"client_id",       "age",          "gender",
                            "residency",       "annual_income", "investment_knowledge",
                            "num_accounts",    "marital_status", "retired",
                            "risk_tolerance",  "job_category",  "investment_objective"};
    for (size_t i = 0; i < population.clients.size(); ++i) {
        const auto& c = population.clients[i];
        Rng marker_rng(derive_seed(seed, kMarkerStream, i));
        const auto missing = [&] { return kMarkers[marker_rng.below(kMarkers.size())]; };
        std::vector<std::string> row;
        row.push_back(c.client_id);
        row.push_back(c.age ? std::to_string(*c.age) : missing());
        row.push_back(c.gender ? *c.gender : missing());
        row.push_back(c.residency ? *c.residency : missing());
        row.push_back(c.annual_income ? format_money(*c.annual_income) : missing());
        row.push_back(c.investment_knowledge ? std::to_string(*c.investment_knowledge)
                                             : missing());
        row.push_back(c.num_accounts ? std::to_string(*c.num_accounts) : missing());
        row.push_back(c.marital_status ? *c.marital_status : missing());
        row.push_back(c.retired ? (*c.retired ? "yes" : "no") : missing());
        if (c.risk_tolerance) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.1f", *c.risk_tolerance);
            row.push_back(buf);
        } else {
            row.push_back(missing());
        }
        row.push_back(c.job_category ? *c.job_category : missing());
        row.push_back(c.investment_objective ? *c.investment_objective : missing());
        clients.rows.push_back(std::move(row));
    }
    write_table_file(clients_path, clients);

    RawTable txns;
    txns.column_names = {"account_id", "client_id", "account_type", "trade_type",
                         "size",       "unit_value", "order_date",  "status"};
    for (const auto& t : population.transactions) {
        char size_buf[32];
        std::snprintf(size_buf, sizeof size_buf, "%.4f", t.size);
        std::vector<std::string> row = {t.account_id,         t.client_id,
                                        t.account_type,       t.trade_type,
                                        size_buf,             format_money(t.unit_value),
                                        format_date(t.order_date), t.status};
        txns.rows.push_back(std::move(row));
    }
    write_table_file(transactions_path, txns);
    (void)spec;
}

void PlantedSpec::validate() const {
    if (k < 2) throw Error("planted: k must be at least 2");
    if (numeric_means.size() != static_cast<size_t>(k) ||
        numeric_sds.size() != static_cast<size_t>(k)) {
        throw Error("planted: means/sds must have one row per cluster");
    }
    const size_t p = numeric_means.empty() ? 0 : numeric_means[0].size();
    for (int l = 0; l < k; ++l) {
        if (numeric_means[l].size() != p || numeric_sds[l].size() != p) {
            throw Error("planted: ragged numeric parameter rows");
        }
        for (double sd : numeric_sds[l]) {
            if (!(sd > 0.0)) throw Error("planted: numeric sd must be positive");
        }
    }
    for (int levels : categorical_levels) {
        if (levels < 2) throw Error("planted: categorical dimensions need >= 2 levels");
    }
    if (!(purity > 0.0) || purity > 1.0) throw Error("planted: purity outside (0, 1]");
    if (!(separation >= 0.0)) throw Error("planted: separation must be nonnegative");
}

PlantedSpec default_planted_spec(int k, int p, int q, double separation, double purity,
                                 int levels) {
    PlantedSpec spec;
    spec.k = k;
    spec.purity = purity;
    spec.separation = separation;
    if (levels == 0) levels = k;
    spec.numeric_means.assign(k, std::vector<double>(p, 0.0));
    spec.numeric_sds.assign(k, std::vector<double>(p, 1.0));
    for (int l = 0; l < k; ++l) {
        // Unit spike on the cluster's own coordinate; the separation scalar
        // multiplies it at generation time.
        if (p > 0) spec.numeric_means[l][l % p] = 1.0;
    }
    spec.categorical_levels.assign(q, levels);
    return spec;
}

PlantedData generate_planted(const PlantedSpec& spec, size_t n_per_cluster, uint64_t seed) {
    spec.validate();
    if (n_per_cluster == 0) throw Error("planted: n_per_cluster must be positive");

    const size_t p = spec.numeric_means[0].size();
    const size_t q = spec.categorical_levels.size();
    const size_t n = n_per_cluster * static_cast<size_t>(spec.k);

    PlantedData data;
    auto& m = data.matrix;
    for (size_t c = 0; c < p; ++c) m.numeric_names.push_back("x" + std::to_string(c));
    for (size_t c = 0; c < q; ++c) m.categorical_names.push_back("c" + std::to_string(c));
    m.numeric.assign(n * p, 0.0);
    m.categorical.assign(n * q, 0);
    m.category_levels.resize(q);
    for (size_t c = 0; c < q; ++c) {
        for (int level = 0; level < spec.categorical_levels[c]; ++level) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "L%02d", level);
            m.category_levels[c].push_back(buf);
        }
    }
    m.scaling.standardized = false;
    m.scaling.columns.assign(p, {0.0, 1.0});

    data.labels.resize(n);
    for (size_t i = 0; i < n; ++i) {
        m.client_ids.push_back(pad_id('P', i + 1, 6));
        data.labels[i] = static_cast<int32_t>(i / n_per_cluster);
    }

    parallel_for(n, [&](size_t i) {
        Rng rng(derive_seed(seed, i));
        const int l = data.labels[i];
        for (size_t c = 0; c < p; ++c) {
            m.numeric[i * p + c] = rng.normal(spec.separation * spec.numeric_means[l][c],
                                              spec.numeric_sds[l][c]);
        }
        for (size_t c = 0; c < q; ++c) {
            const int levels = spec.categorical_levels[c];
            const int preferred = l % levels;
            int32_t code;
            if (rng.uniform() < spec.purity) {
                code = preferred;
            } else {
                // Uniform over the other categories.
                code = static_cast<int32_t>(rng.below(levels - 1));
                if (code >= preferred) ++code;
            }
            m.categorical[i * q + c] = code;
        }
    });
    return data;
}

double adjusted_rand_index(const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: label length mismatch");
    if (a.empty()) throw Error("adjusted_rand_index: empty labelings");

    std::map<std::pair<int32_t, int32_t>, size_t> contingency;
    std::map<int32_t, size_t> row_sums, col_sums;
    for (size_t i = 0; i < a.size(); ++i) {
        ++contingency[{a[i], b[i]}];
        ++row_sums[a[i]];
        ++col_sums[b[i]];
    }
    const auto comb2 = [](size_t x) {
        return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1);
    };
    double sum_cells = 0.0;
    for (const auto& [key, count] : contingency) sum_cells += comb2(count);
    double sum_rows = 0.0;
    for (const auto& [key, count] : row_sums) sum_rows += comb2(count);
    double sum_cols = 0.0;
    for (const auto& [key, count] : col_sums) sum_cols += comb2(count);

    const double total_pairs = comb2(a.size());
    if (total_pairs == 0.0) return 1.0;  // single point
    const double expected = sum_rows * sum_cols / total_pairs;
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (std::abs(maximum - expected) < 1e-12) return 1.0;  // both partitions trivial
    return (sum_cells - expected) / (maximum - expected);
}

}  // namespace invseg::synth
