#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "invseg/dates.hpp"
#include "invseg/features.hpp"
#include "invseg/ingest.hpp"

namespace invseg::synth {

struct TruncNormalSpec {
    double mean = 0.0;
    double sd = 1.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct IncomeSpec {
    double log_median = 0.0;  // median of the log-normal base, CAD
    double log_sigma = 0.0;
    double spike_prob = 0.0;  // probability of drawing a round-value spike
    std::vector<std::pair<double, double>> spikes;  // (CAD value, weight)
    double lo = 1000.0;
    double hi = 220000.0;
    double round_to = 100.0;
};

// Behaviour archetype: trade rates, amount distributions and type mixes for
// the three trade classes, plus the account-type tilt.
struct ArchetypeSpec {
    std::string name;
    double weight = 0.0;
    double periodic_per_year = 0.0;
    double periodic_log_mean = 0.0;   // log CAD
    double periodic_log_sigma = 0.5;
    double systematic_interval_days = 0.0;  // 0 = no schedule, Poisson rate below
    double systematic_per_year = 0.0;
    double systematic_log_mean = 0.0;
    double systematic_log_sigma = 0.3;
    double third_party_per_year = 0.0;
    double third_party_log_mean = 0.0;
    double third_party_log_sigma = 0.5;
    std::vector<std::pair<std::string, double>> periodic_type_weights;
    std::vector<std::pair<std::string, double>> systematic_type_weights;
    std::vector<std::pair<std::string, double>> third_party_type_weights;
    std::vector<std::pair<std::string, double>> account_type_weights;
    double rt_mean = 3.0;  // risk-tolerance score distribution, half-point grid
    double rt_sd = 0.7;
};

// Per-variable missing-value rates injected into the emitted tables.
struct MissingRates {
    double age = 0.022;
    double residency = 0.0047;
    double risk_tolerance = 0.1416;
    double investment_objective = 0.067;
    double investment_knowledge = 0.078;
    double gender = 0.0804;
    double annual_income = 0.0013;
};

struct PopulationSpec {
    size_t n_clients = 5000;
    TruncNormalSpec age{58.1, 14.1, 18.0, 98.0};
    IncomeSpec income;
    std::vector<std::pair<std::string, double>> residency_weights;
    std::array<double, 4> knowledge_weights{};
    std::vector<double> accounts_weights;  // index 0 -> one account
    double male_prob = 0.505;
    std::vector<std::pair<std::string, double>> marital_weights;
    std::vector<std::pair<std::string, double>> objective_weights;
    std::vector<std::pair<std::string, double>> job_weights;
    std::vector<ArchetypeSpec> archetypes;
    MissingRates missing;
    Date window_start = make_date(2018, 8, 13);
    Date window_end = make_date(2019, 8, 12);
    double nonfilled_prob = 0.02;  // orders left in a non-filled status

    void validate() const;  // throws on infeasible parameters
};

// Paper-shaped defaults: age centred at 58.1 (sd 14.1), income averaging
// ~70,658 CAD with spikes at 50k/100k/150k/200k, residency ~65% ON,
// accounts-per-client mode 2, five behaviour archetypes.
PopulationSpec default_population_spec(size_t n_clients = 5000);

struct Population {
    std::vector<ingest::ClientRecord> clients;
    std::vector<ingest::TransactionRecord> transactions;
    std::vector<int> archetype_by_client;
};

// Deterministic under the seed; per-client substreams make generation
// order-independent.
Population generate_population(const PopulationSpec& spec, uint64_t seed);

// The emitted tables are the same delimited formats the ingest module
// consumes, with missing values rendered as the marker set.
void write_population_csv(const Population& population, const PopulationSpec& spec,
                          uint64_t seed, const std::string& clients_path,
                          const std::string& transactions_path);

struct PlantedSpec {
    int k = 2;
    std::vector<std::vector<double>> numeric_means;  // k x p
    std::vector<std::vector<double>> numeric_sds;    // k x p
    // categorical_levels[d] = number of categories of dimension d;
    // cluster l prefers category (l % levels) with probability `purity`.
    std::vector<int> categorical_levels;
    double purity = 0.95;
    double separation = 1.0;  // multiplies the numeric means

    void validate() const;
};

// k clusters, p numeric dimensions (unit SD), q categorical dimensions with
// `levels` categories each; cluster means are `separation` apart on their own
// coordinate.
PlantedSpec default_planted_spec(int k, int p, int q, double separation,
                                 double purity = 0.95, int levels = 0);

struct PlantedData {
    features::FeatureMatrix matrix;
    std::vector<int32_t> labels;  // 0-based truth, exactly n_per_cluster each
};

PlantedData generate_planted(const PlantedSpec& spec, size_t n_per_cluster, uint64_t seed);

// Chance-corrected agreement between two labelings, from the pair-counting
// contingency table. 1 means identical up to relabeling.
double adjusted_rand_index(const std::vector<int32_t>& a, const std::vector<int32_t>& b);

}  // namespace invseg::synth
