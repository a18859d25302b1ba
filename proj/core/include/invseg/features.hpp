#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "invseg/dates.hpp"
#include "invseg/exact_sum.hpp"
#include "invseg/ingest.hpp"

namespace invseg::features {

enum class TradeClass { ThirdParty, Systematic, Periodic };

const char* trade_class_name(TradeClass c);

// CAD value of one transaction: size times unit value.
double trade_amount(const ingest::TransactionRecord& t);

// Total over the trade-type vocabulary; unknown types are fatal and name the
// offending value. Matching is case/punctuation-insensitive.
TradeClass classify_trade(const std::string& trade_type);

bool is_known_trade_type(const std::string& trade_type);
const std::vector<std::string>& trade_type_vocabulary();

// Days since the most recent filled transaction, as of the snapshot.
int recency(const std::vector<ingest::TransactionRecord>& txns, Date snapshot);

struct FrequencyStats {
    size_t trade_count = 0;
    double trades_per_day = 0.0;
    double avg_days_between = 0.0;
};

// Span runs from the first trade day to the snapshot, clamped to >= 1 day.
FrequencyStats frequency_stats(const std::vector<ingest::TransactionRecord>& txns,
                               Date snapshot);

struct AmountBlock {
    double mean = 0.0;
    double sd = 0.0;  // population SD (divisor n)
    double min = 0.0;
    double max = 0.0;
    double total = 0.0;
};

struct MonetaryStats {
    AmountBlock third_party;
    AmountBlock systematic;
    AmountBlock periodic;
    double buy_min = 0.0, buy_max = 0.0, buy_total = 0.0;
    double sell_min = 0.0, sell_max = 0.0, sell_total = 0.0;
};

// Per-class amount statistics; a class with no transactions reports an
// all-zero block.
MonetaryStats monetary_stats(const std::vector<ingest::TransactionRecord>& txns);

// Exact per-class amount totals; `all()` equals the sum of the three class
// accumulators in exact arithmetic regardless of grouping or order.
struct ClassTotalsExact {
    ExactSum third_party;
    ExactSum systematic;
    ExactSum periodic;

    double all() const {
        ExactSum combined;
        combined.add(third_party);
        combined.add(systematic);
        combined.add(periodic);
        return combined.value();
    }
};

ClassTotalsExact class_totals(const std::vector<ingest::TransactionRecord>& txns);

enum class AccountEncoding { Modal, Proportions };

struct ColumnScaling {
    double mean = 0.0;
    double sd = 0.0;  // 0 for constant columns
};

struct ScalingMetadata {
    bool standardized = false;
    std::vector<ColumnScaling> columns;  // one per numeric column
    Date snapshot;
    Date window_start;
    AccountEncoding account_encoding = AccountEncoding::Modal;
};

// Mixed-type design matrix: numeric block first, categorical block second,
// one row per client in ascending client_id order. Column order is frozen;
// persisted centroid files depend on it.
struct FeatureMatrix {
    std::vector<std::string> client_ids;
    std::vector<std::string> numeric_names;
    std::vector<std::string> categorical_names;
    std::vector<double> numeric;       // n*p row-major
    std::vector<int32_t> categorical;  // n*q category codes
    // Per categorical column, code -> label, sorted so code order is
    // lexicographic label order (mode ties resolve to the smallest code).
    std::vector<std::vector<std::string>> category_levels;
    ScalingMetadata scaling;

    size_t n() const { return client_ids.size(); }
    size_t p() const { return numeric_names.size(); }
    size_t q() const { return categorical_names.size(); }

    const double* numeric_row(size_t i) const { return numeric.data() + i * p(); }
    const int32_t* categorical_row(size_t i) const { return categorical.data() + i * q(); }
    const std::string& categorical_label(size_t col, int32_t code) const {
        return category_levels[col][static_cast<size_t>(code)];
    }
};

struct BuildOptions {
    Date snapshot;
    Date window_start;
    bool standardize = true;
    AccountEncoding account_encoding = AccountEncoding::Modal;
};

// One feature vector per client. Transactions must all reference known
// clients; duplicate client ids are fatal. Clients with no transactions get
// recency equal to the observation window span and zero trade statistics.
FeatureMatrix build_matrix(const std::vector<ingest::ClientRecord>& clients,
                           const std::vector<ingest::TransactionRecord>& txns,
                           const BuildOptions& options);

// Raw (de-standardized) value of a numeric cell.
double destandardize(const FeatureMatrix& m, size_t col, double value);

// Columnar text format plus a JSON metadata sidecar ("<path>.meta.json");
// round-trips bit-for-bit.
void save_matrix(const FeatureMatrix& m, const std::string& path);
FeatureMatrix load_matrix(const std::string& path);

}  // namespace invseg::features
