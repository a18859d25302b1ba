#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "invseg/csv.hpp"
#include "invseg/dates.hpp"

namespace invseg::ingest {

struct ParseIssue {
    size_t row = 0;  // 1-based data row (header excluded)
    std::string column;
    std::string reason;
};

// One client's KYC/profile attributes. Fields other than risk_tolerance are
// optional only until imputation; risk_tolerance stays optional throughout
// (too sparse for clustering, still used by the stats battery).
struct ClientRecord {
    std::string client_id;
    std::optional<int> age;                      // years, 18..98
    std::optional<std::string> gender;
    std::optional<std::string> residency;
    std::optional<double> annual_income;         // CAD/year
    std::optional<int> investment_knowledge;     // ordinal 1..4
    std::optional<int> num_accounts;             // >= 1
    std::optional<std::string> marital_status;
    std::optional<bool> retired;
    std::optional<double> risk_tolerance;        // [1, 5] when present
    std::optional<std::string> job_category;
    std::optional<std::string> investment_objective;
};

struct TransactionRecord {
    std::string account_id;
    std::string client_id;
    std::string trade_type;   // canonical vocabulary spelling
    std::string account_type;
    double size = 0.0;        // units
    double unit_value = 0.0;  // CAD per unit
    Date order_date;
    std::string status;       // lower-cased; only "filled" is studied
};

// Column mapping from logical field to header name. Defaults match the
// files the synth module writes.
struct ClientSchema {
    std::string client_id = "client_id";
    std::string age = "age";
    std::string gender = "gender";
    std::string residency = "residency";
    std::string annual_income = "annual_income";
    std::string investment_knowledge = "investment_knowledge";
    std::string num_accounts = "num_accounts";
    std::string marital_status = "marital_status";
    std::string retired = "retired";
    std::string risk_tolerance = "risk_tolerance";
    std::string job_category = "job_category";
    std::string investment_objective = "investment_objective";
};

struct TransactionSchema {
    std::string account_id = "account_id";
    std::string client_id = "client_id";
    std::string trade_type = "trade_type";
    std::string account_type = "account_type";
    std::string size = "size";
    std::string unit_value = "unit_value";
    std::string order_date = "order_date";
    std::string status = "status";
    // When set, order dates outside the window are parse issues.
    std::optional<Date> window_start;
    std::optional<Date> window_end;
};

struct ClientParseResult {
    std::vector<ClientRecord> records;
    std::vector<ParseIssue> issues;
};

struct TransactionParseResult {
    std::vector<TransactionRecord> records;
    std::vector<ParseIssue> issues;
};

// Every row becomes either a record (possibly with missing fields) or an
// issue; nothing is silently dropped. A missing mapped column is fatal.
ClientParseResult parse_clients(const RawTable& table, const ClientSchema& schema = {});
ClientParseResult parse_clients(std::istream& in, const ClientSchema& schema = {},
                                char delimiter = ',');

TransactionParseResult parse_transactions(const RawTable& table,
                                          const TransactionSchema& schema = {});
TransactionParseResult parse_transactions(std::istream& in,
                                          const TransactionSchema& schema = {},
                                          char delimiter = ',');

struct SparseDropResult {
    RawTable table;
    std::vector<std::string> dropped;
};

// Drops every column whose missing fraction is strictly above the threshold
// (a column at exactly the threshold survives). Surviving cells are untouched.
SparseDropResult drop_sparse_columns(const RawTable& table, double threshold = 0.10);

struct DropIncompleteResult {
    std::vector<ClientRecord> records;
    size_t removed = 0;
};

inline const std::set<std::string> kDefaultRequiredFields = {
    "investment_objective", "investment_knowledge", "gender"};

DropIncompleteResult drop_incomplete_clients(
    const std::vector<ClientRecord>& records,
    const std::set<std::string>& required_fields = kDefaultRequiredFields);

struct ImputePolicy {
    // Fields excluded from imputation (dropped-sparse columns plus
    // risk_tolerance, which is never imputed).
    std::set<std::string> skip = {"risk_tolerance"};
};

struct ImputeSummary {
    std::vector<ClientRecord> records;
    // field name -> number of values filled
    std::vector<std::pair<std::string, size_t>> filled;
};

// Numeric gaps take the mean (annual_income: mean within the record's job
// category, global mean when the category has no observations); categorical
// gaps take the mode, ties broken by smallest category. A column that is
// entirely missing (and not skipped) is fatal.
ImputeSummary impute(const std::vector<ClientRecord>& records, const ImputePolicy& policy = {});

struct FilterResult {
    std::vector<TransactionRecord> records;
    size_t removed = 0;
};

// Only filled orders are studied.
FilterResult filter_filled(const std::vector<TransactionRecord>& txns);

// Removes transactions whose client is no longer in the record set.
FilterResult drop_orphan_transactions(const std::vector<TransactionRecord>& txns,
                                      const std::vector<ClientRecord>& clients);

// TYPE invariants; returns a reason string when violated.
std::optional<std::string> validate_client(const ClientRecord& record);

}  // namespace invseg::ingest
