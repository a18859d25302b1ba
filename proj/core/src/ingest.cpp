#include "invseg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "invseg/error.hpp"
#include "invseg/exact_sum.hpp"
#include "invseg/features.hpp"

namespace invseg::ingest {

namespace {

std::optional<double> parse_number(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) return std::nullopt;
    size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(t, &consumed);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (consumed != t.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::optional<int> parse_int(const std::string& cell) {
    const auto v = parse_number(cell);
    if (!v) return std::nullopt;
    const double r = std::round(*v);
    if (std::abs(*v - r) > 1e-9) return std::nullopt;
    return static_cast<int>(r);
}

std::optional<bool> parse_bool(const std::string& cell) {
    const std::string t = to_lower(trim(cell));
    if (t == "yes" || t == "y" || t == "true" || t == "1") return true;
    if (t == "no" || t == "n" || t == "false" || t == "0") return false;
    return std::nullopt;
}

size_t require_column(const RawTable& table, const std::string& name) {
    const size_t idx = table.column_index(name);
    if (idx == RawTable::npos) throw Error("ingest: missing required column '" + name + "'");
    return idx;
}

// Signals a row-level problem; caught per row and turned into a ParseIssue.
struct RowError {
    std::string column;
    std::string reason;
};

}  // namespace

ClientParseResult parse_clients(const RawTable& table, const ClientSchema& schema) {
    ClientParseResult result;
    const size_t col_id = require_column(table, schema.client_id);

    auto optional_column = [&](const std::string& name) {
        return table.column_index(name);
    };
    const size_t col_age = optional_column(schema.age);
    const size_t col_gender = optional_column(schema.gender);
    const size_t col_res = optional_column(schema.residency);
    const size_t col_income = optional_column(schema.annual_income);
    const size_t col_knowledge = optional_column(schema.investment_knowledge);
    const size_t col_accounts = optional_column(schema.num_accounts);
    const size_t col_marital = optional_column(schema.marital_status);
    const size_t col_retired = optional_column(schema.retired);
    const size_t col_rt = optional_column(schema.risk_tolerance);
    const size_t col_job = optional_column(schema.job_category);
    const size_t col_objective = optional_column(schema.investment_objective);

    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const size_t row_number = r + 1;
        try {
            ClientRecord rec;
            rec.client_id = trim(row[col_id]);
            if (rec.client_id.empty() || is_missing_marker(rec.client_id)) {
                throw RowError{schema.client_id, "missing client id"};
            }

            auto cell = [&](size_t col) -> const std::string* {
                if (col == RawTable::npos) return nullptr;
                if (is_missing_marker(row[col])) return nullptr;
                return &row[col];
            };

            if (const auto* c = cell(col_age)) {
                const auto v = parse_int(*c);
                if (!v) throw RowError{schema.age, "age not an integer: '" + *c + "'"};
                if (*v < 18) throw RowError{schema.age, "age below legal minimum 18"};
                if (*v > 98) throw RowError{schema.age, "age above maximum 98"};
                rec.age = *v;
            }
            if (const auto* c = cell(col_gender)) rec.gender = trim(*c);
            if (const auto* c = cell(col_res)) rec.residency = trim(*c);
            if (const auto* c = cell(col_income)) {
                const auto v = parse_number(*c);
                if (!v) throw RowError{schema.annual_income, "income not numeric: '" + *c + "'"};
                if (*v < 0.0) throw RowError{schema.annual_income, "negative income"};
                rec.annual_income = *v;
            }
            if (const auto* c = cell(col_knowledge)) {
                const auto v = parse_int(*c);
                if (!v || *v < 1 || *v > 4) {
                    throw RowError{schema.investment_knowledge,
                                   "investment knowledge outside 1..4: '" + *c + "'"};
                }
                rec.investment_knowledge = *v;
            }
            if (const auto* c = cell(col_accounts)) {
                const auto v = parse_int(*c);
                if (!v || *v < 1) {
                    throw RowError{schema.num_accounts, "account count below 1: '" + *c + "'"};
                }
                rec.num_accounts = *v;
            }
            if (const auto* c = cell(col_marital)) rec.marital_status = trim(*c);
            if (const auto* c = cell(col_retired)) {
                const auto v = parse_bool(*c);
                if (!v) throw RowError{schema.retired, "retired flag unreadable: '" + *c + "'"};
                rec.retired = *v;
            }
            if (const auto* c = cell(col_rt)) {
                const auto v = parse_number(*c);
                if (!v || *v < 1.0 || *v > 5.0) {
                    throw RowError{schema.risk_tolerance,
                                   "risk tolerance outside [1,5]: '" + *c + "'"};
                }
                rec.risk_tolerance = *v;
            }
            if (const auto* c = cell(col_job)) rec.job_category = trim(*c);
            if (const auto* c = cell(col_objective)) rec.investment_objective = trim(*c);

            result.records.push_back(std::move(rec));
        } catch (const RowError& e) {
            result.issues.push_back({row_number, e.column, e.reason});
        }
    }
    return result;
}

ClientParseResult parse_clients(std::istream& in, const ClientSchema& schema, char delimiter) {
    auto read = read_table(in, delimiter);
    auto result = parse_clients(read.table, schema);
    for (const auto& [row, reason] : read.bad_rows) {
        result.issues.push_back({row, "", reason});
    }
    std::sort(result.issues.begin(), result.issues.end(),
              [](const ParseIssue& a, const ParseIssue& b) { return a.row < b.row; });
    return result;
}

TransactionParseResult parse_transactions(const RawTable& table,
                                          const TransactionSchema& schema) {
    TransactionParseResult result;
    const size_t col_account = require_column(table, schema.account_id);
    const size_t col_client = require_column(table, schema.client_id);
    const size_t col_type = require_column(table, schema.trade_type);
    const size_t col_acct_type = require_column(table, schema.account_type);
    const size_t col_size = require_column(table, schema.size);
    const size_t col_value = require_column(table, schema.unit_value);
    const size_t col_date = require_column(table, schema.order_date);
    const size_t col_status = require_column(table, schema.status);

    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const size_t row_number = r + 1;
        try {
            TransactionRecord rec;
            rec.account_id = trim(row[col_account]);
            if (rec.account_id.empty() || is_missing_marker(rec.account_id)) {
                throw RowError{schema.account_id, "missing account id"};
            }
            rec.client_id = trim(row[col_client]);
            if (rec.client_id.empty() || is_missing_marker(rec.client_id)) {
                throw RowError{schema.client_id, "missing client id"};
            }
            rec.trade_type = trim(row[col_type]);
            if (!features::is_known_trade_type(rec.trade_type)) {
                throw RowError{schema.trade_type, "unknown trade type: '" + rec.trade_type + "'"};
            }
            rec.account_type = trim(row[col_acct_type]);
            if (rec.account_type.empty() || is_missing_marker(rec.account_type)) {
                throw RowError{schema.account_type, "missing account type"};
            }
            const auto size = parse_number(row[col_size]);
            if (!size) throw RowError{schema.size, "size not numeric: '" + row[col_size] + "'"};
            rec.size = *size;
            const auto value = parse_number(row[col_value]);
            if (!value) {
                throw RowError{schema.unit_value, "unit value not numeric: '" + row[col_value] + "'"};
            }
            rec.unit_value = *value;
            const auto date = parse_date(trim(row[col_date]));
            if (!date) throw RowError{schema.order_date, "unreadable date: '" + row[col_date] + "'"};
            rec.order_date = *date;
            if (schema.window_start && rec.order_date < *schema.window_start) {
                throw RowError{schema.order_date, "order date before observation window"};
            }
            if (schema.window_end && rec.order_date > *schema.window_end) {
                throw RowError{schema.order_date, "order date after observation window"};
            }
            rec.status = to_lower(trim(row[col_status]));
            if (rec.status.empty()) throw RowError{schema.status, "missing status"};
            result.records.push_back(std::move(rec));
        } catch (const RowError& e) {
            result.issues.push_back({row_number, e.column, e.reason});
        }
    }
    return result;
}

TransactionParseResult parse_transactions(std::istream& in, const TransactionSchema& schema,
                                          char delimiter) {
    auto read = read_table(in, delimiter);
    auto result = parse_transactions(read.table, schema);
    for (const auto& [row, reason] : read.bad_rows) {
        result.issues.push_back({row, "", reason});
    }
    std::sort(result.issues.begin(), result.issues.end(),
              [](const ParseIssue& a, const ParseIssue& b) { return a.row < b.row; });
    return result;
}

SparseDropResult drop_sparse_columns(const RawTable& table, double threshold) {
    if (!(threshold > 0.0) || threshold > 1.0) {
        throw Error("drop_sparse_columns: threshold must lie in (0, 1]");
    }
    SparseDropResult result;
    const size_t n_rows = table.rows.size();
    std::vector<bool> keep(table.column_names.size(), true);
    for (size_t c = 0; c < table.column_names.size(); ++c) {
        if (n_rows == 0) break;
        size_t missing = 0;
        for (const auto& row : table.rows) {
            if (is_missing_marker(row[c])) ++missing;
        }
        const double fraction = static_cast<double>(missing) / static_cast<double>(n_rows);
        if (fraction > threshold) {
            keep[c] = false;
            result.dropped.push_back(table.column_names[c]);
        }
    }
    for (size_t c = 0; c < table.column_names.size(); ++c) {
        if (keep[c]) result.table.column_names.push_back(table.column_names[c]);
    }
    result.table.rows.reserve(n_rows);
    for (const auto& row : table.rows) {
        std::vector<std::string> cells;
        cells.reserve(result.table.column_names.size());
        for (size_t c = 0; c < row.size(); ++c) {
            if (keep[c]) cells.push_back(row[c]);
        }
        result.table.rows.push_back(std::move(cells));
    }
    return result;
}

namespace {

bool has_field(const ClientRecord& r, const std::string& field) {
    if (field == "client_id") return !r.client_id.empty();
    if (field == "age") return r.age.has_value();
    if (field == "gender") return r.gender.has_value();
    if (field == "residency") return r.residency.has_value();
    if (field == "annual_income") return r.annual_income.has_value();
    if (field == "investment_knowledge") return r.investment_knowledge.has_value();
    if (field == "num_accounts") return r.num_accounts.has_value();
    if (field == "marital_status") return r.marital_status.has_value();
    if (field == "retired") return r.retired.has_value();
    if (field == "risk_tolerance") return r.risk_tolerance.has_value();
    if (field == "job_category") return r.job_category.has_value();
    if (field == "investment_objective") return r.investment_objective.has_value();
    throw Error("unknown client field '" + field + "'");
}

}  // namespace

DropIncompleteResult drop_incomplete_clients(const std::vector<ClientRecord>& records,
                                             const std::set<std::string>& required_fields) {
    DropIncompleteResult result;
    result.records.reserve(records.size());
    for (const auto& rec : records) {
        bool complete = true;
        for (const auto& field : required_fields) {
            if (!has_field(rec, field)) {
                complete = false;
                break;
            }
        }
        if (complete) {
            result.records.push_back(rec);
        } else {
            ++result.removed;
        }
    }
    return result;
}

namespace {

std::string mode_of(const std::map<std::string, size_t>& counts) {
    // std::map iterates keys in order, so the first maximum is the
    // lexicographically smallest mode.
    std::string best;
    size_t best_count = 0;
    for (const auto& [key, count] : counts) {
        if (count > best_count) {
            best = key;
            best_count = count;
        }
    }
    return best;
}

}  // namespace

ImputeSummary impute(const std::vector<ClientRecord>& records, const ImputePolicy& policy) {
    ImputeSummary result;
    result.records = records;
    const auto skipped = [&](const std::string& field) { return policy.skip.count(field) > 0; };

    // Statistics over the observed values.
    ExactSum age_sum;
    size_t age_n = 0;
    ExactSum income_sum;
    size_t income_n = 0;
    std::map<std::string, std::pair<ExactSum, size_t>> income_by_job;
    ExactSum knowledge_sum;
    size_t knowledge_n = 0;
    ExactSum accounts_sum;
    size_t accounts_n = 0;
    std::map<std::string, size_t> gender_counts, residency_counts, marital_counts,
        job_counts, objective_counts;
    size_t retired_true = 0, retired_false = 0;

    for (const auto& r : records) {
        if (r.age) {
            age_sum.add(*r.age);
            ++age_n;
        }
        if (r.annual_income) {
            income_sum.add(*r.annual_income);
            ++income_n;
            if (r.job_category) {
                auto& slot = income_by_job[*r.job_category];
                slot.first.add(*r.annual_income);
                ++slot.second;
            }
        }
        if (r.investment_knowledge) {
            knowledge_sum.add(*r.investment_knowledge);
            ++knowledge_n;
        }
        if (r.num_accounts) {
            accounts_sum.add(*r.num_accounts);
            ++accounts_n;
        }
        if (r.gender) ++gender_counts[*r.gender];
        if (r.residency) ++residency_counts[*r.residency];
        if (r.marital_status) ++marital_counts[*r.marital_status];
        if (r.job_category) ++job_counts[*r.job_category];
        if (r.investment_objective) ++objective_counts[*r.investment_objective];
        if (r.retired) (*r.retired ? retired_true : retired_false) += 1;
    }

    std::map<std::string, size_t> filled;
    auto require_observed = [&](const std::string& field, size_t n, size_t gaps) {
        if (gaps > 0 && n == 0 && !skipped(field)) {
            throw Error("impute: column '" + field + "' is entirely missing");
        }
    };

    size_t gaps_age = 0, gaps_income = 0, gaps_knowledge = 0, gaps_accounts = 0,
           gaps_gender = 0, gaps_residency = 0, gaps_marital = 0, gaps_job = 0,
           gaps_objective = 0, gaps_retired = 0;
    for (const auto& r : result.records) {
        gaps_age += !r.age;
        gaps_income += !r.annual_income;
        gaps_knowledge += !r.investment_knowledge;
        gaps_accounts += !r.num_accounts;
        gaps_gender += !r.gender;
        gaps_residency += !r.residency;
        gaps_marital += !r.marital_status;
        gaps_job += !r.job_category;
        gaps_objective += !r.investment_objective;
        gaps_retired += !r.retired;
    }
    require_observed("age", age_n, gaps_age);
    require_observed("annual_income", income_n, gaps_income);
    require_observed("investment_knowledge", knowledge_n, gaps_knowledge);
    require_observed("num_accounts", accounts_n, gaps_accounts);
    require_observed("gender", gender_counts.size(), gaps_gender);
    require_observed("residency", residency_counts.size(), gaps_residency);
    require_observed("marital_status", marital_counts.size(), gaps_marital);
    require_observed("job_category", job_counts.size(), gaps_job);
    require_observed("investment_objective", objective_counts.size(), gaps_objective);
    require_observed("retired", retired_true + retired_false, gaps_retired);

    const double age_mean = age_n ? age_sum.value() / static_cast<double>(age_n) : 0.0;
    const double income_mean =
        income_n ? income_sum.value() / static_cast<double>(income_n) : 0.0;
    const double knowledge_mean =
        knowledge_n ? knowledge_sum.value() / static_cast<double>(knowledge_n) : 0.0;
    const double accounts_mean =
        accounts_n ? accounts_sum.value() / static_cast<double>(accounts_n) : 0.0;
    const std::string gender_mode = mode_of(gender_counts);
    const std::string residency_mode = mode_of(residency_counts);
    const std::string marital_mode = mode_of(marital_counts);
    const std::string job_mode = mode_of(job_counts);
    const std::string objective_mode = mode_of(objective_counts);
    // Boolean mode; a tie resolves to false ("false" < "true").
    const bool retired_mode = retired_true > retired_false;

    for (auto& r : result.records) {
        // Categorical fills first so job-category income lookup sees a value.
        if (!r.gender && !skipped("gender")) {
            r.gender = gender_mode;
            ++filled["gender"];
        }
        if (!r.residency && !skipped("residency")) {
            r.residency = residency_mode;
            ++filled["residency"];
        }
        if (!r.marital_status && !skipped("marital_status")) {
            r.marital_status = marital_mode;
            ++filled["marital_status"];
        }
        if (!r.job_category && !skipped("job_category")) {
            r.job_category = job_mode;
            ++filled["job_category"];
        }
        if (!r.investment_objective && !skipped("investment_objective")) {
            r.investment_objective = objective_mode;
            ++filled["investment_objective"];
        }
        if (!r.retired && !skipped("retired")) {
            r.retired = retired_mode;
            ++filled["retired"];
        }
        if (!r.age && !skipped("age")) {
            r.age = static_cast<int>(std::llround(age_mean));
            ++filled["age"];
        }
        if (!r.annual_income && !skipped("annual_income")) {
            double value = income_mean;
            if (r.job_category) {
                const auto it = income_by_job.find(*r.job_category);
                if (it != income_by_job.end() && it->second.second > 0) {
                    value = it->second.first.value() / static_cast<double>(it->second.second);
                }
            }
            r.annual_income = value;
            ++filled["annual_income"];
        }
        if (!r.investment_knowledge && !skipped("investment_knowledge")) {
            r.investment_knowledge =
                std::clamp(static_cast<int>(std::llround(knowledge_mean)), 1, 4);
            ++filled["investment_knowledge"];
        }
        if (!r.num_accounts && !skipped("num_accounts")) {
            r.num_accounts = std::max(1, static_cast<int>(std::llround(accounts_mean)));
            ++filled["num_accounts"];
        }
    }

    result.filled.assign(filled.begin(), filled.end());
    return result;
}

FilterResult filter_filled(const std::vector<TransactionRecord>& txns) {
    FilterResult result;
    result.records.reserve(txns.size());
    for (const auto& t : txns) {
        if (t.status == "filled") {
            result.records.push_back(t);
        } else {
            ++result.removed;
        }
    }
    return result;
}

FilterResult drop_orphan_transactions(const std::vector<TransactionRecord>& txns,
                                      const std::vector<ClientRecord>& clients) {
    std::unordered_set<std::string> ids;
    ids.reserve(clients.size());
    for (const auto& c : clients) ids.insert(c.client_id);
    FilterResult result;
    result.records.reserve(txns.size());
    for (const auto& t : txns) {
        if (ids.count(t.client_id)) {
            result.records.push_back(t);
        } else {
            ++result.removed;
        }
    }
    return result;
}

std::optional<std::string> validate_client(const ClientRecord& r) {
    if (r.client_id.empty()) return "empty client id";
    if (r.age && (*r.age < 18 || *r.age > 98)) return "age outside [18, 98]";
    if (r.investment_knowledge &&
        (*r.investment_knowledge < 1 || *r.investment_knowledge > 4)) {
        return "investment knowledge outside 1..4";
    }
    if (r.num_accounts && *r.num_accounts < 1) return "account count below 1";
    if (r.risk_tolerance && (*r.risk_tolerance < 1.0 || *r.risk_tolerance > 5.0)) {
        return "risk tolerance outside [1, 5]";
    }
    if (r.annual_income && !(std::isfinite(*r.annual_income) && *r.annual_income >= 0.0)) {
        return "annual income not finite and nonnegative";
    }
    return std::nullopt;
}

}  // namespace invseg::ingest
