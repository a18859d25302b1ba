#include "invseg/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "invseg/error.hpp"
#include "invseg/parallel.hpp"

namespace invseg::features {

namespace {

// Appendix-level trade taxonomy; keys are canonical tokens.
const std::vector<std::pair<const char*, TradeClass>> kTaxonomy = {
    {"Dividend", TradeClass::ThirdParty},
    {"Income distribution", TradeClass::ThirdParty},
    {"Interest", TradeClass::ThirdParty},
    {"Auto withdrawal", TradeClass::Systematic},
    {"Pre-authorized contribution", TradeClass::Systematic},
    {"Asset allocation", TradeClass::Systematic},
    {"Reinvest dividend", TradeClass::Systematic},
    {"Buy", TradeClass::Periodic},
    {"Sell", TradeClass::Periodic},
    {"Contribution", TradeClass::Periodic},
    {"Exchange", TradeClass::Periodic},
    {"Payment", TradeClass::Periodic},
    {"EFT withdrawal", TradeClass::Periodic},
    {"EFT deposit", TradeClass::Periodic},
    {"TFSA", TradeClass::Periodic},
    {"Spousal contribution", TradeClass::Periodic},
    {"Redeem", TradeClass::Periodic},
    {"Withdrawal", TradeClass::Periodic},
};

const std::unordered_map<std::string, TradeClass>& taxonomy_index() {
    static const std::unordered_map<std::string, TradeClass> index = [] {
        std::unordered_map<std::string, TradeClass> m;
        for (const auto& [name, cls] : kTaxonomy) m.emplace(canonical_token(name), cls);
        return m;
    }();
    return index;
}

struct AmountAccumulator {
    std::vector<double> amounts;

    AmountBlock block() const {
        AmountBlock b;
        if (amounts.empty()) return b;  // all-zero convention
        ExactSum sum;
        double lo = amounts[0];
        double hi = amounts[0];
        for (double a : amounts) {
            sum.add(a);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        b.total = sum.value();
        b.mean = b.total / static_cast<double>(amounts.size());
        ExactSum sq;
        for (double a : amounts) {
            const double d = a - b.mean;
            sq.add(d * d);
        }
        b.sd = std::sqrt(sq.value() / static_cast<double>(amounts.size()));
        b.min = lo;
        b.max = hi;
        return b;
    }
};

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const char* trade_class_name(TradeClass c) {
    switch (c) {
        case TradeClass::ThirdParty: return "third_party";
        case TradeClass::Systematic: return "systematic";
        case TradeClass::Periodic: return "periodic";
    }
    return "?";
}

double trade_amount(const ingest::TransactionRecord& t) { return t.size * t.unit_value; }

TradeClass classify_trade(const std::string& trade_type) {
    const auto& index = taxonomy_index();
    const auto it = index.find(canonical_token(trade_type));
    if (it == index.end()) {
        throw Error("classify_trade: unknown trade type '" + trade_type + "'");
    }
    return it->second;
}

bool is_known_trade_type(const std::string& trade_type) {
    return taxonomy_index().count(canonical_token(trade_type)) > 0;
}

const std::vector<std::string>& trade_type_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (const auto& [name, cls] : kTaxonomy) v.emplace_back(name);
        return v;
    }();
    return vocab;
}

int recency(const std::vector<ingest::TransactionRecord>& txns, Date snapshot) {
    if (txns.empty()) throw Error("recency: client has no transactions");
    Date last = txns.front().order_date;
    for (const auto& t : txns) last = std::max(last, t.order_date);
    if (snapshot < last) throw Error("recency: snapshot precedes a transaction date");
    return snapshot - last;
}

FrequencyStats frequency_stats(const std::vector<ingest::TransactionRecord>& txns,
                               Date snapshot) {
    if (txns.empty()) throw Error("frequency_stats: client has no transactions");
    Date first = txns.front().order_date;
    for (const auto& t : txns) {
        first = std::min(first, t.order_date);
        if (snapshot < t.order_date) {
            throw Error("frequency_stats: snapshot precedes a transaction date");
        }
    }
    FrequencyStats stats;
    stats.trade_count = txns.size();
    const double span = std::max(snapshot - first, 1);
    stats.trades_per_day = static_cast<double>(stats.trade_count) / span;
    stats.avg_days_between = span / static_cast<double>(stats.trade_count);
    return stats;
}

MonetaryStats monetary_stats(const std::vector<ingest::TransactionRecord>& txns) {
    AmountAccumulator third, systematic, periodic, buys, sells;
    static const std::string kBuy = canonical_token("Buy");
    static const std::string kSell = canonical_token("Sell");
    for (const auto& t : txns) {
        const double amount = trade_amount(t);
        switch (classify_trade(t.trade_type)) {
            case TradeClass::ThirdParty: third.amounts.push_back(amount); break;
            case TradeClass::Systematic: systematic.amounts.push_back(amount); break;
            case TradeClass::Periodic: periodic.amounts.push_back(amount); break;
        }
        const std::string token = canonical_token(t.trade_type);
        if (token == kBuy) buys.amounts.push_back(amount);
        if (token == kSell) sells.amounts.push_back(amount);
    }
    MonetaryStats stats;
    stats.third_party = third.block();
    stats.systematic = systematic.block();
    stats.periodic = periodic.block();
    const AmountBlock b = buys.block();
    stats.buy_min = b.min;
    stats.buy_max = b.max;
    stats.buy_total = b.total;
    const AmountBlock s = sells.block();
    stats.sell_min = s.min;
    stats.sell_max = s.max;
    stats.sell_total = s.total;
    return stats;
}

ClassTotalsExact class_totals(const std::vector<ingest::TransactionRecord>& txns) {
    ClassTotalsExact totals;
    for (const auto& t : txns) {
        const double amount = trade_amount(t);
        switch (classify_trade(t.trade_type)) {
            case TradeClass::ThirdParty: totals.third_party.add(amount); break;
            case TradeClass::Systematic: totals.systematic.add(amount); break;
            case TradeClass::Periodic: totals.periodic.add(amount); break;
        }
    }
    return totals;
}

namespace {

const std::vector<std::string> kNumericNames = {
    "age",         "annual_income", "investment_knowledge", "num_accounts",
    "recency",     "trade_count",   "frequency",            "avg_days_between",
    "mean_third_party", "sd_third_party", "mean_systematic", "sd_systematic",
    "mean_periodic",    "sd_periodic",    "min_buy",         "max_buy",
    "min_sell",    "max_sell",      "total_buy",            "total_sell"};

const std::vector<std::string> kCategoricalNames = {"gender", "residency", "marital_status",
                                                    "retired", "account_type"};

const std::vector<std::string> kAccountShareTypes = {"CASH", "OTHER", "RESP",
                                                     "RIF",  "RSP",   "TFSA"};

std::string modal_account_type(const std::vector<const ingest::TransactionRecord*>& txns) {
    if (txns.empty()) return "NONE";
    // One vote per distinct account; the type comes from the account's first
    // transaction in date order.
    std::map<std::string, std::string> type_by_account;
    for (const auto* t : txns) type_by_account.emplace(t->account_id, t->account_type);
    std::map<std::string, size_t> counts;
    for (const auto& [account, type] : type_by_account) ++counts[type];
    std::string best;
    size_t best_count = 0;
    for (const auto& [type, count] : counts) {
        if (count > best_count) {
            best = type;
            best_count = count;
        }
    }
    return best;
}

std::string upper(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::vector<double> account_shares(const std::vector<const ingest::TransactionRecord*>& txns) {
    std::vector<double> shares(kAccountShareTypes.size(), 0.0);
    if (txns.empty()) return shares;
    std::map<std::string, std::string> type_by_account;
    for (const auto* t : txns) type_by_account.emplace(t->account_id, t->account_type);
    const double total = static_cast<double>(type_by_account.size());
    for (const auto& [account, type] : type_by_account) {
        const auto it =
            std::find(kAccountShareTypes.begin(), kAccountShareTypes.end(), upper(type));
        const size_t idx = it == kAccountShareTypes.end()
                               ? 1  // OTHER
                               : static_cast<size_t>(it - kAccountShareTypes.begin());
        shares[idx] += 1.0 / total;
    }
    return shares;
}

template <typename T>
T require_value(const std::optional<T>& v, const std::string& client,
                const std::string& field) {
    if (!v) throw Error("build_matrix: client " + client + " missing field '" + field + "'");
    return *v;
}

}  // namespace

FeatureMatrix build_matrix(const std::vector<ingest::ClientRecord>& clients,
                           const std::vector<ingest::TransactionRecord>& txns,
                           const BuildOptions& options) {
    if (options.snapshot < options.window_start) {
        throw Error("build_matrix: snapshot precedes the observation window");
    }

    // Rows in ascending client_id order.
    std::vector<size_t> order(clients.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return clients[a].client_id < clients[b].client_id;
    });
    for (size_t i = 1; i < order.size(); ++i) {
        if (clients[order[i - 1]].client_id == clients[order[i]].client_id) {
            throw Error("build_matrix: duplicate client_id '" + clients[order[i]].client_id + "'");
        }
    }

    std::unordered_map<std::string, size_t> row_of;
    row_of.reserve(clients.size());
    FeatureMatrix m;
    m.client_ids.reserve(clients.size());
    for (size_t i = 0; i < order.size(); ++i) {
        m.client_ids.push_back(clients[order[i]].client_id);
        row_of.emplace(clients[order[i]].client_id, i);
    }

    // Transactions grouped per row, in (date, original index) order.
    std::vector<std::vector<const ingest::TransactionRecord*>> txns_by_row(clients.size());
    for (const auto& t : txns) {
        const auto it = row_of.find(t.client_id);
        if (it == row_of.end()) {
            throw Error("build_matrix: transaction references unknown client '" + t.client_id +
                        "'");
        }
        txns_by_row[it->second].push_back(&t);
    }
    for (auto& list : txns_by_row) {
        std::stable_sort(list.begin(), list.end(),
                         [](const auto* a, const auto* b) { return a->order_date < b->order_date; });
    }

    const bool proportions = options.account_encoding == AccountEncoding::Proportions;
    m.numeric_names = kNumericNames;
    if (proportions) {
        for (const auto& type : kAccountShareTypes) m.numeric_names.push_back("share_" + type);
    }
    m.categorical_names = kCategoricalNames;
    if (proportions) m.categorical_names.pop_back();  // account_type becomes numeric shares

    const size_t p = m.numeric_names.size();
    const size_t q = m.categorical_names.size();
    const size_t n = clients.size();
    m.numeric.assign(n * p, 0.0);
    std::vector<std::vector<std::string>> cat_values(n, std::vector<std::string>(q));

    const int window_span = options.snapshot - options.window_start;

    parallel_for(n, [&](size_t row) {
        const auto& rec = clients[order[row]];
        const auto& client_txns = txns_by_row[row];
        double* out = m.numeric.data() + row * p;
        const std::string& id = rec.client_id;

        out[0] = require_value(rec.age, id, "age");
        out[1] = require_value(rec.annual_income, id, "annual_income");
        out[2] = require_value(rec.investment_knowledge, id, "investment_knowledge");
        out[3] = require_value(rec.num_accounts, id, "num_accounts");

        std::vector<ingest::TransactionRecord> local;
        local.reserve(client_txns.size());
        for (const auto* t : client_txns) local.push_back(*t);

        if (local.empty()) {
            out[4] = window_span;  // recency convention for silent clients
            // Trade statistics stay zero.
        } else {
            out[4] = recency(local, options.snapshot);
            const FrequencyStats freq = frequency_stats(local, options.snapshot);
            out[5] = static_cast<double>(freq.trade_count);
            out[6] = freq.trades_per_day;
            out[7] = freq.avg_days_between;
            const MonetaryStats money = monetary_stats(local);
            out[8] = money.third_party.mean;
            out[9] = money.third_party.sd;
            out[10] = money.systematic.mean;
            out[11] = money.systematic.sd;
            out[12] = money.periodic.mean;
            out[13] = money.periodic.sd;
            out[14] = money.buy_min;
            out[15] = money.buy_max;
            out[16] = money.sell_min;
            out[17] = money.sell_max;
            out[18] = money.buy_total;
            out[19] = money.sell_total;
        }
        if (proportions) {
            const auto shares = account_shares(client_txns);
            for (size_t s = 0; s < shares.size(); ++s) out[20 + s] = shares[s];
        }

        auto& cats = cat_values[row];
        cats[0] = require_value(rec.gender, id, "gender");
        cats[1] = require_value(rec.residency, id, "residency");
        cats[2] = require_value(rec.marital_status, id, "marital_status");
        cats[3] = require_value(rec.retired, id, "retired") ? "yes" : "no";
        if (!proportions) cats[4] = modal_account_type(client_txns);
    });

    // Codes per categorical column, level tables sorted so code order is
    // lexicographic.
    m.category_levels.resize(q);
    m.categorical.assign(n * q, 0);
    for (size_t c = 0; c < q; ++c) {
        std::map<std::string, int32_t> codes;
        for (size_t row = 0; row < n; ++row) codes.emplace(cat_values[row][c], 0);
        int32_t next = 0;
        for (auto& [label, code] : codes) {
            code = next++;
            m.category_levels[c].push_back(label);
        }
        for (size_t row = 0; row < n; ++row) {
            m.categorical[row * q + c] = codes[cat_values[row][c]];
        }
    }

    // Column scaling; applied in place when standardization is on.
    m.scaling.standardized = options.standardize;
    m.scaling.snapshot = options.snapshot;
    m.scaling.window_start = options.window_start;
    m.scaling.account_encoding = options.account_encoding;
    m.scaling.columns.resize(p);
    for (size_t c = 0; c < p; ++c) {
        ExactSum sum;
        for (size_t row = 0; row < n; ++row) sum.add(m.numeric[row * p + c]);
        const double mean = n ? sum.value() / static_cast<double>(n) : 0.0;
        ExactSum sq;
        for (size_t row = 0; row < n; ++row) {
            const double d = m.numeric[row * p + c] - mean;
            sq.add(d * d);
        }
        const double sd = n ? std::sqrt(sq.value() / static_cast<double>(n)) : 0.0;
        m.scaling.columns[c] = {mean, sd};
        if (options.standardize) {
            for (size_t row = 0; row < n; ++row) {
                double& v = m.numeric[row * p + c];
                v = sd > 0.0 ? (v - mean) / sd : 0.0;
            }
        }
    }
    return m;
}

double destandardize(const FeatureMatrix& m, size_t col, double value) {
    if (!m.scaling.standardized) return value;
    const auto& s = m.scaling.columns.at(col);
    return s.sd > 0.0 ? value * s.sd + s.mean : s.mean;
}

void save_matrix(const FeatureMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_matrix: cannot write '" + path + "'");
    out << "# invseg feature matrix v1\n";
    out << "client_id";
    for (const auto& name : m.numeric_names) out << "\tnum:" << name;
    for (const auto& name : m.categorical_names) out << "\tcat:" << name;
    out << '\n';
    const size_t p = m.p();
    const size_t q = m.q();
    for (size_t row = 0; row < m.n(); ++row) {
        out << m.client_ids[row];
        for (size_t c = 0; c < p; ++c) out << '\t' << format_double(m.numeric[row * p + c]);
        for (size_t c = 0; c < q; ++c) {
            out << '\t' << m.categorical_label(c, m.categorical[row * q + c]);
        }
        out << '\n';
    }
    out.close();

    nlohmann::json meta;
    meta["format"] = "invseg-feature-matrix-meta";
    meta["version"] = 1;
    meta["snapshot"] = format_date(m.scaling.snapshot);
    meta["window_start"] = format_date(m.scaling.window_start);
    meta["standardized"] = m.scaling.standardized;
    meta["account_encoding"] =
        m.scaling.account_encoding == AccountEncoding::Modal ? "modal" : "proportions";
    nlohmann::json cols = nlohmann::json::array();
    for (size_t c = 0; c < p; ++c) {
        cols.push_back({{"name", m.numeric_names[c]},
                        {"mean", m.scaling.columns[c].mean},
                        {"sd", m.scaling.columns[c].sd}});
    }
    meta["numeric_columns"] = cols;
    std::ofstream meta_out(path + ".meta.json");
    if (!meta_out) throw Error("save_matrix: cannot write '" + path + ".meta.json'");
    meta_out << meta.dump(2) << '\n';
}

FeatureMatrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_matrix: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("# invseg feature matrix v1", 0) != 0) {
        throw Error("load_matrix: '" + path + "' is not a v1 feature matrix file");
    }
    if (!std::getline(in, line)) throw Error("load_matrix: missing header row");

    FeatureMatrix m;
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) header.push_back(cell);
    }
    if (header.empty() || header[0] != "client_id") {
        throw Error("load_matrix: header must start with client_id");
    }
    for (size_t i = 1; i < header.size(); ++i) {
        if (header[i].rfind("num:", 0) == 0) {
            m.numeric_names.push_back(header[i].substr(4));
        } else if (header[i].rfind("cat:", 0) == 0) {
            m.categorical_names.push_back(header[i].substr(4));
        } else {
            throw Error("load_matrix: column '" + header[i] + "' lacks a num:/cat: prefix");
        }
    }
    const size_t p = m.numeric_names.size();
    const size_t q = m.categorical_names.size();

    std::vector<std::vector<std::string>> cat_values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, '\t')) cells.push_back(cell);
        if (cells.size() != 1 + p + q) {
            throw Error("load_matrix: row with wrong cell count in '" + path + "'");
        }
        m.client_ids.push_back(cells[0]);
        for (size_t c = 0; c < p; ++c) m.numeric.push_back(std::stod(cells[1 + c]));
        cat_values.emplace_back(cells.begin() + 1 + p, cells.end());
    }

    const size_t n = m.client_ids.size();
    m.category_levels.resize(q);
    m.categorical.assign(n * q, 0);
    for (size_t c = 0; c < q; ++c) {
        std::map<std::string, int32_t> codes;
        for (size_t row = 0; row < n; ++row) codes.emplace(cat_values[row][c], 0);
        int32_t next = 0;
        for (auto& [label, code] : codes) {
            code = next++;
            m.category_levels[c].push_back(label);
        }
        for (size_t row = 0; row < n; ++row) {
            m.categorical[row * q + c] = codes[cat_values[row][c]];
        }
    }

    std::ifstream meta_in(path + ".meta.json");
    if (!meta_in) throw Error("load_matrix: missing sidecar '" + path + ".meta.json'");
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    const auto snapshot = parse_date(meta.at("snapshot").get<std::string>());
    const auto window_start = parse_date(meta.at("window_start").get<std::string>());
    if (!snapshot || !window_start) throw Error("load_matrix: bad dates in sidecar");
    m.scaling.snapshot = *snapshot;
    m.scaling.window_start = *window_start;
    m.scaling.standardized = meta.at("standardized").get<bool>();
    m.scaling.account_encoding = meta.at("account_encoding").get<std::string>() == "modal"
                                     ? AccountEncoding::Modal
                                     : AccountEncoding::Proportions;
    for (const auto& col : meta.at("numeric_columns")) {
        m.scaling.columns.push_back(
            {col.at("mean").get<double>(), col.at("sd").get<double>()});
    }
    if (m.scaling.columns.size() != p) {
        throw Error("load_matrix: sidecar column count mismatch");
    }
    return m;
}

}  // namespace invseg::features
