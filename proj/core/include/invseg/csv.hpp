#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace invseg {

// Raw delimiter-separated table: header row plus string cells. Every row has
// exactly column_names.size() cells; shorter/longer physical rows are reported
// by the reader instead of being silently dropped.
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<std::string>> rows;

    size_t column_index(const std::string& name) const;  // npos when absent
    static constexpr size_t npos = static_cast<size_t>(-1);
};

struct TableReadResult {
    RawTable table;
    // 1-based data row numbers (header excluded) that had the wrong cell count.
    std::vector<std::pair<size_t, std::string>> bad_rows;
};

// Missing-marker set: empty string, "*", "unknown" (case-insensitive, trimmed).
bool is_missing_marker(const std::string& cell);

std::string trim(const std::string& s);
std::string to_lower(const std::string& s);

// Canonical form for category/trade-type matching: lower-cased, runs of
// non-alphanumeric characters collapsed to single spaces.
std::string canonical_token(const std::string& s);

// Header row required; duplicate or empty header names are fatal.
// Quoted fields with doubled inner quotes are understood.
TableReadResult read_table(std::istream& in, char delimiter = ',');
TableReadResult read_table_file(const std::string& path, char delimiter = ',');

void write_table(std::ostream& out, const RawTable& table, char delimiter = ',');
void write_table_file(const std::string& path, const RawTable& table, char delimiter = ',');

}  // namespace invseg
