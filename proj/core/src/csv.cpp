#include "invseg/csv.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "invseg/error.hpp"

namespace invseg {

size_t RawTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < column_names.size(); ++i) {
        if (column_names[i] == name) return i;
    }
    return npos;
}

std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string to_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string canonical_token(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char raw : s) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

bool is_missing_marker(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty() || t == "*") return true;
    return to_lower(t) == "unknown";
}

namespace {

// One logical CSV row; quoted fields may contain the delimiter and doubled quotes.
std::vector<std::string> split_row(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    return cells;
}

bool needs_quoting(const std::string& cell, char delimiter) {
    return cell.find(delimiter) != std::string::npos ||
           cell.find('"') != std::string::npos ||
           cell.find('\n') != std::string::npos;
}

}  // namespace

TableReadResult read_table(std::istream& in, char delimiter) {
    TableReadResult result;
    std::string line;
    if (!std::getline(in, line)) throw Error("csv: empty input, header row required");
    result.table.column_names = split_row(line, delimiter);
    std::set<std::string> seen;
    for (const auto& name : result.table.column_names) {
        const std::string t = trim(name);
        if (t.empty()) throw Error("csv: malformed header, empty column name");
        if (!seen.insert(t).second) throw Error("csv: malformed header, duplicate column '" + t + "'");
    }
    const size_t width = result.table.column_names.size();
    size_t row_number = 0;
    while (std::getline(in, line)) {
        ++row_number;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto cells = split_row(line, delimiter);
        if (cells.size() != width) {
            std::ostringstream msg;
            msg << "expected " << width << " cells, found " << cells.size();
            result.bad_rows.emplace_back(row_number, msg.str());
            continue;
        }
        result.table.rows.push_back(std::move(cells));
    }
    return result;
}

TableReadResult read_table_file(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw Error("csv: cannot open '" + path + "'");
    return read_table(in, delimiter);
}

void write_table(std::ostream& out, const RawTable& table, char delimiter) {
    auto emit_row = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out << delimiter;
            if (needs_quoting(cells[i], delimiter)) {
                out << '"';
                for (char c : cells[i]) {
                    if (c == '"') out << "\"\"";
                    else out << c;
                }
                out << '"';
            } else {
                out << cells[i];
            }
        }
        out << '\n';
    };
    emit_row(table.column_names);
    for (const auto& row : table.rows) emit_row(row);
}

void write_table_file(const std::string& path, const RawTable& table, char delimiter) {
    std::ofstream out(path);
    if (!out) throw Error("csv: cannot write '" + path + "'");
    write_table(out, table, delimiter);
}

}  // namespace invseg
