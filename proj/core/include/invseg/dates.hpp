#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

namespace invseg {

// Calendar date stored as days since 1970-01-01 (civil-days algorithm).
struct Date {
    int32_t days = 0;

    friend auto operator<=>(const Date&, const Date&) = default;
    friend int32_t operator-(Date a, Date b) { return a.days - b.days; }
    Date operator+(int32_t d) const { return Date{days + d}; }
};

inline int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + static_cast<int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

inline CivilDate civil_from_days(int64_t z) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

inline Date make_date(int y, unsigned m, unsigned d) {
    return Date{static_cast<int32_t>(days_from_civil(y, m, d))};
}

// Strict "YYYY-MM-DD"; anything else is rejected.
inline std::optional<Date> parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
    }
    const int y = std::stoi(s.substr(0, 4));
    const unsigned m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    const Date date = make_date(y, m, d);
    const CivilDate back = civil_from_days(date.days);
    if (back.year != y || back.month != m || back.day != d) return std::nullopt;
    return date;
}

inline std::string format_date(Date date) {
    const CivilDate c = civil_from_days(date.days);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

// "YYYY-MM" month key for calendar-month grouping.
inline std::string format_month(Date date) {
    const CivilDate c = civil_from_days(date.days);
    char buf[12];
    std::snprintf(buf, sizeof buf, "%04d-%02u", c.year, c.month);
    return buf;
}

inline int month_index(Date date) {
    const CivilDate c = civil_from_days(date.days);
    return c.year * 12 + static_cast<int>(c.month) - 1;
}

}  // namespace invseg
