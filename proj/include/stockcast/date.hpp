#pragma once

#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stockcast {

// Calendar date, ISO-8601 (YYYY-MM-DD). Ordering is lexicographic over
// (year, month, day).
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;
};

inline bool is_leap_year(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

inline int days_in_month(int year, int month) {
    static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12) return 0;
    if (month == 2 && is_leap_year(year)) return 29;
    return lengths[month - 1];
}

inline bool is_valid(const Date& d) {
    return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(d.year, d.month);
}

inline std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

// Parses "YYYY-MM-DD". Throws std::invalid_argument on anything else.
inline Date parse_date(std::string_view text) {
    auto fail = [&] {
        throw std::invalid_argument("invalid ISO-8601 date: '" + std::string(text) + "'");
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
    auto digits = [&](int from, int count) {
        int value = 0;
        for (int i = from; i < from + count; ++i) {
            char c = text[i];
            if (c < '0' || c > '9') fail();
            value = value * 10 + (c - '0');
        }
        return value;
    };
    Date d{digits(0, 4), digits(5, 2), digits(8, 2)};
    if (!is_valid(d)) fail();
    return d;
}

// Monday..Friday stepping, used by synthetic data generators.
inline Date next_weekday(Date d) {
    auto advance = [](Date x) {
        ++x.day;
        if (x.day > days_in_month(x.year, x.month)) {
            x.day = 1;
            ++x.month;
            if (x.month > 12) {
                x.month = 1;
                ++x.year;
            }
        }
        return x;
    };
    d = advance(d);
    // Zeller-style day-of-week; 0 = Saturday.
    auto day_of_week = [](const Date& x) {
        int y = x.year, m = x.month;
        if (m < 3) {
            m += 12;
            --y;
        }
        int k = y % 100, j = y / 100;
        return (x.day + 13 * (m + 1) / 5 + k + k / 4 + j / 4 + 5 * j) % 7;
    };
    while (day_of_week(d) == 0 || day_of_week(d) == 1) d = advance(d);
    return d;
}

}  // namespace stockcast
