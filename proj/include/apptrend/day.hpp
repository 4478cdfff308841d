// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace apptrend {

/// Calendar day, stored as days since 1970-01-01 (UTC, proleptic Gregorian).
/// Cheap to copy and compare; arithmetic in whole days.
struct Day {
    std::int32_t value = 0;

    constexpr auto operator<=>(const Day&) const = default;

    constexpr Day operator+(std::int32_t d) const { return Day{value + d}; }
    constexpr Day operator-(std::int32_t d) const { return Day{value - d}; }
    constexpr std::int32_t operator-(Day other) const { return value - other.value; }
};

namespace detail {

// Civil-calendar conversion, valid for the full int32 day range.
constexpr std::int32_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int32_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int32_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

constexpr bool is_leap(int y) {
    return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

constexpr unsigned days_in_month(int y, unsigned m) {
    constexpr unsigned lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[m - 1];
}

} // namespace detail

constexpr Day make_day(int year, unsigned month, unsigned dom) {
    return Day{detail::days_from_civil(year, month, dom)};
}

/// Parse an ISO-8601 date. A trailing time-of-day part ("T.." or " ..")
/// is accepted and discarded; analysis is day-granular.
inline Day parse_day(std::string_view text) {
    if (text.size() < 10 || text[4] != '-' || text[7] != '-')
        throw std::invalid_argument("invalid date '" + std::string(text) + "': expected YYYY-MM-DD");
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ')
        throw std::invalid_argument("invalid date '" + std::string(text) + "': trailing characters");
    auto digits = [&](std::size_t pos, std::size_t n) {
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            char c = text[i];
            if (c < '0' || c > '9')
                throw std::invalid_argument("invalid date '" + std::string(text) + "': non-digit");
            v = v * 10 + (c - '0');
        }
        return v;
    };
    int y = digits(0, 4);
    int m = digits(5, 2);
    int d = digits(8, 2);
    if (m < 1 || m > 12)
        throw std::invalid_argument("invalid date '" + std::string(text) + "': month out of range");
    if (d < 1 || static_cast<unsigned>(d) > detail::days_in_month(y, static_cast<unsigned>(m)))
        throw std::invalid_argument("invalid date '" + std::string(text) + "': day out of range");
    return make_day(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

inline std::string format_day(Day day) {
    int y;
    unsigned m, d;
    detail::civil_from_days(day.value, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

} // namespace apptrend
