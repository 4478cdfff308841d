// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "apptrend/dataset.hpp"

namespace apptrend {

/// First and last observed day of one user on one app.
struct UserSpan {
    std::string user_id;
    std::string app_id;
    Day first_day{};
    Day last_day{};

    std::int32_t length() const { return last_day - first_day; }
};

/// Survival-style retention: rates[d] = share of the cohort whose usage
/// span covers at least d days. Non-increasing in d by construction.
struct RetentionCurve {
    std::string app_id;
    std::size_t cohort_size = 0;
    std::vector<double> rates; // index = day offset d; empty when cohort_size == 0

    double rate(std::size_t d) const { return rates.at(d); }
};

/// One span per distinct user of the app, sorted by user id.
inline std::vector<UserSpan> user_spans(const Dataset& ds, std::string_view app) {
    std::uint32_t idx = ds.require_app(app);
    auto rows = ds.rows_for_app(idx);
    std::unordered_map<std::uint32_t, std::pair<Day, Day>> spans;
    spans.reserve(64);
    for (const auto& r : rows) {
        auto [it, inserted] = spans.try_emplace(r.user, r.day, r.day);
        if (!inserted) {
            it->second.first = std::min(it->second.first, r.day);
            it->second.second = std::max(it->second.second, r.day);
        }
    }
    std::vector<UserSpan> out;
    out.reserve(spans.size());
    for (const auto& [user, mm] : spans)
        out.push_back({ds.user_name(user), std::string(app), mm.first, mm.second});
    std::sort(out.begin(), out.end(),
              [](const UserSpan& a, const UserSpan& b) { return a.user_id < b.user_id; });
    return out;
}

/// Retention curve over offsets d = 0..max_d. Users still active within
/// quiet_window days of the window end are excluded from the cohort so
/// truncated spans do not bias the rates.
inline RetentionCurve retention_curve(const Dataset& ds, std::string_view app, int max_d,
                                      int quiet_window = 7) {
    if (max_d < 0) throw std::invalid_argument("max_d must be >= 0");
    if (quiet_window < 0) throw std::invalid_argument("quiet_window must be >= 0");

    RetentionCurve curve;
    curve.app_id = std::string(app);

    const Day cutoff = ds.window_end() - quiet_window;
    // Histogram of span lengths for cohort members, then suffix-sum.
    std::vector<std::size_t> by_length(static_cast<std::size_t>(max_d) + 2, 0);
    for (const auto& span : user_spans(ds, app)) {
        if (span.last_day > cutoff) continue;
        ++curve.cohort_size;
        std::size_t len = static_cast<std::size_t>(span.length());
        ++by_length[std::min(len, by_length.size() - 1)];
    }
    if (curve.cohort_size == 0) return curve;

    curve.rates.resize(static_cast<std::size_t>(max_d) + 1);
    std::size_t surviving = 0;
    for (std::size_t d = by_length.size(); d-- > 0;) {
        surviving += by_length[d];
        if (d < curve.rates.size())
            curve.rates[d] = static_cast<double>(surviving) / static_cast<double>(curve.cohort_size);
    }
    return curve;
}

/// Empirical CDF of rate(d) across apps with cohort_size >= min_users,
/// as sorted (rate, cumulative fraction) steps merged on equal rates.
inline std::vector<std::pair<double, double>> retention_cdf(std::span<const RetentionCurve> curves,
                                                            std::size_t d, std::size_t min_users) {
    std::vector<double> rates;
    for (const auto& c : curves) {
        if (c.cohort_size < min_users || c.cohort_size == 0) continue;
        if (d >= c.rates.size()) continue;
        rates.push_back(c.rates[d]);
    }
    if (rates.empty()) throw std::runtime_error("empty population");
    std::sort(rates.begin(), rates.end());

    std::vector<std::pair<double, double>> cdf;
    const double n = static_cast<double>(rates.size());
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!cdf.empty() && cdf.back().first == rates[i])
            cdf.back().second = static_cast<double>(i + 1) / n;
        else
            cdf.emplace_back(rates[i], static_cast<double>(i + 1) / n);
    }
    return cdf;
}

namespace detail {

// Fractional ranks with average ranks for ties.
inline std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

/// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 observations");

    auto rx = detail::average_ranks(x);
    auto ry = detail::average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman: degenerate ranks");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace apptrend
