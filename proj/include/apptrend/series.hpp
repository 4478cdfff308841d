// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apptrend/dataset.hpp"

namespace apptrend {

/// Usage curve normalized into [0,1] and resampled to a fixed length so
/// series with different life spans compare pointwise. max_raw keeps the
/// pre-normalization peak distinct-user count; missing_mask marks samples
/// that were interpolated over gap days.
struct NormalizedSeries {
    std::optional<std::string> app_id;
    std::vector<double> values;
    std::int32_t max_raw = 0;
    std::vector<bool> missing_mask;

    std::size_t size() const { return values.size(); }
};

/// Pointwise mean of a group of equal-length normalized series.
struct ConsensusSeries {
    std::vector<double> values;
    std::size_t member_count = 0;

    std::size_t size() const { return values.size(); }
};

/// App series minus its group consensus; values in [-1,1]. The slope of
/// this curve is the over/under-performance signal.
struct RelativeSeries {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

struct AlignResult {
    int shift = 0;
    double stage = 0.0;
    double residual = 0.0;
};

namespace detail {

/// Linear resample of `src` onto `target_len` evenly spaced positions over
/// the same domain. Single-point sources extend as a constant.
inline std::vector<double> resample_linear(std::span<const double> src, std::size_t target_len) {
    std::vector<double> out(target_len);
    if (src.size() == 1) {
        std::fill(out.begin(), out.end(), src[0]);
        return out;
    }
    const double scale = static_cast<double>(src.size() - 1) / static_cast<double>(target_len - 1);
    for (std::size_t k = 0; k < target_len; ++k) {
        const double t = static_cast<double>(k) * scale;
        const std::size_t i = std::min(static_cast<std::size_t>(t), src.size() - 2);
        const double frac = t - static_cast<double>(i);
        out[k] = src[i] + frac * (src[i + 1] - src[i]);
    }
    return out;
}

} // namespace detail

/// Normalize a daily usage series: zero-count days are gaps filled by
/// linear interpolation (boundary gaps take the nearest observed value),
/// values are divided by the series maximum, and the time axis is
/// resampled to exactly L points. The resampled curve is rescaled by its
/// own maximum so one sample is exactly 1.0 even when resampling skips
/// the original peak.
inline NormalizedSeries normalize(const DailySeries& raw, std::size_t L = 100) {
    if (L < 2) throw std::invalid_argument("normalize: L must be >= 2");
    const std::size_t n = raw.counts.size();
    if (n == 0) throw std::invalid_argument("no usage");

    std::int32_t max_raw = 0;
    for (auto c : raw.counts) max_raw = std::max(max_raw, c);
    if (max_raw <= 0) throw std::invalid_argument("no usage");

    // Divide before interpolating: the two orders agree in exact
    // arithmetic, but dividing first keeps the output bit-identical
    // under integer scaling of the raw counts.
    std::vector<double> filled(n);
    std::vector<bool> missing(n);
    for (std::size_t i = 0; i < n; ++i) {
        filled[i] = static_cast<double>(raw.counts[i]) / static_cast<double>(max_raw);
        missing[i] = raw.counts[i] == 0;
    }

    // Fill gaps: interior gaps linearly between observed neighbors,
    // boundary gaps with the nearest observed value.
    std::size_t i = 0;
    while (i < n) {
        if (!missing[i]) {
            ++i;
            continue;
        }
        std::size_t gap_end = i;
        while (gap_end < n && missing[gap_end]) ++gap_end;
        const bool has_left = i > 0;
        const bool has_right = gap_end < n;
        for (std::size_t j = i; j < gap_end; ++j) {
            if (has_left && has_right) {
                const double t = static_cast<double>(j - (i - 1)) / static_cast<double>(gap_end - (i - 1));
                filled[j] = filled[i - 1] + t * (filled[gap_end] - filled[i - 1]);
            } else if (has_left) {
                filled[j] = filled[i - 1];
            } else {
                filled[j] = filled[gap_end];
            }
        }
        i = gap_end;
    }

    NormalizedSeries out;
    if (!raw.app_id.empty()) out.app_id = raw.app_id;
    out.max_raw = max_raw;
    out.values = detail::resample_linear(filled, L);

    double vmax = 0.0;
    for (double v : out.values) vmax = std::max(vmax, v);
    for (auto& v : out.values) v /= vmax;

    out.missing_mask.assign(L, false);
    if (n > 1) {
        const double scale = static_cast<double>(n - 1) / static_cast<double>(L - 1);
        for (std::size_t k = 0; k < L; ++k) {
            const double t = static_cast<double>(k) * scale;
            const std::size_t lo = std::min(static_cast<std::size_t>(t), n - 2);
            const double frac = t - static_cast<double>(lo);
            out.missing_mask[k] =
                (frac < 1.0 && missing[lo]) || (frac > 0.0 && missing[lo + 1]);
        }
    }
    return out;
}

/// Consensus pattern: pointwise mean over all members of a group.
inline ConsensusSeries consensus(std::span<const NormalizedSeries> group) {
    if (group.empty()) throw std::invalid_argument("consensus: empty group");
    const std::size_t len = group.front().size();
    for (const auto& s : group)
        if (s.size() != len) throw std::invalid_argument("consensus: mixed series lengths");

    ConsensusSeries out;
    out.member_count = group.size();
    out.values.assign(len, 0.0);
    for (const auto& s : group)
        for (std::size_t k = 0; k < len; ++k) out.values[k] += s.values[k];
    for (auto& v : out.values) v /= static_cast<double>(group.size());
    return out;
}

/// App performance relative to its category: pointwise app - consensus.
inline RelativeSeries relative_performance(const NormalizedSeries& app,
                                           const ConsensusSeries& cat) {
    if (app.size() != cat.size())
        throw std::invalid_argument("relative_performance: length mismatch");
    RelativeSeries out;
    out.values.resize(app.size());
    for (std::size_t k = 0; k < app.size(); ++k) out.values[k] = app.values[k] - cat.values[k];
    return out;
}

/// Locate an app inside a prototype lifecycle by exhaustive shift search:
/// the prototype is advanced by s samples (holding its final value past
/// the end) and compared by mean squared error. Ties prefer the smallest
/// shift; stage maps s=0 to 0.5 and grows toward 1 as the app sits deeper
/// in the lifecycle.
inline AlignResult align_stage(const NormalizedSeries& app, const NormalizedSeries& proto) {
    const std::size_t len = app.size();
    if (len == 0 || proto.size() == 0) throw std::invalid_argument("align_stage: empty series");
    if (proto.size() != len) throw std::invalid_argument("align_stage: length mismatch");

    AlignResult best;
    double best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < len; ++s) {
        double mse = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const std::size_t pi = std::min(k + s, len - 1);
            const double d = app.values[k] - proto.values[pi];
            mse += d * d;
        }
        mse /= static_cast<double>(len);
        if (mse < best_mse) {
            best_mse = mse;
            best.shift = static_cast<int>(s);
        }
    }
    best.residual = best_mse;
    best.stage = (static_cast<double>(best.shift) + static_cast<double>(len)) /
                 (2.0 * static_cast<double>(len));
    return best;
}

/// Indices of significant peaks after the warmup prefix. A peak is a
/// strict local maximum whose topographic prominence (height above the
/// higher of the two flanking minima, scanning until a taller point or
/// the boundary) reaches min_prominence. Defaults: a quarter of the
/// normalized range, past the initial-slide warmup of 5 samples.
inline std::vector<std::size_t> detect_peaks(std::span<const double> series,
                                             double min_prominence = 0.25,
                                             std::size_t warmup = 5) {
    if (!(min_prominence > 0.0))
        throw std::invalid_argument("detect_peaks: min_prominence must be > 0");

    std::vector<std::size_t> peaks;
    if (series.size() < 3) return peaks;
    for (std::size_t i = std::max<std::size_t>(warmup + 1, 1); i + 1 < series.size(); ++i) {
        if (!(series[i] > series[i - 1] && series[i] > series[i + 1])) continue;

        double left_min = series[i];
        for (std::size_t j = i; j-- > 0;) {
            if (series[j] > series[i]) break;
            left_min = std::min(left_min, series[j]);
        }
        double right_min = series[i];
        for (std::size_t j = i + 1; j < series.size(); ++j) {
            if (series[j] > series[i]) break;
            right_min = std::min(right_min, series[j]);
        }
        if (series[i] - std::max(left_min, right_min) >= min_prominence) peaks.push_back(i);
    }
    return peaks;
}

} // namespace apptrend
