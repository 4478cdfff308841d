// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "apptrend/dataset.hpp"
#include "apptrend/rng.hpp"
#include "apptrend/series.hpp"

namespace apptrend {

enum class TrendKind { Hot, Flop, Dominant, Marginal, Unclassified };

inline std::string_view to_string(TrendKind k) {
    switch (k) {
        case TrendKind::Hot: return "Hot";
        case TrendKind::Flop: return "Flop";
        case TrendKind::Dominant: return "Dominant";
        case TrendKind::Marginal: return "Marginal";
        case TrendKind::Unclassified: return "Unclassified";
    }
    return "?";
}

inline TrendKind trend_kind_from_string(std::string_view s) {
    if (s == "Hot") return TrendKind::Hot;
    if (s == "Flop") return TrendKind::Flop;
    if (s == "Dominant") return TrendKind::Dominant;
    if (s == "Marginal") return TrendKind::Marginal;
    if (s == "Unclassified") return TrendKind::Unclassified;
    throw std::invalid_argument("unknown trend kind: " + std::string(s));
}

/// Shape descriptor of a normalized series. All four coordinates are
/// bounded by construction, so unscaled Euclidean distance between
/// vectors is meaningful.
struct FeatureVector {
    double auc = 0.0;      // trapezoidal mean over the unit domain, in [0,1]
    double peak = 0.0;     // first argmax position / (L-1), in [0,1]
    double slope = 0.0;    // least-squares line slope over the unit domain, clamped to [-1,1]
    double variance = 0.0; // population variance, in [0,0.25] for values in [0,1]

    double distance(const FeatureVector& o) const {
        const double da = auc - o.auc;
        const double dp = peak - o.peak;
        const double ds = slope - o.slope;
        const double dv = variance - o.variance;
        return std::sqrt(da * da + dp * dp + ds * ds + dv * dv);
    }
};

struct TrendPrototype {
    TrendKind kind = TrendKind::Unclassified;
    NormalizedSeries series;
    FeatureVector features;
};

struct TrendClassification {
    std::string app_id;
    TrendKind kind = TrendKind::Unclassified;
    double distance = 0.0;
};

inline FeatureVector extract_features(const NormalizedSeries& s) {
    const std::size_t n = s.size();
    if (n < 2) throw std::invalid_argument("extract_features: need at least 2 samples");
    const auto& v = s.values;

    FeatureVector f;

    double area = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) area += (v[i] + v[i + 1]) / 2.0;
    f.auc = area / static_cast<double>(n - 1);

    std::size_t argmax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[argmax]) argmax = i;
    f.peak = static_cast<double>(argmax) / static_cast<double>(n - 1);

    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);

    // least squares over x_i = i/(n-1)
    const double xmean = 0.5;
    double sxx = 0.0, sxy = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) / static_cast<double>(n - 1) - xmean;
        const double dy = v[i] - mean;
        sxx += dx * dx;
        sxy += dx * dy;
        var += dy * dy;
    }
    f.slope = std::clamp(sxy / sxx, -1.0, 1.0);
    f.variance = var / static_cast<double>(n);
    return f;
}

namespace detail {

inline TrendPrototype make_prototype(TrendKind kind, std::vector<double> values) {
    TrendPrototype p;
    p.kind = kind;
    p.series.values = std::move(values);
    p.series.max_raw = 1;
    p.series.missing_mask.assign(p.series.values.size(), false);
    p.features = extract_features(p.series);
    return p;
}

} // namespace detail

/// The four canonical trend patterns at resample length L.
///   Hot      — linear ramp 0 -> 1.
///   Flop     — ramp to 1 over the first 10% of the domain, then
///              exponential decay reaching 0.05 at the end.
///   Dominant — high stable usage: ripple of amplitude 0.05 around 0.95
///              (period L/10 samples, crests at 1.0), so its variance
///              separates it from Marginal.
///   Marginal — constant 1.0, the shape any barely-used app collapses to
///              after normalization and gap interpolation.
inline std::vector<TrendPrototype> prototypes(std::size_t L) {
    if (L < 2) throw std::invalid_argument("prototypes: L must be >= 2");
    std::vector<TrendPrototype> out;
    out.reserve(4);

    std::vector<double> hot(L);
    for (std::size_t i = 0; i < L; ++i)
        hot[i] = static_cast<double>(i) / static_cast<double>(L - 1);
    out.push_back(detail::make_prototype(TrendKind::Hot, std::move(hot)));

    const std::size_t peak_idx =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(L - 1))));
    const double x_peak = static_cast<double>(peak_idx) / static_cast<double>(L - 1);
    const double decay = x_peak < 1.0 ? std::log(1.0 / 0.05) / (1.0 - x_peak) : 0.0;
    std::vector<double> flop(L);
    for (std::size_t i = 0; i < L; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(L - 1);
        flop[i] = i <= peak_idx ? static_cast<double>(i) / static_cast<double>(peak_idx)
                                : std::exp(-decay * (x - x_peak));
    }
    out.push_back(detail::make_prototype(TrendKind::Flop, std::move(flop)));

    const double period = static_cast<double>(L) / 10.0;
    std::vector<double> dominant(L);
    for (std::size_t i = 0; i < L; ++i)
        dominant[i] = 0.95 + 0.05 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / period);
    out.push_back(detail::make_prototype(TrendKind::Dominant, std::move(dominant)));

    out.push_back(detail::make_prototype(TrendKind::Marginal, std::vector<double>(L, 1.0)));

    // The feature space must keep rising and collapsing shapes far apart,
    // or the 0.4 threshold is meaningless.
    assert(out[0].features.distance(out[1].features) > 0.8);
    return out;
}

/// Prototype config file: one series per line, kind name first, then the
/// comma-separated sample values. All four kinds must be present.
inline std::vector<TrendPrototype> load_prototypes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prototypes file: " + path);
    std::vector<TrendPrototype> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t len = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() < 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected kind followed by at least 2 values");
        TrendKind kind = trend_kind_from_string(cells[0]);
        std::vector<double> values;
        values.reserve(cells.size() - 1);
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                values.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": invalid value '" + cells[i] + "'");
            }
            if (values.back() < 0.0 || values.back() > 1.0)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": value outside [0,1]");
        }
        if (len == 0) len = values.size();
        if (values.size() != len)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": mixed series lengths");
        out.push_back(detail::make_prototype(kind, std::move(values)));
    }
    for (TrendKind k :
         {TrendKind::Hot, TrendKind::Flop, TrendKind::Dominant, TrendKind::Marginal}) {
        if (std::none_of(out.begin(), out.end(),
                         [&](const TrendPrototype& p) { return p.kind == k; }))
            throw std::runtime_error(path + ": missing prototype for kind '" +
                                     std::string(to_string(k)) + "'");
    }
    return out;
}

inline constexpr double kDefaultThreshold = 0.4;
inline constexpr int kDefaultMarginalGate = 5;

namespace detail {

inline const TrendPrototype& find_prototype(std::span<const TrendPrototype> protos,
                                            TrendKind kind) {
    for (const auto& p : protos)
        if (p.kind == kind) return p;
    throw std::invalid_argument("prototype set lacks kind '" + std::string(to_string(kind)) + "'");
}

} // namespace detail

/// Classify one app series against the prototype patterns. Apps that never
/// exceed the marginal gate in raw daily users are Marginal regardless of
/// shape; everything else is matched to Hot/Flop/Dominant by Euclidean
/// feature distance and left Unclassified above the threshold. Ties break
/// in the fixed order Hot < Flop < Dominant.
inline TrendClassification classify(const NormalizedSeries& s, std::int64_t max_raw_users,
                                    std::span<const TrendPrototype> protos,
                                    double threshold = kDefaultThreshold,
                                    int marginal_gate = kDefaultMarginalGate) {
    if (!(threshold > 0.0)) throw std::invalid_argument("classify: threshold must be > 0");
    TrendClassification out;
    out.app_id = s.app_id.value_or("");

    const FeatureVector f = extract_features(s);
    if (max_raw_users < marginal_gate) {
        out.kind = TrendKind::Marginal;
        out.distance = f.distance(detail::find_prototype(protos, TrendKind::Marginal).features);
        return out;
    }

    out.distance = std::numeric_limits<double>::infinity();
    out.kind = TrendKind::Unclassified;
    TrendKind best = TrendKind::Unclassified;
    for (TrendKind k : {TrendKind::Hot, TrendKind::Flop, TrendKind::Dominant}) {
        const double d = f.distance(detail::find_prototype(protos, k).features);
        if (d < out.distance) {
            out.distance = d;
            best = k;
        }
    }
    if (out.distance <= threshold) out.kind = best;
    return out;
}

inline TrendClassification classify(const NormalizedSeries& s, std::int64_t max_raw_users,
                                    double threshold = kDefaultThreshold,
                                    int marginal_gate = kDefaultMarginalGate) {
    auto protos = prototypes(s.size());
    return classify(s, max_raw_users, protos, threshold, marginal_gate);
}

/// Result of one k-means run (or the best of several).
struct ClusterResult {
    int k = 0;
    std::vector<FeatureVector> centroids;
    std::vector<int> assignment; // aligned with the input point order
    double sse = 0.0;
    std::vector<double> iteration_sse; // SSE after each assignment pass
};

namespace detail {

inline double sse_of(std::span<const FeatureVector> points, const ClusterResult& r) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = points[i].distance(r.centroids[static_cast<std::size_t>(r.assignment[i])]);
        total += d * d;
    }
    return total;
}

} // namespace detail

/// One Lloyd run from explicit initial centroids. Stops when assignments
/// stabilize or after max_iters. An emptied cluster is re-seeded with the
/// point farthest from its current centroid.
inline ClusterResult kmeans_run(std::span<const FeatureVector> points,
                                std::vector<FeatureVector> init_centroids, int max_iters = 300) {
    ClusterResult r;
    r.k = static_cast<int>(init_centroids.size());
    r.centroids = std::move(init_centroids);
    r.assignment.assign(points.size(), -1);

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            int best = 0;
            double best_d = points[i].distance(r.centroids[0]);
            for (int c = 1; c < r.k; ++c) {
                const double d = points[i].distance(r.centroids[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (r.assignment[i] != best) {
                r.assignment[i] = best;
                changed = true;
            }
        }

        // Re-seed empty clusters with the globally farthest point.
        std::vector<std::size_t> sizes(static_cast<std::size_t>(r.k), 0);
        for (int a : r.assignment) ++sizes[static_cast<std::size_t>(a)];
        for (int c = 0; c < r.k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            std::size_t farthest = points.size();
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (sizes[static_cast<std::size_t>(r.assignment[i])] <= 1) continue;
                const double d =
                    points[i].distance(r.centroids[static_cast<std::size_t>(r.assignment[i])]);
                if (d > far_d) {
                    far_d = d;
                    farthest = i;
                }
            }
            if (farthest == points.size()) continue;
            --sizes[static_cast<std::size_t>(r.assignment[farthest])];
            r.assignment[farthest] = c;
            sizes[static_cast<std::size_t>(c)] = 1;
            r.centroids[static_cast<std::size_t>(c)] = points[farthest];
            changed = true;
        }

        r.iteration_sse.push_back(detail::sse_of(points, r));

        if (!changed) break;

        std::vector<FeatureVector> sums(static_cast<std::size_t>(r.k));
        std::vector<std::size_t> counts(static_cast<std::size_t>(r.k), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto& s = sums[static_cast<std::size_t>(r.assignment[i])];
            s.auc += points[i].auc;
            s.peak += points[i].peak;
            s.slope += points[i].slope;
            s.variance += points[i].variance;
            ++counts[static_cast<std::size_t>(r.assignment[i])];
        }
        for (int c = 0; c < r.k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            const double n = static_cast<double>(counts[static_cast<std::size_t>(c)]);
            auto& ctr = r.centroids[static_cast<std::size_t>(c)];
            const auto& s = sums[static_cast<std::size_t>(c)];
            ctr = FeatureVector{s.auc / n, s.peak / n, s.slope / n, s.variance / n};
        }
    }

    r.sse = detail::sse_of(points, r);
    return r;
}

/// Best of `runs` seeded restarts of Lloyd's algorithm with random-point
/// initialization. Run r uses stream seed + r, so restarts could be
/// evaluated in parallel without changing the selected result.
inline ClusterResult kmeans(std::span<const FeatureVector> points, int k, int runs,
                            std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (runs < 1) throw std::invalid_argument("kmeans: runs must be >= 1");
    if (points.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("kmeans: fewer points than clusters");

    ClusterResult best;
    bool have_best = false;
    for (int run = 0; run < runs; ++run) {
        Rng rng(seed + static_cast<std::uint64_t>(run));
        // partial Fisher-Yates: k distinct point indices
        std::vector<std::size_t> idx(points.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<FeatureVector> init;
        init.reserve(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            const std::size_t j =
                static_cast<std::size_t>(c) +
                rng.next_below(points.size() - static_cast<std::size_t>(c));
            std::swap(idx[static_cast<std::size_t>(c)], idx[j]);
            init.push_back(points[idx[static_cast<std::size_t>(c)]]);
        }
        ClusterResult r = kmeans_run(points, std::move(init));
        if (!have_best || r.sse < best.sse) {
            best = std::move(r);
            have_best = true;
        }
    }
    return best;
}

/// Cluster sizes in descending order (ties by cluster index).
inline std::vector<std::pair<int, std::size_t>> cluster_size_distribution(const ClusterResult& r) {
    std::vector<std::pair<int, std::size_t>> sizes;
    for (int c = 0; c < r.k; ++c) sizes.emplace_back(c, 0);
    for (int a : r.assignment) ++sizes[static_cast<std::size_t>(a)].second;
    std::sort(sizes.begin(), sizes.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return sizes;
}

/// Per-category trend shares: Marginal share over all apps, Hot/Dominant/
/// Flop shares over the non-Marginal rest, plus distance statistics.
struct CategoryBreakdownRow {
    std::string category;
    std::size_t app_count = 0;
    std::size_t rest_count = 0; // non-Marginal apps (the percentage base)
    double marginal_pct = 0.0;
    double hot_pct = 0.0;
    double dominant_pct = 0.0;
    double flop_pct = 0.0;
    double mean_distance = 0.0;
    double distance_variance = 0.0;
};

inline std::vector<CategoryBreakdownRow> category_breakdown(
    std::span<const TrendClassification> classifications, const CategoryMap& cats) {
    if (classifications.empty()) throw std::invalid_argument("category_breakdown: empty input");

    struct Acc {
        std::size_t n = 0, marginal = 0, hot = 0, dominant = 0, flop = 0;
        double dist_sum = 0.0, dist_sq = 0.0;
    };
    std::map<std::string, Acc> by_cat;
    for (const auto& c : classifications) {
        const std::string* cat = cats.find(c.app_id);
        Acc& a = by_cat[cat ? *cat : "uncategorized"];
        ++a.n;
        switch (c.kind) {
            case TrendKind::Marginal: ++a.marginal; break;
            case TrendKind::Hot: ++a.hot; break;
            case TrendKind::Dominant: ++a.dominant; break;
            case TrendKind::Flop: ++a.flop; break;
            case TrendKind::Unclassified: break;
        }
        a.dist_sum += c.distance;
        a.dist_sq += c.distance * c.distance;
    }

    std::vector<CategoryBreakdownRow> rows;
    rows.reserve(by_cat.size());
    for (const auto& [cat, a] : by_cat) {
        CategoryBreakdownRow row;
        row.category = cat;
        row.app_count = a.n;
        row.rest_count = a.n - a.marginal;
        const double n = static_cast<double>(a.n);
        row.marginal_pct = 100.0 * static_cast<double>(a.marginal) / n;
        if (row.rest_count > 0) {
            const double rest = static_cast<double>(row.rest_count);
            row.hot_pct = 100.0 * static_cast<double>(a.hot) / rest;
            row.dominant_pct = 100.0 * static_cast<double>(a.dominant) / rest;
            row.flop_pct = 100.0 * static_cast<double>(a.flop) / rest;
        }
        row.mean_distance = a.dist_sum / n;
        row.distance_variance = a.dist_sq / n - row.mean_distance * row.mean_distance;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace apptrend
