// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "apptrend/dataset.hpp"
#include "apptrend/rng.hpp"
#include "apptrend/trendfilter.hpp"

namespace apptrend {

/// Recipe for a synthetic dataset with known trend archetypes. Counts are
/// apps per archetype; noise_sigma perturbs the normalized target curves.
struct SynthSpec {
    int hot = 0;
    int flop = 0;
    int dominant = 0;
    int marginal = 0;
    int users = 1000;
    int days = 365;
    double noise_sigma = 0.0;
    std::uint64_t seed = 42;

    // Daily-user peak volumes. Marginal apps stay below the default
    // marginal gate; everything else draws from [peak_min, peak_max].
    int peak_min = 6;
    int peak_max = 28;
    int marginal_peak_max = 3;

    // Day-over-day retained user fraction per archetype.
    double churn_hot = 0.7;
    double churn_flop = 0.3;
    double churn_dominant = 0.9;
    double churn_marginal = 0.5;

    int categories = 8;
    Day start = make_day(2014, 1, 1);

    void validate() const {
        if (hot < 0 || flop < 0 || dominant < 0 || marginal < 0)
            throw std::invalid_argument("synth: archetype counts must be >= 0");
        if (hot + flop + dominant + marginal == 0)
            throw std::invalid_argument("synth: no apps requested");
        if (days < 2) throw std::invalid_argument("synth: days must be >= 2");
        if (users < 1) throw std::invalid_argument("synth: users must be >= 1");
        if (noise_sigma < 0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
        if (peak_min < 1 || peak_max < peak_min)
            throw std::invalid_argument("synth: invalid peak volume range");
        if (marginal_peak_max < 1)
            throw std::invalid_argument("synth: marginal_peak_max must be >= 1");
        if (categories < 1) throw std::invalid_argument("synth: categories must be >= 1");
    }
};

struct SynthResult {
    Dataset dataset;
    std::vector<std::pair<std::string, TrendKind>> truth; // app_id -> planted archetype
};

namespace detail {

inline std::string padded_id(const char* prefix, int i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%s%06d", prefix, i);
    return buf;
}

} // namespace detail

/// Generate a dataset whose apps follow the four prototype curves. Each
/// app draws a peak volume, its daily target is the archetype prototype
/// plus Gaussian noise clipped back into [0,1], and the rounded count is
/// realized as that many distinct users (a retained core of yesterday's
/// users plus fresh draws). Deterministic for a given spec.
inline SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const auto protos = prototypes(static_cast<std::size_t>(spec.days));
    const NormalizedSeries* shapes[4] = {nullptr, nullptr, nullptr, nullptr};
    const double churn[4] = {spec.churn_hot, spec.churn_flop, spec.churn_dominant,
                             spec.churn_marginal};
    const TrendKind kinds[4] = {TrendKind::Hot, TrendKind::Flop, TrendKind::Dominant,
                                TrendKind::Marginal};
    const int counts[4] = {spec.hot, spec.flop, spec.dominant, spec.marginal};
    for (int a = 0; a < 4; ++a) shapes[a] = &detail::find_prototype(protos, kinds[a]).series;

    DatasetBuilder builder;
    std::vector<std::uint32_t> user_idx(static_cast<std::size_t>(spec.users));
    for (int u = 0; u < spec.users; ++u)
        user_idx[static_cast<std::size_t>(u)] = builder.intern_user(detail::padded_id("u", u));

    SynthResult out;
    int app_serial = 0;
    std::vector<std::uint32_t> today, yesterday;
    std::unordered_set<std::uint32_t> today_set;

    for (int a = 0; a < 4; ++a) {
        for (int rep = 0; rep < counts[a]; ++rep) {
            const std::string app_id = detail::padded_id("app", app_serial);
            const std::uint32_t app = builder.intern_app(app_id);
            builder.set_category(app_id, "cat" + std::to_string(app_serial % spec.categories));
            out.truth.emplace_back(app_id, kinds[a]);
            ++app_serial;

            const int peak =
                kinds[a] == TrendKind::Marginal
                    ? 1 + static_cast<int>(rng.next_below(
                              static_cast<std::uint64_t>(spec.marginal_peak_max)))
                    : spec.peak_min +
                          static_cast<int>(rng.next_below(
                              static_cast<std::uint64_t>(spec.peak_max - spec.peak_min + 1)));

            yesterday.clear();
            bool emitted = false;
            int peak_day = 0;
            double peak_level = -1.0;
            for (int d = 0; d < spec.days; ++d) {
                double level = shapes[a]->values[static_cast<std::size_t>(d)];
                if (level > peak_level) {
                    peak_level = level;
                    peak_day = d;
                }
                if (spec.noise_sigma > 0.0) level += spec.noise_sigma * rng.next_gaussian();
                level = std::clamp(level, 0.0, 1.0);
                int count = static_cast<int>(std::lround(level * peak));
                count = std::min(count, spec.users);
                if (count <= 0) {
                    yesterday.clear();
                    continue;
                }

                today.clear();
                today_set.clear();
                const int retained = std::min(
                    count, static_cast<int>(std::floor(churn[a] * static_cast<double>(yesterday.size()))));
                for (int r = 0; r < retained; ++r) {
                    today.push_back(yesterday[static_cast<std::size_t>(r)]);
                    today_set.insert(today.back());
                }
                while (static_cast<int>(today.size()) < count) {
                    const std::uint32_t pick =
                        user_idx[rng.next_below(static_cast<std::uint64_t>(spec.users))];
                    if (!today_set.insert(pick).second) continue;
                    today.push_back(pick);
                }

                const Day day = spec.start + d;
                for (std::uint32_t u : today) builder.add_interned(u, app, day);
                emitted = true;
                std::swap(yesterday, today);
            }
            if (!emitted) {
                // extreme noise can zero out an entire curve; keep the app
                // observable with a single user on its intended peak day
                builder.add_interned(user_idx[0], app, spec.start + peak_day);
            }
        }
    }

    out.dataset = builder.finish();
    return out;
}

/// Write a dataset in the ingest JSONL format, rows in (app, day, user)
/// order. The category is emitted on the first row of each app.
inline void save_jsonl(const Dataset& ds, std::ostream& out) {
    std::uint32_t last_app = UINT32_MAX;
    for (std::size_t i = 0; i < ds.record_count(); ++i) {
        const auto rec = ds.record_at(i);
        const bool first_of_app = ds.rows()[i].app != last_app;
        last_app = ds.rows()[i].app;
        out << R"({"user":")" << rec.user_id << R"(","app":")" << rec.app_id << R"(","date":")"
            << format_day(rec.day) << '"';
        if (first_of_app) {
            if (const std::string* cat = ds.categories().find(rec.app_id))
                out << R"(,"category":")" << *cat << '"';
        }
        out << "}\n";
    }
}

} // namespace apptrend
