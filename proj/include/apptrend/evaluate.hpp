// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "apptrend/dataset.hpp"
#include "apptrend/recommend.hpp"
#include "apptrend/series.hpp"
#include "apptrend/trendfilter.hpp"

namespace apptrend {

/// Share of the current list that was not recommended last time:
/// |L2 \ L1| / N.
inline double diversity(const std::set<std::string>& l1, const std::set<std::string>& l2,
                        std::size_t n) {
    if (n == 0) throw std::invalid_argument("diversity: N must be > 0");
    if (l2.size() > n) throw std::invalid_argument("diversity: |L2| exceeds N");
    std::size_t fresh = 0;
    for (const auto& app : l2)
        if (!l1.contains(app)) ++fresh;
    return static_cast<double>(fresh) / static_cast<double>(n);
}

/// Share of the list never recommended before: |L1 \ A_t| / N.
inline double novelty(const std::set<std::string>& l1, const std::set<std::string>& seen,
                      std::size_t n) {
    if (n == 0) throw std::invalid_argument("novelty: N must be > 0");
    if (l1.size() > n) throw std::invalid_argument("novelty: |L1| exceeds N");
    std::size_t fresh = 0;
    for (const auto& app : l1)
        if (!seen.contains(app)) ++fresh;
    return static_cast<double>(fresh) / static_cast<double>(n);
}

/// Share of the ground-truth set the list covered: |L1 ∩ A| / |A|.
inline double accuracy(const std::set<std::string>& l1, const std::set<std::string>& truth) {
    if (truth.empty()) throw std::invalid_argument("accuracy: empty ground truth");
    std::size_t hit = 0;
    for (const auto& app : l1)
        if (truth.contains(app)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

enum class EvalVariant { baseline, flops_removed };

inline std::string_view to_string(EvalVariant v) {
    return v == EvalVariant::baseline ? "baseline" : "flops_removed";
}

/// Per-week outcome of the incremental protocol. Metric fields are absent
/// for weeks where they are undefined (no previous list, no test users).
/// The div/nov/acc values are macro averages over users; the _micro
/// variants pool numerators and denominators instead.
struct WeeklyEvalReport {
    int week = 0; // 1-based
    std::size_t rec_hot = 0;
    std::size_t rec_flop = 0;
    std::size_t total_hot = 0;
    std::size_t total_flop = 0;
    std::optional<double> div;
    std::optional<double> nov;
    std::optional<double> acc;
    std::optional<double> div_micro;
    std::optional<double> nov_micro;
    std::optional<double> acc_micro;
    std::size_t users = 0; // users who received a non-empty list
    EvalVariant variant = EvalVariant::baseline;
};

struct EvalOptions {
    std::size_t N = 20;
    std::size_t top_m = 1000;     // candidate universe: top-M most used training apps
    std::size_t max_users = 4500; // most active training users considered; 0 = all
    std::size_t resample_len = 100;
    double threshold = kDefaultThreshold;
    int marginal_gate = kDefaultMarginalGate;
    ScoreWeights weights{};
};

namespace detail {

inline std::span<const Dataset::Row> rows_up_to(std::span<const Dataset::Row> rows, Day as_of) {
    auto end = std::partition_point(rows.begin(), rows.end(),
                                    [&](const Dataset::Row& r) { return r.day <= as_of; });
    return rows.subspan(0, static_cast<std::size_t>(end - rows.begin()));
}

struct WeekContext {
    std::vector<std::string> universe;
    std::unordered_map<std::string, TrendClassification> classification;
    std::vector<UserProfile> profiles;
    std::unordered_map<std::string, std::set<std::string>> trained_apps; // full S(u) of kept users
};

inline WeekContext build_week_context(const Dataset& ds, Day as_of, const EvalOptions& opts) {
    WeekContext ctx;

    // Candidate universe: top-M apps by distinct (user, day) usage in the
    // training window, ties by app id.
    std::vector<std::pair<std::size_t, std::uint32_t>> app_usage;
    for (std::uint32_t a = 0; a < ds.app_count(); ++a) {
        const std::size_t n = rows_up_to(ds.rows_for_app(a), as_of).size();
        if (n > 0) app_usage.emplace_back(n, a);
    }
    std::sort(app_usage.begin(), app_usage.end(), [&](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return ds.app_name(x.second) < ds.app_name(y.second);
    });
    if (app_usage.size() > opts.top_m) app_usage.resize(opts.top_m);
    std::vector<std::uint32_t> universe_idx;
    for (const auto& [n, a] : app_usage) universe_idx.push_back(a);

    // Classify every universe app on its series up to the cutoff.
    const auto protos = prototypes(opts.resample_len);
    for (std::uint32_t a : universe_idx) {
        const std::string& app = ds.app_name(a);
        ctx.universe.push_back(app);
        auto norm = normalize(daily_usage_up_to(ds, app, as_of), opts.resample_len);
        ctx.classification[app] =
            classify(norm, norm.max_raw, protos, opts.threshold, opts.marginal_gate);
    }

    // Training activity per user (row count over every app, not just the
    // universe) drives the deterministic user cap.
    std::vector<std::uint32_t> activity(ds.user_count(), 0);
    for (const auto& r : ds.rows())
        if (r.day <= as_of) ++activity[r.user];

    // Scores for every (user, universe app) pair trained on.
    struct Triple {
        std::uint32_t user;
        std::uint32_t app_pos;
        double score;
    };
    std::vector<Triple> triples;
    {
        struct Acc {
            Day first{}, last{};
            std::int32_t days = 0;
        };
        std::unordered_map<std::uint32_t, Acc> acc;
        for (std::size_t pos = 0; pos < universe_idx.size(); ++pos) {
            acc.clear();
            for (const auto& r : rows_up_to(ds.rows_for_app(universe_idx[pos]), as_of)) {
                auto [it, inserted] = acc.try_emplace(r.user, Acc{r.day, r.day, 1});
                if (!inserted) {
                    it->second.first = std::min(it->second.first, r.day);
                    it->second.last = std::max(it->second.last, r.day);
                    ++it->second.days;
                }
            }
            for (const auto& [user, e] : acc)
                triples.push_back({user, static_cast<std::uint32_t>(pos),
                                   combine_score(opts.weights, e.first, e.last, e.days, as_of)});
        }
    }

    // Keep the most active users (ties by name), then assemble profiles
    // ordered by user id.
    std::vector<std::uint32_t> users;
    {
        std::vector<bool> has_scores(ds.user_count(), false);
        for (const auto& t : triples) has_scores[t.user] = true;
        for (std::uint32_t u = 0; u < ds.user_count(); ++u)
            if (has_scores[u]) users.push_back(u);
    }
    if (opts.max_users > 0 && users.size() > opts.max_users) {
        std::sort(users.begin(), users.end(), [&](std::uint32_t x, std::uint32_t y) {
            if (activity[x] != activity[y]) return activity[x] > activity[y];
            return ds.user_name(x) < ds.user_name(y);
        });
        users.resize(opts.max_users);
    }
    std::sort(users.begin(), users.end(),
              [&](std::uint32_t x, std::uint32_t y) { return ds.user_name(x) < ds.user_name(y); });

    std::vector<std::uint32_t> slot(ds.user_count(), UINT32_MAX);
    for (std::size_t i = 0; i < users.size(); ++i) slot[users[i]] = static_cast<std::uint32_t>(i);

    ctx.profiles.resize(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) ctx.profiles[i].user_id = ds.user_name(users[i]);
    for (const auto& t : triples) {
        if (slot[t.user] == UINT32_MAX) continue;
        ctx.profiles[slot[t.user]].scores[ctx.universe[t.app_pos]] = t.score;
    }

    // Unrestricted S(u) for the kept users: adoption ground truth later
    // must not count an app the user already used outside the universe.
    for (std::uint32_t a = 0; a < ds.app_count(); ++a) {
        const std::string& app = ds.app_name(a);
        for (const auto& r : rows_up_to(ds.rows_for_app(a), as_of)) {
            if (slot[r.user] == UINT32_MAX) continue;
            ctx.trained_apps[ds.user_name(r.user)].insert(app);
        }
    }
    return ctx;
}

struct VariantHistory {
    std::unordered_map<std::string, std::set<std::string>> previous_list;
    std::unordered_map<std::string, std::set<std::string>> seen; // A_t per user
};

} // namespace detail

/// Incremental weekly evaluation of both variants in one pass: for each
/// week, train on everything before it, classify trends up to the cutoff,
/// rank candidates per user once, then derive the baseline top-N and the
/// flops_removed list (Flop-classified apps dropped, slots refilled from
/// the extended ranking). Diversity compares against the variant's own
/// previous list, novelty against all its earlier lists, accuracy against
/// the universe apps the user newly adopted during the week.
inline std::pair<std::vector<WeeklyEvalReport>, std::vector<WeeklyEvalReport>>
weekly_protocol_both(const Dataset& ds, std::span<const std::pair<Day, Day>> weeks, std::size_t N,
                     const EvalOptions& options = {}) {
    EvalOptions opts = options;
    opts.N = N;
    if (weeks.empty()) throw std::invalid_argument("weekly_protocol: no weeks");
    for (std::size_t t = 0; t < weeks.size(); ++t) {
        if (weeks[t].first > weeks[t].second)
            throw std::invalid_argument("weekly_protocol: week range inverted");
        if (t > 0 && weeks[t - 1].second >= weeks[t].first)
            throw std::invalid_argument("weekly_protocol: weeks must be disjoint and chronological");
    }
    if (ds.window_start() >= weeks[0].first)
        throw std::invalid_argument("weekly_protocol: no training data before the first week");

    std::pair<std::vector<WeeklyEvalReport>, std::vector<WeeklyEvalReport>> out;
    detail::VariantHistory history[2];

    for (std::size_t t = 0; t < weeks.size(); ++t) {
        const Day as_of = weeks[t].first - 1;
        auto ctx = detail::build_week_context(ds, as_of, opts);

        WeeklyEvalReport base_rep;
        base_rep.week = static_cast<int>(t) + 1;
        base_rep.variant = EvalVariant::baseline;
        for (const auto& app : ctx.universe) {
            const TrendKind k = ctx.classification[app].kind;
            if (k == TrendKind::Hot) ++base_rep.total_hot;
            if (k == TrendKind::Flop) ++base_rep.total_flop;
        }
        WeeklyEvalReport nofl_rep = base_rep;
        nofl_rep.variant = EvalVariant::flops_removed;

        SlopeOneModel model(ctx.profiles, ctx.universe);

        // apps each kept user touched during the test week
        std::unordered_map<std::string, std::set<std::string>> week_usage;
        {
            std::unordered_set<std::string> kept;
            for (const auto& p : ctx.profiles) kept.insert(p.user_id);
            for (const auto& app : ctx.universe) {
                auto rows = ds.rows_for_app(*ds.app_index(app));
                auto lo = std::partition_point(
                    rows.begin(), rows.end(),
                    [&](const Dataset::Row& r) { return r.day < weeks[t].first; });
                for (auto it = lo; it != rows.end() && it->day <= weeks[t].second; ++it) {
                    const std::string& user = ds.user_name(it->user);
                    if (kept.contains(user)) week_usage[user].insert(app);
                }
            }
        }

        struct Tally {
            double div_sum = 0, nov_sum = 0, acc_sum = 0;
            std::size_t div_n = 0, nov_n = 0, acc_n = 0;
            std::size_t div_fresh = 0, nov_fresh = 0, acc_hit = 0, acc_truth = 0;
            std::set<std::string> recommended;
        } tally[2];
        WeeklyEvalReport* reps[2] = {&base_rep, &nofl_rep};

        for (const auto& profile : ctx.profiles) {
            auto ranking = model.recommend(profile, ctx.universe.size());
            ranking.N = opts.N;

            // adoption ground truth, shared by both variants
            std::set<std::string> truth;
            if (auto wu = week_usage.find(profile.user_id); wu != week_usage.end()) {
                const auto& trained = ctx.trained_apps[profile.user_id];
                for (const auto& app : wu->second)
                    if (!trained.contains(app)) truth.insert(app);
            }

            for (int v = 0; v < 2; ++v) {
                RecommendationList final_list =
                    v == 1 ? trend_filter(ranking, ctx.classification, {TrendKind::Flop}, {})
                           : [&] {
                                 RecommendationList l = ranking;
                                 if (l.items.size() > opts.N) l.items.resize(opts.N);
                                 return l;
                             }();
                if (final_list.items.empty()) continue;

                std::set<std::string> current;
                for (const auto& [app, p] : final_list.items) {
                    current.insert(app);
                    tally[v].recommended.insert(app);
                }

                auto& hist = history[v];
                if (auto prev = hist.previous_list.find(profile.user_id);
                    prev != hist.previous_list.end()) {
                    tally[v].div_sum += diversity(prev->second, current, opts.N);
                    ++tally[v].div_n;
                    for (const auto& app : current)
                        if (!prev->second.contains(app)) ++tally[v].div_fresh;
                }

                const auto& already = hist.seen[profile.user_id];
                tally[v].nov_sum += novelty(current, already, opts.N);
                ++tally[v].nov_n;
                for (const auto& app : current)
                    if (!already.contains(app)) ++tally[v].nov_fresh;

                if (!truth.empty()) {
                    tally[v].acc_sum += accuracy(current, truth);
                    ++tally[v].acc_n;
                    for (const auto& app : current)
                        if (truth.contains(app)) ++tally[v].acc_hit;
                    tally[v].acc_truth += truth.size();
                }

                hist.previous_list[profile.user_id] = current;
                hist.seen[profile.user_id].insert(current.begin(), current.end());
                ++reps[v]->users;
            }
        }

        for (int v = 0; v < 2; ++v) {
            for (const auto& app : tally[v].recommended) {
                const TrendKind k = ctx.classification[app].kind;
                if (k == TrendKind::Hot) ++reps[v]->rec_hot;
                if (k == TrendKind::Flop) ++reps[v]->rec_flop;
            }
            if (tally[v].div_n > 0) {
                reps[v]->div = tally[v].div_sum / static_cast<double>(tally[v].div_n);
                reps[v]->div_micro = static_cast<double>(tally[v].div_fresh) /
                                     static_cast<double>(tally[v].div_n * opts.N);
            }
            if (tally[v].nov_n > 0) {
                reps[v]->nov = tally[v].nov_sum / static_cast<double>(tally[v].nov_n);
                reps[v]->nov_micro = static_cast<double>(tally[v].nov_fresh) /
                                     static_cast<double>(tally[v].nov_n * opts.N);
            }
            if (tally[v].acc_n > 0) {
                reps[v]->acc = tally[v].acc_sum / static_cast<double>(tally[v].acc_n);
                reps[v]->acc_micro = static_cast<double>(tally[v].acc_hit) /
                                     static_cast<double>(tally[v].acc_truth);
            }
        }
        out.first.push_back(std::move(base_rep));
        out.second.push_back(std::move(nofl_rep));
    }
    return out;
}

/// Single-variant view of the protocol.
inline std::vector<WeeklyEvalReport> weekly_protocol(const Dataset& ds,
                                                     std::span<const std::pair<Day, Day>> weeks,
                                                     std::size_t N, EvalVariant variant,
                                                     const EvalOptions& options = {}) {
    auto both = weekly_protocol_both(ds, weeks, N, options);
    return variant == EvalVariant::baseline ? std::move(both.first) : std::move(both.second);
}

} // namespace apptrend
