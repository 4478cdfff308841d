// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apptrend/dataset.hpp"
#include "apptrend/trendfilter.hpp"

namespace apptrend {

/// Weights for the three usage-score components: recency of the last
/// interaction, frequency of use, and breadth of usage days. Must be
/// non-negative and sum to 1.
struct ScoreWeights {
    double recency = 1.0 / 3.0;
    double frequency = 1.0 / 3.0;
    double days = 1.0 / 3.0;

    void validate() const {
        if (recency < 0 || frequency < 0 || days < 0)
            throw std::invalid_argument("score weights must be non-negative");
        if (std::abs(recency + frequency + days - 1.0) > 1e-9)
            throw std::invalid_argument("score weights must sum to 1");
    }
};

struct UsageScore {
    std::string user_id;
    std::string app_id;
    double score = 0.0;
};

/// Per-user app scores; the key set is S(u), the apps the user has used.
struct UserProfile {
    std::string user_id;
    std::map<std::string, double> scores;
};

struct RecommendationList {
    std::string user_id;
    std::vector<std::pair<std::string, double>> items; // (app_id, relevance P), P descending
    std::size_t N = 0;
};

namespace detail {

/// Recency decays linearly to zero over 90 days; breadth of use caps at
/// 30 distinct days; frequency is the share of days used since first use.
inline double combine_score(const ScoreWeights& w, Day first, Day last, std::int64_t distinct_days,
                            Day as_of) {
    const double r = std::max(0.0, 1.0 - static_cast<double>(as_of - last) / 90.0);
    const double f = static_cast<double>(distinct_days) / static_cast<double>(as_of - first + 1);
    const double d = std::min(1.0, static_cast<double>(distinct_days) / 30.0);
    return w.recency * r + w.frequency * f + w.days * d;
}

} // namespace detail

/// Usage score of one (user, app) pair as of a date, from records dated
/// at or before as_of.
inline UsageScore usage_score(const Dataset& ds, std::string_view user, std::string_view app,
                              Day as_of, const ScoreWeights& weights = {}) {
    weights.validate();
    const std::uint32_t app_idx = ds.require_app(app);
    auto user_idx = ds.user_index(user);
    if (!user_idx) throw std::invalid_argument("unknown user: " + std::string(user));

    Day first{}, last{};
    std::int64_t days = 0;
    for (const auto& r : ds.rows_for_app(app_idx)) {
        if (r.user != *user_idx || r.day > as_of) continue;
        if (days == 0) first = last = r.day;
        first = std::min(first, r.day);
        last = std::max(last, r.day);
        ++days; // rows are deduplicated: one row per (user, day)
    }
    if (days == 0)
        throw std::invalid_argument("no usage of app '" + std::string(app) + "' by user '" +
                                    std::string(user) + "' at or before " + format_day(as_of));
    return UsageScore{std::string(user), std::string(app),
                      detail::combine_score(weights, first, last, days, as_of)};
}

/// Profiles for every user with at least one record dated <= as_of,
/// sorted by user id. An optional app filter restricts S(u) to a
/// candidate universe.
inline std::vector<UserProfile> build_profiles(const Dataset& ds, Day as_of,
                                               const ScoreWeights& weights = {},
                                               const std::set<std::string>* app_filter = nullptr) {
    weights.validate();
    struct Acc {
        Day first{}, last{};
        std::int64_t days = 0;
    };
    // (user, app) -> span accumulation over rows at or before as_of
    std::map<std::pair<std::string, std::string>, Acc> acc;
    for (std::size_t a = 0; a < ds.app_count(); ++a) {
        const std::string& app = ds.app_name(static_cast<std::uint32_t>(a));
        if (app_filter && !app_filter->contains(app)) continue;
        for (const auto& r : ds.rows_for_app(static_cast<std::uint32_t>(a))) {
            if (r.day > as_of) continue;
            auto& e = acc[{ds.user_name(r.user), app}];
            if (e.days == 0) e.first = e.last = r.day;
            e.first = std::min(e.first, r.day);
            e.last = std::max(e.last, r.day);
            ++e.days;
        }
    }
    std::vector<UserProfile> out;
    for (const auto& [key, e] : acc) {
        if (out.empty() || out.back().user_id != key.first)
            out.push_back(UserProfile{key.first, {}});
        out.back().scores[key.second] = detail::combine_score(weights, e.first, e.last, e.days, as_of);
    }
    return out;
}

/// Average score deviation between apps i and j over users who used both:
/// mean of score(j) - score(i). support counts those co-users; support 0
/// means the deviation is undefined (dev is reported as 0 then).
inline std::pair<double, int> deviation(std::span<const UserProfile> profiles, std::string_view i,
                                        std::string_view j) {
    double sum = 0.0;
    int support = 0;
    for (const auto& p : profiles) {
        auto it_i = p.scores.find(std::string(i));
        if (it_i == p.scores.end()) continue;
        auto it_j = p.scores.find(std::string(j));
        if (it_j == p.scores.end()) continue;
        sum += it_j->second - it_i->second;
        ++support;
    }
    return {support > 0 ? sum / support : 0.0, support};
}

/// Slope One prediction model over a fixed candidate app universe. The
/// deviation matrix is one aggregation pass; recommend() is pure
/// afterwards, so per-user calls can run in parallel.
class SlopeOneModel {
public:
    SlopeOneModel(std::span<const UserProfile> profiles, std::vector<std::string> candidate_apps)
        : apps_(std::move(candidate_apps)) {
        std::sort(apps_.begin(), apps_.end());
        apps_.erase(std::unique(apps_.begin(), apps_.end()), apps_.end());
        for (std::size_t a = 0; a < apps_.size(); ++a) app_index_[apps_[a]] = a;

        const std::size_t n = apps_.size();
        dev_sum_.assign(n * n, 0.0);
        support_.assign(n * n, 0);

        std::vector<std::pair<std::size_t, double>> present;
        for (const auto& p : profiles) {
            present.clear();
            for (const auto& [app, score] : p.scores) {
                auto it = app_index_.find(app);
                if (it != app_index_.end()) present.emplace_back(it->second, score);
            }
            for (const auto& [ai, si] : present) {
                for (const auto& [aj, sj] : present) {
                    if (ai == aj) continue;
                    dev_sum_[ai * n + aj] += sj - si;
                    ++support_[ai * n + aj];
                }
            }
        }
    }

    const std::vector<std::string>& apps() const { return apps_; }

    /// Relevance P(u_j) for every candidate j outside S(u), ranked with
    /// ties broken by app id. Pass N = apps().size() for the full ranking.
    RecommendationList recommend(const UserProfile& user, std::size_t N) const {
        if (user.scores.empty()) throw std::invalid_argument("cold user: " + user.user_id);
        const std::size_t n = apps_.size();

        std::vector<std::pair<std::size_t, double>> used;
        for (const auto& [app, score] : user.scores) {
            auto it = app_index_.find(app);
            if (it != app_index_.end()) used.emplace_back(it->second, score);
        }

        // accumulate along contiguous matrix rows
        std::vector<double> sum(n, 0.0);
        std::vector<std::uint32_t> relevant(n, 0);
        for (const auto& [i, score_i] : used) {
            const double* dev_row = dev_sum_.data() + i * n;
            const int* sup_row = support_.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                if (sup_row[j] == 0) continue;
                sum[j] += dev_row[j] / sup_row[j] + score_i;
                ++relevant[j];
            }
        }

        RecommendationList out;
        out.user_id = user.user_id;
        out.N = N;
        for (std::size_t j = 0; j < n; ++j) {
            if (relevant[j] == 0) continue; // no co-usage path to this candidate
            if (user.scores.contains(apps_[j])) continue;
            out.items.emplace_back(apps_[j], sum[j] / static_cast<double>(relevant[j]));
        }
        std::sort(out.items.begin(), out.items.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (out.items.size() > N) out.items.resize(N);
        return out;
    }

private:
    std::vector<std::string> apps_;
    std::unordered_map<std::string, std::size_t> app_index_;
    std::vector<double> dev_sum_;
    std::vector<int> support_;
};

/// Top-N Slope One recommendations for one user, with every app seen in
/// the profiles as a candidate.
inline RecommendationList slope_one(std::span<const UserProfile> profiles, std::string_view user,
                                    std::size_t N) {
    const UserProfile* target = nullptr;
    for (const auto& p : profiles)
        if (p.user_id == user) target = &p;
    if (!target || target->scores.empty())
        throw std::invalid_argument("cold user: " + std::string(user));

    std::vector<std::string> apps;
    for (const auto& p : profiles)
        for (const auto& [app, score] : p.scores) apps.push_back(app);
    SlopeOneModel model(profiles, std::move(apps));
    return model.recommend(*target, N);
}

/// Re-rank a recommendation list by trend: drop the given kinds, scale P
/// by per-kind boosts, re-sort and truncate to N. Feeding an extended
/// candidate list refills slots freed by dropped apps.
inline RecommendationList trend_filter(
    const RecommendationList& list,
    const std::unordered_map<std::string, TrendClassification>& classifications,
    const std::set<TrendKind>& drop = {TrendKind::Flop},
    const std::map<TrendKind, double>& boost = {}) {
    RecommendationList out;
    out.user_id = list.user_id;
    out.N = list.N;
    for (const auto& [app, p] : list.items) {
        auto it = classifications.find(app);
        const TrendKind kind = it == classifications.end() ? TrendKind::Unclassified : it->second.kind;
        if (drop.contains(kind)) continue;
        double value = p;
        if (auto b = boost.find(kind); b != boost.end()) value *= b->second;
        out.items.emplace_back(app, value);
    }
    std::sort(out.items.begin(), out.items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (out.items.size() > out.N) out.items.resize(out.N);
    return out;
}

} // namespace apptrend
