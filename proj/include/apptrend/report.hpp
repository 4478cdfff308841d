// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "apptrend/csv.hpp"
#include "apptrend/dataset.hpp"
#include "apptrend/evaluate.hpp"
#include "apptrend/retention.hpp"
#include "apptrend/series.hpp"
#include "apptrend/trendfilter.hpp"

namespace apptrend {

/// Everything the report pipeline needs; one seed drives every randomized
/// stage so reruns are byte-identical.
struct RunConfig {
    std::string input_path;
    LogFormat format = LogFormat::jsonl;
    std::string out_dir;

    std::size_t resample_len = 100;
    double threshold = kDefaultThreshold;
    int marginal_gate = kDefaultMarginalGate;
    std::uint64_t seed = 42;

    std::vector<int> retention_days = {1, 3, 7};
    int quiet_window = 7;

    std::vector<std::string> consensus_categories; // empty = every category

    int eval_weeks = 4;
    std::size_t eval_n = 20;
    std::size_t eval_top_m = 1000;
    std::size_t eval_max_users = 4500;
    ScoreWeights weights{};
};

namespace detail {

inline std::vector<std::string> sorted_app_names(const Dataset& ds) {
    std::vector<std::string> names;
    names.reserve(ds.app_count());
    for (std::uint32_t a = 0; a < ds.app_count(); ++a) names.push_back(ds.app_name(a));
    std::sort(names.begin(), names.end());
    return names;
}

inline std::string safe_filename(std::string_view name) {
    std::string out;
    for (char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

} // namespace detail

/// Per-app retention CSV: app_id, cohort_size, then one rate column per
/// requested day offset (blank when the cohort is empty). Returns the
/// data row count.
inline std::size_t write_retention_csv(const Dataset& ds, std::span<const int> days,
                                       int quiet_window, std::ostream& out) {
    if (days.empty()) throw std::invalid_argument("retention: no day offsets requested");
    const int max_d = *std::max_element(days.begin(), days.end());

    CsvWriter csv(out);
    csv.field("app_id").field("cohort_size");
    for (int d : days) csv.field("rate_d" + std::to_string(d));
    csv.endrow();

    for (const auto& app : detail::sorted_app_names(ds)) {
        auto curve = retention_curve(ds, app, max_d, quiet_window);
        csv.field(app).field(curve.cohort_size);
        for (int d : days) {
            if (curve.cohort_size == 0)
                csv.blank();
            else
                csv.field(curve.rate(static_cast<std::size_t>(d)));
        }
        csv.endrow();
    }
    return csv.data_rows();
}

/// Labeled day-1..d aggregates: macro averages each app's rate, micro
/// pools the surviving users of all cohorts.
inline std::map<std::string, double> retention_aggregates(const Dataset& ds,
                                                          std::span<const int> days,
                                                          int quiet_window) {
    const int max_d = *std::max_element(days.begin(), days.end());
    std::map<std::string, double> out;
    std::vector<RetentionCurve> curves;
    for (const auto& app : detail::sorted_app_names(ds))
        curves.push_back(retention_curve(ds, app, max_d, quiet_window));
    for (int d : days) {
        double macro_sum = 0.0;
        std::size_t macro_n = 0, surviving = 0, pooled = 0;
        for (const auto& c : curves) {
            if (c.cohort_size == 0) continue;
            macro_sum += c.rate(static_cast<std::size_t>(d));
            ++macro_n;
            surviving += static_cast<std::size_t>(
                std::llround(c.rate(static_cast<std::size_t>(d)) * static_cast<double>(c.cohort_size)));
            pooled += c.cohort_size;
        }
        if (macro_n > 0) {
            out["macro_rate_d" + std::to_string(d)] = macro_sum / static_cast<double>(macro_n);
            out["micro_rate_d" + std::to_string(d)] =
                static_cast<double>(surviving) / static_cast<double>(pooled);
        }
    }
    return out;
}

/// Classification of every app at the given resample length, sorted by id.
inline std::vector<TrendClassification> classify_all(
    const Dataset& ds, std::size_t resample_len, double threshold, int marginal_gate,
    std::vector<NormalizedSeries>* keep_series = nullptr) {
    const auto protos = prototypes(resample_len);
    std::vector<TrendClassification> out;
    for (const auto& app : detail::sorted_app_names(ds)) {
        auto norm = normalize(daily_usage(ds, app), resample_len);
        out.push_back(classify(norm, norm.max_raw, protos, threshold, marginal_gate));
        if (keep_series) keep_series->push_back(std::move(norm));
    }
    return out;
}

inline std::size_t write_classification_csv(std::span<const TrendClassification> cls,
                                            std::span<const NormalizedSeries> series,
                                            std::ostream& out) {
    CsvWriter csv(out);
    csv.field("app_id").field("kind").field("distance").field("max_raw_users").endrow();
    for (std::size_t i = 0; i < cls.size(); ++i) {
        csv.field(cls[i].app_id)
            .field(to_string(cls[i].kind))
            .field(cls[i].distance)
            .field(static_cast<std::int64_t>(series[i].max_raw))
            .endrow();
    }
    return csv.data_rows();
}

inline std::size_t write_category_breakdown_csv(std::span<const TrendClassification> cls,
                                                const CategoryMap& cats, std::ostream& out) {
    CsvWriter csv(out);
    csv.field("category")
        .field("apps")
        .field("marginal_pct")
        .field("rest_count")
        .field("hot_pct")
        .field("dominant_pct")
        .field("flop_pct")
        .field("mean_distance")
        .field("distance_variance")
        .endrow();
    for (const auto& row : category_breakdown(cls, cats)) {
        csv.field(row.category)
            .field(row.app_count)
            .field(row.marginal_pct)
            .field(row.rest_count)
            .field(row.hot_pct)
            .field(row.dominant_pct)
            .field(row.flop_pct)
            .field(row.mean_distance)
            .field(row.distance_variance)
            .endrow();
    }
    return csv.data_rows();
}

/// Consensus CSV of one category: index, value, optionally the relative
/// performance column for one member app.
inline std::size_t write_consensus_csv(const ConsensusSeries& cons,
                                       const RelativeSeries* relative, std::ostream& out) {
    CsvWriter csv(out);
    csv.field("index").field("value");
    if (relative) csv.field("relative");
    csv.endrow();
    for (std::size_t i = 0; i < cons.size(); ++i) {
        csv.field(i).field(cons.values[i]);
        if (relative) csv.field(relative->values[i]);
        csv.endrow();
    }
    return csv.data_rows();
}

inline std::size_t write_evaluation_csv(std::span<const WeeklyEvalReport> baseline,
                                        std::span<const WeeklyEvalReport> flops_removed,
                                        std::ostream& out) {
    CsvWriter csv(out);
    csv.field("week")
        .field("rec_hot")
        .field("rec_flop")
        .field("total_hot")
        .field("total_flop")
        .field("div")
        .field("nov")
        .field("acc")
        .field("div_micro")
        .field("nov_micro")
        .field("acc_micro")
        .field("users")
        .field("variant")
        .field("acc_delta")
        .endrow();

    auto emit = [&](const WeeklyEvalReport& r, std::optional<double> acc_delta) {
        csv.field(r.week);
        csv.field(r.rec_hot).field(r.rec_flop).field(r.total_hot).field(r.total_flop);
        for (const auto& v :
             {r.div, r.nov, r.acc, r.div_micro, r.nov_micro, r.acc_micro}) {
            if (v)
                csv.field(*v);
            else
                csv.blank();
        }
        csv.field(r.users).field(to_string(r.variant));
        if (acc_delta)
            csv.field(*acc_delta);
        else
            csv.blank();
        csv.endrow();
    };

    for (const auto& r : baseline) emit(r, std::nullopt);
    for (std::size_t i = 0; i < flops_removed.size(); ++i) {
        std::optional<double> delta;
        if (i < baseline.size() && baseline[i].acc && flops_removed[i].acc)
            delta = *flops_removed[i].acc - *baseline[i].acc;
        emit(flops_removed[i], delta);
    }
    return csv.data_rows();
}

/// Run the full pipeline over an in-memory dataset and write the artifact
/// bundle into cfg.out_dir: retention, per-app classification, category
/// breakdown, per-category consensus curves, the two-variant evaluation
/// table and a manifest recording the config and per-artifact row counts.
/// Returns the manifest.
inline nlohmann::json run_report(const Dataset& ds, const RunConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.out_dir.empty()) throw std::invalid_argument("report: output directory not set");
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + cfg.out_dir);

    nlohmann::json manifest;
    manifest["config"] = {
        {"input", cfg.input_path},
        {"format", cfg.format == LogFormat::jsonl ? "jsonl" : "csv"},
        {"resample_len", cfg.resample_len},
        {"threshold", cfg.threshold},
        {"marginal_gate", cfg.marginal_gate},
        {"seed", cfg.seed},
        {"retention_days", cfg.retention_days},
        {"quiet_window", cfg.quiet_window},
        {"eval_weeks", cfg.eval_weeks},
        {"eval_n", cfg.eval_n},
        {"eval_top_m", cfg.eval_top_m},
        {"eval_max_users", cfg.eval_max_users},
        {"weights",
         {{"recency", cfg.weights.recency},
          {"frequency", cfg.weights.frequency},
          {"days", cfg.weights.days}}},
    };
    manifest["dataset"] = {
        {"records", ds.record_count()},
        {"users", ds.user_count()},
        {"apps", ds.app_count()},
        {"window_start", format_day(ds.window_start())},
        {"window_end", format_day(ds.window_end())},
    };

    auto artifact = [&](const std::string& name, std::size_t rows) {
        manifest["artifacts"][name] = {{"file", name}, {"rows", rows}};
    };
    auto path_of = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };

    {
        auto out = open_output_file(path_of("retention.csv"));
        artifact("retention.csv", write_retention_csv(ds, cfg.retention_days, cfg.quiet_window, out));
    }
    for (const auto& [label, value] : retention_aggregates(ds, cfg.retention_days, cfg.quiet_window))
        manifest["retention_aggregates"][label] = value;

    std::vector<NormalizedSeries> series;
    auto cls = classify_all(ds, cfg.resample_len, cfg.threshold, cfg.marginal_gate, &series);
    {
        auto out = open_output_file(path_of("classification.csv"));
        artifact("classification.csv", write_classification_csv(cls, series, out));
    }
    {
        auto out = open_output_file(path_of("category_breakdown.csv"));
        artifact("category_breakdown.csv",
                 write_category_breakdown_csv(cls, ds.categories(), out));
    }

    // group normalized series by category for the consensus curves
    std::map<std::string, std::vector<NormalizedSeries>> by_category;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        const std::string* cat = ds.categories().find(cls[i].app_id);
        by_category[cat ? *cat : "uncategorized"].push_back(series[i]);
    }
    std::vector<std::string> wanted = cfg.consensus_categories;
    if (wanted.empty())
        for (const auto& [cat, members] : by_category) wanted.push_back(cat);
    for (const auto& cat : wanted) {
        auto it = by_category.find(cat);
        if (it == by_category.end()) throw std::invalid_argument("unknown category: " + cat);
        const std::string name = "consensus_" + detail::safe_filename(cat) + ".csv";
        auto out = open_output_file(path_of(name));
        artifact(name, write_consensus_csv(consensus(it->second), nullptr, out));
    }

    // evaluation needs room for the test weeks plus at least one training day
    const int span_days = ds.window_end() - ds.window_start() + 1;
    if (cfg.eval_weeks > 0 && span_days >= 7 * cfg.eval_weeks + 2) {
        std::vector<std::pair<Day, Day>> weeks;
        for (int w = 0; w < cfg.eval_weeks; ++w) {
            const Day start = ds.window_end() - 7 * (cfg.eval_weeks - w) + 1;
            weeks.push_back({start, start + 6});
        }
        EvalOptions opts;
        opts.N = cfg.eval_n;
        opts.top_m = cfg.eval_top_m;
        opts.max_users = cfg.eval_max_users;
        opts.resample_len = cfg.resample_len;
        opts.threshold = cfg.threshold;
        opts.marginal_gate = cfg.marginal_gate;
        opts.weights = cfg.weights;
        auto [base, nofl] = weekly_protocol_both(ds, weeks, cfg.eval_n, opts);
        auto out = open_output_file(path_of("evaluation.csv"));
        artifact("evaluation.csv", write_evaluation_csv(base, nofl, out));
    } else {
        manifest["evaluation_skipped"] = "window too short for the requested evaluation weeks";
    }

    {
        auto out = open_output_file(path_of("manifest.json"));
        out << manifest.dump(2) << '\n';
    }
    return manifest;
}

inline nlohmann::json run_report(const RunConfig& cfg) {
    if (cfg.input_path.empty()) throw std::invalid_argument("report: input path not set");
    return run_report(load_records(cfg.input_path, cfg.format), cfg);
}

} // namespace apptrend
