// Apache License, Version 2.0, refer to LICENSE.txt
//
// apptrend: mine app-usage logs for retention, trend archetypes and
// trend-aware recommendations. See README.md for the full tour.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apptrend/apptrend.hpp"

namespace {

using namespace apptrend;

struct CommonOpts {
    std::uint64_t seed = 42;
    std::string out;
    std::size_t resample_len = 100;
    double threshold = kDefaultThreshold;
    int marginal_gate = kDefaultMarginalGate;
    std::string format = "auto";
};

LogFormat resolve_format(const std::string& format, const std::string& path) {
    if (format == "jsonl") return LogFormat::jsonl;
    if (format == "csv") return LogFormat::csv;
    return format_from_path(path);
}

void add_common(CLI::App* cmd, CommonOpts& g, bool with_series_opts = true) {
    cmd->add_option("--seed", g.seed, "Seed for every randomized stage");
    cmd->add_option("--out", g.out, "Output file (default: stdout)");
    if (with_series_opts) {
        cmd->add_option("--resample-len", g.resample_len, "Resample length L")
            ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
        cmd->add_option("--threshold", g.threshold, "Classification distance threshold")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--marginal-gate", g.marginal_gate,
                        "Peak daily users below which an app is Marginal");
    }
}

void add_weight_opts(CLI::App* cmd, ScoreWeights& w) {
    cmd->add_option("--w-recency", w.recency, "Usage-score weight: recency");
    cmd->add_option("--w-freq", w.frequency, "Usage-score weight: frequency");
    cmd->add_option("--w-days", w.days, "Usage-score weight: breadth of days");
}

/// Stream sink: --out file when given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) file_ = open_output_file(path);
    }
    std::ostream& get() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }

private:
    std::optional<std::ofstream> file_;
};

std::optional<Day> parse_optional_day(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_day(s);
}

int cmd_ingest(const std::string& input, const CommonOpts& g, const std::string& wstart,
               const std::string& wend) {
    auto ds = load_records(input, resolve_format(g.format, input), parse_optional_day(wstart),
                           parse_optional_day(wend));
    std::set<std::string> distinct_categories;
    for (const auto& [app, cat] : ds.categories()) distinct_categories.insert(cat);
    nlohmann::json summary = {
        {"records", ds.record_count()},
        {"users", ds.user_count()},
        {"apps", ds.app_count()},
        {"categories", distinct_categories.size()},
        {"window_start", format_day(ds.window_start())},
        {"window_end", format_day(ds.window_end())},
    };
    Sink sink(g.out);
    sink.get() << summary.dump(2) << '\n';
    return 0;
}

int cmd_retention(const std::string& input, const CommonOpts& g, std::vector<int> days,
                  int quiet_window, std::size_t spearman_min_users) {
    if (days.empty()) days = {1, 3, 7};
    auto ds = load_records(input, resolve_format(g.format, input));
    Sink sink(g.out);
    write_retention_csv(ds, days, quiet_window, sink.get());
    for (const auto& [label, value] : retention_aggregates(ds, days, quiet_window))
        std::cerr << label << "=" << format_double(value) << '\n';

    // usage-count / retention dependency, over apps with enough users
    const int max_d = *std::max_element(days.begin(), days.end());
    std::vector<double> usage;
    std::map<int, std::vector<double>> rates;
    for (const auto& app : detail::sorted_app_names(ds)) {
        auto curve = retention_curve(ds, app, max_d, quiet_window);
        if (curve.cohort_size < spearman_min_users || curve.cohort_size == 0) continue;
        usage.push_back(static_cast<double>(ds.rows_for_app(*ds.app_index(app)).size()));
        for (int d : days) rates[d].push_back(curve.rate(static_cast<std::size_t>(d)));
    }
    for (int d : days) {
        if (usage.size() < 2) break;
        try {
            std::cerr << "spearman_usage_vs_rate_d" << d << "="
                      << format_double(spearman(usage, rates[d])) << '\n';
        } catch (const std::invalid_argument&) {
            std::cerr << "spearman_usage_vs_rate_d" << d << "=degenerate\n";
        }
    }
    return 0;
}

int cmd_classify(const std::string& input, const CommonOpts& g, const std::string& protos_path) {
    auto ds = load_records(input, resolve_format(g.format, input));
    std::vector<TrendClassification> cls;
    std::vector<NormalizedSeries> series;
    if (protos_path.empty()) {
        cls = classify_all(ds, g.resample_len, g.threshold, g.marginal_gate, &series);
    } else {
        auto protos = load_prototypes(protos_path);
        for (const auto& app : detail::sorted_app_names(ds)) {
            auto norm = normalize(daily_usage(ds, app), g.resample_len);
            cls.push_back(classify(norm, norm.max_raw, protos, g.threshold, g.marginal_gate));
            series.push_back(std::move(norm));
        }
    }
    Sink sink(g.out);
    write_classification_csv(cls, series, sink.get());
    return 0;
}

int cmd_consensus(const std::string& input, const CommonOpts& g, const std::string& category,
                  const std::string& relative_app) {
    auto ds = load_records(input, resolve_format(g.format, input));

    std::vector<NormalizedSeries> members;
    std::optional<NormalizedSeries> target;
    for (const auto& app : detail::sorted_app_names(ds)) {
        const std::string* cat = ds.categories().find(app);
        const std::string resolved = cat ? *cat : "uncategorized";
        if (resolved != category) continue;
        auto norm = normalize(daily_usage(ds, app), g.resample_len);
        if (app == relative_app) target = norm;
        members.push_back(std::move(norm));
    }
    if (members.empty()) throw std::invalid_argument("no apps in category: " + category);
    if (!relative_app.empty() && !target)
        throw std::invalid_argument("app '" + relative_app + "' is not in category '" + category +
                                    "'");

    auto cons = consensus(members);
    std::optional<RelativeSeries> rel;
    if (target) rel = relative_performance(*target, cons);
    Sink sink(g.out);
    write_consensus_csv(cons, rel ? &*rel : nullptr, sink.get());
    return 0;
}

int cmd_kmeans(const std::string& input, const CommonOpts& g, int k, int runs,
               const std::string& sizes_out) {
    auto ds = load_records(input, resolve_format(g.format, input));
    std::vector<FeatureVector> points;
    auto names = detail::sorted_app_names(ds);
    for (const auto& app : names)
        points.push_back(extract_features(normalize(daily_usage(ds, app), g.resample_len)));

    auto result = kmeans(points, k, runs, g.seed);
    std::cerr << "k=" << k << " runs=" << runs << " sse=" << format_double(result.sse) << '\n';

    {
        Sink sink(g.out);
        CsvWriter csv(sink.get());
        csv.field("cluster").field("auc").field("peak").field("slope").field("variance").endrow();
        for (int c = 0; c < result.k; ++c) {
            const auto& ctr = result.centroids[static_cast<std::size_t>(c)];
            csv.field(c).field(ctr.auc).field(ctr.peak).field(ctr.slope).field(ctr.variance).endrow();
        }
    }
    {
        Sink sink(sizes_out);
        CsvWriter csv(sink.get());
        csv.field("cluster").field("size").endrow();
        for (const auto& [c, n] : cluster_size_distribution(result)) csv.field(c).field(n).endrow();
    }
    return 0;
}

int cmd_recommend(const std::string& input, const CommonOpts& g, const std::string& user,
                  std::size_t n, const std::string& as_of_str, bool drop_flops, double boost_hot,
                  std::size_t top_m, const ScoreWeights& weights) {
    auto ds = load_records(input, resolve_format(g.format, input));
    const Day as_of = as_of_str.empty() ? ds.window_end() : parse_day(as_of_str);

    EvalOptions opts;
    opts.N = n;
    opts.top_m = top_m;
    opts.max_users = 0; // every trainable user, so the target is present
    opts.resample_len = g.resample_len;
    opts.threshold = g.threshold;
    opts.marginal_gate = g.marginal_gate;
    opts.weights = weights;
    auto ctx = detail::build_week_context(ds, as_of, opts);

    const UserProfile* profile = nullptr;
    for (const auto& p : ctx.profiles)
        if (p.user_id == user) profile = &p;
    if (!profile) throw std::invalid_argument("cold user: " + user);

    SlopeOneModel model(ctx.profiles, ctx.universe);
    auto ranking = model.recommend(*profile, ctx.universe.size());
    ranking.N = n;

    std::set<TrendKind> drop;
    if (drop_flops) drop.insert(TrendKind::Flop);
    std::map<TrendKind, double> boost;
    if (boost_hot != 1.0) boost[TrendKind::Hot] = boost_hot;
    auto list = trend_filter(ranking, ctx.classification, drop, boost);

    Sink sink(g.out);
    CsvWriter csv(sink.get());
    csv.field("rank").field("app_id").field("P").field("trend_kind").endrow();
    for (std::size_t i = 0; i < list.items.size(); ++i) {
        const auto& [app, p] = list.items[i];
        auto it = ctx.classification.find(app);
        csv.field(i + 1)
            .field(app)
            .field(p)
            .field(to_string(it == ctx.classification.end() ? TrendKind::Unclassified
                                                            : it->second.kind))
            .endrow();
    }
    return 0;
}

int cmd_evaluate(const std::string& input, const CommonOpts& g, int weeks_n, std::size_t n,
                 bool drop_flops, std::size_t top_m, std::size_t max_users,
                 const ScoreWeights& weights) {
    auto ds = load_records(input, resolve_format(g.format, input));
    const int span_days = ds.window_end() - ds.window_start() + 1;
    if (span_days < 7 * weeks_n + 2)
        throw std::invalid_argument("dataset window too short for " + std::to_string(weeks_n) +
                                    " evaluation weeks");
    std::vector<std::pair<Day, Day>> weeks;
    for (int w = 0; w < weeks_n; ++w) {
        const Day start = ds.window_end() - 7 * (weeks_n - w) + 1;
        weeks.push_back({start, start + 6});
    }

    EvalOptions opts;
    opts.N = n;
    opts.top_m = top_m;
    opts.max_users = max_users;
    opts.resample_len = g.resample_len;
    opts.threshold = g.threshold;
    opts.marginal_gate = g.marginal_gate;
    opts.weights = weights;

    const EvalVariant variant = drop_flops ? EvalVariant::flops_removed : EvalVariant::baseline;
    auto reports = weekly_protocol(ds, weeks, n, variant, opts);

    Sink sink(g.out);
    if (variant == EvalVariant::baseline)
        write_evaluation_csv(reports, {}, sink.get());
    else
        write_evaluation_csv({}, reports, sink.get());
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_path, std::string truth_path) {
    auto result = generate(spec);
    {
        auto out = open_output_file(out_path);
        save_jsonl(result.dataset, out);
    }
    if (truth_path.empty()) {
        auto dir = std::filesystem::path(out_path).parent_path();
        truth_path = (dir / "truth.csv").string();
    }
    {
        auto out = open_output_file(truth_path);
        CsvWriter csv(out);
        csv.field("app_id").field("archetype").endrow();
        for (const auto& [app, kind] : result.truth) csv.field(app).field(to_string(kind)).endrow();
    }
    std::cerr << "wrote " << result.dataset.record_count() << " records to " << out_path
              << " and ground truth to " << truth_path << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"app-usage trend mining: retention, trend archetypes and "
                 "trend-aware recommendations"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a usage log and print a summary");
    CommonOpts g_ingest;
    std::string in_ingest, wstart, wend;
    ingest->add_option("input", in_ingest, "Usage log (JSONL or CSV)")->required();
    ingest->add_option("--format", g_ingest.format, "Input format")
        ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    ingest->add_option("--window-start", wstart, "Override the observation window start");
    ingest->add_option("--window-end", wend, "Override the observation window end");
    add_common(ingest, g_ingest, false);

    // retention
    auto* retention = app.add_subcommand("retention", "Per-app retention rates CSV");
    CommonOpts g_ret;
    std::string in_ret;
    std::vector<int> ret_days;
    int quiet_window = 7;
    retention->add_option("input", in_ret)->required();
    retention->add_option("--format", g_ret.format)->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    retention->add_option("--days", ret_days, "Day offsets to report (default 1,3,7)")
        ->delimiter(',');
    retention->add_option("--quiet-window", quiet_window,
                          "Days before the window end excluded from cohorts");
    std::size_t spearman_min_users = 10;
    retention->add_option("--spearman-min-users", spearman_min_users,
                          "Cohort floor for the usage/retention dependency check");
    add_common(retention, g_ret, false);

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "Per-app trend classification CSV");
    CommonOpts g_cls;
    std::string in_cls, protos_path;
    classify_cmd->add_option("input", in_cls)->required();
    classify_cmd->add_option("--format", g_cls.format)
        ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    classify_cmd->add_option("--prototypes", protos_path,
                             "Prototype config file overriding the built-in patterns");
    add_common(classify_cmd, g_cls);

    // consensus
    auto* consensus_cmd = app.add_subcommand("consensus", "Category consensus curve CSV");
    CommonOpts g_cons;
    std::string in_cons, category, relative_app;
    consensus_cmd->add_option("input", in_cons)->required();
    consensus_cmd->add_option("--format", g_cons.format)
        ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    consensus_cmd->add_option("--category", category, "Category to aggregate")->required();
    consensus_cmd->add_option("--relative", relative_app,
                              "Add the relative-performance column for this app");
    add_common(consensus_cmd, g_cons);

    // kmeans
    auto* kmeans_cmd = app.add_subcommand("kmeans", "k-means over app shape features");
    CommonOpts g_km;
    std::string in_km, sizes_out;
    int k = 20, runs = 10;
    kmeans_cmd->add_option("input", in_km)->required();
    kmeans_cmd->add_option("--format", g_km.format)->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    kmeans_cmd->add_option("--k", k, "Cluster count")->check(CLI::PositiveNumber);
    kmeans_cmd->add_option("--runs", runs, "Random restarts")->check(CLI::PositiveNumber);
    kmeans_cmd->add_option("--sizes-out", sizes_out, "Cluster size CSV (default: stdout)");
    add_common(kmeans_cmd, g_km);

    // recommend
    auto* rec_cmd = app.add_subcommand("recommend", "Top-N trend-aware recommendations for a user");
    CommonOpts g_rec;
    std::string in_rec, rec_user, as_of;
    std::size_t rec_n = 20, rec_top_m = 1000;
    bool rec_drop_flops = false;
    double boost_hot = 1.0;
    ScoreWeights rec_weights;
    rec_cmd->add_option("input", in_rec)->required();
    rec_cmd->add_option("--format", g_rec.format)->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    rec_cmd->add_option("--user", rec_user, "Target user id")->required();
    rec_cmd->add_option("--n", rec_n, "List length");
    rec_cmd->add_option("--as-of", as_of, "Cutoff date (default: window end)");
    rec_cmd->add_flag("--drop-flops", rec_drop_flops, "Remove Flop-classified apps");
    rec_cmd->add_option("--boost-hot", boost_hot, "Multiply P of Hot-classified apps");
    rec_cmd->add_option("--top-m", rec_top_m, "Candidate universe size");
    add_weight_opts(rec_cmd, rec_weights);
    add_common(rec_cmd, g_rec);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Incremental weekly recommender evaluation");
    CommonOpts g_eval;
    std::string in_eval;
    int eval_weeks = 4;
    std::size_t eval_n = 20, eval_top_m = 1000, eval_users = 4500;
    bool eval_drop_flops = false;
    ScoreWeights eval_weights;
    eval_cmd->add_option("input", in_eval)->required();
    eval_cmd->add_option("--format", g_eval.format)->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    eval_cmd->add_option("--weeks", eval_weeks, "Test weeks carved from the window end");
    eval_cmd->add_option("--n", eval_n, "List length");
    eval_cmd->add_flag("--drop-flops", eval_drop_flops, "Evaluate the flops_removed variant");
    eval_cmd->add_option("--top-m", eval_top_m, "Candidate universe size");
    eval_cmd->add_option("--eval-users", eval_users, "Most active users considered (0 = all)");
    add_weight_opts(eval_cmd, eval_weights);
    add_common(eval_cmd, g_eval);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
    SynthSpec spec;
    std::string synth_out, truth_out;
    synth_cmd->add_option("--hot", spec.hot, "Hot apps");
    synth_cmd->add_option("--flop", spec.flop, "Flop apps");
    synth_cmd->add_option("--dominant", spec.dominant, "Dominant apps");
    synth_cmd->add_option("--marginal", spec.marginal, "Marginal apps");
    synth_cmd->add_option("--users", spec.users, "User pool size");
    synth_cmd->add_option("--days", spec.days, "Observation days");
    synth_cmd->add_option("--noise", spec.noise_sigma, "Gaussian noise sigma (normalized scale)");
    synth_cmd->add_option("--seed", spec.seed, "Generator seed");
    synth_cmd->add_option("--peak-min", spec.peak_min, "Min peak daily users (non-marginal)");
    synth_cmd->add_option("--peak-max", spec.peak_max, "Max peak daily users (non-marginal)");
    synth_cmd->add_option("--categories", spec.categories, "Synthetic category count");
    synth_cmd->add_option("--out", synth_out, "Output JSONL path")->required();
    synth_cmd->add_option("--truth-out", truth_out, "Ground truth CSV (default: truth.csv beside --out)");

    // report
    auto* report_cmd = app.add_subcommand("report", "Full pipeline: all CSV artifacts + manifest");
    RunConfig cfg;
    std::string report_format = "auto";
    report_cmd->add_option("--input", cfg.input_path, "Usage log")->required();
    report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    report_cmd->add_option("--out", cfg.out_dir, "Output directory")->required();
    report_cmd->add_option("--resample-len", cfg.resample_len)->check(CLI::Range(2, 100000));
    report_cmd->add_option("--threshold", cfg.threshold)->check(CLI::PositiveNumber);
    report_cmd->add_option("--marginal-gate", cfg.marginal_gate);
    report_cmd->add_option("--seed", cfg.seed);
    report_cmd->add_option("--days", cfg.retention_days, "Retention day offsets")->delimiter(',');
    report_cmd->add_option("--quiet-window", cfg.quiet_window);
    report_cmd->add_option("--categories", cfg.consensus_categories,
                           "Categories for consensus CSVs (default: all)")
        ->delimiter(',');
    report_cmd->add_option("--eval-weeks", cfg.eval_weeks);
    report_cmd->add_option("--eval-n", cfg.eval_n);
    report_cmd->add_option("--top-m", cfg.eval_top_m);
    report_cmd->add_option("--eval-users", cfg.eval_max_users);
    add_weight_opts(report_cmd, cfg.weights);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(in_ingest, g_ingest, wstart, wend);
        if (retention->parsed())
            return cmd_retention(in_ret, g_ret, ret_days, quiet_window, spearman_min_users);
        if (classify_cmd->parsed()) return cmd_classify(in_cls, g_cls, protos_path);
        if (consensus_cmd->parsed()) return cmd_consensus(in_cons, g_cons, category, relative_app);
        if (kmeans_cmd->parsed()) return cmd_kmeans(in_km, g_km, k, runs, sizes_out);
        if (rec_cmd->parsed())
            return cmd_recommend(in_rec, g_rec, rec_user, rec_n, as_of, rec_drop_flops, boost_hot,
                                 rec_top_m, rec_weights);
        if (eval_cmd->parsed())
            return cmd_evaluate(in_eval, g_eval, eval_weeks, eval_n, eval_drop_flops, eval_top_m,
                                eval_users, eval_weights);
        if (synth_cmd->parsed()) return cmd_synth(spec, synth_out, truth_out);
        if (report_cmd->parsed()) {
            cfg.format = resolve_format(report_format, cfg.input_path);
            run_report(cfg);
            std::cerr << "report written to " << cfg.out_dir << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
