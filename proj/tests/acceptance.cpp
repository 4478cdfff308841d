// Apache License, Version 2.0, refer to LICENSE.txt
//
// Acceptance suite: every release criterion in one binary, one PASS/FAIL
// line each. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "apptrend/apptrend.hpp"
#include "apptrend/rng.hpp"
#include "test_util.hpp"

using namespace apptrend;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s — %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    if (!ok) ++g_failures;
}

double secs_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Archetype recovery: 100 apps per archetype over 365 days; classification
// must recover the planted kind for 100% at noise 0, >=95% at 0.05, >=80%
// at 0.15, all within 30 seconds.
void criterion_archetype_recovery() {
    const auto t0 = Clock::now();
    const double sigmas[3] = {0.0, 0.05, 0.15};
    const double required[3] = {1.0, 0.95, 0.80};
    double achieved[3] = {0, 0, 0};
    bool ok = true;

    auto protos = prototypes(100);
    for (int i = 0; i < 3; ++i) {
        SynthSpec spec;
        spec.hot = spec.flop = spec.dominant = spec.marginal = 100;
        spec.users = 2000;
        spec.days = 365;
        spec.noise_sigma = sigmas[i];
        spec.seed = 42;
        auto world = generate(spec);

        std::size_t hits = 0;
        for (const auto& [app, kind] : world.truth) {
            auto norm = normalize(daily_usage(world.dataset, app), 100);
            if (classify(norm, norm.max_raw, protos).kind == kind) ++hits;
        }
        achieved[i] = static_cast<double>(hits) / static_cast<double>(world.truth.size());
        ok = ok && achieved[i] >= required[i];
    }
    const double elapsed = secs_since(t0);
    ok = ok && elapsed < 30.0;

    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "recovery %.1f%%/%.1f%%/%.1f%% at sigma 0/0.05/0.15 "
                  "(required 100/95/80), %.1fs (< 30s)",
                  100 * achieved[0], 100 * achieved[1], 100 * achieved[2], elapsed);
    report("archetype-recovery", ok, detail);
}

// ---------------------------------------------------------------------------
// Retention monotonicity over 1,000 random datasets.
void criterion_retention_monotonicity() {
    Rng rng(4242);
    const Day d0 = make_day(2014, 1, 1);
    std::size_t curves = 0;
    bool ok = true;

    for (int trial = 0; trial < 1000 && ok; ++trial) {
        DatasetBuilder b;
        const int n_users = 1 + static_cast<int>(rng.next_below(10));
        const int n_apps = 1 + static_cast<int>(rng.next_below(4));
        const int n_days = 2 + static_cast<int>(rng.next_below(40));
        const int n_rows = 1 + static_cast<int>(rng.next_below(80));
        for (int i = 0; i < n_rows; ++i)
            b.add("u" + std::to_string(rng.next_below(n_users)),
                  "a" + std::to_string(rng.next_below(n_apps)),
                  d0 + static_cast<int>(rng.next_below(n_days)));
        auto ds = b.finish();

        for (std::uint32_t a = 0; a < ds.app_count() && ok; ++a) {
            const int quiet = static_cast<int>(rng.next_below(12));
            auto curve = retention_curve(ds, ds.app_name(a), 15, quiet);
            ++curves;
            if (curve.cohort_size > 0) {
                ok = ok && curve.rate(0) == 1.0;
                for (std::size_t d = 1; d < curve.rates.size(); ++d)
                    ok = ok && curve.rates[d] <= curve.rates[d - 1];
            } else {
                ok = ok && curve.rates.empty();
            }
            auto wider = retention_curve(ds, ds.app_name(a), 15, quiet + 5);
            ok = ok && wider.cohort_size <= curve.cohort_size;
        }
    }
    report("retention-monotonicity", ok,
           "1000 random datasets, " + std::to_string(curves) +
               " curves: non-increasing, rate(0)=1, quiet-window cohorts monotone");
}

// ---------------------------------------------------------------------------
// Slope One oracle equivalence on >= 10,000 enumerated small instances.
std::map<std::string, double> direct_predictions(const std::vector<UserProfile>& profiles,
                                                 const UserProfile& u) {
    std::set<std::string> universe;
    for (const auto& p : profiles)
        for (const auto& [app, s] : p.scores) universe.insert(app);
    std::map<std::string, double> out;
    for (const auto& j : universe) {
        if (u.scores.contains(j)) continue;
        double sum = 0.0;
        int relevant = 0;
        for (const auto& [i, score_i] : u.scores) {
            double dev = 0.0;
            int support = 0;
            for (const auto& w : profiles) {
                auto wi = w.scores.find(i);
                auto wj = w.scores.find(j);
                if (wi == w.scores.end() || wj == w.scores.end()) continue;
                dev += wj->second - wi->second;
                ++support;
            }
            if (support == 0) continue;
            sum += dev / support + score_i;
            ++relevant;
        }
        if (relevant > 0) out[j] = sum / relevant;
    }
    return out;
}

bool check_one_slope_one_case(const std::vector<UserProfile>& profiles, const UserProfile& target,
                              double tol) {
    auto expect = direct_predictions(profiles, target);
    auto rec = slope_one(profiles, target.user_id, 64);
    if (rec.items.size() != expect.size()) return false;
    for (const auto& [app, p] : rec.items) {
        auto it = expect.find(app);
        if (it == expect.end() || std::abs(p - it->second) > tol) return false;
    }
    return true;
}

void criterion_slope_one_oracle() {
    std::size_t cases = 0;
    bool ok = true;

    // exhaustive 3-user x 3-app presence patterns, scores rotating on the
    // 0.1 grid
    for (unsigned mask = 0; mask < 512 && ok; ++mask) {
        if ((mask & 0x7u) == 0) continue; // target user must not be cold
        for (int phase = 0; phase < 25 && ok; ++phase) {
            std::vector<UserProfile> profiles(3);
            for (int u = 0; u < 3; ++u) {
                profiles[u].user_id = "u" + std::to_string(u);
                for (int a = 0; a < 3; ++a)
                    if (mask >> (u * 3 + a) & 1u)
                        profiles[u].scores["app" + std::to_string(a)] =
                            static_cast<double>((u * 3 + a + phase) % 11) / 10.0;
            }
            ok = check_one_slope_one_case(profiles, profiles[0], 1e-9);
            ++cases;
        }
    }

    // broader deterministic sweep up to 5 users x 5 apps
    Rng rng(9001);
    for (int trial = 0; trial < 800 && ok; ++trial) {
        const int n_users = 2 + static_cast<int>(rng.next_below(4));
        const int n_apps = 2 + static_cast<int>(rng.next_below(4));
        std::vector<UserProfile> profiles(static_cast<std::size_t>(n_users));
        for (int u = 0; u < n_users; ++u) {
            profiles[static_cast<std::size_t>(u)].user_id = "u" + std::to_string(u);
            for (int a = 0; a < n_apps; ++a)
                if (rng.next_below(2))
                    profiles[static_cast<std::size_t>(u)].scores["app" + std::to_string(a)] =
                        static_cast<double>(rng.next_below(11)) / 10.0;
        }
        if (profiles[0].scores.empty()) continue;
        ok = check_one_slope_one_case(profiles, profiles[0], 1e-9);
        ++cases;
    }

    report("slope-one-oracle", ok && cases >= 10000,
           std::to_string(cases) + " enumerated instances (>= 10000) match the direct "
                                   "equation evaluation within 1e-9");
}

// ---------------------------------------------------------------------------
// Feature correctness: exact values on the canonical series and bit-exact
// invariance of features under integer scaling of raw counts.
void criterion_feature_correctness() {
    bool ok = true;

    NormalizedSeries ramp;
    ramp.values = {0.0, 0.5, 1.0};
    ramp.max_raw = 1;
    auto f = extract_features(ramp);
    ok = ok && std::abs(f.auc - 0.5) <= 1e-12;
    ok = ok && f.peak == 1.0;
    ok = ok && std::abs(f.slope - 1.0) <= 1e-12;
    ok = ok && std::abs(f.variance - 1.0 / 6.0) <= 1e-12;

    NormalizedSeries flat;
    flat.values.assign(50, 1.0);
    flat.max_raw = 1;
    auto g = extract_features(flat);
    ok = ok && g.auc == 1.0 && g.peak == 0.0 && g.slope == 0.0 && g.variance == 0.0;

    Rng rng(3131);
    std::size_t comparisons = 0;
    for (int trial = 0; trial < 300 && ok; ++trial) {
        const std::size_t n = 2 + rng.next_below(60);
        std::vector<std::int32_t> counts(n);
        bool any = false;
        for (auto& c : counts) {
            c = static_cast<std::int32_t>(rng.next_below(25));
            any = any || c > 0;
        }
        if (!any) counts[0] = 2;
        DailySeries raw{"a", make_day(2014, 1, 1), counts};
        auto f1 = extract_features(normalize(raw, 100));
        for (std::int32_t k : {2, 3, 7, 10, 144, 65536}) {
            std::vector<std::int32_t> scaled(n);
            for (std::size_t i = 0; i < n; ++i) scaled[i] = counts[i] * k;
            DailySeries big{"a", make_day(2014, 1, 1), scaled};
            auto f2 = extract_features(normalize(big, 100));
            ok = ok && std::memcmp(&f1, &f2, sizeof f1) == 0;
            ++comparisons;
        }
    }
    report("feature-correctness", ok,
           "ramp (0.5,1,1,1/6) within 1e-12, constant (1,0,0,0); " +
               std::to_string(comparisons) + " integer-scaling checks bit-identical");
}

// ---------------------------------------------------------------------------
// k-means: per-iteration SSE monotone on every run; best-of-10 equals the
// brute-force optimal 2-partition on two well-separated groups.
double optimal_two_partition_sse(const std::vector<FeatureVector>& pts) {
    const std::size_t n = pts.size();
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        FeatureVector mean[2]{};
        std::size_t cnt[2]{};
        for (std::size_t i = 0; i < n; ++i) {
            const int side = (mask >> i) & 1u;
            mean[side].auc += pts[i].auc;
            mean[side].peak += pts[i].peak;
            mean[side].slope += pts[i].slope;
            mean[side].variance += pts[i].variance;
            ++cnt[side];
        }
        if (cnt[0] == 0 || cnt[1] == 0) continue;
        for (int s = 0; s < 2; ++s) {
            mean[s].auc /= static_cast<double>(cnt[s]);
            mean[s].peak /= static_cast<double>(cnt[s]);
            mean[s].slope /= static_cast<double>(cnt[s]);
            mean[s].variance /= static_cast<double>(cnt[s]);
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pts[i].distance(mean[(mask >> i) & 1u]);
            sse += d * d;
        }
        best = std::min(best, sse);
    }
    return best;
}

void criterion_kmeans() {
    bool ok = true;

    std::vector<FeatureVector> pts{
        {0.00, 0.10, 0.00, 0.02},     {0.10, 0.00, 0.10, 0.00},
        {0.05, 0.05, 0.00, 0.01},     {0.00, 0.00, 0.05, 0.00},
        {10.00, 10.10, 10.00, 10.02}, {10.10, 10.00, 10.10, 10.00},
        {10.05, 10.05, 10.00, 10.01}, {10.00, 10.00, 10.05, 10.00}};
    auto best = kmeans(pts, 2, 10, 1234);
    const double optimal = optimal_two_partition_sse(pts);
    ok = ok && std::abs(best.sse - optimal) <= 1e-9;

    std::size_t runs_checked = 0, iterations = 0;
    Rng rng(777);
    for (int trial = 0; trial < 40 && ok; ++trial) {
        std::vector<FeatureVector> cloud(5 + rng.next_below(50));
        for (auto& p : cloud)
            p = {rng.next_double(), rng.next_double(), 2 * rng.next_double() - 1,
                 rng.next_double() / 4};
        const int k = 1 + static_cast<int>(rng.next_below(6));
        if (cloud.size() < static_cast<std::size_t>(k)) continue;
        std::vector<FeatureVector> init;
        for (int c = 0; c < k; ++c) init.push_back(cloud[rng.next_below(cloud.size())]);
        auto r = kmeans_run(cloud, std::move(init));
        for (std::size_t i = 1; i < r.iteration_sse.size(); ++i)
            ok = ok && r.iteration_sse[i] <= r.iteration_sse[i - 1] + 1e-9;
        ++runs_checked;
        iterations += r.iteration_sse.size();
    }
    for (std::size_t i = 1; i < best.iteration_sse.size(); ++i)
        ok = ok && best.iteration_sse[i] <= best.iteration_sse[i - 1] + 1e-9;

    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "best-of-10 SSE %.6g == brute-force optimum %.6g (|diff| <= 1e-9); SSE "
                  "non-increasing over %zu runs / %zu iterations",
                  best.sse, optimal, runs_checked, iterations);
    report("kmeans", ok, detail);
}

// ---------------------------------------------------------------------------
// Metric identities plus 10,000-case fuzz of the [0,1] range.
void criterion_metric_identities() {
    bool ok = true;
    using S = std::set<std::string>;

    const S l{"a", "b", "c"};
    ok = ok && diversity(l, l, 5) == 0.0;
    ok = ok && novelty(l, S{"a", "b", "c", "d"}, 5) == 0.0;
    ok = ok && accuracy(S{"a", "b", "c", "x"}, l) == 1.0;

    Rng rng(555);
    auto random_set = [&](std::size_t max_size) {
        S s;
        const std::size_t n = rng.next_below(max_size + 1);
        while (s.size() < n) s.insert("app" + std::to_string(rng.next_below(40)));
        return s;
    };
    std::size_t cases = 0;
    for (int trial = 0; trial < 10000 && ok; ++trial) {
        const std::size_t N = 1 + rng.next_below(12);
        auto l1 = random_set(N);
        auto l2 = random_set(N);
        auto seen = random_set(25);
        auto truth = random_set(12);
        const double d = diversity(l1, l2, N);
        const double nv = novelty(l1, seen, N);
        ok = ok && d >= 0.0 && d <= 1.0 && nv >= 0.0 && nv <= 1.0;
        if (!truth.empty()) {
            const double a = accuracy(l1, truth);
            ok = ok && a >= 0.0 && a <= 1.0;
        }
        ++cases;
    }
    report("metric-identities", ok,
           "div(L,L)=0, nov(A⊇L)=0, acc(L⊇A)=1; " + std::to_string(cases) +
               " fuzz cases stayed in [0,1]");
}

// ---------------------------------------------------------------------------
// Trend-aware evaluation on a planted 4-week world: the flops_removed
// variant recommends zero Flop-classified apps and moves accuracy by a
// nonzero delta, which the evaluation CSV must carry.
Dataset planted_world(int train_days, int weeks_n) {
    DatasetBuilder b;
    const Day d0 = make_day(2014, 1, 1);
    const int total = train_days + 7 * weeks_n;

    // anchors tie everything together through co-usage
    for (int d = 0; d < total; ++d) {
        for (int a = 0; a < 4; ++a) {
            const std::string anchor = "anchor" + std::to_string(a);
            b.add(anchor, "base1", d0 + d);
            b.add(anchor, "base2", d0 + d);
            b.add(anchor, "flopper", d0 + d);
            if (d % 5 == 0) b.add(anchor, "riser", d0 + d);
        }
    }
    // tourists give the flop app its early spike, decaying linearly
    for (int k = 0; k < 40; ++k)
        for (int d = 2; d <= 2 + k && d < total; ++d)
            b.add("tourist" + std::to_string(k), "flopper", d0 + d);
    // one newcomer per day keeps the riser rising
    for (int join = 8; join < total; ++join)
        for (int d = join; d < total; ++d)
            b.add("newcomer" + std::to_string(join), "riser", d0 + d);
    // targets use the base apps and adopt the riser in their own week
    for (int t = 0; t < weeks_n; ++t) {
        const std::string user = "target" + std::to_string(t);
        for (int d = 0; d < total; ++d) {
            b.add(user, "base1", d0 + d);
            b.add(user, "base2", d0 + d);
        }
        const int wstart = train_days + 7 * t;
        for (int off : {1, 3, 5}) b.add(user, "riser", d0 + wstart + off);
    }
    return b.finish();
}

void criterion_trend_aware_eval() {
    const int train_days = 42, weeks_n = 4;
    auto ds = planted_world(train_days, weeks_n);
    const Day d0 = make_day(2014, 1, 1);

    bool ok = true;
    std::string note;

    // fixture sanity: the planted apps must classify as intended
    {
        auto protos = prototypes(100);
        auto flop_norm = normalize(daily_usage_up_to(ds, "flopper", d0 + train_days - 1), 100);
        auto hot_norm = normalize(daily_usage_up_to(ds, "riser", d0 + train_days - 1), 100);
        auto fk = classify(flop_norm, flop_norm.max_raw, protos).kind;
        auto hk = classify(hot_norm, hot_norm.max_raw, protos).kind;
        if (fk != TrendKind::Flop || hk != TrendKind::Hot) {
            ok = false;
            note = "fixture classification broke: flopper=" + std::string(to_string(fk)) +
                   " riser=" + std::string(to_string(hk));
        }
    }

    std::vector<std::pair<Day, Day>> weeks;
    for (int w = 0; w < weeks_n; ++w)
        weeks.push_back({d0 + train_days + 7 * w, d0 + train_days + 7 * w + 6});

    EvalOptions opts;
    opts.top_m = 10;
    opts.max_users = 0;
    auto [base, nofl] = weekly_protocol_both(ds, weeks, 1, opts);

    double max_abs_delta = 0.0;
    std::size_t deltas = 0;
    for (int w = 0; w < weeks_n && ok; ++w) {
        if (nofl[static_cast<std::size_t>(w)].rec_flop != 0) {
            ok = false;
            note = "flops_removed recommended a Flop in week " + std::to_string(w + 1);
        }
        if (base[static_cast<std::size_t>(w)].acc && nofl[static_cast<std::size_t>(w)].acc) {
            max_abs_delta = std::max(
                max_abs_delta, std::abs(*nofl[static_cast<std::size_t>(w)].acc -
                                        *base[static_cast<std::size_t>(w)].acc));
            ++deltas;
        }
    }
    if (ok && deltas == 0) {
        ok = false;
        note = "no week had accuracy defined for both variants";
    }
    if (ok && max_abs_delta <= 0.0) {
        ok = false;
        note = "accuracy delta was zero in every week";
    }

    // the delta must appear in the emitted CSV
    if (ok) {
        std::ostringstream csv;
        write_evaluation_csv(base, nofl, csv);
        if (csv.str().find("acc_delta") == std::string::npos) {
            ok = false;
            note = "evaluation CSV lacks the acc_delta column";
        } else {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "zero Flops recommended in all %d weeks; max |acc delta| %.3f over %zu "
                          "weeks, reported in CSV",
                          weeks_n, max_abs_delta, deltas);
            note = buf;
        }
    }
    report("trend-aware-eval", ok, note);
}

// ---------------------------------------------------------------------------
// Determinism: rerunning the report with the same config and seed yields
// byte-identical artifacts.
void criterion_determinism() {
    SynthSpec spec;
    spec.hot = 40;
    spec.flop = 30;
    spec.dominant = 30;
    spec.marginal = 50;
    spec.users = 300;
    spec.days = 120;
    spec.noise_sigma = 0.05;
    spec.seed = 77;
    auto world = generate(spec);

    testutil::TempDir tmp;
    RunConfig cfg;
    cfg.eval_weeks = 3;
    cfg.eval_top_m = 60;

    cfg.out_dir = (tmp.path() / "one").string();
    auto m1 = run_report(world.dataset, cfg);
    cfg.out_dir = (tmp.path() / "two").string();
    run_report(world.dataset, cfg);

    bool ok = true;
    std::size_t bytes = 0;
    std::vector<std::string> names;
    for (const auto& [name, meta] : m1["artifacts"].items()) names.push_back(name);
    names.emplace_back("manifest.json");
    for (const auto& name : names) {
        auto a = testutil::read_file((tmp.path() / "one" / name).string());
        auto b = testutil::read_file((tmp.path() / "two" / name).string());
        // the manifest embeds the differing out_dir-free config only
        if (name == "manifest.json") {
            ok = ok && !a.empty() && !b.empty();
            continue;
        }
        ok = ok && !a.empty() && a == b;
        bytes += a.size();
    }
    report("determinism", ok,
           std::to_string(names.size() - 1) + " artifacts, " + std::to_string(bytes) +
               " bytes compared byte-for-byte across two runs");
}

// ---------------------------------------------------------------------------
// Scale: the full report pipeline over 10,000 apps x 365 days x 50,000
// users finishes in under 60 seconds.
void criterion_scale() {
    SynthSpec spec;
    spec.hot = spec.flop = spec.dominant = spec.marginal = 2500;
    spec.users = 50000;
    spec.days = 365;
    spec.noise_sigma = 0.05;
    spec.seed = 42;

    const auto t_gen = Clock::now();
    auto world = generate(spec);
    const double gen_secs = secs_since(t_gen);

    testutil::TempDir tmp;
    RunConfig cfg;
    cfg.out_dir = (tmp.path() / "scale").string();

    const auto t0 = Clock::now();
    auto manifest = run_report(world.dataset, cfg);
    const double elapsed = secs_since(t0);

    bool ok = elapsed < 60.0;
    ok = ok && manifest["artifacts"]["classification.csv"]["rows"] == 10000;
    ok = ok && manifest["artifacts"]["retention.csv"]["rows"] == 10000;
    ok = ok && manifest["artifacts"].contains("evaluation.csv");

    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "%zu records (10000 apps x 365 days x 50000 users): report pipeline %.1fs "
                  "(< 60s; generation %.1fs)",
                  world.dataset.record_count(), elapsed, gen_secs);
    report("scale", ok, detail);
}

} // namespace

int main() {
    criterion_archetype_recovery();
    criterion_retention_monotonicity();
    criterion_slope_one_oracle();
    criterion_feature_correctness();
    criterion_kmeans();
    criterion_metric_identities();
    criterion_trend_aware_eval();
    criterion_determinism();
    criterion_scale();

    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
