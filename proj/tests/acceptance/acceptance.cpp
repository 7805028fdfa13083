#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brb/harness/config.hpp"
#include "brb/harness/experiment.hpp"
#include "brb/harness/report.hpp"
#include "brb/harness/suite.hpp"
#include "grad_check.hpp"
#include "property_checks.hpp"

using namespace brb;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Same key/value construction as `brb_cli suite --algorithm A --scenario 2
// --set augment.enabled=true --compare off,brb --out DIR`, so logs written by
// that command are reused here.
std::vector<ExperimentConfig> optdigits_pair(const std::string& algorithm, const std::string& out) {
    std::vector<ExperimentConfig> cfgs;
    for (const char* v : {"off", "brb"}) {
        std::map<std::string, std::string> kv{{"algorithm", algorithm},
                                              {"scenario", "2"},
                                              {"augment.enabled", "true"},
                                              {"brb.variant", v},
                                              {"name", algorithm + "_" + v},
                                              {"output_dir", out}};
        cfgs.push_back(make_config(kv));
    }
    return cfgs;
}

struct PairResult {
    double off = 0.0, brb = 0.0;
    std::size_t failed = 0;
    std::vector<double> off_runs, brb_runs;
};

PairResult optdigits_suite(const std::string& algorithm, const std::string& runs_dir) {
    SuiteOptions opts;
    opts.out_dir = runs_dir;
    opts.reuse_existing = true;
    opts.on_run = [&](const SuiteRun& r) {
        std::fprintf(stderr, "  %s seed %llu acc %.2f%s\n", r.config_name.c_str(), static_cast<unsigned long long>(r.seed),
                     r.log.summary.final_acc, r.reused ? " (cached)" : "");
    };
    const SuiteResult res = run_suite(optdigits_pair(algorithm, runs_dir), {0, 1, 2}, opts);
    PairResult p;
    p.off = res.rows[0].acc.mean;
    p.brb = res.rows[1].acc.mean;
    p.failed = res.rows[0].failed + res.rows[1].failed;
    for (const auto& r : res.runs) (r.config_name.ends_with("_off") ? p.off_runs : p.brb_runs).push_back(r.log.summary.final_acc);
    return p;
}

std::string list(const std::vector<double>& xs) {
    std::string s;
    for (double x : xs) s += (s.empty() ? "" : "/") + fmt("%.1f", x);
    return s;
}

Outcome criterion_1(const std::string& runs) {
    const PairResult p = optdigits_suite("dec", runs);
    const double delta = p.brb - p.off;
    return {p.failed == 0 && delta >= 10.0,
            fmt("optdigits dec: off %.2f (%s) brb %.2f (%s) delta %+.2f, need >= +10", p.off, list(p.off_runs).c_str(),
                p.brb, list(p.brb_runs).c_str(), delta)};
}

Outcome criterion_2(const std::string& runs) {
    const PairResult idec = optdigits_suite("idec", runs);
    const PairResult dcn = optdigits_suite("dcn", runs);
    const double d_idec = idec.brb - idec.off, d_dcn = dcn.brb - dcn.off;
    return {idec.failed + dcn.failed == 0 && d_idec >= 5.0 && d_dcn >= -1.0,
            fmt("optdigits idec: off %.2f (%s) brb %.2f (%s) delta %+.2f, need >= +5; dcn: off %.2f (%s) brb %.2f (%s) "
                "delta %+.2f, need >= -1",
                idec.off, list(idec.off_runs).c_str(), idec.brb, list(idec.brb_runs).c_str(), d_idec, dcn.off,
                list(dcn.off_runs).c_str(), dcn.brb, list(dcn.brb_runs).c_str(), d_dcn)};
}

std::map<std::string, std::string> blobs_kv() {
    return {{"dataset", "blobs"},     {"algorithm", "dcn"},       {"blobs.k", "5"},
            {"blobs.n_per_cluster", "100"}, {"blobs.dim", "2"},   {"blobs.separation", "2.5"},
            {"blobs.spread", "1"},    {"hidden", "32,16"},        {"clustering_epochs", "100"},
            {"batch_size", "64"},     {"eval.geometry_every", "0"}};
}

double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

Outcome criterion_3(const std::string& runs) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ExperimentConfig> cfgs;
    for (const char* v : {"off", "brb"}) {
        auto kv = blobs_kv();
        kv["brb.variant"] = v;
        kv["name"] = std::string("blobs_dcn_") + v;
        cfgs.push_back(make_config(kv));
    }
    SuiteOptions opts;
    opts.out_dir = (std::filesystem::path(runs) / "blobs").string();
    const SuiteResult res = run_suite(cfgs, {0, 1, 2, 3, 4}, opts);
    std::size_t spikes = 0, brb_runs = 0;
    for (const auto& r : res.runs) {
        if (!r.ok || r.config_name != "blobs_dcn_brb") continue;
        ++brb_runs;
        std::set<std::size_t> event_epochs;
        for (const auto& e : r.log.events) event_epochs.insert(e.epoch);
        std::vector<double> at_event, other;
        for (const auto& rec : r.log.records) (event_epochs.count(rec.epoch) ? at_event : other).push_back(rec.cl_change);
        double mean_event = 0.0;
        for (double c : at_event) mean_event += c / static_cast<double>(at_event.size());
        if (!at_event.empty() && mean_event > median(other)) ++spikes;
    }
    const double secs = seconds_since(t0);
    const double off = res.rows[0].acc.mean, brb = res.rows[1].acc.mean;
    const std::size_t failed = res.rows[0].failed + res.rows[1].failed;
    return {failed == 0 && off < 95.0 && brb >= off - 0.5 && spikes >= 4 && secs <= 300.0,
            fmt("blobs dcn: off %.2f (need < 95) brb %.2f (need >= off - 0.5); CL-change spike in %zu/%zu runs (need >= "
                "4); %.1f s (need <= 300)",
                off, brb, spikes, brb_runs, secs)};
}

Outcome criterion_4() {
    const props::MetricOracleReport r = props::metric_oracles(1000, 4);
    return {r.instances == 1000 && r.acc_mismatches == 0 && r.max_ari_err <= 1e-12 && r.max_nmi_err <= 1e-12,
            fmt("%zu instances: acc mismatches %zu, max ari err %.2e, max nmi err %.2e", r.instances, r.acc_mismatches,
                r.max_ari_err, r.max_nmi_err)};
}

Outcome criterion_5() {
    std::size_t checked = 0, failed = 0;
    double worst = 0.0, worst_abs = 0.0;
    std::string first;
    for (Algorithm a : {Algorithm::dec, Algorithm::idec, Algorithm::dcn})
        for (bool aug : {false, true})
            for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
                const gradcheck::Report r = gradcheck::check(a, gradcheck::make_problem(seed), aug);
                checked += r.checked;
                failed += r.failed;
                worst = std::max(worst, r.worst_rel);
                worst_abs = std::max(worst_abs, r.worst_abs);
                if (first.empty() && !r.first_failure.empty()) first = r.first_failure;
            }
    return {failed == 0 && checked > 0,
            fmt("%zu gradient entries over dec/idec/dcn: %zu outside tolerance, worst relative error above the floor %.2e, worst absolute difference %.2e%s%s",
                checked, failed, worst, worst_abs, first.empty() ? "" : "; first: ", first.c_str())};
}

Outcome criterion_6() {
    const props::ResetAlgebraReport r = props::reset_algebra(6);
    return {r.alpha_one_identity && r.out_of_scope_untouched && std::abs(r.mean_z_score) <= 3.0 &&
                std::abs(r.constant_z_score) <= 3.0,
            fmt("alpha=1 identity %s, out-of-scope untouched %s, mean z %.2f and constant-theta z %.2f over %zu entries "
                "(need |z| <= 3)",
                r.alpha_one_identity ? "yes" : "no", r.out_of_scope_untouched ? "yes" : "no", r.mean_z_score,
                r.constant_z_score, r.entries)};
}

Outcome criterion_7() {
    const props::KmeansQualityReport q = props::kmeans_quality(50, 10, 20, 7);
    // wider sweep for the monotone inertia assertion
    std::size_t runs = 0, fires = q.invariant_fires;
    SeededRng rng(77);
    for (int t = 0; t < 400; ++t) {
        ReclusterConfig cfg;
        cfg.k = 2 + rng.uniform_index(7);
        const std::size_t n = cfg.k + rng.uniform_index(300);
        const std::size_t dim = 1 + rng.uniform_index(16);
        DenseMatrix x = sample_gaussian(rng, n, dim, 0.0, 1.0);
        for (std::size_t i = 0; i < n; i += 7) x.row(i)[0] = x.row(0)[0];
        cfg.subsample_size = n;
        try {
            kmeans(x, cfg, rng);
        } catch (const InvariantError&) {
            ++fires;
        }
        ++runs;
    }
    return {q.over_bound == 0 && fires == 0,
            fmt("%zu 2-cluster instances (n <= 10): %zu above 1.05 x optimum, worst ratio %.4f; inertia assertion fired "
                "%zu times over %zu extra runs",
                q.instances, q.over_bound, q.worst_ratio, fires, runs)};
}

Outcome criterion_8(const std::string& runs) {
    const ExperimentConfig cfg = make_config({{"algorithm", "idec"},
                                              {"scenario", "2"},
                                              {"augment.enabled", "true"},
                                              {"brb.interval", "20"},
                                              {"brb.subsample", "1000"},
                                              {"clustering_epochs", "100"},
                                              {"name", "timing"},
                                              {"output_dir", runs}});
    const ExperimentLog log = run_experiment(cfg, suite_log_path(runs, "timing", cfg.seed));
    const TimingReport t = timing_report(log);
    return {t.events > 0 && t.share_percent <= 5.0,
            fmt("optdigits idec, T=20, N=1000, %zu events: BRB share %.2f%% (need <= 5), amortised overhead %.2f%%, "
                "mean event %.3f s, mean epoch %.3f s",
                t.events, t.share_percent, t.overhead_percent, t.mean_event_sec, t.mean_epoch_sec)};
}

std::vector<std::string> canonical(const std::string& path) {
    std::vector<std::string> out;
    for (const auto& j : read_jsonl(path)) out.push_back(strip_timing(j).dump());
    return out;
}

Outcome criterion_9(const std::string& runs) {
    const auto dir = std::filesystem::path(runs) / "determinism";
    std::vector<std::map<std::string, std::string>> kvs;
    for (const char* a : {"dec", "idec", "dcn"}) {
        auto kv = blobs_kv();
        kv["algorithm"] = a;
        kv["clustering_epochs"] = "45";
        kv["augment.enabled"] = "true";
        kv["augment.jitter_std"] = "0.05";
        kv["eval.geometry_every"] = "5";
        kv["eval.ratio_hist_every"] = "10";
        kv["seed"] = "3";
        kv["name"] = std::string("blobs_") + a;
        kvs.push_back(kv);
    }
    kvs.push_back({{"algorithm", "idec"},
                   {"scenario", "1"},
                   {"pretrain_epochs", "2"},
                   {"augment.enabled", "true"},
                   {"clustering_epochs", "21"},
                   {"brb.subsample", "1000"},
                   {"seed", "9"},
                   {"name", "optdigits_idec"}});
    std::size_t identical = 0, lines = 0;
    std::string mismatch;
    for (const auto& kv : kvs) {
        const ExperimentConfig cfg = make_config(kv);
        const std::string a = (dir / (cfg.name + "_a.jsonl")).string(), b = (dir / (cfg.name + "_b.jsonl")).string();
        run_experiment(cfg, a);
        run_experiment(cfg, b);
        const auto la = canonical(a), lb = canonical(b);
        lines += la.size();
        if (la == lb) ++identical;
        else if (mismatch.empty()) mismatch = cfg.name;
    }
    return {identical == kvs.size(),
            fmt("%zu/%zu configurations rerun with identical logs modulo timing (%zu lines)%s%s", identical, kvs.size(),
                lines, mismatch.empty() ? "" : "; first mismatch: ", mismatch.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string runs = "acceptance_runs";
    std::vector<int> only;
    app.add_option("--runs", runs, "directory holding cached experiment logs");
    app.add_option("--only", only, "run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"optdigits dec gain", [&] { return criterion_1(runs); }},
        {"optdigits idec gain and dcn non-regression", [&] { return criterion_2(runs); }},
        {"synthetic blobs regression", [&] { return criterion_3(runs); }},
        {"metric oracle equivalence", criterion_4},
        {"gradient suite", criterion_5},
        {"reset algebra", criterion_6},
        {"k-means quality", criterion_7},
        {"runtime overhead", [&] { return criterion_8(runs); }},
        {"determinism", [&] { return criterion_9(runs); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
