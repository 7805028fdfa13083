#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/harness/experiment.hpp"
#include "brb/harness/report.hpp"

namespace brb {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
    std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd m;
    m.n = xs.size();
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return m;
}

struct SuiteRun {
    std::string config_name;
    std::uint64_t seed = 0;
    std::string log_path;
    bool ok = false;
    bool reused = false;
    std::string error;
    ExperimentLog log;
};

struct SuiteRow {
    std::string name;
    std::size_t runs = 0;
    std::size_t failed = 0;
    MeanStd acc, nmi, ari, best_acc;
    double delta_acc = 0.0;  // mean(acc) - mean(baseline acc)
    double delta_nmi = 0.0;
    double delta_ari = 0.0;
    bool is_baseline = false;
};

struct SuiteResult {
    std::vector<SuiteRun> runs;
    std::vector<SuiteRow> rows;
};

struct SuiteOptions {
    std::string out_dir = "runs";
    std::string baseline;          // config name; empty: first config
    bool reuse_existing = false;   // keep completed logs whose config echo matches
    std::function<void(const SuiteRun&)> on_run;  // progress callback
};

inline std::string suite_log_path(const std::string& out_dir, const std::string& name, std::uint64_t seed) {
    return (std::filesystem::path(out_dir) / name / ("seed_" + std::to_string(seed) + ".jsonl")).string();
}

// A finished log is reusable when it completed and was produced by exactly
// this configuration.
inline bool reusable_log(const std::string& path, const ExperimentConfig& cfg, ExperimentLog& out) {
    if (!std::filesystem::exists(path)) return false;
    try {
        ExperimentLog log = load_log(path);
        if (!log.summary.ok || log.config != cfg.echo) return false;
        out = std::move(log);
        return true;
    } catch (const Error&) {
        return false;
    }
}

inline std::vector<SuiteRow> summarize_runs(const std::vector<std::string>& names, const std::vector<SuiteRun>& runs,
                                            const std::string& baseline) {
    std::vector<SuiteRow> rows;
    for (const auto& name : names) {
        SuiteRow row;
        row.name = name;
        std::vector<double> acc, nmi_v, ari_v, best;
        for (const auto& r : runs) {
            if (r.config_name != name) continue;
            ++row.runs;
            if (!r.ok) {
                ++row.failed;
                continue;
            }
            acc.push_back(r.log.summary.final_acc);
            nmi_v.push_back(r.log.summary.final_nmi);
            ari_v.push_back(r.log.summary.final_ari);
            best.push_back(r.log.summary.best_acc);
        }
        row.acc = mean_std(acc);
        row.nmi = mean_std(nmi_v);
        row.ari = mean_std(ari_v);
        row.best_acc = mean_std(best);
        rows.push_back(row);
    }
    const std::string base = baseline.empty() && !names.empty() ? names.front() : baseline;
    const SuiteRow* b = nullptr;
    for (const auto& r : rows)
        if (r.name == base) b = &r;
    if (b == nullptr) throw ConfigError("suite baseline '" + base + "' is not among the configurations");
    const SuiteRow baseline_row = *b;
    for (auto& r : rows) {
        r.is_baseline = r.name == base;
        r.delta_acc = r.acc.mean - baseline_row.acc.mean;
        r.delta_nmi = r.nmi.mean - baseline_row.nmi.mean;
        r.delta_ari = r.ari.mean - baseline_row.ari.mean;
    }
    return rows;
}

// Runs every configuration for every seed (sequentially) and summarises
// final ACC/NMI/ARI per configuration. Failed runs are flagged, not fatal.
inline SuiteResult run_suite(const std::vector<ExperimentConfig>& configs, const std::vector<std::uint64_t>& seeds,
                             const SuiteOptions& opts) {
    if (configs.empty()) throw ConfigError("suite needs at least one configuration");
    if (seeds.empty()) throw ConfigError("suite needs at least one seed");
    std::vector<std::string> names;
    for (const auto& c : configs) {
        if (std::find(names.begin(), names.end(), c.name) != names.end())
            throw ConfigError("duplicate suite configuration name '" + c.name + "'");
        names.push_back(c.name);
    }
    SuiteResult result;
    for (const auto& base : configs)
        for (std::uint64_t seed : seeds) {
            std::map<std::string, std::string> kv = base.echo.empty() ? effective_kv(base) : base.echo;
            kv["seed"] = std::to_string(seed);
            const ExperimentConfig cfg = make_config(kv);
            SuiteRun run;
            run.config_name = cfg.name;
            run.seed = seed;
            run.log_path = suite_log_path(opts.out_dir, cfg.name, seed);
            if (opts.reuse_existing && reusable_log(run.log_path, cfg, run.log)) {
                run.ok = true;
                run.reused = true;
            } else {
                try {
                    run.log = run_experiment(cfg, run.log_path);
                    run.ok = true;
                } catch (const std::exception& e) {
                    run.ok = false;
                    run.error = e.what();
                }
            }
            if (opts.on_run) opts.on_run(run);
            result.runs.push_back(std::move(run));
        }
    result.rows = summarize_runs(names, result.runs, opts.baseline);
    return result;
}

inline void write_suite_csv(const std::vector<SuiteRow>& rows, const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write '" + path + "'");
    std::fprintf(f, "config,runs,failed,acc_mean,acc_std,nmi_mean,nmi_std,ari_mean,ari_std,best_acc_mean,"
                    "delta_acc,delta_nmi,delta_ari,baseline\n");
    for (const auto& r : rows)
        std::fprintf(f, "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", r.name.c_str(), r.runs,
                     r.failed, r.acc.mean, r.acc.std, r.nmi.mean, r.nmi.std, r.ari.mean, r.ari.std, r.best_acc.mean,
                     r.delta_acc, r.delta_nmi, r.delta_ari, r.is_baseline ? 1 : 0);
    if (std::fclose(f) != 0) throw IoError("error closing '" + path + "'");
}

}  // namespace brb
