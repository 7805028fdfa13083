#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brb/harness/config.hpp"
#include "brb/harness/experiment.hpp"
#include "brb/harness/report.hpp"
#include "brb/harness/suite.hpp"

namespace {

enum exit_code { ok = 0, failure = 1, config_error = 2, numerical_error = 3, io_error = 4 };

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> scenario;
    std::optional<std::string> algorithm;
    std::optional<std::string> variant;
    std::optional<double> alpha;
    std::optional<std::size_t> interval;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "key = value configuration file");
    app->add_option("--seed", f.seed, "experiment seed");
    app->add_option("--scenario", f.scenario, "1: pretrain then cluster, 2: cluster from scratch")
        ->check(CLI::IsMember({1, 2}));
    app->add_option("--algorithm", f.algorithm, "dec | idec | dcn");
    app->add_option("--variant", f.variant, "brb | reset_only | recluster_only | disentangled | noise | off");
    app->add_option("--alpha", f.alpha, "soft reset interpolation factor");
    app->add_option("--interval", f.interval, "BRB interval T in epochs");
    app->add_option("--set", f.sets, "override any config key (key=value), repeatable");
}

std::map<std::string, std::string> collect_kv(const CommonFlags& f) {
    std::map<std::string, std::string> kv;
    if (!f.config.empty()) kv = brb::read_kv_file(f.config);
    if (f.seed) kv["seed"] = std::to_string(*f.seed);
    if (f.scenario) kv["scenario"] = std::to_string(*f.scenario);
    if (f.algorithm) kv["algorithm"] = *f.algorithm;
    if (f.variant) kv["brb.variant"] = *f.variant;
    if (f.alpha) {
        std::ostringstream s;
        s.precision(17);
        s << *f.alpha;
        kv["brb.alpha"] = s.str();
    }
    if (f.interval) kv["brb.interval"] = std::to_string(*f.interval);
    for (const auto& s : f.sets) {
        auto [k, v] = brb::split_override(s);
        kv[k] = v;
    }
    return kv;
}

void print_summary(const brb::RunSummary& s) {
    std::printf("final acc %.2f  nmi %.2f  ari %.2f  best acc %.2f  brb events %zu  (%.1fs pretrain, %.1fs clustering)\n",
                s.final_acc, s.final_nmi, s.final_ari, s.best_acc, s.brb_events, s.pretrain_sec, s.clustering_sec);
}

int cmd_run(const CommonFlags& f, const std::string& out, const std::string& checkpoint, const std::string& export_path) {
    auto kv = collect_kv(f);
    if (!out.empty()) kv["output_dir"] = out;
    const brb::ExperimentConfig cfg = brb::make_config(kv);
    const std::string log_path = (std::filesystem::path(cfg.output_dir) / "log.jsonl").string();
    brb::TrainingState state;
    const brb::ExperimentLog log = brb::run_experiment(cfg, log_path, &state);
    print_summary(log.summary);
    std::printf("log written to %s\n", log_path.c_str());
    if (!checkpoint.empty()) {
        brb::save_checkpoint({log.config, state.params, state.clusters}, checkpoint);
        std::printf("checkpoint written to %s\n", checkpoint.c_str());
    }
    if (!export_path.empty()) {
        brb::RngStreams rngs(cfg.seed);
        const brb::Dataset ds = brb::load_dataset(cfg, rngs.data);
        brb::export_embeddings(state.params, state.clusters, cfg.algorithm, ds, export_path);
        std::printf("embeddings written to %s\n", export_path.c_str());
    }
    return ok;
}

int cmd_suite(const CommonFlags& f, const std::string& out, const std::vector<std::string>& compare,
              const std::vector<std::uint64_t>& seeds, const std::string& baseline, bool reuse) {
    const auto base_kv = collect_kv(f);
    std::vector<brb::ExperimentConfig> configs;
    const std::vector<std::string> variants = compare.empty() ? std::vector<std::string>{"off", "brb"} : compare;
    for (const auto& v : variants) {
        auto kv = base_kv;
        kv["brb.variant"] = v;
        const std::string algo = kv.count("algorithm") ? kv["algorithm"] : "dec";
        kv["name"] = algo + "_" + v;
        kv["output_dir"] = out;
        configs.push_back(brb::make_config(kv));
    }
    brb::SuiteOptions opts;
    opts.out_dir = out;
    opts.baseline = baseline.empty() ? configs.front().name : baseline;
    opts.reuse_existing = reuse;
    opts.on_run = [](const brb::SuiteRun& r) {
        if (r.ok)
            std::printf("%-24s seed %-4llu acc %6.2f%s\n", r.config_name.c_str(), static_cast<unsigned long long>(r.seed),
                        r.log.summary.final_acc, r.reused ? "  (reused)" : "");
        else
            std::printf("%-24s seed %-4llu FAILED: %s\n", r.config_name.c_str(), static_cast<unsigned long long>(r.seed),
                        r.error.c_str());
        std::fflush(stdout);
    };
    const brb::SuiteResult res = brb::run_suite(configs, seeds, opts);
    std::printf("\n%-24s %5s %16s %16s %16s %9s\n", "config", "runs", "acc", "nmi", "ari", "d_acc");
    for (const auto& r : res.rows)
        std::printf("%-24s %3zu%s %7.2f +- %5.2f %7.2f +- %5.2f %7.2f +- %5.2f %+9.2f\n", r.name.c_str(), r.runs,
                    r.failed ? "!" : " ", r.acc.mean, r.acc.std, r.nmi.mean, r.nmi.std, r.ari.mean, r.ari.std,
                    r.delta_acc);
    const std::string csv = (std::filesystem::path(out) / "summary.csv").string();
    brb::write_suite_csv(res.rows, csv);
    std::printf("summary written to %s\n", csv.c_str());
    for (const auto& r : res.rows)
        if (r.failed) return failure;
    return ok;
}

int cmd_timing(const std::string& log_path) {
    const brb::ExperimentLog log = brb::load_log(log_path);
    const brb::TimingReport t = brb::timing_report(log);
    std::printf("%s\n", brb::to_json(t).dump(2).c_str());
    return ok;
}

int cmd_export(const std::string& checkpoint, const std::string& out) {
    const brb::Checkpoint ck = brb::load_checkpoint(checkpoint);
    const brb::ExperimentConfig cfg = brb::make_config(ck.config);
    brb::RngStreams rngs(cfg.seed);
    const brb::Dataset ds = brb::load_dataset(cfg, rngs.data);
    brb::export_embeddings(ck.params, ck.clusters, cfg.algorithm, ds, out);
    std::printf("embeddings written to %s\n", out.c_str());
    return ok;
}

int cmd_canonical(const std::string& log_path) {
    for (const auto& j : brb::read_jsonl(log_path)) std::printf("%s\n", brb::strip_timing(j).dump().c_str());
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep clustering experiments with soft weight resets and reclustering"};
    app.require_subcommand(1);

    CommonFlags run_flags, suite_flags;
    std::string run_out, checkpoint, export_path;
    auto* run = app.add_subcommand("run", "run one experiment");
    add_common(run, run_flags);
    run->add_option("--out", run_out, "output directory (log.jsonl is written there)");
    run->add_option("--checkpoint", checkpoint, "write final parameters and centroids to this file");
    run->add_option("--export", export_path, "write final embeddings as CSV to this file");

    std::string suite_out = "runs/suite", baseline;
    std::vector<std::string> compare;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    bool reuse = false;
    auto* suite = app.add_subcommand("suite", "run several variants over several seeds and summarise");
    add_common(suite, suite_flags);
    suite->add_option("--out", suite_out, "output directory");
    suite->add_option("--compare", compare, "variants to compare (default: off brb)")->delimiter(',');
    suite->add_option("--seeds", seeds, "seeds")->delimiter(',');
    suite->add_option("--baseline", baseline, "configuration name used for the delta columns");
    suite->add_flag("--reuse", reuse, "keep finished logs produced by an identical configuration");

    std::string timing_log;
    auto* timing = app.add_subcommand("timing", "BRB runtime breakdown of a finished log");
    timing->add_option("--log", timing_log, "JSONL log")->required();

    std::string export_ckpt, export_out;
    auto* exp = app.add_subcommand("export", "write embeddings of a checkpoint as CSV");
    exp->add_option("--checkpoint", export_ckpt, "checkpoint file")->required();
    exp->add_option("--out", export_out, "output CSV")->required();

    std::string canon_log;
    auto* canon = app.add_subcommand("canonical", "print a log without timing fields");
    canon->add_option("--log", canon_log, "JSONL log")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*run) return cmd_run(run_flags, run_out, checkpoint, export_path);
        if (*suite) return cmd_suite(suite_flags, suite_out, compare, seeds, baseline, reuse);
        if (*timing) return cmd_timing(timing_log);
        if (*exp) return cmd_export(export_ckpt, export_out);
        if (*canon) return cmd_canonical(canon_log);
    } catch (const brb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return config_error;
    } catch (const brb::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return numerical_error;
    } catch (const brb::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return io_error;
    } catch (const brb::InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return io_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return failure;
    }
    return failure;
}
