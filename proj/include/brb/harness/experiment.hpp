#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brb/cluster/recluster.hpp"
#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/core/rng.hpp"
#include "brb/data/augment.hpp"
#include "brb/data/dataset.hpp"
#include "brb/harness/config.hpp"
#include "brb/metrics/metrics.hpp"
#include "brb/nn/adam.hpp"
#include "brb/nn/network.hpp"
#include "brb/objectives/dc_objectives.hpp"
#include "brb/reset/brb_engine.hpp"

namespace brb {

using json = nlohmann::ordered_json;

inline constexpr int log_schema_version = 1;

struct PretrainRecord {
    std::size_t epoch = 0;  // 0 is the untrained network
    double train_loss = 0.0;
    double holdout_loss = 0.0;
    double epoch_sec = 0.0;
};

struct RunSummary {
    bool ok = false;
    std::string error;
    std::size_t epochs_completed = 0;
    double init_acc = 0.0;
    double final_acc = 0.0;
    double final_nmi = 0.0;
    double final_ari = 0.0;
    double best_acc = 0.0;
    std::size_t brb_events = 0;
    double pretrain_sec = 0.0;
    double clustering_sec = 0.0;
};

struct ExperimentLog {
    std::map<std::string, std::string> config;
    std::vector<PretrainRecord> pretraining;
    MetricRecord initial;  // clustering quality right after initialisation
    std::vector<MetricRecord> records;
    std::vector<BrbEvent> events;
    std::vector<DistanceRatioHistogram> ratio_hists;
    RunSummary summary;
};

// ---- JSON encoding ----------------------------------------------------------

inline json to_json(const MetricRecord& r) {
    json j;
    j["type"] = "metric";
    j["epoch"] = r.epoch;
    j["acc"] = r.acc;
    j["nmi"] = r.nmi;
    j["ari"] = r.ari;
    j["cl_change"] = r.cl_change;
    if (r.has_geometry) {
        j["intra_cd"] = r.intra_cd;
        j["inter_cd"] = r.inter_cd;
        j["silhouette"] = r.silhouette;
    }
    j["loss_total"] = r.loss_total;
    j["loss_ssl"] = r.loss_ssl;
    j["loss_cluster"] = r.loss_cluster;
    j["decoder_grad_norm"] = r.decoder_grad_norm;
    j["epoch_sec"] = r.epoch_sec;
    j["eval_sec"] = r.eval_sec;
    return j;
}

inline json to_json(const BrbEvent& e) {
    json j;
    j["type"] = "brb_event";
    j["epoch"] = e.epoch;
    j["variant"] = std::string(to_string(e.variant));
    j["subsample_size"] = e.subsample_size;
    j["recluster_inertia"] = e.recluster_inertia;
    j["reset_sec"] = e.reset_sec;
    j["embed_sec"] = e.embed_sec;
    j["cluster_sec"] = e.cluster_sec;
    j["momentum_sec"] = e.momentum_sec;
    j["total_sec"] = e.total_sec;
    return j;
}

inline json to_json(const PretrainRecord& r) {
    json j;
    j["type"] = "pretrain";
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["holdout_loss"] = r.holdout_loss;
    j["epoch_sec"] = r.epoch_sec;
    return j;
}

inline json to_json(const DistanceRatioHistogram& h) {
    json j;
    j["type"] = "ratio_hist";
    j["epoch"] = h.epoch;
    j["edges"] = h.edges;
    j["counts"] = h.counts;
    return j;
}

inline json to_json(const RunSummary& s) {
    json j;
    j["type"] = "summary";
    j["ok"] = s.ok;
    if (!s.ok) j["error"] = s.error;
    j["epochs_completed"] = s.epochs_completed;
    j["init_acc"] = s.init_acc;
    j["final_acc"] = s.final_acc;
    j["final_nmi"] = s.final_nmi;
    j["final_ari"] = s.final_ari;
    j["best_acc"] = s.best_acc;
    j["brb_events"] = s.brb_events;
    j["pretrain_sec"] = s.pretrain_sec;
    j["clustering_sec"] = s.clustering_sec;
    return j;
}

// Drops every key ending in "_sec" (recursively); what remains of a log is
// fully determined by config and seed.
inline json strip_timing(const json& j) {
    if (j.is_object()) {
        json out = json::object();
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k.size() >= 4 && k.compare(k.size() - 4, 4, "_sec") == 0) continue;
            out[k] = strip_timing(it.value());
        }
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (const auto& v : j) out.push_back(strip_timing(v));
        return out;
    }
    return j;
}

// Appends one JSON object per line; flushed per line so a failed run still
// leaves a readable prefix.
class JsonlWriter {
public:
    JsonlWriter() = default;
    explicit JsonlWriter(const std::string& path) {
        if (path.empty()) return;
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        out_.open(path, std::ios::trunc);
        if (!out_) throw IoError("cannot write log '" + path + "'");
    }

    void write(const json& j) {
        if (!out_.is_open()) return;
        out_ << j.dump() << '\n';
        out_.flush();
        if (!out_) throw IoError("log write failed");
    }

private:
    std::ofstream out_;
};

// ---- experiment pieces ------------------------------------------------------

// One RNG per purpose, all derived from the experiment seed in a fixed order.
struct RngStreams {
    SeededRng data, init, pretrain, cluster_init, shuffle, augment, brb, eval;

    explicit RngStreams(std::uint64_t seed) {
        SeededRng master(seed);
        data = master.fork();
        init = master.fork();
        pretrain = master.fork();
        cluster_init = master.fork();
        shuffle = master.fork();
        augment = master.fork();
        brb = master.fork();
        eval = master.fork();
    }
};

inline Dataset load_dataset(const ExperimentConfig& cfg, SeededRng& data_rng) {
    Dataset ds;
    switch (cfg.dataset.kind) {
        case DatasetKind::optdigits:
        case DatasetKind::csv:
            ds = load_dense_csv(cfg.dataset.path, cfg.dataset.label_column, cfg.dataset.geometry);
            if (cfg.dataset.kind == DatasetKind::optdigits) ds.name = "optdigits";
            break;
        case DatasetKind::blobs:
            ds = make_blobs(cfg.dataset.blobs, data_rng);
            break;
    }
    if (cfg.dataset.standardize) z_transform(ds);
    return ds;
}

inline std::size_t resolve_clusters(const ExperimentConfig& cfg, const Dataset& ds) {
    const std::size_t k = cfg.n_clusters > 0 ? cfg.n_clusters : ds.num_classes();
    if (k < 1) throw ConfigError("n_clusters is 0 and the dataset has no labels");
    return k;
}

inline NetworkSpec network_spec(const ExperimentConfig& cfg, const Dataset& ds, std::size_t k) {
    return autoencoder_spec(ds.dim(), cfg.hidden, cfg.embedding_dim > 0 ? cfg.embedding_dim : k);
}

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < order.size(); s += batch_size)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + batch_size)));
    return out;
}

inline double mean_reconstruction_loss(const NetworkParams& params, const DenseMatrix& x) {
    if (x.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t s = 0; s < x.rows(); s += 1024) {
        std::vector<std::size_t> idx(std::min(x.rows(), s + 1024) - s);
        std::iota(idx.begin(), idx.end(), s);
        const DenseMatrix xb = gather_rows(x, idx);
        const ForwardResult fw = forward(params, xb, true);
        total += reconstruction_loss(xb, fw.reconstruction) * static_cast<double>(xb.size());
    }
    return total / static_cast<double>(x.size());
}

inline double seconds_between(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace detail

// Reconstruction-only training. A held-out slice (never trained on) tracks
// generalisation; with 0 epochs the fresh network is returned unchanged.
inline NetworkParams run_pretraining(NetworkParams params, const ExperimentConfig& cfg, const Dataset& ds,
                                     SeededRng& rng, std::vector<PretrainRecord>* records = nullptr,
                                     JsonlWriter* writer = nullptr) {
    if (cfg.pretrain_epochs == 0) return params;
    std::vector<std::size_t> perm(ds.n());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    std::size_t n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(ds.n())));
    if (n_hold >= ds.n()) n_hold = ds.n() - 1;
    std::vector<std::size_t> hold(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_hold), perm.end());
    std::sort(hold.begin(), hold.end());
    std::sort(train.begin(), train.end());
    const DenseMatrix x_hold = gather_rows(ds.x, hold);
    const DenseMatrix x_train = gather_rows(ds.x, train);

    AdamHyper hyper;
    hyper.learning_rate = cfg.learning_rate;
    hyper.clip_norm = cfg.clip_norm;
    AdamState adam = make_adam(params, nullptr, hyper);

    auto emit = [&](const PretrainRecord& r) {
        if (records) records->push_back(r);
        if (writer) writer->write(to_json(r));
    };
    emit({0, detail::mean_reconstruction_loss(params, x_train), detail::mean_reconstruction_loss(params, x_hold), 0.0});

    std::vector<std::size_t> order(x_train.rows());
    for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (const auto& idx : detail::make_batches(order, cfg.batch_size)) {
            DenseMatrix xb = gather_rows(x_train, idx);
            if (cfg.augment_pretraining) xb = augment_batch(xb, ds.geometry, cfg.augment, rng);
            const ForwardResult fw = forward(params, xb, true);
            const double loss = reconstruction_loss(xb, fw.reconstruction);
            if (!std::isfinite(loss))
                throw NumericalError("pretraining loss is not finite at epoch " + std::to_string(epoch));
            loss_sum += loss * static_cast<double>(xb.rows());
            NetworkParams grads = backward(params, fw.cache, DenseMatrix(), reconstruction_grad(xb, fw.reconstruction));
            adam_step(params, nullptr, grads, nullptr, adam);
        }
        const auto t1 = std::chrono::steady_clock::now();
        emit({epoch, loss_sum / static_cast<double>(x_train.rows()), detail::mean_reconstruction_loss(params, x_hold),
              detail::seconds_between(t0, t1)});
    }
    return params;
}

// Hard labels of the whole dataset: argmax of the Student-t assignment for
// DEC/IDEC, nearest centroid for DCN (both lowest index on ties).
inline std::vector<int> predict_labels(Algorithm algorithm, const DenseMatrix& h, const DenseMatrix& centroids) {
    if (algorithm == Algorithm::dcn) return dcn_assign(h, centroids);
    return row_argmax(dec_soft_assign(h, centroids));
}

// k-means (always Lloyd, independent of the reclustering ablation setting)
// on the embedding of min(N, n) samples.
inline ClusterState init_clustering(const NetworkParams& params, const ExperimentConfig& cfg, const Dataset& ds,
                                    std::size_t k, SeededRng& rng) {
    const DenseMatrix h = encode(params, ds.x);
    ReclusterConfig rc = cfg.brb.recluster;
    rc.algorithm = ReclusterAlgorithm::kmeans;
    rc.k = k;
    const auto idx = subsample_indices(ds.n(), rc.subsample_size, rng);
    SeededRng cluster_rng = rng.fork();
    ClusteringResult res = recluster_embeddings(gather_rows(h, idx), rc, cluster_rng);
    ClusterState st;
    st.centroids = std::move(res.centroids);
    st.assignments = predict_labels(cfg.algorithm, h, st.centroids);
    if (cfg.algorithm == Algorithm::dcn) st.dcn_counts.assign(k, 1);
    return st;
}

struct EvalContext {
    std::vector<std::size_t> subsample;  // fixed evaluation subsample for quadratic metrics
    DenseMatrix x_sub;
    std::vector<int> y_sub;
};

inline EvalContext make_eval_context(const Dataset& ds, const EvalConfig& ec, SeededRng& rng) {
    EvalContext ctx;
    ctx.subsample = subsample_indices(ds.n(), ec.subsample, rng);
    std::sort(ctx.subsample.begin(), ctx.subsample.end());
    ctx.x_sub = gather_rows(ds.x, ctx.subsample);
    if (ds.has_labels())
        for (std::size_t i : ctx.subsample) ctx.y_sub.push_back(ds.labels[i]);
    return ctx;
}

inline void fill_label_metrics(MetricRecord& r, const Dataset& ds, std::size_t k, const std::vector<int>& pred) {
    if (!ds.has_labels()) return;
    r.acc = clustering_accuracy(ds.labels, pred, k);
    r.nmi = 100.0 * nmi(ds.labels, pred);
    r.ari = 100.0 * ari(ds.labels, pred);
}

struct TrainingState {
    NetworkParams params;
    ClusterState clusters;
    AdamState adam;
};

// The clustering phase: BRB at epoch boundaries, minibatch updates,
// per-epoch evaluation.
inline void run_clustering(TrainingState& ts, const ExperimentConfig& cfg, const Dataset& ds, std::size_t k,
                           RngStreams& rngs, ExperimentLog& log, JsonlWriter* writer) {
    const bool dcn = cfg.algorithm == Algorithm::dcn;
    const InitDistribution init{cfg.init_gain};
    BrbConfig brb_cfg = cfg.brb;
    brb_cfg.recluster.k = k;
    brb_cfg.validate();
    const EvalContext eval = make_eval_context(ds, cfg.eval, rngs.eval);
    std::vector<int> previous = ts.clusters.assignments;

    std::vector<std::size_t> order(ds.n());
    for (std::size_t epoch = 0; epoch < cfg.clustering_epochs; ++epoch) {
        if (brb_cfg.fires_at(epoch)) {
            BrbEvent ev = apply_brb(ts.params, ts.adam, ts.clusters, epoch, brb_cfg, init, ds.x, rngs.brb);
            log.events.push_back(ev);
            if (writer) writer->write(to_json(ev));
        }
        if (dcn && cfg.dcn_reset_counts_each_epoch)
            std::fill(ts.clusters.dcn_counts.begin(), ts.clusters.dcn_counts.end(), 1);

        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        rngs.shuffle.shuffle(std::span<std::size_t>(order));
        MetricRecord rec;
        rec.epoch = epoch;
        for (const auto& idx : detail::make_batches(order, cfg.batch_size)) {
            const DenseMatrix xb = gather_rows(ds.x, idx);
            std::optional<DenseMatrix> xa;
            if (cfg.augment.enabled) xa = augment_batch(xb, ds.geometry, cfg.augment, rngs.augment);
            CombinedResult r;
            try {
                r = combined_loss_and_grads(cfg.algorithm, xb, xa ? &*xa : nullptr, ts.params, ts.clusters.centroids,
                                            cfg.weights);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (clustering epoch " + std::to_string(epoch) + ")");
            }
            const double rows = static_cast<double>(xb.rows());
            rec.loss_total += r.loss.total * rows;
            rec.loss_ssl += r.loss.ssl * rows;
            rec.loss_cluster += r.loss.cluster * rows;
            double dec_norm = 0.0;
            for (const auto& l : r.grads.decoder) {
                for (double g : l.weights.values()) dec_norm += g * g;
                for (double g : l.biases) dec_norm += g * g;
            }
            rec.decoder_grad_norm = std::max(rec.decoder_grad_norm, std::sqrt(dec_norm));

            if (!dcn) {
                adam_step(ts.params, &ts.clusters.centroids, r.grads, &r.centroid_grads, ts.adam);
            } else {
                // network step with frozen centroids, then reassignment and
                // sequential centre updates on the updated embedding
                adam_step(ts.params, nullptr, r.grads, nullptr, ts.adam);
                const DenseMatrix h = encode(ts.params, xb);
                const std::vector<int> a = dcn_assign(h, ts.clusters.centroids);
                for (std::size_t i = 0; i < h.rows(); ++i)
                    dcn_center_update(ts.clusters.centroids, ts.clusters.dcn_counts, h.row(i),
                                      static_cast<std::size_t>(a[i]));
            }
        }
        const double n = static_cast<double>(ds.n());
        rec.loss_total /= n;
        rec.loss_ssl /= n;
        rec.loss_cluster /= n;
        const auto t1 = std::chrono::steady_clock::now();
        rec.epoch_sec = detail::seconds_between(t0, t1);

        const DenseMatrix h = encode(ts.params, ds.x);
        ts.clusters.assignments = predict_labels(cfg.algorithm, h, ts.clusters.centroids);
        fill_label_metrics(rec, ds, k, ts.clusters.assignments);
        rec.cl_change = cluster_label_change(ts.clusters.assignments, previous);
        previous = ts.clusters.assignments;
        const bool last = epoch + 1 == cfg.clustering_epochs;
        if (ds.has_labels() && cfg.eval.geometry_every > 0 && (epoch % cfg.eval.geometry_every == 0 || last)) {
            const DenseMatrix h_sub = gather_rows(h, eval.subsample);
            std::set<int> classes(eval.y_sub.begin(), eval.y_sub.end());
            if (classes.size() >= 2) {
                const ClassDistances cd = class_distances(h_sub, eval.y_sub);
                rec.has_geometry = true;
                rec.intra_cd = cd.intra;
                rec.inter_cd = cd.inter;
                rec.silhouette = cd.silhouette;
            }
        }
        if (cfg.eval.ratio_hist_every > 0 && k >= 2 && (epoch % cfg.eval.ratio_hist_every == 0 || last)) {
            DistanceRatioHistogram hist = distance_ratio_hist(gather_rows(h, eval.subsample), ts.clusters.centroids,
                                                              cfg.eval.ratio_hist_bins, epoch);
            hist.ratios.clear();
            if (writer) writer->write(to_json(hist));
            log.ratio_hists.push_back(std::move(hist));
        }
        rec.eval_sec = detail::seconds_between(t1, std::chrono::steady_clock::now());
        log.records.push_back(rec);
        if (writer) writer->write(to_json(rec));
        log.summary.epochs_completed = epoch + 1;
    }
}

// Full pipeline: data, network, optional pretraining, initial clustering,
// clustering phase. The log is streamed to `log_path` when non-empty; on
// failure the summary records the error and the exception is rethrown.
inline ExperimentLog run_experiment(const ExperimentConfig& cfg, const std::string& log_path = "",
                                    TrainingState* final_state = nullptr) {
    JsonlWriter writer(log_path);
    ExperimentLog log;
    log.config = cfg.echo.empty() ? effective_kv(cfg) : cfg.echo;
    {
        json header;
        header["type"] = "header";
        header["schema"] = log_schema_version;
        header["config"] = log.config;
        writer.write(header);
    }
    try {
        RngStreams rngs(cfg.seed);
        const Dataset ds = load_dataset(cfg, rngs.data);
        const std::size_t k = resolve_clusters(cfg, ds);
        const NetworkSpec spec = network_spec(cfg, ds, k);

        TrainingState ts;
        ts.params = init_network(spec, InitDistribution{cfg.init_gain}, rngs.init);
        const auto t0 = std::chrono::steady_clock::now();
        ts.params = run_pretraining(std::move(ts.params), cfg, ds, rngs.pretrain, &log.pretraining, &writer);
        const auto t1 = std::chrono::steady_clock::now();
        log.summary.pretrain_sec = detail::seconds_between(t0, t1);

        ts.clusters = init_clustering(ts.params, cfg, ds, k, rngs.cluster_init);
        AdamHyper hyper;
        hyper.learning_rate = cfg.learning_rate;
        hyper.clip_norm = cfg.clip_norm;
        ts.adam = make_adam(ts.params, centroids_are_parameters(cfg.algorithm) ? &ts.clusters.centroids : nullptr, hyper);

        log.initial.epoch = 0;
        fill_label_metrics(log.initial, ds, k, ts.clusters.assignments);
        {
            json j;
            j["type"] = "init";
            j["acc"] = log.initial.acc;
            j["nmi"] = log.initial.nmi;
            j["ari"] = log.initial.ari;
            writer.write(j);
        }

        run_clustering(ts, cfg, ds, k, rngs, log, &writer);
        log.summary.clustering_sec = detail::seconds_between(t1, std::chrono::steady_clock::now());
        log.summary.ok = true;
        log.summary.init_acc = log.initial.acc;
        if (!log.records.empty()) {
            log.summary.final_acc = log.records.back().acc;
            log.summary.final_nmi = log.records.back().nmi;
            log.summary.final_ari = log.records.back().ari;
            for (const auto& r : log.records) log.summary.best_acc = std::max(log.summary.best_acc, r.acc);
        }
        log.summary.brb_events = log.events.size();
        writer.write(to_json(log.summary));
        if (final_state) *final_state = std::move(ts);
    } catch (const std::exception& e) {
        log.summary.ok = false;
        log.summary.error = e.what();
        log.summary.brb_events = log.events.size();
        writer.write(to_json(log.summary));
        throw;
    }
    return log;
}

// Reads a JSONL log back as a list of objects.
inline std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open log '" + path + "'");
    std::vector<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error&) {
            throw ParseError("malformed log line in '" + path + "'", line_no);
        }
    }
    return out;
}

}  // namespace brb
