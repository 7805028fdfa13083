#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/harness/experiment.hpp"

namespace brb {

struct TimingReport {
    std::size_t events = 0;
    std::size_t interval = 0;
    double mean_reset_sec = 0.0;
    double mean_embed_sec = 0.0;
    double mean_cluster_sec = 0.0;
    double mean_momentum_sec = 0.0;
    double mean_event_sec = 0.0;
    double mean_epoch_sec = 0.0;    // clustering epochs without a BRB event
    double overhead_percent = 0.0;  // event cost amortised over T epochs
    double share_percent = 0.0;     // measured event time / (event + epoch time)
};

// overhead = mean event time / (T * mean non-BRB epoch time) * 100, i.e.
// the extra cost of one BRB event spread over the T epochs it serves.
inline TimingReport timing_report(const std::vector<MetricRecord>& records, const std::vector<BrbEvent>& events,
                                  std::size_t interval) {
    TimingReport r;
    r.events = events.size();
    r.interval = interval;
    std::set<std::size_t> brb_epochs;
    double total_event = 0.0;
    for (const auto& e : events) {
        brb_epochs.insert(e.epoch);
        r.mean_reset_sec += e.reset_sec;
        r.mean_embed_sec += e.embed_sec;
        r.mean_cluster_sec += e.cluster_sec;
        r.mean_momentum_sec += e.momentum_sec;
        total_event += e.total_sec;
    }
    double total_epoch = 0.0, plain_epoch = 0.0;
    std::size_t plain = 0;
    for (const auto& rec : records) {
        total_epoch += rec.epoch_sec;
        if (brb_epochs.count(rec.epoch) == 0) {
            plain_epoch += rec.epoch_sec;
            ++plain;
        }
    }
    if (plain > 0) r.mean_epoch_sec = plain_epoch / static_cast<double>(plain);
    if (r.events == 0) return r;
    const double ne = static_cast<double>(r.events);
    r.mean_reset_sec /= ne;
    r.mean_embed_sec /= ne;
    r.mean_cluster_sec /= ne;
    r.mean_momentum_sec /= ne;
    r.mean_event_sec = total_event / ne;
    if (r.mean_epoch_sec > 0.0 && interval > 0)
        r.overhead_percent = 100.0 * r.mean_event_sec / (static_cast<double>(interval) * r.mean_epoch_sec);
    if (total_event + total_epoch > 0.0) r.share_percent = 100.0 * total_event / (total_event + total_epoch);
    return r;
}

inline TimingReport timing_report(const ExperimentLog& log) {
    std::size_t interval = 0;
    if (auto it = log.config.find("brb.interval"); it != log.config.end()) interval = std::stoul(it->second);
    return timing_report(log.records, log.events, interval);
}

// Rebuilds records and events from a JSONL log file.
inline ExperimentLog parse_log(const std::vector<json>& lines) {
    ExperimentLog log;
    for (const auto& j : lines) {
        const std::string type = j.value("type", "");
        if (type == "header") {
            for (auto it = j["config"].begin(); it != j["config"].end(); ++it)
                log.config[it.key()] = it.value().get<std::string>();
        } else if (type == "metric") {
            MetricRecord r;
            r.epoch = j["epoch"].get<std::size_t>();
            r.acc = j["acc"].get<double>();
            r.nmi = j["nmi"].get<double>();
            r.ari = j["ari"].get<double>();
            r.cl_change = j["cl_change"].get<double>();
            if (j.contains("intra_cd")) {
                r.has_geometry = true;
                r.intra_cd = j["intra_cd"].get<double>();
                r.inter_cd = j["inter_cd"].get<double>();
                r.silhouette = j["silhouette"].get<double>();
            }
            r.loss_total = j["loss_total"].get<double>();
            r.loss_ssl = j["loss_ssl"].get<double>();
            r.loss_cluster = j["loss_cluster"].get<double>();
            r.decoder_grad_norm = j["decoder_grad_norm"].get<double>();
            r.epoch_sec = j.value("epoch_sec", 0.0);
            r.eval_sec = j.value("eval_sec", 0.0);
            log.records.push_back(r);
        } else if (type == "brb_event") {
            BrbEvent e;
            e.epoch = j["epoch"].get<std::size_t>();
            e.variant = parse_variant(j["variant"].get<std::string>());
            e.subsample_size = j["subsample_size"].get<std::size_t>();
            e.recluster_inertia = j["recluster_inertia"].get<double>();
            e.reset_sec = j.value("reset_sec", 0.0);
            e.embed_sec = j.value("embed_sec", 0.0);
            e.cluster_sec = j.value("cluster_sec", 0.0);
            e.momentum_sec = j.value("momentum_sec", 0.0);
            e.total_sec = j.value("total_sec", 0.0);
            log.events.push_back(e);
        } else if (type == "init") {
            log.initial.acc = j["acc"].get<double>();
            log.initial.nmi = j["nmi"].get<double>();
            log.initial.ari = j["ari"].get<double>();
        } else if (type == "summary") {
            RunSummary& s = log.summary;
            s.ok = j["ok"].get<bool>();
            s.error = j.value("error", "");
            s.epochs_completed = j["epochs_completed"].get<std::size_t>();
            s.init_acc = j["init_acc"].get<double>();
            s.final_acc = j["final_acc"].get<double>();
            s.final_nmi = j["final_nmi"].get<double>();
            s.final_ari = j["final_ari"].get<double>();
            s.best_acc = j["best_acc"].get<double>();
            s.brb_events = j["brb_events"].get<std::size_t>();
            s.pretrain_sec = j.value("pretrain_sec", 0.0);
            s.clustering_sec = j.value("clustering_sec", 0.0);
        }
    }
    return log;
}

inline ExperimentLog load_log(const std::string& path) { return parse_log(read_jsonl(path)); }

inline json to_json(const TimingReport& r) {
    json j;
    j["events"] = r.events;
    j["interval"] = r.interval;
    j["mean_reset_sec"] = r.mean_reset_sec;
    j["mean_embed_sec"] = r.mean_embed_sec;
    j["mean_cluster_sec"] = r.mean_cluster_sec;
    j["mean_momentum_sec"] = r.mean_momentum_sec;
    j["mean_event_sec"] = r.mean_event_sec;
    j["mean_epoch_sec"] = r.mean_epoch_sec;
    j["overhead_percent"] = r.overhead_percent;
    j["share_percent"] = r.share_percent;
    return j;
}

// CSV with one row per sample: embedding columns, true label (-1 when
// unknown), predicted label. Values are written with 17 significant digits.
inline void export_embeddings(const DenseMatrix& embedding, const std::vector<int>& y_true,
                              const std::vector<int>& y_pred, const std::string& path) {
    if (!y_true.empty() && y_true.size() != embedding.rows()) throw ShapeError("export: label count mismatch");
    if (y_pred.size() != embedding.rows()) throw ShapeError("export: prediction count mismatch");
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write '" + path + "'");
    for (std::size_t i = 0; i < embedding.rows(); ++i) {
        for (double v : embedding.row(i)) std::fprintf(f, "%.17g,", v);
        std::fprintf(f, "%d,%d\n", y_true.empty() ? -1 : y_true[i], y_pred[i]);
    }
    if (std::fclose(f) != 0) throw IoError("error closing '" + path + "'");
}

inline void export_embeddings(const NetworkParams& params, const ClusterState& clusters, Algorithm algorithm,
                              const Dataset& ds, const std::string& path) {
    const DenseMatrix h = encode(params, ds.x);
    export_embeddings(h, ds.labels, predict_labels(algorithm, h, clusters.centroids), path);
}

// ---- checkpoints ----------------------------------------------------------

namespace detail {

inline json layers_to_json(const std::vector<Layer>& layers) {
    json arr = json::array();
    for (const auto& l : layers) {
        json j;
        j["in"] = l.in_dim();
        j["out"] = l.out_dim();
        j["activation"] = l.activation == Activation::relu ? "relu" : "identity";
        j["weights"] = std::vector<double>(l.weights.values().begin(), l.weights.values().end());
        j["biases"] = l.biases;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline std::vector<Layer> layers_from_json(const json& arr) {
    std::vector<Layer> out;
    for (const auto& j : arr) {
        Layer l;
        const auto in = j.at("in").get<std::size_t>(), o = j.at("out").get<std::size_t>();
        l.weights = DenseMatrix(in, o, j.at("weights").get<std::vector<double>>());
        l.biases = j.at("biases").get<std::vector<double>>();
        if (l.biases.size() != o) throw ShapeError("checkpoint: bias length mismatch");
        const std::string act = j.at("activation").get<std::string>();
        if (act != "relu" && act != "identity") throw InputError("checkpoint: unknown activation '" + act + "'");
        l.activation = act == "relu" ? Activation::relu : Activation::identity;
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace detail

struct Checkpoint {
    std::map<std::string, std::string> config;
    NetworkParams params;
    ClusterState clusters;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    json j;
    j["schema"] = log_schema_version;
    j["config"] = ck.config;
    j["encoder"] = detail::layers_to_json(ck.params.encoder);
    j["decoder"] = detail::layers_to_json(ck.params.decoder);
    j["centroid_rows"] = ck.clusters.centroids.rows();
    j["centroid_cols"] = ck.clusters.centroids.cols();
    j["centroids"] = std::vector<double>(ck.clusters.centroids.values().begin(), ck.clusters.centroids.values().end());
    j["dcn_counts"] = ck.clusters.dcn_counts;
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out << j.dump();
    if (!out) throw IoError("checkpoint write failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    Checkpoint ck;
    try {
        for (auto it = j.at("config").begin(); it != j.at("config").end(); ++it)
            ck.config[it.key()] = it.value().get<std::string>();
        ck.params.encoder = detail::layers_from_json(j.at("encoder"));
        ck.params.decoder = detail::layers_from_json(j.at("decoder"));
        ck.clusters.centroids = DenseMatrix(j.at("centroid_rows").get<std::size_t>(), j.at("centroid_cols").get<std::size_t>(),
                                            j.at("centroids").get<std::vector<double>>());
        ck.clusters.dcn_counts = j.at("dcn_counts").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw InputError("checkpoint '" + path + "' is malformed: " + e.what());
    }
    ck.params.touch();
    return ck;
}

}  // namespace brb
