#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/data/augment.hpp"
#include "brb/data/dataset.hpp"
#include "brb/objectives/dc_objectives.hpp"
#include "brb/reset/brb_engine.hpp"

#ifndef BRB_DATA_DIR
#define BRB_DATA_DIR "data"
#endif

namespace brb {

enum class DatasetKind { optdigits, csv, blobs };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::optdigits;
    std::string path;          // csv only; optdigits falls back to the bundled file
    std::optional<int> label_column = -1;  // nullopt: unlabeled
    std::optional<ImageGeometry> geometry;
    bool standardize = true;
    BlobSpec blobs;
};

struct EvalConfig {
    std::size_t geometry_every = 5;    // intra/inter-CD and silhouette cadence (0 = never)
    std::size_t subsample = 5000;      // evaluation subsample for the quadratic metrics
    std::size_t ratio_hist_every = 0;  // distance-ratio histogram cadence (0 = never)
    std::size_t ratio_hist_bins = 20;
};

struct ExperimentConfig {
    std::string name = "run";
    DatasetConfig dataset;
    Algorithm algorithm = Algorithm::dec;
    int scenario = 2;
    std::size_t pretrain_epochs = 0;
    std::size_t clustering_epochs = 400;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::optional<double> clip_norm;
    std::vector<std::size_t> hidden{1024, 512, 256};
    std::size_t embedding_dim = 0;  // 0: number of clusters
    std::size_t n_clusters = 0;     // 0: number of label classes
    double init_gain = 1.0;
    LossWeights weights = LossWeights::defaults(Algorithm::dec);
    BrbConfig brb;
    AugmentConfig augment;
    bool augment_pretraining = false;
    double holdout_fraction = 0.1;
    bool dcn_reset_counts_each_epoch = false;
    EvalConfig eval;
    std::uint64_t seed = 0;
    std::string output_dir = "runs";

    // Effective settings as key/value text; echoed into the log.
    std::map<std::string, std::string> echo;
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (trim_copy(v).empty() || v == "none") return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim_copy(item)));
    return out;
}

}  // namespace detail

// Flat "key = value" text; '#' starts a comment.
inline std::map<std::string, std::string> parse_kv_text(const std::string& text, const std::string& origin = "config") {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim_copy(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim_copy(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = detail::trim_copy(line.substr(eq + 1));
    }
    return kv;
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str(), path);
}

// "key=value" from the command line.
inline std::pair<std::string, std::string> split_override(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + s + "' is not key=value");
    return {detail::trim_copy(s.substr(0, eq)), detail::trim_copy(s.substr(eq + 1))};
}

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}
}  // namespace detail

// Every effective setting as key/value text; parsing it back yields the same
// configuration.
inline std::map<std::string, std::string> effective_kv(const ExperimentConfig& c) {
    using detail::fmt_double;
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    auto u = [](std::size_t x) { return std::to_string(x); };
    std::map<std::string, std::string> kv;
    kv["name"] = c.name;
    kv["dataset"] = c.dataset.kind == DatasetKind::optdigits ? "optdigits"
                    : c.dataset.kind == DatasetKind::csv     ? "csv"
                                                             : "blobs";
    if (c.dataset.kind != DatasetKind::blobs) {
        kv["dataset.path"] = c.dataset.path;
        kv["dataset.label_column"] = c.dataset.label_column ? std::to_string(*c.dataset.label_column) : "none";
    } else {
        kv["blobs.k"] = u(c.dataset.blobs.k);
        kv["blobs.n_per_cluster"] = u(c.dataset.blobs.n_per_cluster);
        kv["blobs.dim"] = u(c.dataset.blobs.dim);
        kv["blobs.separation"] = fmt_double(c.dataset.blobs.separation);
        kv["blobs.spread"] = fmt_double(c.dataset.blobs.spread);
    }
    if (c.dataset.geometry) {
        kv["dataset.height"] = u(c.dataset.geometry->height);
        kv["dataset.width"] = u(c.dataset.geometry->width);
        kv["dataset.channels"] = u(c.dataset.geometry->channels);
    }
    kv["dataset.standardize"] = b(c.dataset.standardize);
    kv["algorithm"] = std::string(to_string(c.algorithm));
    kv["scenario"] = std::to_string(c.scenario);
    kv["pretrain_epochs"] = u(c.pretrain_epochs);
    kv["clustering_epochs"] = u(c.clustering_epochs);
    kv["batch_size"] = u(c.batch_size);
    kv["learning_rate"] = fmt_double(c.learning_rate);
    kv["clip_norm"] = c.clip_norm ? fmt_double(*c.clip_norm) : "0";
    std::string hidden;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) hidden += (i ? "," : "") + u(c.hidden[i]);
    kv["hidden"] = hidden.empty() ? "none" : hidden;
    kv["embedding_dim"] = u(c.embedding_dim);
    kv["n_clusters"] = u(c.n_clusters);
    kv["init.gain"] = fmt_double(c.init_gain);
    kv["loss.ssl"] = fmt_double(c.weights.ssl);
    kv["loss.cluster"] = fmt_double(c.weights.cluster);
    kv["brb.variant"] = std::string(to_string(c.brb.variant));
    kv["brb.alpha"] = fmt_double(c.brb.alpha);
    kv["brb.interval"] = u(c.brb.interval);
    kv["brb.reset_embedding"] = b(c.brb.reset_embedding_layer);
    kv["brb.reset_decoder"] = b(c.brb.reset_decoder);
    kv["brb.momentum_reset"] = b(c.brb.momentum_reset);
    kv["brb.reset_network_moments"] = b(c.brb.reset_network_moments);
    kv["brb.reset_dcn_counts"] = b(c.brb.reset_dcn_counts);
    kv["brb.noise_beta"] = fmt_double(c.brb.noise_beta);
    kv["brb.subsample"] = u(c.brb.recluster.subsample_size);
    kv["recluster.algorithm"] = std::string(to_string(c.brb.recluster.algorithm));
    kv["recluster.max_iters"] = u(c.brb.recluster.max_iters);
    kv["recluster.tol"] = fmt_double(c.brb.recluster.tol);
    kv["augment.enabled"] = b(c.augment.enabled);
    kv["augment.max_translation"] = u(c.augment.max_translation);
    kv["augment.max_rotation"] = fmt_double(c.augment.max_rotation_deg);
    kv["augment.jitter_std"] = fmt_double(c.augment.jitter_std);
    kv["augment.pretraining"] = b(c.augment_pretraining);
    kv["pretrain.holdout_fraction"] = fmt_double(c.holdout_fraction);
    kv["dcn.reset_counts_each_epoch"] = b(c.dcn_reset_counts_each_epoch);
    kv["eval.geometry_every"] = u(c.eval.geometry_every);
    kv["eval.subsample"] = u(c.eval.subsample);
    kv["eval.ratio_hist_every"] = u(c.eval.ratio_hist_every);
    kv["eval.ratio_hist_bins"] = u(c.eval.ratio_hist_bins);
    kv["seed"] = std::to_string(c.seed);
    kv["output_dir"] = c.output_dir;
    return kv;
}

// Builds a config from key/value pairs. Scenario and algorithm are applied
// first because they set defaults (pretraining epochs, loss weights) that
// explicit keys may then override. Unknown keys are rejected.
inline ExperimentConfig make_config(const std::map<std::string, std::string>& kv) {
    using detail::parse_bool;
    using detail::parse_number;
    ExperimentConfig c;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("scenario")) {
        c.scenario = parse_number<int>("scenario", *v);
        if (c.scenario != 1 && c.scenario != 2) throw ConfigError("scenario must be 1 or 2");
    }
    c.pretrain_epochs = c.scenario == 1 ? 250 : 0;
    if (auto v = get("algorithm")) c.algorithm = parse_algorithm(*v);
    c.weights = LossWeights::defaults(c.algorithm);

    std::optional<std::size_t> height, width, channels;
    for (const auto& [key, v] : kv) {
        if (key == "scenario" || key == "algorithm") continue;
        if (key == "name") c.name = v;
        else if (key == "dataset") {
            if (v == "optdigits") c.dataset.kind = DatasetKind::optdigits;
            else if (v == "csv") c.dataset.kind = DatasetKind::csv;
            else if (v == "blobs") c.dataset.kind = DatasetKind::blobs;
            else throw ConfigError("unknown dataset '" + v + "'");
        }
        else if (key == "dataset.path") c.dataset.path = v;
        else if (key == "dataset.label_column")
            c.dataset.label_column = v == "none" ? std::nullopt : std::optional<int>(parse_number<int>(key, v));
        else if (key == "dataset.height") height = parse_number<std::size_t>(key, v);
        else if (key == "dataset.width") width = parse_number<std::size_t>(key, v);
        else if (key == "dataset.channels") channels = parse_number<std::size_t>(key, v);
        else if (key == "dataset.standardize") c.dataset.standardize = parse_bool(key, v);
        else if (key == "blobs.k") c.dataset.blobs.k = parse_number<std::size_t>(key, v);
        else if (key == "blobs.n_per_cluster") c.dataset.blobs.n_per_cluster = parse_number<std::size_t>(key, v);
        else if (key == "blobs.dim") c.dataset.blobs.dim = parse_number<std::size_t>(key, v);
        else if (key == "blobs.separation") c.dataset.blobs.separation = parse_number<double>(key, v);
        else if (key == "blobs.spread") c.dataset.blobs.spread = parse_number<double>(key, v);
        else if (key == "pretrain_epochs") c.pretrain_epochs = parse_number<std::size_t>(key, v);
        else if (key == "clustering_epochs") c.clustering_epochs = parse_number<std::size_t>(key, v);
        else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, v);
        else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, v);
        else if (key == "clip_norm") {
            const double x = parse_number<double>(key, v);
            c.clip_norm = x > 0.0 ? std::optional<double>(x) : std::nullopt;
        }
        else if (key == "hidden") c.hidden = detail::parse_size_list(key, v);
        else if (key == "embedding_dim") c.embedding_dim = parse_number<std::size_t>(key, v);
        else if (key == "n_clusters") c.n_clusters = parse_number<std::size_t>(key, v);
        else if (key == "init.gain") c.init_gain = parse_number<double>(key, v);
        else if (key == "loss.ssl") c.weights.ssl = parse_number<double>(key, v);
        else if (key == "loss.cluster") c.weights.cluster = parse_number<double>(key, v);
        else if (key == "brb.variant") c.brb.variant = parse_variant(v);
        else if (key == "brb.alpha") c.brb.alpha = parse_number<double>(key, v);
        else if (key == "brb.interval") c.brb.interval = parse_number<std::size_t>(key, v);
        else if (key == "brb.reset_embedding") c.brb.reset_embedding_layer = parse_bool(key, v);
        else if (key == "brb.reset_decoder") c.brb.reset_decoder = parse_bool(key, v);
        else if (key == "brb.momentum_reset") c.brb.momentum_reset = parse_bool(key, v);
        else if (key == "brb.reset_network_moments") c.brb.reset_network_moments = parse_bool(key, v);
        else if (key == "brb.reset_dcn_counts") c.brb.reset_dcn_counts = parse_bool(key, v);
        else if (key == "brb.noise_beta") c.brb.noise_beta = parse_number<double>(key, v);
        else if (key == "brb.subsample") c.brb.recluster.subsample_size = parse_number<std::size_t>(key, v);
        else if (key == "recluster.algorithm") c.brb.recluster.algorithm = parse_recluster_algorithm(v);
        else if (key == "recluster.max_iters") c.brb.recluster.max_iters = parse_number<std::size_t>(key, v);
        else if (key == "recluster.tol") c.brb.recluster.tol = parse_number<double>(key, v);
        else if (key == "augment.enabled") c.augment.enabled = parse_bool(key, v);
        else if (key == "augment.max_translation") c.augment.max_translation = parse_number<std::size_t>(key, v);
        else if (key == "augment.max_rotation") c.augment.max_rotation_deg = parse_number<double>(key, v);
        else if (key == "augment.jitter_std") c.augment.jitter_std = parse_number<double>(key, v);
        else if (key == "augment.pretraining") c.augment_pretraining = parse_bool(key, v);
        else if (key == "pretrain.holdout_fraction") c.holdout_fraction = parse_number<double>(key, v);
        else if (key == "dcn.reset_counts_each_epoch") c.dcn_reset_counts_each_epoch = parse_bool(key, v);
        else if (key == "eval.geometry_every") c.eval.geometry_every = parse_number<std::size_t>(key, v);
        else if (key == "eval.subsample") c.eval.subsample = parse_number<std::size_t>(key, v);
        else if (key == "eval.ratio_hist_every") c.eval.ratio_hist_every = parse_number<std::size_t>(key, v);
        else if (key == "eval.ratio_hist_bins") c.eval.ratio_hist_bins = parse_number<std::size_t>(key, v);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "output_dir") c.output_dir = v;
        else throw ConfigError("unknown config key '" + key + "'");
    }
    if (height || width || channels) {
        if (!height || !width) throw ConfigError("dataset.height and dataset.width must be given together");
        c.dataset.geometry = ImageGeometry{*height, *width, channels.value_or(1)};
    } else if (c.dataset.kind == DatasetKind::optdigits) {
        c.dataset.geometry = ImageGeometry{8, 8, 1};
    }
    if (c.dataset.kind == DatasetKind::optdigits && c.dataset.path.empty())
        c.dataset.path = std::string(BRB_DATA_DIR) + "/optdigits.csv";
    if (c.dataset.kind == DatasetKind::csv && c.dataset.path.empty()) throw ConfigError("dataset=csv needs dataset.path");

    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(c.weights.ssl >= 0.0) || !(c.weights.cluster >= 0.0)) throw ConfigError("loss weights must be >= 0");
    if (!(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0)) throw ConfigError("pretrain.holdout_fraction must be in [0, 1)");
    if (c.eval.subsample < 1) throw ConfigError("eval.subsample must be >= 1");
    if (c.eval.ratio_hist_bins < 1) throw ConfigError("eval.ratio_hist_bins must be >= 1");
    c.brb.recluster.k = c.n_clusters > 0 ? c.n_clusters : 1;
    c.brb.validate();
    c.augment.validate();
    c.echo = effective_kv(c);
    return c;
}

}  // namespace brb
