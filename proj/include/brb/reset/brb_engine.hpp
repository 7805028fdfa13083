#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "brb/cluster/recluster.hpp"
#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/core/rng.hpp"
#include "brb/nn/adam.hpp"
#include "brb/nn/network.hpp"
#include "brb/objectives/dc_objectives.hpp"

namespace brb {

enum class BrbVariant { brb, reset_only, recluster_only, disentangled, noise, off };

inline std::string_view to_string(BrbVariant v) {
    switch (v) {
        case BrbVariant::brb: return "brb";
        case BrbVariant::reset_only: return "reset_only";
        case BrbVariant::recluster_only: return "recluster_only";
        case BrbVariant::disentangled: return "disentangled";
        case BrbVariant::noise: return "noise";
        case BrbVariant::off: return "off";
    }
    return "?";
}

inline BrbVariant parse_variant(std::string_view s) {
    if (s == "brb") return BrbVariant::brb;
    if (s == "reset_only" || s == "reset") return BrbVariant::reset_only;
    if (s == "recluster_only" || s == "recluster") return BrbVariant::recluster_only;
    if (s == "disentangled") return BrbVariant::disentangled;
    if (s == "noise") return BrbVariant::noise;
    if (s == "off" || s == "none") return BrbVariant::off;
    throw ConfigError("unknown variant '" + std::string(s) + "'");
}

struct ResetScope {
    bool embedding_layer = false;
    bool decoder = false;
};

struct BrbConfig {
    double alpha = 0.8;
    std::size_t interval = 20;  // T
    bool reset_embedding_layer = false;
    bool reset_decoder = false;
    bool momentum_reset = true;
    bool reset_network_moments = false;
    bool reset_dcn_counts = true;
    BrbVariant variant = BrbVariant::brb;
    double noise_beta = 0.3;
    ReclusterConfig recluster;

    ResetScope scope() const { return {reset_embedding_layer, reset_decoder}; }

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("brb: alpha must be in (0, 1]");
        if (interval < 1) throw ConfigError("brb: interval T must be >= 1");
        if (!(noise_beta >= 0.0)) throw ConfigError("brb: noise beta must be >= 0");
        recluster.validate();
    }

    bool fires_at(std::size_t epoch) const {
        return variant != BrbVariant::off && epoch > 0 && epoch % interval == 0;
    }
};

struct BrbEvent {
    std::size_t epoch = 0;
    BrbVariant variant = BrbVariant::off;
    std::size_t subsample_size = 0;
    double recluster_inertia = 0.0;
    double reset_sec = 0.0;
    double embed_sec = 0.0;
    double cluster_sec = 0.0;
    double momentum_sec = 0.0;
    double total_sec = 0.0;
};

// θ ← αθ + (1−α)φ for in-scope layers. φ for weights is a fresh draw from
// `init`; φ for biases is 0. Encoder hidden layers are always in scope; the
// embedding layer and the decoder only when flagged.
inline void soft_reset(NetworkParams& params, const InitDistribution& init, double alpha, const ResetScope& scope,
                       SeededRng& rng) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("soft_reset: alpha must be in [0, 1]");
    if (alpha == 1.0) return;
    auto reset_layer = [&](Layer& l) {
        const std::size_t fan_in = l.in_dim();
        for (double& w : l.weights.values()) w = alpha * w + (1.0 - alpha) * init.sample(fan_in, rng);
        for (double& b : l.biases) b = alpha * b;
    };
    const std::size_t hidden = params.encoder.empty() ? 0 : params.encoder.size() - 1;
    for (std::size_t i = 0; i < hidden; ++i) reset_layer(params.encoder[i]);
    if (scope.embedding_layer && !params.encoder.empty()) reset_layer(params.encoder.back());
    if (scope.decoder)
        for (auto& l : params.decoder) reset_layer(l);
    params.touch();
}

// Zeroes the centroid moments. The step counter and the network moments are
// left alone. Returns false (and does nothing) when there is no centroid block.
inline bool momentum_reset(AdamState& adam) {
    if (!adam.has_centroid_block()) return false;
    adam.centroid_m.fill(0.0);
    adam.centroid_v.fill(0.0);
    return true;
}

inline void reset_network_moments(AdamState& adam) {
    for (auto* part : {&adam.m, &adam.v})
        for (auto b : part->blocks()) std::fill(b.begin(), b.end(), 0.0);
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline void install_centroids(ClusterState& state, const DenseMatrix& centroids, const BrbConfig& cfg) {
    if (centroids.rows() != state.k() || centroids.cols() != state.centroids.cols())
        throw InvariantError("reclustering changed the centroid shape");
    state.centroids = centroids;
    if (cfg.reset_dcn_counts && !state.dcn_counts.empty()) std::fill(state.dcn_counts.begin(), state.dcn_counts.end(), 1);
}

// ε ~ N(0, I) rescaled to ‖h‖, then h + βε. h = 0 leaves the row unchanged.
inline DenseMatrix perturb_embeddings(const DenseMatrix& h, double beta, SeededRng& rng) {
    DenseMatrix out = h;
    std::vector<double> eps(h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i) {
        for (double& e : eps) e = rng.normal();
        const double hn = std::sqrt(squared_norm(h.row(i)));
        const double en = std::sqrt(squared_norm(eps));
        if (hn == 0.0 || en == 0.0) continue;
        auto r = out.row(i);
        const double s = beta * hn / en;
        for (std::size_t c = 0; c < eps.size(); ++c) r[c] += s * eps[c];
    }
    return out;
}

}  // namespace detail

// Per-label means of `h` with labels from nearest-centroid assignment of
// `h_probe`. A label nobody chose keeps its current centroid.
inline DenseMatrix relabel_means(const DenseMatrix& h, const DenseMatrix& h_probe, const DenseMatrix& centroids) {
    const std::vector<int> labels = row_argmin(pairwise_sq_dists(h_probe, centroids));
    DenseMatrix sums(centroids.rows(), centroids.cols());
    std::vector<std::size_t> sizes(centroids.rows(), 0);
    for (std::size_t i = 0; i < h.rows(); ++i) {
        const auto j = static_cast<std::size_t>(labels[i]);
        ++sizes[j];
        auto s = sums.row(j);
        const auto r = h.row(i);
        for (std::size_t c = 0; c < s.size(); ++c) s[c] += r[c];
    }
    DenseMatrix out = centroids;
    for (std::size_t j = 0; j < out.rows(); ++j) {
        if (sizes[j] == 0) continue;
        auto o = out.row(j);
        const auto s = sums.row(j);
        for (std::size_t c = 0; c < o.size(); ++c) o[c] = s[c] / static_cast<double>(sizes[j]);
    }
    return out;
}

// Reset a copy of the network, label the subsample by the nearest current
// centroid in the copy's embedding, and average the original embedding per
// label. The original parameters are not modified.
inline DenseMatrix disentangled_variant(const NetworkParams& params, const ClusterState& state, const BrbConfig& cfg,
                                        const InitDistribution& init, const DenseMatrix& subsample, SeededRng& rng) {
    NetworkParams copy = params;
    soft_reset(copy, init, cfg.alpha, cfg.scope(), rng);
    const DenseMatrix h = encode(params, subsample);
    const DenseMatrix h_probe = encode(copy, subsample);
    return relabel_means(h, h_probe, state.centroids);
}

// Recluster the perturbed subsample embedding h + βε with ‖ε‖ = ‖h‖.
inline ClusteringResult noise_variant(const NetworkParams& params, const BrbConfig& cfg, const DenseMatrix& subsample,
                                      SeededRng& cluster_rng, SeededRng& noise_rng) {
    const DenseMatrix h = detail::perturb_embeddings(encode(params, subsample), cfg.noise_beta, noise_rng);
    return recluster_embeddings(h, cfg.recluster, cluster_rng);
}

// One BRB event at an epoch boundary. Draws, in order: the subsample indices,
// a clustering stream and a noise stream (the same in every variant), then
// the reset draws.
inline BrbEvent apply_brb(NetworkParams& params, AdamState& adam, ClusterState& state, std::size_t epoch,
                          const BrbConfig& cfg, const InitDistribution& init, const DenseMatrix& data,
                          SeededRng& rng) {
    BrbEvent ev;
    ev.epoch = epoch;
    ev.variant = cfg.variant;
    if (cfg.variant == BrbVariant::off) return ev;
    const auto t_all = detail::Clock::now();

    const std::vector<std::size_t> idx = subsample_indices(data.rows(), cfg.recluster.subsample_size, rng);
    SeededRng cluster_rng = rng.fork();
    SeededRng noise_rng = rng.fork();
    ev.subsample_size = idx.size();

    const bool resets = cfg.variant == BrbVariant::brb || cfg.variant == BrbVariant::reset_only;
    const bool reclusters = cfg.variant != BrbVariant::reset_only;

    auto t = detail::Clock::now();
    if (resets) {
        soft_reset(params, init, cfg.alpha, cfg.scope(), rng);
        if (cfg.reset_network_moments) reset_network_moments(adam);
    }
    ev.reset_sec = detail::seconds_since(t);

    if (reclusters) {
        const DenseMatrix sub = gather_rows(data, idx);
        DenseMatrix centroids;
        if (cfg.variant == BrbVariant::disentangled) {
            // embedding and relabelling are interleaved; timed as one block
            t = detail::Clock::now();
            centroids = disentangled_variant(params, state, cfg, init, sub, rng);
            ev.cluster_sec = detail::seconds_since(t);
        } else {
            t = detail::Clock::now();
            DenseMatrix h = encode(params, sub);
            if (cfg.variant == BrbVariant::noise) h = detail::perturb_embeddings(h, cfg.noise_beta, noise_rng);
            ev.embed_sec = detail::seconds_since(t);
            t = detail::Clock::now();
            ClusteringResult res = recluster_embeddings(h, cfg.recluster, cluster_rng);
            ev.cluster_sec = detail::seconds_since(t);
            ev.recluster_inertia = res.inertia;
            centroids = std::move(res.centroids);
        }
        detail::install_centroids(state, centroids, cfg);
        t = detail::Clock::now();
        if (cfg.momentum_reset) momentum_reset(adam);
        ev.momentum_sec = detail::seconds_since(t);
    }
    ev.total_sec = detail::seconds_since(t_all);
    return ev;
}

}  // namespace brb
