#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/nn/network.hpp"

namespace brb {

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::optional<double> clip_norm;  // global l2 clip, off by default
};

// Adam moments for the network plus an optional centroid block. The centroid
// block is empty when centroids are not optimizer-owned (DCN).
struct AdamState {
    AdamHyper hyper;
    NetworkParams m;
    NetworkParams v;
    DenseMatrix centroid_m;
    DenseMatrix centroid_v;
    std::uint64_t step = 0;

    bool has_centroid_block() const { return !centroid_m.empty(); }
};

inline AdamState make_adam(const NetworkParams& params, const DenseMatrix* centroids, AdamHyper hyper = {}) {
    AdamState s;
    s.hyper = hyper;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    if (centroids != nullptr) {
        s.centroid_m = DenseMatrix(centroids->rows(), centroids->cols());
        s.centroid_v = DenseMatrix(centroids->rows(), centroids->cols());
    }
    return s;
}

inline double global_norm(std::span<const std::span<double>> blocks) {
    double s = 0.0;
    for (const auto& b : blocks)
        for (double g : b) s += g * g;
    return std::sqrt(s);
}

// Scales all blocks jointly so their global l2 norm is at most max_l2.
// Returns the norm before clipping.
inline double clip_gradients(std::span<const std::span<double>> blocks, double max_l2) {
    if (!(max_l2 > 0.0)) throw ConfigError("clip_gradients: max_l2 must be > 0");
    const double norm = global_norm(blocks);
    if (norm > max_l2) {
        const double scale = max_l2 / norm;
        for (const auto& b : blocks)
            for (double& g : b) g *= scale;
    }
    return norm;
}

inline double clip_gradients(NetworkParams& grads, DenseMatrix* centroid_grads, double max_l2) {
    auto blocks = grads.blocks();
    if (centroid_grads != nullptr) blocks.push_back(centroid_grads->values());
    return clip_gradients(blocks, max_l2);
}

namespace detail {

inline void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
                        const AdamHyper& h, double bc1, double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

}  // namespace detail

// One bias-corrected Adam step. `centroids`/`centroid_grads` may be null when
// the centroids are not optimizer-owned. Gradients are clipped in place first
// when hyper.clip_norm is set.
inline void adam_step(NetworkParams& params, DenseMatrix* centroids, NetworkParams& grads,
                      DenseMatrix* centroid_grads, AdamState& state) {
    if ((centroids == nullptr) != (centroid_grads == nullptr))
        throw ContractError("adam_step: centroids and centroid gradients must be given together");
    if (centroids != nullptr && (centroids->rows() != state.centroid_m.rows() ||
                                 centroids->cols() != state.centroid_m.cols() ||
                                 centroid_grads->rows() != centroids->rows() ||
                                 centroid_grads->cols() != centroids->cols()))
        throw ShapeError("adam_step: centroid block shape mismatch");
    if (state.hyper.clip_norm) clip_gradients(grads, centroid_grads, *state.hyper.clip_norm);

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(state.hyper.beta2, t);

    auto pb = params.blocks();
    auto gb = grads.blocks();
    auto mb = state.m.blocks();
    auto vb = state.v.blocks();
    if (pb.size() != gb.size() || pb.size() != mb.size()) throw ShapeError("adam_step: parameter layout mismatch");
    for (std::size_t i = 0; i < pb.size(); ++i) {
        if (pb[i].size() != gb[i].size() || pb[i].size() != mb[i].size())
            throw ShapeError("adam_step: parameter block size mismatch");
        detail::adam_update(pb[i], gb[i], mb[i], vb[i], state.hyper, bc1, bc2);
    }
    params.touch();
    if (centroids != nullptr)
        detail::adam_update(centroids->values(), centroid_grads->values(), state.centroid_m.values(),
                            state.centroid_v.values(), state.hyper, bc1, bc2);
}

}  // namespace brb
