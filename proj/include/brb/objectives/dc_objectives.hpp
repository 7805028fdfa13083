#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/nn/network.hpp"

namespace brb {

enum class Algorithm { dec, idec, dcn };

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::dec: return "DEC";
        case Algorithm::idec: return "IDEC";
        case Algorithm::dcn: return "DCN";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    if (s == "DEC" || s == "dec") return Algorithm::dec;
    if (s == "IDEC" || s == "idec") return Algorithm::idec;
    if (s == "DCN" || s == "dcn") return Algorithm::dcn;
    throw ConfigError("unknown algorithm '" + std::string(s) + "' (expected DEC, IDEC or DCN)");
}

// DEC and IDEC train their centroids with the network optimizer; DCN moves
// them with online k-means updates.
inline bool centroids_are_parameters(Algorithm a) { return a != Algorithm::dcn; }

// L = ssl * L_SSL + cluster * L_C
struct LossWeights {
    double ssl = 1.0;
    double cluster = 0.1;

    static LossWeights defaults(Algorithm a) {
        switch (a) {
            case Algorithm::dec: return {0.0, 1.0};
            case Algorithm::idec: return {1.0, 0.1};
            case Algorithm::dcn: return {1.0, 0.025};
        }
        return {};
    }
};

struct ClusterState {
    DenseMatrix centroids;               // k x d
    std::vector<int> assignments;        // hard labels of the last full evaluation
    DenseMatrix soft_assignments;        // n x k, DEC/IDEC only
    std::vector<std::size_t> dcn_counts; // DCN per-cluster counts, >= 1

    std::size_t k() const { return centroids.rows(); }
};

// ---- DEC / IDEC -----------------------------------------------------------

// Student-t kernel with one degree of freedom, normalised over clusters.
inline DenseMatrix dec_soft_assign(const DenseMatrix& h, const DenseMatrix& m) {
    if (m.rows() == 0) throw ConfigError("dec_soft_assign: need at least one centroid");
    DenseMatrix q = pairwise_sq_dists(h, m);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        auto r = q.row(i);
        double s = 0.0;
        for (double& v : r) {
            v = 1.0 / (1.0 + v);
            s += v;
        }
        for (double& v : r) v /= s;
    }
    return q;
}

// Sharpened target p_ij ∝ q_ij² / f_j with soft frequencies f_j = Σ_i q_ij.
inline DenseMatrix dec_target(const DenseMatrix& q) {
    const std::size_t k = q.cols();
    std::vector<double> freq(k, 0.0);
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) freq[j] += q(i, j);
    for (std::size_t j = 0; j < k; ++j)
        if (!(freq[j] > 0.0))
            throw NumericalError("dec_target: soft frequency of cluster " + std::to_string(j) + " is zero");
    DenseMatrix p(q.rows(), k);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p(i, j) = q(i, j) * q(i, j) / freq[j];
            s += p(i, j);
        }
        if (!(s > 0.0)) throw NumericalError("dec_target: target row " + std::to_string(i) + " vanished");
        for (std::size_t j = 0; j < k; ++j) p(i, j) /= s;
    }
    return p;
}

// Σ_i Σ_j p log(p / q), summed (not averaged) over rows. 0·log 0 = 0.
inline double dec_kl_loss(const DenseMatrix& p, const DenseMatrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) throw ShapeError("dec_kl_loss: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pv = p.values()[i];
        if (pv > 0.0) s += pv * std::log(pv / q.values()[i]);
    }
    return s;
}

struct EmbeddingLossGrad {
    double loss = 0.0;          // averaged over rows
    DenseMatrix d_embedding;    // n x d
    DenseMatrix d_centroids;    // k x d (zero for DCN)
};

// Mean-over-batch KL(P‖Q(h, m)) with P held fixed, and its gradients.
inline EmbeddingLossGrad dec_loss_grad(const DenseMatrix& h, const DenseMatrix& m, const DenseMatrix& p) {
    const std::size_t n = h.rows(), k = m.rows(), d = h.cols();
    if (p.rows() != n || p.cols() != k) throw ShapeError("dec_loss_grad: target shape mismatch");
    const DenseMatrix sq = pairwise_sq_dists(h, m);
    DenseMatrix q(n, k), w(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            w(i, j) = 1.0 / (1.0 + sq(i, j));
            s += w(i, j);
        }
        for (std::size_t j = 0; j < k; ++j) q(i, j) = w(i, j) / s;
    }
    EmbeddingLossGrad r;
    r.loss = n == 0 ? 0.0 : dec_kl_loss(p, q) / static_cast<double>(n);
    r.d_embedding = DenseMatrix(n, d);
    r.d_centroids = DenseMatrix(k, d);
    const double scale = n == 0 ? 0.0 : 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto hi = h.row(i);
        auto gi = r.d_embedding.row(i);
        for (std::size_t j = 0; j < k; ++j) {
            const double coef = scale * w(i, j) * (p(i, j) - q(i, j));
            const auto mj = m.row(j);
            auto gm = r.d_centroids.row(j);
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = coef * (hi[c] - mj[c]);
                gi[c] += diff;
                gm[c] -= diff;
            }
        }
    }
    return r;
}

// ---- DCN ------------------------------------------------------------------

// Nearest centroid; ties go to the lowest index.
inline std::vector<int> dcn_assign(const DenseMatrix& h, const DenseMatrix& m) {
    return row_argmin(pairwise_sq_dists(h, m));
}

// ½ mean_i ‖h_i − m_{a_i}‖²
inline double dcn_cluster_loss(const DenseMatrix& h, const DenseMatrix& m, const std::vector<int>& assignments) {
    if (assignments.size() != h.rows()) throw ShapeError("dcn_cluster_loss: assignment length mismatch");
    if (h.cols() != m.cols()) throw ShapeError("dcn_cluster_loss: dimension mismatch");
    if (h.rows() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        const int a = assignments[i];
        if (a < 0 || static_cast<std::size_t>(a) >= m.rows()) throw InputError("dcn_cluster_loss: invalid assignment");
        s += squared_distance(h.row(i), m.row(static_cast<std::size_t>(a)));
    }
    return 0.5 * s / static_cast<double>(h.rows());
}

inline EmbeddingLossGrad dcn_loss_grad(const DenseMatrix& h, const DenseMatrix& m, const std::vector<int>& assignments) {
    EmbeddingLossGrad r;
    r.loss = dcn_cluster_loss(h, m, assignments);
    r.d_embedding = DenseMatrix(h.rows(), h.cols());
    r.d_centroids = DenseMatrix(m.rows(), m.cols());
    if (h.rows() == 0) return r;
    const double scale = 1.0 / static_cast<double>(h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) {
        const auto mi = m.row(static_cast<std::size_t>(assignments[i]));
        const auto hi = h.row(i);
        auto g = r.d_embedding.row(i);
        for (std::size_t c = 0; c < h.cols(); ++c) g[c] = scale * (hi[c] - mi[c]);
    }
    return r;
}

// Online k-means step: μ_j ← μ_j − (μ_j − z)/c_j, then c_j += 1.
inline void dcn_center_update(DenseMatrix& m, std::vector<std::size_t>& counts, std::span<const double> z, std::size_t j) {
    if (j >= m.rows() || counts.size() != m.rows()) throw InputError("dcn_center_update: invalid cluster index");
    if (counts[j] < 1) throw InputError("dcn_center_update: counts must be >= 1");
    if (z.size() != m.cols()) throw ShapeError("dcn_center_update: dimension mismatch");
    const double step = 1.0 / static_cast<double>(counts[j]);
    auto mu = m.row(j);
    for (std::size_t c = 0; c < mu.size(); ++c) mu[c] -= step * (mu[c] - z[c]);
    ++counts[j];
}

// ---- augmentation-consistent losses --------------------------------------
// Each is the mean of the original-view and augmented-view term. The target
// (P or the assignment) is always taken from the original view.

inline double augmented_ssl_loss(const DenseMatrix& x, const DenseMatrix& recon, const DenseMatrix& x_aug,
                                 const DenseMatrix& recon_aug) {
    if (x.rows() != x_aug.rows()) throw ShapeError("augmented_ssl_loss: views are not row-aligned");
    return 0.5 * (reconstruction_loss(x, recon) + reconstruction_loss(x_aug, recon_aug));
}

// ½ (KL(P‖Q) + KL(P‖Q^A)) averaged over rows.
inline double augmented_dec_loss(const DenseMatrix& p, const DenseMatrix& q, const DenseMatrix& q_aug) {
    if (q.rows() != q_aug.rows() || q.cols() != q_aug.cols())
        throw ShapeError("augmented_dec_loss: views are not row-aligned");
    if (p.rows() == 0) return 0.0;
    return 0.5 * (dec_kl_loss(p, q) + dec_kl_loss(p, q_aug)) / static_cast<double>(p.rows());
}

// ¼ mean_i (‖z_i − μ_a‖² + ‖z_i^A − μ_a‖²) with a the original row's cluster.
inline double augmented_dcn_loss(const DenseMatrix& h, const DenseMatrix& h_aug, const DenseMatrix& m,
                                 const std::vector<int>& assignments) {
    if (h.rows() != h_aug.rows() || h.cols() != h_aug.cols())
        throw ShapeError("augmented_dcn_loss: views are not row-aligned");
    return 0.5 * (dcn_cluster_loss(h, m, assignments) + dcn_cluster_loss(h_aug, m, assignments));
}

// ---- combined objective ---------------------------------------------------

struct LossBreakdown {
    double total = 0.0;
    double ssl = 0.0;
    double cluster = 0.0;
};

struct CombinedResult {
    LossBreakdown loss;
    NetworkParams grads;
    DenseMatrix centroid_grads;      // k x d; identically zero for DCN
    DenseMatrix embedding;           // embedding of the original batch
    std::vector<int> assignments;    // DCN: h(z_i) used by the loss
};

// Optional overrides that freeze the non-differentiable parts of the
// objective (the DEC target and the DCN assignment). Used by gradient checks.
struct ObjectiveOverrides {
    const DenseMatrix* target = nullptr;
    const std::vector<int>* assignments = nullptr;
};

// λ₁ L_SSL + λ₂ L_C on a batch with parameter and centroid gradients.
//
// When `augmented` is given, every loss term is the average of the term on
// the original and on the augmented rows, and the clustering target (DEC P or
// DCN assignment) comes from the original rows only.
inline CombinedResult combined_loss_and_grads(Algorithm algorithm, const DenseMatrix& batch,
                                              const DenseMatrix* augmented, const NetworkParams& params,
                                              const DenseMatrix& centroids, const LossWeights& weights,
                                              const ObjectiveOverrides& overrides = {}) {
    if (augmented != nullptr && (augmented->rows() != batch.rows() || augmented->cols() != batch.cols()))
        throw ShapeError("combined_loss_and_grads: augmented batch is not row-aligned with the batch");
    if (centroids.cols() != params.embedding_dim())
        throw ShapeError("combined_loss_and_grads: centroid dimension does not match embedding");

    const bool use_ssl = weights.ssl != 0.0;
    const bool use_cluster = weights.cluster != 0.0;
    const double view_weight = augmented != nullptr ? 0.5 : 1.0;

    CombinedResult out;
    out.grads = zeros_like(params);
    out.centroid_grads = DenseMatrix(centroids.rows(), centroids.cols());

    const std::size_t views = augmented != nullptr ? 2 : 1;
    DenseMatrix target;
    for (std::size_t view = 0; view < views; ++view) {
        const DenseMatrix& x = view == 0 ? batch : *augmented;
        ForwardResult fw = forward(params, x, use_ssl);
        if (view == 0) {
            out.embedding = fw.embedding;
            if (algorithm == Algorithm::dcn) {
                out.assignments = overrides.assignments != nullptr ? *overrides.assignments
                                                                   : dcn_assign(fw.embedding, centroids);
            } else if (use_cluster) {
                target = overrides.target != nullptr ? *overrides.target
                                                     : dec_target(dec_soft_assign(fw.embedding, centroids));
            }
        }

        DenseMatrix d_recon;
        if (use_ssl) {
            const double rec = reconstruction_loss(x, fw.reconstruction);
            out.loss.ssl += view_weight * rec;
            d_recon = reconstruction_grad(x, fw.reconstruction, weights.ssl * view_weight);
        }

        DenseMatrix d_emb;
        if (use_cluster) {
            EmbeddingLossGrad c = algorithm == Algorithm::dcn ? dcn_loss_grad(fw.embedding, centroids, out.assignments)
                                                              : dec_loss_grad(fw.embedding, centroids, target);
            out.loss.cluster += view_weight * c.loss;
            const double s = weights.cluster * view_weight;
            d_emb = std::move(c.d_embedding);
            for (double& g : d_emb.values()) g *= s;
            if (algorithm != Algorithm::dcn)
                for (std::size_t i = 0; i < c.d_centroids.size(); ++i)
                    out.centroid_grads.values()[i] += s * c.d_centroids.values()[i];
        }
        backward_into(params, fw.cache, d_emb, d_recon, out.grads);
    }
    out.loss.total = weights.ssl * out.loss.ssl + weights.cluster * out.loss.cluster;
    if (!std::isfinite(out.loss.total)) throw NumericalError("combined loss is not finite");
    return out;
}

}  // namespace brb
