#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/metrics/hungarian.hpp"

namespace brb {

struct MetricRecord {
    std::size_t epoch = 0;
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    double cl_change = 0.0;
    // Quadratic diagnostics; only filled on evaluation epochs for them.
    bool has_geometry = false;
    double intra_cd = 0.0;
    double inter_cd = 0.0;
    double silhouette = 0.0;
    double loss_total = 0.0;
    double loss_ssl = 0.0;
    double loss_cluster = 0.0;
    double decoder_grad_norm = 0.0;
    double epoch_sec = 0.0;
    double eval_sec = 0.0;
};

// Dense contingency table of two labelings after compacting each label set
// to 0..r-1 (in order of first appearance).
struct Contingency {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> counts;  // rows x cols
    std::vector<double> row_sums;
    std::vector<double> col_sums;
    double n = 0.0;

    double at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }
};

namespace detail {

inline std::vector<std::size_t> compact_labels(std::span<const int> labels, std::size_t& distinct) {
    std::map<int, std::size_t> ids;
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.try_emplace(labels[i], ids.size());
        out[i] = it->second;
    }
    distinct = ids.size();
    return out;
}

inline void require_same_length(std::span<const int> a, std::span<const int> b, const char* op) {
    if (a.size() != b.size()) throw InputError(std::string(op) + ": label vectors differ in length");
}

}  // namespace detail

inline Contingency contingency(std::span<const int> a, std::span<const int> b) {
    detail::require_same_length(a, b, "contingency");
    Contingency c;
    const auto ca = detail::compact_labels(a, c.rows);
    const auto cb = detail::compact_labels(b, c.cols);
    c.counts.assign(c.rows * c.cols, 0.0);
    c.row_sums.assign(c.rows, 0.0);
    c.col_sums.assign(c.cols, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        c.counts[ca[i] * c.cols + cb[i]] += 1.0;
        c.row_sums[ca[i]] += 1.0;
        c.col_sums[cb[i]] += 1.0;
    }
    c.n = static_cast<double>(a.size());
    return c;
}

// Best one-to-one matching of predicted to true labels, as a percentage.
// Labels must lie in [0, k); `k` fixes the size of the assignment problem.
inline double clustering_accuracy(std::span<const int> y_true, std::span<const int> y_pred, std::size_t k) {
    detail::require_same_length(y_true, y_pred, "clustering_accuracy");
    if (y_true.empty()) throw InputError("clustering_accuracy: empty labels");
    std::size_t size = k;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_pred[i] < 0) throw InputError("clustering_accuracy: negative label");
        size = std::max({size, static_cast<std::size_t>(y_true[i]) + 1, static_cast<std::size_t>(y_pred[i]) + 1});
    }
    std::vector<double> profit(size * size, 0.0);  // rows: predicted, cols: true
    for (std::size_t i = 0; i < y_true.size(); ++i)
        profit[static_cast<std::size_t>(y_pred[i]) * size + static_cast<std::size_t>(y_true[i])] += 1.0;
    const auto match = hungarian_max_profit(profit, size);
    double hit = 0.0;
    for (std::size_t r = 0; r < size; ++r) hit += profit[r * size + match[r]];
    return 100.0 * hit / static_cast<double>(y_true.size());
}

// 2 I(a;b) / (H(a) + H(b)), natural log. Two single-cluster labelings are
// identical partitions and score 1.
inline double nmi(std::span<const int> a, std::span<const int> b) {
    detail::require_same_length(a, b, "nmi");
    if (a.empty()) throw InputError("nmi: empty labels");
    const Contingency c = contingency(a, b);
    auto entropy = [&](const std::vector<double>& sums) {
        double h = 0.0;
        for (double s : sums)
            if (s > 0.0) h -= (s / c.n) * std::log(s / c.n);
        return h;
    };
    const double ha = entropy(c.row_sums), hb = entropy(c.col_sums);
    if (ha + hb == 0.0) return 1.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j) {
            const double nij = c.at(i, j);
            if (nij > 0.0) mi += (nij / c.n) * std::log(c.n * nij / (c.row_sums[i] * c.col_sums[j]));
        }
    return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

// Adjusted Rand index (Hubert & Arabie).
inline double ari(std::span<const int> a, std::span<const int> b) {
    detail::require_same_length(a, b, "ari");
    if (a.empty()) throw InputError("ari: empty labels");
    const Contingency c = contingency(a, b);
    auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (double v : c.counts) sum_ij += comb2(v);
    for (double v : c.row_sums) sum_a += comb2(v);
    for (double v : c.col_sums) sum_b += comb2(v);
    const double total = comb2(c.n);
    const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0.0) {
        // both partitions trivial (all singletons or one cluster)
        const bool same = c.rows == c.cols && sum_ij == sum_a && sum_ij == sum_b;
        return same ? 1.0 : 0.0;
    }
    return (sum_ij - expected) / denom;
}

// 100 * (1 - NMI) between consecutive hard labelings.
inline double cluster_label_change(std::span<const int> current, std::span<const int> previous) {
    return 100.0 * (1.0 - nmi(current, previous));
}

inline DenseMatrix l2_normalize_rows(const DenseMatrix& x) {
    DenseMatrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        const double norm = std::sqrt(squared_norm(r));
        if (norm > 0.0)
            for (double& v : r) v /= norm;
    }
    return out;
}

struct ClassDistances {
    double intra = 0.0;
    double inter = 0.0;
    double silhouette = 0.0;
    std::size_t counted = 0;  // samples with a defined intra term
};

// Per-sample mean distance to the own class (excluding itself) and to the
// nearest other class, on l2-normalized rows. Samples of singleton classes
// have no intra term and are skipped in all three averages.
inline ClassDistances class_distances(const DenseMatrix& embeddings, std::span<const int> labels) {
    if (embeddings.rows() != labels.size()) throw InputError("class_distances: label count does not match rows");
    std::size_t n_classes = 0;
    const auto y = detail::compact_labels(labels, n_classes);
    if (n_classes < 2) throw InputError("class_distances: need at least two classes");
    const DenseMatrix z = l2_normalize_rows(embeddings);
    const std::size_t n = z.rows();
    std::vector<double> class_size(n_classes, 0.0);
    for (std::size_t c : y) class_size[c] += 1.0;

    ClassDistances out;
    std::vector<double> sums(n_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (class_size[y[i]] < 2.0) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        const auto zi = z.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sums[y[j]] += std::sqrt(squared_distance(zi, z.row(j)));
        }
        const double a = sums[y[i]] / (class_size[y[i]] - 1.0);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_classes; ++c)
            if (c != y[i]) b = std::min(b, sums[c] / class_size[c]);
        out.intra += a;
        out.inter += b;
        const double m = std::max(a, b);
        out.silhouette += m > 0.0 ? (b - a) / m : 0.0;
        ++out.counted;
    }
    if (out.counted > 0) {
        const double cnt = static_cast<double>(out.counted);
        out.intra /= cnt;
        out.inter /= cnt;
        out.silhouette /= cnt;
    }
    return out;
}

inline std::pair<double, double> intra_inter_cd(const DenseMatrix& embeddings, std::span<const int> labels) {
    const ClassDistances d = class_distances(embeddings, labels);
    return {d.intra, d.inter};
}

inline double silhouette(const DenseMatrix& embeddings, std::span<const int> labels) {
    return class_distances(embeddings, labels).silhouette;
}

struct DistanceRatioHistogram {
    std::size_t epoch = 0;
    std::vector<double> edges;  // bins + 1 edges over [0, 1]
    std::vector<std::size_t> counts;
    std::vector<double> ratios;  // per-sample ρ
};

// ρ = d1 / d2 with d1, d2 the distances to the closest and second-closest
// centroid; ρ = 1 when d2 = 0. The last bin is closed on the right.
inline DistanceRatioHistogram distance_ratio_hist(const DenseMatrix& embeddings, const DenseMatrix& centroids,
                                                  std::size_t bins, std::size_t epoch = 0) {
    if (centroids.rows() < 2) throw ConfigError("distance_ratio_hist: need at least two centroids");
    if (bins < 1) throw ConfigError("distance_ratio_hist: need at least one bin");
    const DenseMatrix d2 = pairwise_sq_dists(embeddings, centroids);
    DistanceRatioHistogram h;
    h.epoch = epoch;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
    h.ratios.resize(embeddings.rows());
    for (std::size_t i = 0; i < embeddings.rows(); ++i) {
        double first = std::numeric_limits<double>::infinity(), second = first;
        for (double v : d2.row(i)) {
            if (v < first) {
                second = first;
                first = v;
            } else if (v < second) {
                second = v;
            }
        }
        const double rho = second == 0.0 ? 1.0 : std::sqrt(first) / std::sqrt(second);
        h.ratios[i] = rho;
        const auto bin = std::min(bins - 1, static_cast<std::size_t>(rho * static_cast<double>(bins)));
        ++h.counts[bin];
    }
    return h;
}

}  // namespace brb
