#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/core/rng.hpp"

namespace brb {

enum class ReclusterAlgorithm { kmeans, kmeans_pp_init, kmedoids };

inline std::string_view to_string(ReclusterAlgorithm a) {
    switch (a) {
        case ReclusterAlgorithm::kmeans: return "kmeans";
        case ReclusterAlgorithm::kmeans_pp_init: return "kmeans_pp_init";
        case ReclusterAlgorithm::kmedoids: return "kmedoids";
    }
    return "?";
}

inline ReclusterAlgorithm parse_recluster_algorithm(std::string_view s) {
    if (s == "kmeans") return ReclusterAlgorithm::kmeans;
    if (s == "kmeans_pp_init" || s == "kmeans++") return ReclusterAlgorithm::kmeans_pp_init;
    if (s == "kmedoids") return ReclusterAlgorithm::kmedoids;
    if (s == "em") throw ConfigError("recluster algorithm 'em' is not supported");
    throw ConfigError("unknown recluster algorithm '" + std::string(s) + "'");
}

struct ReclusterConfig {
    ReclusterAlgorithm algorithm = ReclusterAlgorithm::kmeans;
    std::size_t k = 10;
    std::size_t max_iters = 300;
    double tol = 1e-6;                 // relative inertia change
    std::size_t subsample_size = 10000;

    void validate() const {
        if (k < 1) throw ConfigError("recluster: k must be >= 1");
        if (max_iters < 1) throw ConfigError("recluster: max_iters must be >= 1");
        if (subsample_size < k) throw ConfigError("recluster: subsample size must be >= k");
        if (!(tol >= 0.0)) throw ConfigError("recluster: tol must be >= 0");
    }
};

struct ClusteringResult {
    DenseMatrix centroids;
    std::vector<int> labels;
    double inertia = 0.0;       // Σ‖p − μ_label‖² (k-medoids: Σ‖p − μ_label‖)
    std::size_t iterations = 0;
};

namespace detail {

inline void require_enough_points(const DenseMatrix& points, std::size_t k) {
    if (k == 0) throw ConfigError("clustering: k must be >= 1");
    if (points.rows() < k)
        throw InputError("clustering: " + std::to_string(points.rows()) + " points for k=" + std::to_string(k));
}

inline std::vector<std::size_t> kmeans_pp_indices(const DenseMatrix& points, std::size_t k, SeededRng& rng) {
    require_enough_points(points, k);
    const std::size_t n = points.rows();
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    chosen.push_back(static_cast<std::size_t>(rng.uniform_index(n)));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), points.row(chosen[0]));
    while (chosen.size() < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            pick = n;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (u < acc && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // rounding at the top end: take the last positive-weight point
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
            }
        } else {
            // every remaining point coincides with a chosen center
            pick = static_cast<std::size_t>(rng.uniform_index(n));
        }
        chosen.push_back(pick);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(pick)));
    }
    return chosen;
}

inline double assign_nearest(const DenseMatrix& points, const DenseMatrix& centers, std::vector<int>& labels,
                             std::vector<double>& dist) {
    const std::size_t n = points.rows(), k = centers.rows();
    labels.resize(n);
    dist.resize(n);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = squared_distance(points.row(i), centers.row(0));
        for (std::size_t j = 1; j < k; ++j) {
            const double d = squared_distance(points.row(i), centers.row(j));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        labels[i] = static_cast<int>(best);
        dist[i] = best_d;
        inertia += best_d;
    }
    return inertia;
}

// Empty clusters seize the point farthest from its current center (one
// point per empty cluster, donors must keep at least one member).
inline void repair_empty_clusters(const DenseMatrix& points, DenseMatrix& centers, std::vector<int>& labels,
                                  std::vector<double>& dist) {
    const std::size_t k = centers.rows();
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t j = 0; j < k; ++j) {
        if (sizes[j] > 0) continue;
        std::size_t far = labels.size();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
            if (far == labels.size() || dist[i] > dist[far]) far = i;
        }
        if (far == labels.size()) break;  // fewer distinct donors than clusters
        --sizes[static_cast<std::size_t>(labels[far])];
        ++sizes[j];
        labels[far] = static_cast<int>(j);
        dist[far] = 0.0;
        std::copy_n(points.row(far).begin(), points.cols(), centers.row(j).begin());
    }
}

inline void update_means(const DenseMatrix& points, const std::vector<int>& labels, DenseMatrix& centers) {
    const std::size_t k = centers.rows(), d = centers.cols();
    DenseMatrix sums(k, d);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto j = static_cast<std::size_t>(labels[i]);
        ++sizes[j];
        auto s = sums.row(j);
        const auto p = points.row(i);
        for (std::size_t c = 0; c < d; ++c) s[c] += p[c];
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (sizes[j] == 0) continue;
        auto m = centers.row(j);
        const auto s = sums.row(j);
        for (std::size_t c = 0; c < d; ++c) m[c] = s[c] / static_cast<double>(sizes[j]);
    }
}

}  // namespace detail

// k-means++ seeding: first center uniform, the rest drawn ∝ D².
inline DenseMatrix kmeans_pp_seed(const DenseMatrix& points, std::size_t k, SeededRng& rng) {
    return gather_rows(points, detail::kmeans_pp_indices(points, k, rng));
}

// Seeds only, no Lloyd refinement.
inline ClusteringResult kmeans_pp_init(const DenseMatrix& points, std::size_t k, SeededRng& rng) {
    ClusteringResult r;
    r.centroids = kmeans_pp_seed(points, k, rng);
    std::vector<double> dist;
    r.inertia = detail::assign_nearest(points, r.centroids, r.labels, dist);
    return r;
}

// Lloyd's algorithm from a single k-means++ seeding. Throws InvariantError if
// the inertia ever increases between iterations.
inline ClusteringResult kmeans(const DenseMatrix& points, const ReclusterConfig& cfg, SeededRng& rng) {
    if (cfg.k < 1 || cfg.max_iters < 1) throw ConfigError("kmeans: k and max_iters must be >= 1");
    ClusteringResult r;
    r.centroids = kmeans_pp_seed(points, cfg.k, rng);
    std::vector<double> dist;
    double prev = std::numeric_limits<double>::infinity();
    std::vector<int> prev_labels;
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        detail::assign_nearest(points, r.centroids, r.labels, dist);
        detail::repair_empty_clusters(points, r.centroids, r.labels, dist);
        double inertia = 0.0;
        for (double v : dist) inertia += v;
        if (inertia > prev * (1.0 + 1e-12) + 1e-300)
            throw InvariantError("kmeans: inertia increased from " + std::to_string(prev) + " to " +
                                 std::to_string(inertia) + " at iteration " + std::to_string(it));
        r.iterations = it + 1;
        const bool stable = r.labels == prev_labels;
        const bool converged = std::isfinite(prev) && prev - inertia <= cfg.tol * prev;
        prev = inertia;
        prev_labels = r.labels;
        if (stable || converged) break;
        detail::update_means(points, r.labels, r.centroids);
    }
    // Final labels are consistent with the returned centroids.
    r.inertia = detail::assign_nearest(points, r.centroids, r.labels, dist);
    if (r.inertia > prev * (1.0 + 1e-12) + 1e-300)
        throw InvariantError("kmeans: final inertia increased");
    return r;
}

// Alternating (Voronoi-iteration) k-medoids with Euclidean distances and
// k-means++ seeding. Every returned center is an input point.
inline ClusteringResult kmedoids(const DenseMatrix& points, const ReclusterConfig& cfg, SeededRng& rng) {
    const std::size_t n = points.rows(), k = cfg.k;
    std::vector<std::size_t> medoids = detail::kmeans_pp_indices(points, k, rng);
    std::vector<int> labels(n, 0);
    auto assign = [&]() {
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::sqrt(squared_distance(points.row(i), points.row(medoids[0])));
            for (std::size_t j = 1; j < k; ++j) {
                const double d = std::sqrt(squared_distance(points.row(i), points.row(medoids[j])));
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            labels[i] = static_cast<int>(best);
            cost += best_d;
        }
        return cost;
    };
    double cost = assign();
    std::size_t iters = 0;
    for (; iters < cfg.max_iters; ++iters) {
        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
        bool changed = false;
        for (std::size_t j = 0; j < k; ++j) {
            const auto& mem = members[j];
            if (mem.empty()) continue;
            std::size_t best = medoids[j];
            double best_sum = std::numeric_limits<double>::infinity();
            for (std::size_t a : mem) {
                double s = 0.0;
                for (std::size_t b : mem) s += std::sqrt(squared_distance(points.row(a), points.row(b)));
                if (s < best_sum || (s == best_sum && a == medoids[j])) {
                    best_sum = s;
                    best = a;
                }
            }
            if (best != medoids[j]) {
                medoids[j] = best;
                changed = true;
            }
        }
        if (!changed) break;
        const double next = assign();
        if (next >= cost) {
            cost = next;
            break;
        }
        cost = next;
    }
    ClusteringResult r;
    r.centroids = gather_rows(points, medoids);
    r.labels = labels;
    r.inertia = cost;
    r.iterations = iters + 1;
    return r;
}

// Dispatches to the configured algorithm on an (already subsampled)
// embedding matrix.
inline ClusteringResult recluster_embeddings(const DenseMatrix& embeddings, const ReclusterConfig& cfg, SeededRng& rng) {
    if (cfg.k < 1) throw ConfigError("recluster: k must be >= 1");
    detail::require_enough_points(embeddings, cfg.k);
    switch (cfg.algorithm) {
        case ReclusterAlgorithm::kmeans: return kmeans(embeddings, cfg, rng);
        case ReclusterAlgorithm::kmeans_pp_init: return kmeans_pp_init(embeddings, cfg.k, rng);
        case ReclusterAlgorithm::kmedoids: return kmedoids(embeddings, cfg, rng);
    }
    throw ConfigError("recluster: unknown algorithm");
}

}  // namespace brb
