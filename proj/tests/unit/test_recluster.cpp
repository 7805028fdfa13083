#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "brb/cluster/recluster.hpp"
#include "oracles.hpp"
#include "property_checks.hpp"

using namespace brb;

namespace {

ReclusterConfig config(std::size_t k, ReclusterAlgorithm a = ReclusterAlgorithm::kmeans) {
    ReclusterConfig c;
    c.algorithm = a;
    c.k = k;
    c.subsample_size = 1000;
    return c;
}

DenseMatrix three_blobs(SeededRng& rng, std::size_t per = 30) {
    DenseMatrix x(3 * per, 2);
    const double cx[3] = {0, 10, 0}, cy[3] = {0, 0, 10};
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < per; ++i) {
            x(j * per + i, 0) = cx[j] + rng.normal(0, 0.5);
            x(j * per + i, 1) = cy[j] + rng.normal(0, 0.5);
        }
    return x;
}

}  // namespace

TEST(ReclusterAlgorithm, ParseAndRejectEm) {
    EXPECT_EQ(parse_recluster_algorithm("kmeans"), ReclusterAlgorithm::kmeans);
    EXPECT_EQ(parse_recluster_algorithm("kmeans++"), ReclusterAlgorithm::kmeans_pp_init);
    EXPECT_EQ(parse_recluster_algorithm("kmedoids"), ReclusterAlgorithm::kmedoids);
    EXPECT_THROW(parse_recluster_algorithm("em"), ConfigError);
    EXPECT_THROW(parse_recluster_algorithm("spectral"), ConfigError);
}

TEST(ReclusterConfig, Validation) {
    ReclusterConfig c = config(5);
    c.subsample_size = 4;
    EXPECT_THROW(c.validate(), ConfigError);
    c = config(0);
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Kmeans, TwoObviousClusters) {
    const DenseMatrix x = DenseMatrix::from_rows({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
    SeededRng rng(1);
    const ClusteringResult r = kmeans(x, config(2), rng);
    EXPECT_EQ(r.labels[0], r.labels[1]);
    EXPECT_EQ(r.labels[2], r.labels[3]);
    EXPECT_NE(r.labels[0], r.labels[2]);
    EXPECT_NEAR(r.inertia, 1.0, 1e-12);
    std::set<std::pair<double, double>> centers;
    for (std::size_t j = 0; j < 2; ++j) centers.insert({r.centroids(j, 0), r.centroids(j, 1)});
    EXPECT_TRUE(centers.count({0.0, 0.5}));
    EXPECT_TRUE(centers.count({10.0, 10.5}));
}

TEST(Kmeans, KEqualsNGivesZeroInertia) {
    SeededRng rng(2);
    const DenseMatrix x = sample_gaussian(rng, 6, 3, 0, 1);
    const ClusteringResult r = kmeans(x, config(6), rng);
    EXPECT_NEAR(r.inertia, 0.0, 1e-24);
}

TEST(Kmeans, KOneGivesGlobalMean) {
    SeededRng rng(3);
    const DenseMatrix x = sample_gaussian(rng, 40, 2, 1, 1);
    const ClusteringResult r = kmeans(x, config(1), rng);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 40; ++i) {
        mx += x(i, 0) / 40;
        my += x(i, 1) / 40;
    }
    EXPECT_NEAR(r.centroids(0, 0), mx, 1e-12);
    EXPECT_NEAR(r.centroids(0, 1), my, 1e-12);
}

TEST(Kmeans, FewerPointsThanClustersIsInputError) {
    SeededRng rng(4);
    EXPECT_THROW(kmeans(DenseMatrix(2, 2), config(3), rng), InputError);
    EXPECT_THROW(recluster_embeddings(DenseMatrix(2, 2), config(3), rng), InputError);
}

TEST(Kmeans, AllPointsIdenticalNoEmptyClusterCrash) {
    DenseMatrix x(10, 2);
    x.fill(3.0);
    SeededRng rng(5);
    const ClusteringResult r = kmeans(x, config(3), rng);
    EXPECT_EQ(r.inertia, 0.0);
    for (double v : r.centroids.values()) EXPECT_EQ(v, 3.0);
}

TEST(Kmeans, LabelsConsistentWithCentroidsAndNoEmptyClusters) {
    SeededRng rng(6);
    const DenseMatrix x = three_blobs(rng);
    const ClusteringResult r = kmeans(x, config(3), rng);
    EXPECT_EQ(r.labels, row_argmin(pairwise_sq_dists(x, r.centroids)));
    std::set<int> used(r.labels.begin(), r.labels.end());
    EXPECT_EQ(used.size(), 3u);
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        inertia += squared_distance(x.row(i), r.centroids.row(static_cast<std::size_t>(r.labels[i])));
    EXPECT_NEAR(r.inertia, inertia, 1e-9);
}

TEST(Kmeans, SeedDeterminism) {
    SeededRng data(7);
    const DenseMatrix x = sample_gaussian(data, 200, 4, 0, 1);
    SeededRng a(11), b(11);
    const ClusteringResult ra = kmeans(x, config(5), a), rb = kmeans(x, config(5), b);
    EXPECT_EQ(ra.centroids, rb.centroids);
    EXPECT_EQ(ra.labels, rb.labels);
}

TEST(Kmeans, MatchesExhaustiveOptimumOnTinyInstances) {
    const props::KmeansQualityReport r = props::kmeans_quality(25, 10, 20, 99);
    EXPECT_EQ(r.invariant_fires, 0u);
    EXPECT_EQ(r.over_bound, 0u) << "worst ratio " << r.worst_ratio;
}

TEST(Kmeans, ThreeClusterExhaustive) {
    SeededRng rng(12);
    for (int t = 0; t < 20; ++t) {
        const DenseMatrix x = sample_gaussian(rng, 7, 2, 0, 1);
        oracle::Mat nested(7, std::vector<double>(2));
        for (std::size_t i = 0; i < 7; ++i) nested[i] = {x(i, 0), x(i, 1)};
        const double opt = oracle::exhaustive_kmeans_inertia(nested, 3);
        double best = 1e300;
        for (std::uint64_t s = 0; s < 20; ++s) {
            SeededRng krng(s);
            best = std::min(best, kmeans(x, config(3), krng).inertia);
        }
        EXPECT_LE(best, 1.05 * opt + 1e-12);
    }
}

TEST(Kmeans, InertiaNeverIncreasesOnRandomData) {
    // kmeans throws InvariantError when a step increases inertia
    SeededRng rng(13);
    for (int t = 0; t < 50; ++t) {
        const DenseMatrix x = sample_gaussian(rng, 60 + rng.uniform_index(60), 3, 0, 1);
        EXPECT_NO_THROW(kmeans(x, config(2 + rng.uniform_index(8)), rng));
    }
}

TEST(KmeansPpInit, ReturnsDistinctInputPointsWithoutIterating) {
    SeededRng rng(14);
    const DenseMatrix x = three_blobs(rng, 10);
    const ClusteringResult r = kmeans_pp_init(x, 3, rng);
    EXPECT_EQ(r.iterations, 0u);
    std::set<std::vector<double>> seeds;
    for (std::size_t j = 0; j < 3; ++j) {
        const auto row = r.centroids.row(j);
        bool found = false;
        for (std::size_t i = 0; i < x.rows() && !found; ++i) found = x.row(i)[0] == row[0] && x.row(i)[1] == row[1];
        EXPECT_TRUE(found);
        seeds.insert({row.begin(), row.end()});
    }
    EXPECT_EQ(seeds.size(), 3u);
}

TEST(KmeansPpInit, SpreadsSeedsOverSeparatedBlobs) {
    int all_three = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        SeededRng rng(s);
        const DenseMatrix x = three_blobs(rng, 10);
        const ClusteringResult r = kmeans_pp_init(x, 3, rng);
        std::set<int> blobs;
        for (std::size_t j = 0; j < 3; ++j) blobs.insert((r.centroids(j, 0) > 5 ? 1 : 0) + (r.centroids(j, 1) > 5 ? 2 : 0));
        if (blobs.size() == 3) ++all_three;
    }
    EXPECT_GE(all_three, 45);
}

TEST(Kmedoids, CentersAreInputPointsAndCostIsSumOfDistances) {
    SeededRng rng(15);
    const DenseMatrix x = three_blobs(rng, 15);
    const ClusteringResult r = kmedoids(x, config(3, ReclusterAlgorithm::kmedoids), rng);
    double cost = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double best = 1e300;
        for (std::size_t j = 0; j < 3; ++j) best = std::min(best, std::sqrt(squared_distance(x.row(i), r.centroids.row(j))));
        cost += best;
    }
    EXPECT_NEAR(r.inertia, cost, 1e-9);
    for (std::size_t j = 0; j < 3; ++j) {
        bool found = false;
        for (std::size_t i = 0; i < x.rows() && !found; ++i) found = x.row(i)[0] == r.centroids(j, 0) && x.row(i)[1] == r.centroids(j, 1);
        EXPECT_TRUE(found);
    }
}

TEST(Kmedoids, NearBruteForceOptimumOnSmallInstances) {
    SeededRng rng(16);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 8;
        const DenseMatrix x = sample_gaussian(rng, n, 2, 0, 1);
        double opt = 1e300;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                double c = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    c += std::min(std::sqrt(squared_distance(x.row(i), x.row(a))),
                                  std::sqrt(squared_distance(x.row(i), x.row(b))));
                opt = std::min(opt, c);
            }
        double best = 1e300;
        for (std::uint64_t s = 0; s < 20; ++s) {
            SeededRng krng(s);
            best = std::min(best, kmedoids(x, config(2, ReclusterAlgorithm::kmedoids), krng).inertia);
        }
        EXPECT_LE(best, 1.05 * opt + 1e-12);
    }
}

TEST(ReclusterEmbeddings, DispatchesOnAlgorithm) {
    SeededRng data(17);
    const DenseMatrix x = three_blobs(data, 10);
    for (auto a : {ReclusterAlgorithm::kmeans, ReclusterAlgorithm::kmeans_pp_init, ReclusterAlgorithm::kmedoids}) {
        SeededRng r1(3), r2(3);
        const ClusteringResult via = recluster_embeddings(x, config(3, a), r1);
        ClusteringResult direct;
        if (a == ReclusterAlgorithm::kmeans) direct = kmeans(x, config(3, a), r2);
        if (a == ReclusterAlgorithm::kmeans_pp_init) direct = kmeans_pp_init(x, 3, r2);
        if (a == ReclusterAlgorithm::kmedoids) direct = kmedoids(x, config(3, a), r2);
        EXPECT_EQ(via.centroids, direct.centroids) << to_string(a);
    }
}
