#include <gtest/gtest.h>

#include <cmath>

#include "brb/nn/adam.hpp"
#include "brb/nn/network.hpp"
#include "oracles.hpp"

using namespace brb;

namespace {

NetworkParams small_net(std::uint64_t seed, std::size_t in = 6, std::vector<std::size_t> hidden = {5, 4},
                        std::size_t emb = 2) {
    SeededRng rng(seed);
    NetworkParams p = init_network(autoencoder_spec(in, hidden, emb), InitDistribution{1.0}, rng);
    for (auto* part : {&p.encoder, &p.decoder})
        for (auto& l : *part)
            for (double& b : l.biases) b = rng.uniform(-0.1, 0.1);
    return p;
}

DenseMatrix random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
    SeededRng rng(seed);
    return sample_gaussian(rng, n, d, 0.0, 1.0);
}

}  // namespace

TEST(AutoencoderSpec, MirroredLayout) {
    const NetworkSpec s = autoencoder_spec(64, {32, 16}, 4);
    ASSERT_EQ(s.encoder.size(), 3u);
    ASSERT_EQ(s.decoder.size(), 3u);
    EXPECT_EQ(s.encoder[0].in_dim, 64u);
    EXPECT_EQ(s.encoder[2].out_dim, 4u);
    EXPECT_EQ(s.encoder[2].activation, Activation::identity);
    EXPECT_EQ(s.encoder[0].activation, Activation::relu);
    EXPECT_EQ(s.decoder[0].in_dim, 4u);
    EXPECT_EQ(s.decoder[2].out_dim, 64u);
    EXPECT_EQ(s.decoder[2].activation, Activation::identity);
}

TEST(InitNetwork, WeightsWithinBoundAndBiasesZero) {
    SeededRng rng(1);
    const NetworkParams p = init_network(autoencoder_spec(20, {10}, 3), InitDistribution{2.0}, rng);
    for (const auto* part : {&p.encoder, &p.decoder})
        for (const auto& l : *part) {
            const double bound = 2.0 / std::sqrt(static_cast<double>(l.in_dim()));
            for (double w : l.weights.values()) EXPECT_LE(std::abs(w), bound);
            for (double b : l.biases) EXPECT_EQ(b, 0.0);
        }
}

TEST(InitNetwork, SameSeedSameParams) {
    EXPECT_TRUE(small_net(5).same_values(small_net(5)));
    EXPECT_FALSE(small_net(5).same_values(small_net(6)));
}

TEST(Forward, HandComputedSingleLayer) {
    NetworkParams p;
    p.encoder.push_back({DenseMatrix::from_rows({{1, -1}, {2, 0}}), {0.5, -3.0}, Activation::relu});
    const DenseMatrix x = DenseMatrix::from_rows({{1, 1}});
    const ForwardResult r = forward(p, x, false);
    EXPECT_EQ(r.embedding(0, 0), 3.5);
    EXPECT_EQ(r.embedding(0, 1), 0.0);  // -4 clipped by relu
}

TEST(Forward, InputWidthMismatchThrows) {
    const NetworkParams p = small_net(1);
    EXPECT_THROW(forward(p, DenseMatrix(3, 5)), ShapeError);
}

TEST(Forward, EncodeMatchesForwardInChunks) {
    const NetworkParams p = small_net(2);
    const DenseMatrix x = random_batch(37, 6, 3);
    const DenseMatrix a = forward(p, x, false).embedding;
    const DenseMatrix b = encode(p, x, 8);
    ASSERT_EQ(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-15);
}

TEST(Backward, StaleCacheRejected) {
    NetworkParams p = small_net(3);
    const DenseMatrix x = random_batch(4, 6, 4);
    const ForwardResult r = forward(p, x);
    p.touch();
    EXPECT_THROW(backward(p, r.cache, DenseMatrix(), reconstruction_grad(x, r.reconstruction)), ContractError);
}

TEST(Backward, ReconstructionGradientMatchesFiniteDifferences) {
    NetworkParams p = small_net(4);
    const DenseMatrix x = random_batch(8, 6, 5);
    const ForwardResult r = forward(p, x);
    const NetworkParams g = backward(p, r.cache, DenseMatrix(), reconstruction_grad(x, r.reconstruction));
    auto f = [&] { return reconstruction_loss(x, forward(p, x).reconstruction); };
    auto pb = p.blocks();
    const auto gb = g.blocks();
    for (std::size_t b = 0; b < pb.size(); ++b)
        for (std::size_t i = 0; i < pb[b].size(); ++i) {
            const double num = oracle::central_difference(f, pb[b][i], 1e-5);
            EXPECT_TRUE(oracle::grad_close(gb[b][i], num, 1e-4, 1e-8))
                << "block " << b << " index " << i << ": analytic " << gb[b][i] << " numeric " << num;
        }
}

TEST(Backward, EmbeddingGradientOnlyTouchesEncoder) {
    const NetworkParams p = small_net(5);
    const DenseMatrix x = random_batch(5, 6, 6);
    const ForwardResult r = forward(p, x, false);
    DenseMatrix dh(5, 2);
    dh.fill(1.0);
    const NetworkParams g = backward(p, r.cache, dh, DenseMatrix());
    for (const auto& l : g.decoder) {
        for (double v : l.weights.values()) EXPECT_EQ(v, 0.0);
        for (double v : l.biases) EXPECT_EQ(v, 0.0);
    }
}

TEST(ReconstructionLoss, MeanSquaredError) {
    const DenseMatrix x = DenseMatrix::from_rows({{0, 0}, {1, 1}});
    const DenseMatrix y = DenseMatrix::from_rows({{1, 0}, {1, 3}});
    EXPECT_DOUBLE_EQ(reconstruction_loss(x, y), (1.0 + 4.0) / 4.0);
}

TEST(Adam, HandComputedFirstStep) {
    NetworkParams p;
    p.encoder.push_back({DenseMatrix::from_rows({{1.0}}), {0.0}, Activation::identity});
    NetworkParams g = zeros_like(p);
    g.encoder[0].weights(0, 0) = 0.5;
    g.encoder[0].biases[0] = -2.0;
    AdamHyper h;
    h.learning_rate = 0.1;
    AdamState s = make_adam(p, nullptr, h);
    adam_step(p, nullptr, g, nullptr, s);
    // bias-corrected first step moves each coordinate by lr * sign(g)
    EXPECT_NEAR(p.encoder[0].weights(0, 0), 1.0 - 0.1, 1e-8);
    EXPECT_NEAR(p.encoder[0].biases[0], 0.1, 1e-8);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, HandComputedSecondStep) {
    NetworkParams p;
    p.encoder.push_back({DenseMatrix::from_rows({{0.0}}), {0.0}, Activation::identity});
    AdamHyper h;
    h.learning_rate = 0.01;
    AdamState s = make_adam(p, nullptr, h);
    const double g1 = 1.0, g2 = 3.0;
    NetworkParams g = zeros_like(p);
    g.encoder[0].weights(0, 0) = g1;
    adam_step(p, nullptr, g, nullptr, s);
    g.encoder[0].weights(0, 0) = g2;
    adam_step(p, nullptr, g, nullptr, s);
    double expected = 0.0, m = 0.0, v = 0.0;
    int t = 0;
    for (double gi : {g1, g2}) {
        ++t;
        m = 0.9 * m + 0.1 * gi;
        v = 0.999 * v + 0.001 * gi * gi;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        expected -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(p.encoder[0].weights(0, 0), expected, 1e-15);
}

TEST(Adam, CentroidBlockUpdatedAlongside) {
    NetworkParams p = small_net(6);
    DenseMatrix c = DenseMatrix::from_rows({{1, 1}, {2, 2}});
    DenseMatrix cg = DenseMatrix::from_rows({{1, -1}, {0, 0}});
    NetworkParams g = zeros_like(p);
    AdamHyper h;
    h.learning_rate = 0.5;
    AdamState s = make_adam(p, &c, h);
    adam_step(p, &c, g, &cg, s);
    EXPECT_NEAR(c(0, 0), 0.5, 1e-7);
    EXPECT_NEAR(c(0, 1), 1.5, 1e-7);
    EXPECT_EQ(c(1, 0), 2.0);
}

TEST(Adam, CentroidArgumentsMustPair) {
    NetworkParams p = small_net(7);
    DenseMatrix c(2, 2);
    NetworkParams g = zeros_like(p);
    AdamState s = make_adam(p, &c);
    EXPECT_THROW(adam_step(p, &c, g, nullptr, s), ContractError);
}

TEST(Adam, ClipScalesGlobalNorm) {
    std::vector<double> a{3.0, 0.0}, b{4.0};
    std::vector<std::span<double>> blocks{a, b};
    const double before = clip_gradients(blocks, 1.0);
    EXPECT_DOUBLE_EQ(before, 5.0);
    EXPECT_NEAR(a[0], 0.6, 1e-15);
    EXPECT_NEAR(b[0], 0.8, 1e-15);
    EXPECT_THROW(clip_gradients(blocks, 0.0), ConfigError);
}
