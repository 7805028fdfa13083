#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/core/rng.hpp"

namespace brb {

enum class Activation { relu, identity };

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::relu;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
    std::vector<LayerSpec> encoder;
    std::vector<LayerSpec> decoder;
};

// Mirrored feed-forward autoencoder: D-h1-...-hm-d for the encoder and
// d-hm-...-h1-D for the decoder. Hidden layers use ReLU; the embedding layer
// and the final decoder layer are linear.
inline NetworkSpec autoencoder_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                    std::size_t embedding_dim) {
    NetworkSpec spec;
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(embedding_dim);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        spec.encoder.push_back({widths[i], widths[i + 1], last ? Activation::identity : Activation::relu});
    }
    for (std::size_t i = widths.size() - 1; i > 0; --i) {
        const bool last = i == 1;
        spec.decoder.push_back({widths[i], widths[i - 1], last ? Activation::identity : Activation::relu});
    }
    return spec;
}

// Weight law used at initialisation and as the fresh-sample law of soft
// resets: U(-gain/sqrt(fan_in), +gain/sqrt(fan_in)). Biases start at zero.
struct InitDistribution {
    double gain = 1.0;

    double bound(std::size_t fan_in) const { return gain / std::sqrt(static_cast<double>(fan_in)); }

    double sample(std::size_t fan_in, SeededRng& rng) const {
        const double b = bound(fan_in);
        return rng.uniform(-b, b);
    }

    DenseMatrix sample_weights(std::size_t in_dim, std::size_t out_dim, SeededRng& rng) const {
        DenseMatrix w(in_dim, out_dim);
        for (double& v : w.values()) v = sample(in_dim, rng);
        return w;
    }
};

// weights are in_dim x out_dim so a layer computes act(X * W + b).
struct Layer {
    DenseMatrix weights;
    std::vector<double> biases;
    Activation activation = Activation::relu;

    std::size_t in_dim() const { return weights.rows(); }
    std::size_t out_dim() const { return weights.cols(); }
    LayerSpec spec() const { return {in_dim(), out_dim(), activation}; }

    friend bool operator==(const Layer&, const Layer&) = default;
};

namespace detail {
inline std::uint64_t next_generation() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

struct NetworkParams {
    std::vector<Layer> encoder;
    std::vector<Layer> decoder;
    // Changes whenever the parameter values change; forward caches record it.
    std::uint64_t generation = detail::next_generation();

    std::size_t input_dim() const { return encoder.empty() ? 0 : encoder.front().in_dim(); }
    std::size_t embedding_dim() const { return encoder.empty() ? 0 : encoder.back().out_dim(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* part : {&encoder, &decoder})
            for (const auto& l : *part) n += l.weights.size() + l.biases.size();
        return n;
    }

    void touch() { generation = detail::next_generation(); }

    // Parameter tensors in a fixed order: encoder then decoder, weights then
    // biases per layer.
    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        for (auto* part : {&encoder, &decoder})
            for (auto& l : *part) {
                out.push_back(l.weights.values());
                out.push_back(l.biases);
            }
        return out;
    }
    std::vector<std::span<const double>> blocks() const {
        std::vector<std::span<const double>> out;
        for (const auto* part : {&encoder, &decoder})
            for (const auto& l : *part) {
                out.push_back(l.weights.values());
                out.push_back(l.biases);
            }
        return out;
    }

    // Equality of values only; generation is bookkeeping.
    bool same_values(const NetworkParams& o) const { return encoder == o.encoder && decoder == o.decoder; }
};

inline NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z;
    for (const auto& l : p.encoder)
        z.encoder.push_back({DenseMatrix(l.in_dim(), l.out_dim()), std::vector<double>(l.out_dim(), 0.0), l.activation});
    for (const auto& l : p.decoder)
        z.decoder.push_back({DenseMatrix(l.in_dim(), l.out_dim()), std::vector<double>(l.out_dim(), 0.0), l.activation});
    return z;
}

inline void validate_spec(const NetworkSpec& spec) {
    auto chain = [](const std::vector<LayerSpec>& layers, const char* name) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].in_dim == 0 || layers[i].out_dim == 0)
                throw ShapeError(std::string(name) + " layer " + std::to_string(i) + " has a zero dimension");
            if (i > 0 && layers[i - 1].out_dim != layers[i].in_dim)
                throw ShapeError(std::string(name) + " layers " + std::to_string(i - 1) + " and " +
                                 std::to_string(i) + " do not chain");
        }
    };
    if (spec.encoder.empty()) throw ShapeError("network needs at least one encoder layer");
    chain(spec.encoder, "encoder");
    chain(spec.decoder, "decoder");
    if (!spec.decoder.empty()) {
        if (spec.decoder.front().in_dim != spec.encoder.back().out_dim)
            throw ShapeError("decoder input does not match embedding size");
        if (spec.decoder.back().out_dim != spec.encoder.front().in_dim)
            throw ShapeError("decoder output does not match input size");
    }
}

inline NetworkParams init_network(const NetworkSpec& spec, const InitDistribution& init, SeededRng& rng) {
    validate_spec(spec);
    NetworkParams p;
    auto build = [&](const std::vector<LayerSpec>& specs, std::vector<Layer>& out) {
        for (const auto& s : specs)
            out.push_back({init.sample_weights(s.in_dim, s.out_dim, rng), std::vector<double>(s.out_dim, 0.0),
                           s.activation});
    };
    build(spec.encoder, p.encoder);
    build(spec.decoder, p.decoder);
    return p;
}

// Activations of one forward pass. acts[0] is the layer input, acts[i + 1]
// the post-activation output of layer i.
struct ForwardCache {
    std::vector<DenseMatrix> encoder_acts;
    std::vector<DenseMatrix> decoder_acts;
    std::uint64_t generation = 0;
    bool decoded = false;
};

struct ForwardResult {
    DenseMatrix embedding;
    DenseMatrix reconstruction;  // 0x0 when decoding was skipped
    ForwardCache cache;
};

namespace detail {

inline DenseMatrix apply_layer(const Layer& layer, const DenseMatrix& x) {
    DenseMatrix out(x.rows(), layer.out_dim());
    auto o = as_eigen(out);
    o.noalias() = as_eigen(x) * as_eigen(layer.weights);
    const Eigen::Map<const Eigen::RowVectorXd> b(layer.biases.data(), static_cast<Eigen::Index>(layer.biases.size()));
    o.rowwise() += b;
    if (layer.activation == Activation::relu) o = o.cwiseMax(0.0);
    return out;
}

inline void check_input(const NetworkParams& p, const DenseMatrix& batch) {
    if (batch.cols() != p.input_dim())
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                         std::to_string(p.input_dim()));
}

}  // namespace detail

inline ForwardResult forward(const NetworkParams& params, const DenseMatrix& batch, bool decode = true) {
    detail::check_input(params, batch);
    ForwardResult r;
    r.cache.generation = params.generation;
    r.cache.encoder_acts.reserve(params.encoder.size() + 1);
    r.cache.encoder_acts.push_back(batch);
    for (const auto& l : params.encoder) r.cache.encoder_acts.push_back(detail::apply_layer(l, r.cache.encoder_acts.back()));
    r.embedding = r.cache.encoder_acts.back();
    if (decode && !params.decoder.empty()) {
        r.cache.decoded = true;
        r.cache.decoder_acts.reserve(params.decoder.size() + 1);
        r.cache.decoder_acts.push_back(r.embedding);
        for (const auto& l : params.decoder)
            r.cache.decoder_acts.push_back(detail::apply_layer(l, r.cache.decoder_acts.back()));
        r.reconstruction = r.cache.decoder_acts.back();
    }
    if (!r.embedding.all_finite() || !r.reconstruction.all_finite())
        throw NumericalError("forward: non-finite activations");
    return r;
}

// Embeds a whole dataset without keeping a cache; processes rows in chunks.
inline DenseMatrix encode(const NetworkParams& params, const DenseMatrix& x, std::size_t chunk = 1024) {
    detail::check_input(params, x);
    DenseMatrix out(x.rows(), params.embedding_dim());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < x.rows(); start += chunk) {
        const std::size_t stop = std::min(x.rows(), start + chunk);
        idx.resize(stop - start);
        for (std::size_t i = start; i < stop; ++i) idx[i - start] = i;
        DenseMatrix h = gather_rows(x, idx);
        for (const auto& l : params.encoder) h = detail::apply_layer(l, h);
        std::copy(h.values().begin(), h.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(start * out.cols()));
    }
    if (!out.all_finite()) throw NumericalError("encode: non-finite embedding");
    return out;
}

inline double reconstruction_loss(const DenseMatrix& batch, const DenseMatrix& recon) {
    if (batch.rows() != recon.rows() || batch.cols() != recon.cols())
        throw ShapeError("reconstruction_loss: shape mismatch");
    if (batch.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double d = recon.values()[i] - batch.values()[i];
        s += d * d;
    }
    return s / static_cast<double>(batch.size());
}

// d(reconstruction_loss)/d(recon), scaled by `weight`.
inline DenseMatrix reconstruction_grad(const DenseMatrix& batch, const DenseMatrix& recon, double weight = 1.0) {
    if (batch.rows() != recon.rows() || batch.cols() != recon.cols())
        throw ShapeError("reconstruction_grad: shape mismatch");
    DenseMatrix g(batch.rows(), batch.cols());
    const double scale = batch.empty() ? 0.0 : 2.0 * weight / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) g.values()[i] = scale * (recon.values()[i] - batch.values()[i]);
    return g;
}

namespace detail {

// Backpropagates `upstream` (gradient w.r.t. the last act) through `layers`,
// writing into `grads`. Returns the gradient w.r.t. acts[0] unless
// `need_input_grad` is false.
inline DenseMatrix backprop_stack(const std::vector<Layer>& layers, const std::vector<DenseMatrix>& acts,
                                  DenseMatrix upstream, std::vector<Layer>& grads, bool need_input_grad) {
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Layer& layer = layers[li];
        const DenseMatrix& in = acts[li];
        const DenseMatrix& out = acts[li + 1];
        if (layer.activation == Activation::relu) {
            auto u = upstream.values();
            const auto o = out.values();
            for (std::size_t i = 0; i < u.size(); ++i)
                if (o[i] <= 0.0) u[i] = 0.0;
        }
        as_eigen(grads[li].weights).noalias() += as_eigen(in).transpose() * as_eigen(upstream);
        auto& gb = grads[li].biases;
        for (std::size_t r = 0; r < upstream.rows(); ++r) {
            const auto row = upstream.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
        }
        if (li > 0 || need_input_grad) {
            DenseMatrix down(in.rows(), in.cols());
            as_eigen(down).noalias() = as_eigen(upstream) * as_eigen(layer.weights).transpose();
            upstream = std::move(down);
        }
    }
    return upstream;
}

}  // namespace detail

// Accumulates parameter gradients of a forward pass into `grads` (which must
// mirror `params`). `d_embedding` is the gradient w.r.t. the embedding and
// `d_recon` w.r.t. the reconstruction; pass an empty matrix for "no gradient".
inline void backward_into(const NetworkParams& params, const ForwardCache& cache, const DenseMatrix& d_embedding,
                          const DenseMatrix& d_recon, NetworkParams& grads) {
    if (cache.generation != params.generation || cache.encoder_acts.size() != params.encoder.size() + 1)
        throw ContractError("backward: forward cache is stale for these parameters");
    const std::size_t n = cache.encoder_acts.front().rows();
    const std::size_t d = params.embedding_dim();
    DenseMatrix dh = d_embedding.empty() ? DenseMatrix(n, d) : d_embedding;
    if (dh.rows() != n || dh.cols() != d) throw ShapeError("backward: embedding gradient shape mismatch");
    if (!d_recon.empty()) {
        if (!cache.decoded) throw ContractError("backward: reconstruction gradient given but forward skipped decoding");
        if (d_recon.rows() != n || d_recon.cols() != params.input_dim())
            throw ShapeError("backward: reconstruction gradient shape mismatch");
        DenseMatrix from_decoder = detail::backprop_stack(params.decoder, cache.decoder_acts, d_recon, grads.decoder, true);
        detail::as_eigen(dh) += detail::as_eigen(from_decoder);
    }
    detail::backprop_stack(params.encoder, cache.encoder_acts, std::move(dh), grads.encoder, false);
}

inline NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, const DenseMatrix& d_embedding,
                              const DenseMatrix& d_recon) {
    NetworkParams grads = zeros_like(params);
    backward_into(params, cache, d_embedding, d_recon, grads);
    return grads;
}

}  // namespace brb
