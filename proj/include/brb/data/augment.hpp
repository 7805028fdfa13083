#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/core/rng.hpp"
#include "brb/data/dataset.hpp"

namespace brb {

struct AugmentConfig {
    bool enabled = false;
    std::size_t max_translation = 1;  // pixels, per axis
    double max_rotation_deg = 16.0;
    double jitter_std = 0.0;

    void validate() const {
        if (!(max_rotation_deg >= 0.0) || !(jitter_std >= 0.0)) throw ConfigError("augmentation parameters must be >= 0");
    }
};

struct AffineDraw {
    long dx = 0;
    long dy = 0;
    double angle_rad = 0.0;
};

// Rotates about the image centre and then shifts by (dx, dy), sampling the
// source with nearest-neighbour lookup through the inverse map. Pixels that
// map outside the image take `fill`. Works per channel (channel-major rows).
inline void affine_image(std::span<const double> src, std::span<double> dst, const ImageGeometry& g,
                         const AffineDraw& t, double fill) {
    const double cy = (static_cast<double>(g.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(g.width) - 1.0) / 2.0;
    const double c = std::cos(t.angle_rad), s = std::sin(t.angle_rad);
    const std::size_t plane = g.height * g.width;
    for (std::size_t ch = 0; ch < g.channels; ++ch)
        for (std::size_t y = 0; y < g.height; ++y)
            for (std::size_t x = 0; x < g.width; ++x) {
                const double ux = static_cast<double>(x) - static_cast<double>(t.dx) - cx;
                const double uy = static_cast<double>(y) - static_cast<double>(t.dy) - cy;
                const double sx = c * ux + s * uy + cx;
                const double sy = -s * ux + c * uy + cy;
                const long ix = std::lround(sx), iy = std::lround(sy);
                double v = fill;
                if (ix >= 0 && iy >= 0 && ix < static_cast<long>(g.width) && iy < static_cast<long>(g.height))
                    v = src[ch * plane + static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)];
                dst[ch * plane + y * g.width + x] = v;
            }
}

// Independent random transform per row. Without geometry only the jitter
// applies. Uncovered pixels are filled with the row minimum (the background
// level after standardisation).
inline DenseMatrix augment_batch(const DenseMatrix& batch, const std::optional<ImageGeometry>& geometry,
                                 const AugmentConfig& cfg, SeededRng& rng) {
    if (!cfg.enabled) return batch;
    if (geometry && geometry->size() != batch.cols()) throw ShapeError("augment_batch: geometry does not match batch");
    DenseMatrix out(batch.rows(), batch.cols());
    const long shift = static_cast<long>(cfg.max_translation);
    const double max_rad = cfg.max_rotation_deg * std::numbers::pi / 180.0;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        const auto src = batch.row(i);
        auto dst = out.row(i);
        if (geometry) {
            AffineDraw t;
            t.dx = shift > 0 ? static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(2 * shift + 1))) - shift : 0;
            t.dy = shift > 0 ? static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(2 * shift + 1))) - shift : 0;
            t.angle_rad = max_rad > 0.0 ? rng.uniform(-max_rad, max_rad) : 0.0;
            const double fill = *std::min_element(src.begin(), src.end());
            affine_image(src, dst, *geometry, t, fill);
        } else {
            std::copy(src.begin(), src.end(), dst.begin());
        }
        if (cfg.jitter_std > 0.0)
            for (double& v : dst) v += rng.normal(0.0, cfg.jitter_std);
    }
    return out;
}

}  // namespace brb
