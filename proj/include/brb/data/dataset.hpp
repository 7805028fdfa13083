#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "brb/core/error.hpp"
#include "brb/core/matrix.hpp"
#include "brb/core/rng.hpp"

namespace brb {

struct ImageGeometry {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t size() const { return height * width * channels; }
    friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

struct Dataset {
    std::string name;
    DenseMatrix x;
    std::vector<int> labels;  // empty when unlabeled
    std::optional<ImageGeometry> geometry;

    std::size_t n() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }
    bool has_labels() const { return !labels.empty(); }

    std::size_t num_classes() const {
        int hi = -1;
        for (int l : labels) hi = std::max(hi, l);
        return static_cast<std::size_t>(hi + 1);
    }
};

// Labels must be 0..k-1 with every class present.
inline void validate_labels(const std::vector<int>& labels) {
    if (labels.empty()) return;
    std::set<int> seen(labels.begin(), labels.end());
    if (*seen.begin() < 0) throw InputError("labels must be non-negative");
    if (static_cast<std::size_t>(*seen.rbegin()) + 1 != seen.size())
        throw InputError("labels must cover 0..k-1 without gaps");
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_cell(std::string_view cell, std::size_t line_no) {
    cell = trim(cell);
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", line_no);
    return v;
}

}  // namespace detail

// Headerless numeric CSV. With `label_column` set, that column (negative
// values count from the end, so -1 is the last column) holds integer labels.
inline Dataset load_dense_csv(const std::string& path, std::optional<int> label_column = -1,
                              std::optional<ImageGeometry> geometry = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t width = 0, rows = 0, line_no = 0;
    std::size_t label_idx = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (width == 0) {
            width = cells.size();
            if (label_column) {
                const int lc = *label_column;
                const long resolved = lc < 0 ? static_cast<long>(width) + lc : lc;
                if (resolved < 0 || resolved >= static_cast<long>(width))
                    throw InputError("label column " + std::to_string(lc) + " does not exist in '" + path + "'");
                if (width < 2) throw InputError("'" + path + "' has no feature columns besides the label");
                label_idx = static_cast<std::size_t>(resolved);
            }
        } else if (cells.size() != width) {
            throw ParseError("expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()),
                             line_no);
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double v = detail::parse_cell(cells[c], line_no);
            if (label_column && c == label_idx) {
                if (v != std::floor(v)) throw ParseError("label is not an integer", line_no);
                labels.push_back(static_cast<int>(v));
            } else {
                values.push_back(v);
            }
        }
        ++rows;
    }
    if (rows == 0) throw InputError("'" + path + "' contains no rows");
    Dataset ds;
    ds.name = path;
    const std::size_t d = label_column ? width - 1 : width;
    ds.x = DenseMatrix(rows, d, std::move(values));
    ds.labels = std::move(labels);
    validate_labels(ds.labels);
    if (geometry && geometry->size() != d) throw ShapeError("image geometry does not match the feature count");
    ds.geometry = geometry;
    return ds;
}

// Standardises to mean 0 / variance 1 (population statistics). Grayscale
// images use one global mean and std; colour images one per channel
// (channel-major layout); everything else one per feature. Constant groups
// map to 0.
inline void z_transform(Dataset& ds) {
    DenseMatrix& x = ds.x;
    if (x.empty()) return;
    std::vector<std::size_t> group(x.cols());
    std::size_t groups = x.cols();
    if (ds.geometry) {
        const std::size_t plane = ds.geometry->height * ds.geometry->width;
        groups = ds.geometry->channels;
        for (std::size_t c = 0; c < x.cols(); ++c) group[c] = c / plane;
    } else {
        for (std::size_t c = 0; c < x.cols(); ++c) group[c] = c;
    }
    std::vector<double> sum(groups, 0.0), count(groups, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            sum[group[c]] += x(r, c);
            count[group[c]] += 1.0;
        }
    std::vector<double> mean(groups), sd(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) mean[g] = sum[g] / count[g];
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double d = x(r, c) - mean[group[c]];
            sd[group[c]] += d * d;
        }
    for (std::size_t g = 0; g < groups; ++g) sd[g] = std::sqrt(sd[g] / count[g]);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const std::size_t g = group[c];
            x(r, c) = sd[g] > 0.0 ? (x(r, c) - mean[g]) / sd[g] : 0.0;
        }
}

struct BlobSpec {
    std::size_t k = 5;
    std::size_t n_per_cluster = 100;
    std::size_t dim = 2;
    double separation = 5.0;  // minimum distance between blob centers
    double spread = 1.0;      // per-coordinate std of each blob
    std::size_t max_retries = 1000;
};

// Isotropic Gaussian blobs. Centers are drawn uniformly from a cube whose
// side grows with k and separation, rejecting candidates closer than
// `separation` to an accepted center.
inline Dataset make_blobs(const BlobSpec& spec, SeededRng& rng) {
    if (!(spec.separation > 0.0) || !(spec.spread > 0.0)) throw ConfigError("make_blobs: separation and spread must be > 0");
    if (spec.k < 1 || spec.dim < 1 || spec.n_per_cluster < 1) throw ConfigError("make_blobs: k, dim, n must be >= 1");
    const double side = spec.separation * std::max(1.0, std::pow(static_cast<double>(spec.k), 1.0 / static_cast<double>(spec.dim))) * 2.0;
    DenseMatrix centers(spec.k, spec.dim);
    for (std::size_t j = 0; j < spec.k; ++j) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
            auto c = centers.row(j);
            for (double& v : c) v = rng.uniform(-side / 2.0, side / 2.0);
            placed = true;
            for (std::size_t i = 0; i < j && placed; ++i)
                if (std::sqrt(squared_distance(c, centers.row(i))) < spec.separation) placed = false;
        }
        if (!placed) throw ConfigError("make_blobs: could not place centers with the requested separation");
    }
    Dataset ds;
    ds.name = "blobs";
    ds.x = DenseMatrix(spec.k * spec.n_per_cluster, spec.dim);
    ds.labels.resize(ds.x.rows());
    for (std::size_t j = 0; j < spec.k; ++j)
        for (std::size_t i = 0; i < spec.n_per_cluster; ++i) {
            const std::size_t r = j * spec.n_per_cluster + i;
            ds.labels[r] = static_cast<int>(j);
            for (std::size_t c = 0; c < spec.dim; ++c) ds.x(r, c) = centers(j, c) + rng.normal(0.0, spec.spread);
        }
    return ds;
}

}  // namespace brb
