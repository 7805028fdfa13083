#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "brb/core/error.hpp"

namespace brb {

// Row-major dense matrix of doubles. Carries datasets, embeddings and centroids.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return DenseMatrix(r, c, std::move(data));
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline ConstMap as_eigen(const DenseMatrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}
inline MutMap as_eigen(DenseMatrix& m) {
    return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

inline void require_finite(const DenseMatrix& m, const char* op) {
    if (!m.all_finite()) throw NumericalError(std::string(op) + ": non-finite result");
}

inline std::string dims(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

// a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + detail::dims(a) + " * " + detail::dims(b));
    }
    DenseMatrix out(a.rows(), b.cols());
    if (a.cols() > 0) detail::as_eigen(out).noalias() = detail::as_eigen(a) * detail::as_eigen(b);
    detail::require_finite(out, "matmul");
    return out;
}

// aᵀ * b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: " + detail::dims(a) + "ᵀ * " + detail::dims(b));
    }
    DenseMatrix out(a.cols(), b.cols());
    if (a.rows() > 0) {
        detail::as_eigen(out).noalias() = detail::as_eigen(a).transpose() * detail::as_eigen(b);
    }
    detail::require_finite(out, "matmul_tn");
    return out;
}

// a * bᵀ
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: " + detail::dims(a) + " * " + detail::dims(b) + "ᵀ");
    }
    DenseMatrix out(a.rows(), b.rows());
    if (a.cols() > 0) {
        detail::as_eigen(out).noalias() = detail::as_eigen(a) * detail::as_eigen(b).transpose();
    }
    detail::require_finite(out, "matmul_nt");
    return out;
}

inline DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
    return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

// Entry (i, j) is the squared Euclidean distance between points row i and
// centers row j. Computed as an explicit sum of squares so entries are never
// negative and the reduction order is fixed.
inline DenseMatrix pairwise_sq_dists(const DenseMatrix& points, const DenseMatrix& centers) {
    if (points.cols() != centers.cols()) {
        throw ShapeError("pairwise_sq_dists: " + detail::dims(points) + " vs " + detail::dims(centers));
    }
    DenseMatrix out(points.rows(), centers.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto p = points.row(i);
        for (std::size_t j = 0; j < centers.rows(); ++j) out(i, j) = squared_distance(p, centers.row(j));
    }
    detail::require_finite(out, "pairwise_sq_dists");
    return out;
}

// Rows of m selected by idx, in order.
inline DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> idx) {
    DenseMatrix out(idx.size(), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= m.rows()) throw ShapeError("gather_rows: index out of range");
        std::copy_n(m.row(idx[r]).begin(), m.cols(), out.row(r).begin());
    }
    return out;
}

// Index of the smallest entry in each row; ties go to the lowest index.
inline std::vector<int> row_argmin(const DenseMatrix& m) {
    std::vector<int> out(m.rows(), 0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < r.size(); ++j)
            if (r[j] < r[best]) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

inline std::vector<int> row_argmax(const DenseMatrix& m) {
    std::vector<int> out(m.rows(), 0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < r.size(); ++j)
            if (r[j] > r[best]) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace brb
