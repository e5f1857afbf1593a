#pragma once

// Dense row-major matrices, batch-major rank-3 tensors and Cholesky solves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "hardproj/errors.hpp"

namespace hardproj {

using Vec = std::vector<double>;

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Mat(std::initializer_list<std::initializer_list<double>> rows) : rows_(rows.size()) {
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    /// Builds from user-supplied row-major values; rejects NaN/Inf.
    static Mat from_data(std::size_t rows, std::size_t cols, Vec data) {
        if (data.size() != rows * cols)
            throw ShapeError("matrix data length " + std::to_string(data.size()) + " != " + std::to_string(rows) +
                             "x" + std::to_string(cols));
        for (double v : data)
            if (!std::isfinite(v)) throw NumericalError("non-finite matrix entry");
        Mat m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(data);
        return m;
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const Vec& values() const noexcept { return data_; }

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

/// Stack of `batch` equally shaped matrices stored contiguously, instance-major.
class BatchMat {
public:
    BatchMat() = default;
    BatchMat(std::size_t batch, std::size_t rows, std::size_t cols, double fill = 0.0)
        : batch_(batch), rows_(rows), cols_(cols), data_(batch * rows * cols, fill) {}

    std::size_t batch() const noexcept { return batch_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t stride() const noexcept { return rows_ * cols_; }

    double& operator()(std::size_t b, std::size_t i, std::size_t j) noexcept {
        return data_[b * stride() + i * cols_ + j];
    }
    double operator()(std::size_t b, std::size_t i, std::size_t j) const noexcept {
        return data_[b * stride() + i * cols_ + j];
    }

    std::span<double> instance(std::size_t b) noexcept { return {data_.data() + b * stride(), stride()}; }
    std::span<const double> instance(std::size_t b) const noexcept { return {data_.data() + b * stride(), stride()}; }

    Mat get(std::size_t b) const {
        auto s = instance(b);
        return Mat::from_data(rows_, cols_, Vec(s.begin(), s.end()));
    }
    void set(std::size_t b, const Mat& m) {
        if (m.rows() != rows_ || m.cols() != cols_) throw ShapeError("BatchMat::set: instance shape mismatch");
        std::copy(m.data().begin(), m.data().end(), instance(b).begin());
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const BatchMat&, const BatchMat&) = default;

private:
    std::size_t batch_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Mat out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto br = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
        }
    }
    return out;
}

inline Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Vec matvec(const Mat& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

/// a * aᵀ
inline Mat gram_rows(const Mat& a) {
    Mat g(a.rows(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            auto ri = a.row(i);
            auto rj = a.row(j);
            for (std::size_t k = 0; k < a.cols(); ++k) s += ri[k] * rj[k];
            g(i, j) = s;
            g(j, i) = s;
        }
    return g;
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

namespace kernel {

/// Relative pivot tolerance of the Cholesky factorization.
inline constexpr double pivot_tolerance = 1e-12;

/// In-place lower Cholesky factor of the n×n row-major block `a` (upper part is
/// left untouched). Throws RankDeficiencyError when a pivot drops to
/// pivot_tolerance·max(diag) or below.
inline void cholesky_factor(std::span<double> a, std::size_t n) {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a[i * n + i]);
    const double tol = pivot_tolerance * max_diag;
    for (std::size_t k = 0; k < n; ++k) {
        double d = a[k * n + k];
        for (std::size_t j = 0; j < k; ++j) d -= a[k * n + j] * a[k * n + j];
        if (!(d > tol)) throw RankDeficiencyError(k, d);
        const double lkk = std::sqrt(d);
        a[k * n + k] = lkk;
        for (std::size_t i = k + 1; i < n; ++i) {
            double s = a[i * n + k];
            for (std::size_t j = 0; j < k; ++j) s -= a[i * n + j] * a[k * n + j];
            a[i * n + k] = s / lkk;
        }
    }
}

/// Solves (L Lᵀ) X = B in place for the n×m row-major block `b`.
inline void cholesky_solve(std::span<const double> l, std::size_t n, std::span<double> b, std::size_t m) {
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i * m + c];
            for (std::size_t j = 0; j < i; ++j) s -= l[i * n + j] * b[j * m + c];
            b[i * m + c] = s / l[i * n + i];
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = b[ii * m + c];
            for (std::size_t j = ii + 1; j < n; ++j) s -= l[j * n + ii] * b[j * m + c];
            b[ii * m + c] = s / l[ii * n + ii];
        }
    }
}

}  // namespace kernel

namespace detail {

inline void check_spd_operands(std::size_t n_rows, std::size_t n_cols, std::size_t rhs_rows) {
    if (n_rows != n_cols) throw ShapeError("spd_solve: matrix is not square");
    if (rhs_rows != n_rows) throw ShapeError("spd_solve: rhs row count does not match matrix");
}

inline void check_symmetric(std::span<const double> m, std::size_t n) {
    const double scale = std::max(1.0, max_abs(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(m[i * n + j] - m[j * n + i]) > 1e-10 * scale)
                throw NumericalError("spd_solve: matrix is not symmetric at (" + std::to_string(i) + "," +
                                     std::to_string(j) + ")");
}

}  // namespace detail

/// Solves m·X = rhs for symmetric positive-definite m through a Cholesky factorization.
inline Mat spd_solve(const Mat& m, const Mat& rhs) {
    detail::check_spd_operands(m.rows(), m.cols(), rhs.rows());
    detail::check_symmetric(m.data(), m.rows());
    Vec l(m.data().begin(), m.data().end());
    kernel::cholesky_factor(l, m.rows());
    Mat x = rhs;
    kernel::cholesky_solve(l, m.rows(), x.data(), x.cols());
    return x;
}

/// Instance-wise spd_solve over a batch. A singular instance is reported by batch index.
inline BatchMat batch_spd_solve(const BatchMat& m, const BatchMat& rhs) {
    detail::check_spd_operands(m.rows(), m.cols(), rhs.rows());
    if (m.batch() != rhs.batch()) throw ShapeError("batch_spd_solve: batch sizes differ");
    const std::size_t n = m.rows();
    BatchMat x = rhs;
    Vec l(n * n);
    for (std::size_t b = 0; b < m.batch(); ++b) {
        auto mb = m.instance(b);
        detail::check_symmetric(mb, n);
        std::copy(mb.begin(), mb.end(), l.begin());
        try {
            kernel::cholesky_factor(l, n);
        } catch (const RankDeficiencyError& e) {
            throw e.at_instance(b);
        }
        kernel::cholesky_solve(l, n, x.instance(b), x.cols());
    }
    return x;
}

}  // namespace hardproj
