#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gkan {

/// Dense row-major matrix of doubles. Deliberately minimal: the library only
/// needs products, transposed products and a few elementwise maps, all with a
/// fixed accumulation order so results are reproducible.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void check_shapes(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    check_shapes(a.cols() == b.rows(), "matmul inner dimensions");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// C = A^T * B
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    check_shapes(a.rows() == b.rows(), "matmul_transpose_a inner dimensions");
    Matrix c(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* ar = a.row(r);
        const double* br = b.row(r);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = ar[i];
            if (ari == 0.0) continue;
            double* ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += ari * br[j];
        }
    }
    return c;
}

/// C = A * B^T
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    check_shapes(a.cols() == b.cols(), "matmul_transpose_b inner dimensions");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += ai[k] * bj[k];
            ci[j] = acc;
        }
    }
    return c;
}

inline void add_row_vector(Matrix& m, const std::vector<double>& v) {
    check_shapes(m.cols() == v.size(), "add_row_vector length");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* mi = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) mi[j] += v[j];
    }
}

inline std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> s(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* mi = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) s[j] += mi[j];
    }
    return s;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_shapes(a.same_shape(b), "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

/// Solves A x = b for symmetric positive definite A via Cholesky.
/// A is overwritten with its factor. Throws if A is not positive definite.
class CholeskySolver {
public:
    explicit CholeskySolver(Matrix a) : l_(std::move(a)) {
        check_shapes(l_.rows() == l_.cols(), "cholesky requires square matrix");
        const std::size_t n = l_.rows();
        for (std::size_t j = 0; j < n; ++j) {
            double d = l_(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
            if (!(d > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
            const double ljj = std::sqrt(d);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = l_(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
                l_(i, j) = s / ljj;
            }
        }
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        const std::size_t n = l_.rows();
        check_shapes(b.size() == n, "cholesky solve rhs length");
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
            y[i] = s / l_(i, i);
        }
        std::vector<double> x(n);
        for (std::size_t ii = n; ii > 0; --ii) {
            const std::size_t i = ii - 1;
            double s = y[i];
            for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * x[k];
            x[i] = s / l_(i, i);
        }
        return x;
    }

private:
    Matrix l_;
};

} // namespace gkan
