#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dmg/errors.hpp"
#include "dmg/tridiag.hpp"

namespace dmg {

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() : rows_(0), cols_(0) {}
    DenseMatrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw DimensionError("negative dense matrix extent");
    }

    static DenseMatrix identity(int n) {
        DenseMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<double> row(int i) { return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int i) const { return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }

    void matvec(std::span<const double> x, std::span<double> y) const {
        if (x.size() != static_cast<std::size_t>(cols_) || y.size() != static_cast<std::size_t>(rows_)) {
            throw DimensionError("dense matvec shape mismatch");
        }
        for (int i = 0; i < rows_; ++i) {
            auto r = row(i);
            double acc = 0.0;
            for (int j = 0; j < cols_; ++j) acc += r[j] * x[j];
            y[i] = acc;
        }
    }

    DenseMatrix multiply(const DenseMatrix& b) const {
        if (cols_ != b.rows_) throw DimensionError("dense multiply shape mismatch");
        DenseMatrix out(rows_, b.cols_);
        for (int i = 0; i < rows_; ++i) {
            for (int k = 0; k < cols_; ++k) {
                const double aik = (*this)(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
            }
        }
        return out;
    }

    DenseMatrix transpose() const {
        DenseMatrix out(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
        return out;
    }

    double frobenius_norm_sq() const {
        return std::inner_product(a_.begin(), a_.end(), a_.begin(), 0.0);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    int rows_, cols_;
    std::vector<double> a_;
};

inline DenseMatrix to_dense(const TridiagonalMatrix& t) {
    DenseMatrix m(t.size(), t.size());
    for (int i = 0; i < t.size(); ++i) {
        if (i > 0) m(i, i - 1) = t.sub(i);
        m(i, i) = t.diag(i);
        if (i + 1 < t.size()) m(i, i + 1) = t.super(i);
    }
    return m;
}

/// PA = LU with partial pivoting. L has unit diagonal and is stored below it.
/// A pivot whose magnitude falls below n * eps * max|A| is treated as singular.
class LuFactorization {
public:
    explicit LuFactorization(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
        if (lu_.rows() != lu_.cols()) throw DimensionError("LU requires a square matrix");
        const int n = lu_.rows();
        const double tol = n * 2.220446049250313e-16 * lu_.max_abs();
        std::iota(perm_.begin(), perm_.end(), 0);
        min_pivot_ = (n == 0) ? 0.0 : std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            int p = k;
            for (int i = k + 1; i < n; ++i) {
                if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
            }
            if (p != k) {
                for (int j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
                std::swap(perm_[k], perm_[p]);
                sign_ = -sign_;
            }
            const double pivot = lu_(k, k);
            min_pivot_ = std::min(min_pivot_, std::abs(pivot));
            if (std::abs(pivot) <= tol) {
                throw NumericalError("singular matrix in LU factorization, pivot magnitude " +
                                         std::to_string(std::abs(pivot)),
                                     std::abs(pivot));
            }
            for (int i = k + 1; i < n; ++i) {
                const double l = lu_(i, k) / pivot;
                lu_(i, k) = l;
                for (int j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
            }
        }
    }

    int size() const { return lu_.rows(); }
    double min_pivot() const { return min_pivot_; }

    /// Solve A x = b.
    void solve(std::span<const double> b, std::span<double> x) const {
        const int n = size();
        require(b.size(), n);
        require(x.size(), n);
        std::vector<double> y(n);
        for (int i = 0; i < n; ++i) {
            double acc = b[perm_[i]];
            for (int j = 0; j < i; ++j) acc -= lu_(i, j) * y[j];
            y[i] = acc;
        }
        for (int i = n - 1; i >= 0; --i) {
            double acc = y[i];
            for (int j = i + 1; j < n; ++j) acc -= lu_(i, j) * x[j];
            x[i] = acc / lu_(i, i);
        }
    }

    /// Solve A^T x = b, reusing the same factors: A^T = U^T L^T P.
    void solve_transpose(std::span<const double> b, std::span<double> x) const {
        const int n = size();
        require(b.size(), n);
        require(x.size(), n);
        std::vector<double> y(n);
        for (int i = 0; i < n; ++i) {
            double acc = b[i];
            for (int j = 0; j < i; ++j) acc -= lu_(j, i) * y[j];
            y[i] = acc / lu_(i, i);
        }
        std::vector<double> z(n);
        for (int i = n - 1; i >= 0; --i) {
            double acc = y[i];
            for (int j = i + 1; j < n; ++j) acc -= lu_(j, i) * z[j];
            z[i] = acc;
        }
        for (int i = 0; i < n; ++i) x[perm_[i]] = z[i];
    }

    double determinant() const {
        double det = sign_;
        for (int i = 0; i < size(); ++i) det *= lu_(i, i);
        return det;
    }

private:
    static void require(std::size_t len, int n) {
        if (len != static_cast<std::size_t>(n)) throw DimensionError("LU solve length mismatch");
    }

    DenseMatrix lu_;
    std::vector<int> perm_;
    double min_pivot_ = 0.0;
    double sign_ = 1.0;
};

}  // namespace dmg
