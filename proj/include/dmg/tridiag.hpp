#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dmg/errors.hpp"

namespace dmg {

/// Square tridiagonal matrix stored as three bands of length n.
/// sub[0] and super[n-1] are structural zeros and stay zero.
class TridiagonalMatrix {
public:
    explicit TridiagonalMatrix(int n) : n_(n), sub_(check_size(n)), diag_(n), super_(n) {}

    int size() const { return n_; }

    double sub(int i) const { return sub_[i]; }
    double diag(int i) const { return diag_[i]; }
    double super(int i) const { return super_[i]; }

    /// Set row i. Off-band values for the boundary rows must be zero.
    void set_row(int i, double lo, double mid, double hi) {
        if (i > 0) sub_[i] = lo;
        else if (lo != 0.0) throw DimensionError("sub-diagonal entry out of range in row 0");
        diag_[i] = mid;
        if (i + 1 < n_) super_[i] = hi;
        else if (hi != 0.0) throw DimensionError("super-diagonal entry out of range in last row");
    }

    /// y = A x
    void matvec(std::span<const double> x, std::span<double> y) const {
        require_len(x.size());
        require_len(y.size());
        for (int i = 0; i < n_; ++i) {
            double acc = diag_[i] * x[i];
            if (i > 0) acc += sub_[i] * x[i - 1];
            if (i + 1 < n_) acc += super_[i] * x[i + 1];
            y[i] = acc;
        }
    }

    /// y = A^T x
    void matvec_transpose(std::span<const double> x, std::span<double> y) const {
        require_len(x.size());
        require_len(y.size());
        for (int i = 0; i < n_; ++i) {
            double acc = diag_[i] * x[i];
            if (i + 1 < n_) acc += sub_[i + 1] * x[i + 1];
            if (i > 0) acc += super_[i - 1] * x[i - 1];
            y[i] = acc;
        }
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(n_);
        matvec(x, y);
        return y;
    }

    /// x := alpha * A + beta * B, elementwise over the bands.
    static TridiagonalMatrix blend(double alpha, const TridiagonalMatrix& a,
                                   double beta, const TridiagonalMatrix& b) {
        if (a.n_ != b.n_) {
            throw DimensionError("blend of tridiagonal matrices with sizes " +
                                 std::to_string(a.n_) + " and " + std::to_string(b.n_));
        }
        TridiagonalMatrix out(a.n_);
        for (int i = 0; i < a.n_; ++i) {
            out.sub_[i] = alpha * a.sub_[i] + beta * b.sub_[i];
            out.diag_[i] = alpha * a.diag_[i] + beta * b.diag_[i];
            out.super_[i] = alpha * a.super_[i] + beta * b.super_[i];
        }
        return out;
    }

private:
    static int check_size(int n) {
        if (n < 1) throw DimensionError("tridiagonal size must be >= 1, got " + std::to_string(n));
        return n;
    }

    void require_len(std::size_t len) const {
        if (len != static_cast<std::size_t>(n_)) {
            throw DimensionError("vector length " + std::to_string(len) +
                                 " does not match matrix size " + std::to_string(n_));
        }
    }

    int n_;
    std::vector<double> sub_, diag_, super_;
};

}  // namespace dmg
