#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "dmg/dense.hpp"
#include "dmg/errors.hpp"
#include "dmg/twogrid.hpp"

namespace dmg {

struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;

    double spectral_radius() const {
        double r = 0.0;
        for (const auto& e : eigenvalues) r = std::max(r, std::abs(e));
        return r;
    }
};

namespace detail {

/// Diagonal similarity scaling by powers of two (exact in floating point)
/// that roughly equalizes row and column norms.
inline void balance(DenseMatrix& a) {
    const int n = a.rows();
    bool converged = false;
    while (!converged) {
        converged = true;
        for (int i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            const double s = c + r;
            double g = r / 2.0;
            double f = 1.0;
            while (c < g) {
                f *= 2.0;
                c *= 4.0;
            }
            g = r * 2.0;
            while (c > g) {
                f /= 2.0;
                c /= 4.0;
            }
            if ((c + r) / f < 0.95 * s) {
                converged = false;
                const double ginv = 1.0 / f;
                for (int j = 0; j < n; ++j) a(i, j) *= ginv;
                for (int j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form (eigenvalues
/// only, transforms are not accumulated).
inline void hessenberg_reduce(DenseMatrix& a) {
    const int n = a.rows();
    std::vector<double> v(n);
    for (int k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale += std::abs(a(i, k));
        if (scale == 0.0) continue;
        double h = 0.0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = a(i, k) / scale;
            h += v[i] * v[i];
        }
        double g = std::sqrt(h);
        if (v[k + 1] > 0.0) g = -g;
        h -= v[k + 1] * g;
        v[k + 1] -= g;
        // A <- P A P with P = I - v v^T / h
        for (int j = 0; j < n; ++j) {
            double f = 0.0;
            for (int i = k + 1; i < n; ++i) f += v[i] * a(i, j);
            f /= h;
            for (int i = k + 1; i < n; ++i) a(i, j) -= f * v[i];
        }
        for (int i = 0; i < n; ++i) {
            double f = 0.0;
            for (int j = k + 1; j < n; ++j) f += a(i, j) * v[j];
            f /= h;
            for (int j = k + 1; j < n; ++j) a(i, j) -= f * v[j];
        }
        a(k + 1, k) = scale * g;
        for (int i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Destroys `h`.
/// Complex eigenvalues come out in conjugate pairs. Throws NumericalError
/// if the sweep budget of 40 n is exhausted.
inline std::vector<std::complex<double>> hessenberg_eigenvalues(DenseMatrix& h) {
    const int n = h.rows();
    std::vector<std::complex<double>> w(n);
    if (n == 0) return w;
    const double eps = std::numeric_limits<double>::epsilon();
    double anorm = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(h(i, j));
    }
    int hi = n - 1;
    int its = 0;
    int sweeps = 0;
    const int sweep_cap = 40 * n;
    double shift_sum = 0.0;
    while (hi >= 0) {
        // Locate the start of the trailing unreduced block.
        int l = hi;
        while (l > 0) {
            double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
            if (s == 0.0) s = anorm;
            if (std::abs(h(l, l - 1)) <= eps * s) {
                h(l, l - 1) = 0.0;
                break;
            }
            --l;
        }
        const double x = h(hi, hi);
        if (l == hi) {
            w[hi--] = x + shift_sum;
            its = 0;
            continue;
        }
        const double y = h(hi - 1, hi - 1);
        const double prod = h(hi, hi - 1) * h(hi - 1, hi);
        if (l == hi - 1) {
            // Trailing 2x2 block, eigenvalues in closed form.
            const double p = 0.5 * (y - x);
            const double q = p * p + prod;
            const double z = std::sqrt(std::abs(q));
            const double xs = x + shift_sum;
            if (q >= 0.0) {
                const double zz = p + (p >= 0.0 ? z : -z);
                w[hi - 1] = w[hi] = xs + zz;
                if (zz != 0.0) w[hi] = xs - prod / zz;
            } else {
                w[hi] = {xs + p, -z};
                w[hi - 1] = std::conj(w[hi]);
            }
            hi -= 2;
            its = 0;
            continue;
        }
        if (sweeps >= sweep_cap) {
            throw NumericalError("eigenvalue iteration exceeded " + std::to_string(sweep_cap) +
                                 " sweeps for matrix size " + std::to_string(n));
        }
        ++sweeps;
        double sx = x, sy = y, sprod = prod;
        if (its != 0 && its % 10 == 0) {
            // Exceptional shift to break limit cycles.
            shift_sum += sx;
            for (int i = 0; i <= hi; ++i) h(i, i) -= sx;
            const double s = std::abs(h(hi, hi - 1)) + std::abs(h(hi - 1, hi - 2));
            sx = sy = 0.75 * s;
            sprod = -0.4375 * s * s;
        }
        ++its;
        // First column of (H - sx)(H - sy), scanning for a safe restart row.
        int m = hi - 2;
        double p = 0.0, q = 0.0, r = 0.0;
        for (; m >= l; --m) {
            const double z = h(m, m);
            const double rr = sx - z;
            const double ss = sy - z;
            p = (rr * ss - sprod) / h(m + 1, m) + h(m, m + 1);
            q = h(m + 1, m + 1) - z - rr - ss;
            r = h(m + 2, m + 1);
            const double scale = std::abs(p) + std::abs(q) + std::abs(r);
            p /= scale;
            q /= scale;
            r /= scale;
            if (m == l) break;
            const double u = std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double vv = std::abs(p) *
                              (std::abs(h(m - 1, m - 1)) + std::abs(z) + std::abs(h(m + 1, m + 1)));
            if (u <= eps * vv) break;
        }
        for (int i = m; i <= hi - 2; ++i) {
            h(i + 2, i) = 0.0;
            if (i != m) h(i + 2, i - 1) = 0.0;
        }
        // Chase the bulge down the block with 3x2 Householder reflections.
        for (int k = m; k <= hi - 1; ++k) {
            double col_scale = 0.0;
            if (k != m) {
                p = h(k, k - 1);
                q = h(k + 1, k - 1);
                r = (k + 1 != hi) ? h(k + 2, k - 1) : 0.0;
                col_scale = std::abs(p) + std::abs(q) + std::abs(r);
                if (col_scale != 0.0) {
                    p /= col_scale;
                    q /= col_scale;
                    r /= col_scale;
                }
            }
            double s = std::sqrt(p * p + q * q + r * r);
            if (p < 0.0) s = -s;
            if (s == 0.0) continue;
            if (k == m) {
                if (l != m) h(k, k - 1) = -h(k, k - 1);
            } else {
                h(k, k - 1) = -s * col_scale;
            }
            p += s;
            const double hx = p / s, hy = q / s, hz = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= hi; ++j) {
                double pp = h(k, j) + q * h(k + 1, j);
                if (k + 1 != hi) {
                    pp += r * h(k + 2, j);
                    h(k + 2, j) -= pp * hz;
                }
                h(k + 1, j) -= pp * hy;
                h(k, j) -= pp * hx;
            }
            const int top = std::min(hi, k + 3);
            for (int i = l; i <= top; ++i) {
                double pp = hx * h(i, k) + hy * h(i, k + 1);
                if (k + 1 != hi) {
                    pp += hz * h(i, k + 2);
                    h(i, k + 2) -= pp * r;
                }
                h(i, k + 1) -= pp * q;
                h(i, k) -= pp;
            }
        }
    }
    return w;
}

}  // namespace detail

/// All eigenvalues of a dense real matrix: balance, reduce to Hessenberg
/// form, then Francis double-shift QR. Results are sorted by descending
/// magnitude; complex eigenvalues appear in conjugate pairs.
inline Spectrum eigenvalues(DenseMatrix a) {
    if (a.rows() != a.cols()) throw DimensionError("eigenvalues need a square matrix");
    detail::balance(a);
    detail::hessenberg_reduce(a);
    Spectrum spec{detail::hessenberg_eigenvalues(a)};
    std::sort(spec.eigenvalues.begin(), spec.eigenvalues.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                  const double ma = std::abs(a), mb = std::abs(b);
                  if (ma != mb) return ma > mb;
                  if (a.real() != b.real()) return a.real() > b.real();
                  return a.imag() > b.imag();
              });
    return spec;
}

inline double spectral_radius(const DenseMatrix& a) { return eigenvalues(a).spectral_radius(); }

/// Builds C column by column from basis vectors. Guarded by `max_size`
/// because the result is dense even though every factor is sparse.
template <TransferScheme Transfer>
DenseMatrix materialize_iteration_matrix(const TwoGridContext<Transfer>& ctx, int max_size = 2048) {
    const int n = ctx.size();
    if (n > max_size) {
        throw ConfigError("iteration matrix size " + std::to_string(n) +
                          " exceeds the dense materialization cap " + std::to_string(max_size));
    }
    DenseMatrix c(n, n);
    std::vector<double> col(n);
    TwoGridWorkspace ws;
    for (int j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[j] = 1.0;
        ctx.apply_iteration_inplace(col, ws);
        for (int i = 0; i < n; ++i) c(i, j) = col[i];
    }
    return c;
}

template <TransferScheme Transfer>
double spectral_radius(const TwoGridContext<Transfer>& ctx, int max_size = 2048) {
    return eigenvalues(materialize_iteration_matrix(ctx, max_size)).spectral_radius();
}

}  // namespace dmg
