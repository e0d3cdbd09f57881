#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmg/dense.hpp"
#include "dmg/errors.hpp"
#include "dmg/transfer.hpp"
#include "dmg/tridiag.hpp"

namespace dmg {

/// Pre- and post-smoothing step counts. The defaults are the counts under
/// which the solver's measured contraction rates match the reference values
/// used throughout the test suite.
struct TwoGridConfig {
    int pre_smooth = 2;
    int post_smooth = 2;
};

/// Anything that can move vectors between the fine grid and a coarse grid
/// and carries the Jacobi damping factor.
template <class T>
concept TransferScheme = requires(const T& t, std::span<const double> x, std::span<double> y) {
    { t.fine_size() } -> std::convertible_to<int>;
    { t.coarse_size() } -> std::convertible_to<int>;
    { t.omega } -> std::convertible_to<double>;
    t.restrict_into(x, y);
    t.prolong_into(x, y);
};

/// Damped Jacobi: u <- u + omega D^{-1} (f - A u), repeated `steps` times.
inline std::vector<double> jacobi_smooth(const TridiagonalMatrix& a, std::span<const double> u,
                                         std::span<const double> f, double omega, int steps) {
    if (steps < 0) throw ConfigError("smoothing step count must be >= 0");
    const int n = a.size();
    for (int i = 0; i < n; ++i) {
        if (a.diag(i) == 0.0) {
            throw NumericalError("zero diagonal entry at index " + std::to_string(i) +
                                 " in Jacobi smoother");
        }
    }
    std::vector<double> x(u.begin(), u.end());
    std::vector<double> ax(n);
    for (int s = 0; s < steps; ++s) {
        a.matvec(x, ax);
        for (int i = 0; i < n; ++i) x[i] += omega * (f[i] - ax[i]) / a.diag(i);
    }
    return x;
}

/// Scratch buffers for repeated cycle applications.
struct TwoGridWorkspace {
    std::vector<double> fine_a, fine_b;
    std::vector<double> coarse_a, coarse_b;

    void resize(int n, int nc) {
        fine_a.resize(n);
        fine_b.resize(n);
        coarse_a.resize(nc);
        coarse_b.resize(nc);
    }
};

/// One fixed two-grid configuration: fine operator, transfer scheme, smoothing
/// counts, and the LU factors of the Galerkin coarse operator R A P. Immutable
/// after construction; changing parameters means building a new context.
template <TransferScheme Transfer = TransferPair>
class TwoGridContext {
public:
    TwoGridContext(TridiagonalMatrix a, Transfer t, TwoGridConfig cfg = {})
        : a_(std::move(a)),
          transfer_(std::move(t)),
          cfg_(cfg),
          coarse_lu_(factor_coarse(a_, transfer_)) {
        if (a_.size() != transfer_.fine_size()) {
            throw DimensionError("matrix size " + std::to_string(a_.size()) +
                                 " does not match transfer fine size " +
                                 std::to_string(transfer_.fine_size()));
        }
        if (cfg_.pre_smooth < 0 || cfg_.post_smooth < 0) {
            throw ConfigError("smoothing counts must be >= 0");
        }
        if (!std::isfinite(transfer_.omega)) throw ConfigError("non-finite damping factor");
        if (cfg_.pre_smooth > 0 || cfg_.post_smooth > 0) {
            for (int i = 0; i < a_.size(); ++i) {
                if (a_.diag(i) == 0.0) {
                    throw NumericalError("zero diagonal entry at index " + std::to_string(i) +
                                         " in Jacobi smoother");
                }
            }
        }
    }

    const TridiagonalMatrix& matrix() const { return a_; }
    const Transfer& transfer() const { return transfer_; }
    const TwoGridConfig& config() const { return cfg_; }
    const LuFactorization& coarse_lu() const { return coarse_lu_; }
    int size() const { return a_.size(); }
    int coarse_size() const { return transfer_.coarse_size(); }

    /// u <- u - omega D^{-1} A u, the homogeneous smoothing update. Arithmetic
    /// matches jacobi_smooth with f = 0 bit for bit.
    void smooth_zero_rhs(std::span<double> u, std::span<double> scratch) const {
        a_.matvec(u, scratch);
        const double w = transfer_.omega;
        for (int i = 0; i < a_.size(); ++i) u[i] -= w * scratch[i] / a_.diag(i);
    }

    /// u <- C u for the homogeneous cycle (f = 0), using caller scratch.
    void apply_iteration_inplace(std::span<double> u, TwoGridWorkspace& ws) const {
        ws.resize(size(), coarse_size());
        for (int s = 0; s < cfg_.pre_smooth; ++s) smooth_zero_rhs(u, ws.fine_a);
        a_.matvec(u, ws.fine_a);
        transfer_.restrict_into(ws.fine_a, ws.coarse_a);
        coarse_lu_.solve(ws.coarse_a, ws.coarse_b);
        transfer_.prolong_into(ws.coarse_b, ws.fine_b);
        for (int i = 0; i < size(); ++i) u[i] -= ws.fine_b[i];
        for (int s = 0; s < cfg_.post_smooth; ++s) smooth_zero_rhs(u, ws.fine_a);
    }

private:
    static LuFactorization factor_coarse(const TridiagonalMatrix& a, const Transfer& t) {
        const int n = t.fine_size();
        const int nc = t.coarse_size();
        if (a.size() != n) {
            throw DimensionError("matrix size " + std::to_string(a.size()) +
                                 " does not match transfer fine size " + std::to_string(n));
        }
        DenseMatrix ac(nc, nc);
        std::vector<double> basis(nc), pj(n), apj(n), col(nc);
        for (int j = 0; j < nc; ++j) {
            std::fill(basis.begin(), basis.end(), 0.0);
            basis[j] = 1.0;
            t.prolong_into(basis, pj);
            a.matvec(pj, apj);
            t.restrict_into(apj, col);
            for (int i = 0; i < nc; ++i) ac(i, j) = col[i];
        }
        try {
            return LuFactorization(std::move(ac));
        } catch (const NumericalError& e) {
            throw NumericalError("singular coarse operator: " + std::string(e.what()),
                                 e.magnitude());
        }
    }

    TridiagonalMatrix a_;
    Transfer transfer_;
    TwoGridConfig cfg_;
    LuFactorization coarse_lu_;
};

/// One full cycle for A u = f: pre-smooth, coarse-grid correction through the
/// Galerkin operator, post-smooth.
template <TransferScheme Transfer>
std::vector<double> two_grid_step(const TwoGridContext<Transfer>& ctx, std::span<const double> u0,
                                  std::span<const double> f) {
    const auto& a = ctx.matrix();
    const int n = ctx.size();
    if (u0.size() != static_cast<std::size_t>(n) || f.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("two_grid_step operand length mismatch");
    }
    std::vector<double> u =
        jacobi_smooth(a, u0, f, ctx.transfer().omega, ctx.config().pre_smooth);
    std::vector<double> r(n);
    a.matvec(u, r);
    for (int i = 0; i < n; ++i) r[i] -= f[i];
    std::vector<double> rc(ctx.coarse_size()), uc(ctx.coarse_size());
    ctx.transfer().restrict_into(r, rc);
    ctx.coarse_lu().solve(rc, uc);
    std::vector<double> corr(n);
    ctx.transfer().prolong_into(uc, corr);
    for (int i = 0; i < n; ++i) u[i] -= corr[i];
    return jacobi_smooth(a, u, f, ctx.transfer().omega, ctx.config().post_smooth);
}

/// y = C y where C is the cycle's error propagation operator; equals a full
/// cycle applied to y with zero right-hand side.
template <TransferScheme Transfer>
std::vector<double> apply_iteration_matrix(const TwoGridContext<Transfer>& ctx,
                                           std::span<const double> y) {
    if (y.size() != static_cast<std::size_t>(ctx.size())) {
        throw DimensionError("apply_iteration_matrix operand length mismatch");
    }
    std::vector<double> u(y.begin(), y.end());
    TwoGridWorkspace ws;
    ctx.apply_iteration_inplace(u, ws);
    return u;
}

struct SolveResult {
    std::vector<double> u;
    std::vector<double> residual_norms;  // includes the initial residual
    int iterations = 0;
    bool converged = false;
};

/// Runs two-grid cycles until ||A u - f||_2 <= tol or the iteration cap.
template <TransferScheme Transfer>
SolveResult solve(const TwoGridContext<Transfer>& ctx, std::span<const double> f,
                  std::span<const double> u0, double tol, int max_iters) {
    if (tol < 0.0 || max_iters < 0) throw ConfigError("solve needs tol >= 0 and max_iters >= 0");
    const int n = ctx.size();
    SolveResult res;
    res.u.assign(u0.begin(), u0.end());
    std::vector<double> r(n);
    auto residual = [&] {
        ctx.matrix().matvec(res.u, r);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = r[i] - f[i];
            acc += d * d;
        }
        return std::sqrt(acc);
    };
    res.residual_norms.push_back(residual());
    while (res.residual_norms.back() > tol && res.iterations < max_iters) {
        res.u = two_grid_step(ctx, res.u, f);
        ++res.iterations;
        res.residual_norms.push_back(residual());
    }
    res.converged = res.residual_norms.back() <= tol;
    return res;
}

}  // namespace dmg
