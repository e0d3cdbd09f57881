#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmg/errors.hpp"
#include "dmg/loss.hpp"
#include "dmg/rng.hpp"
#include "dmg/transfer.hpp"
#include "dmg/twogrid.hpp"

namespace dmg {

/// Gradient (or any co-shaped quantity) with respect to the trainable
/// parameters: restriction stencils, prolongation stencils, damping factor.
struct ParamGradient {
    std::vector<std::array<double, 3>> d_restriction;
    std::vector<std::array<double, 3>> d_prolongation;
    double d_omega = 0.0;

    explicit ParamGradient(int coarse_size)
        : d_restriction(coarse_size, std::array<double, 3>{}),
          d_prolongation(coarse_size, std::array<double, 3>{}) {}

    int coarse_size() const { return static_cast<int>(d_restriction.size()); }

    void scale(double a) {
        for (auto& r : d_restriction)
            for (double& v : r) v *= a;
        for (auto& p : d_prolongation)
            for (double& v : p) v *= a;
        d_omega *= a;
    }

    void add_scaled(const ParamGradient& o, double a) {
        if (o.coarse_size() != coarse_size()) throw DimensionError("gradient shape mismatch");
        for (std::size_t i = 0; i < d_restriction.size(); ++i)
            for (int d = 0; d < 3; ++d) d_restriction[i][d] += a * o.d_restriction[i][d];
        for (std::size_t j = 0; j < d_prolongation.size(); ++j)
            for (int d = 0; d < 3; ++d) d_prolongation[j][d] += a * o.d_prolongation[j][d];
        d_omega += a * o.d_omega;
    }

    double max_abs() const {
        double m = std::abs(d_omega);
        for (const auto& r : d_restriction)
            for (double v : r) m = std::max(m, std::abs(v));
        for (const auto& p : d_prolongation)
            for (double v : p) m = std::max(m, std::abs(v));
        return m;
    }

    bool finite() const {
        if (!std::isfinite(d_omega)) return false;
        for (const auto& r : d_restriction)
            for (double v : r)
                if (!std::isfinite(v)) return false;
        for (const auto& p : d_prolongation)
            for (double v : p)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Intermediate states of one cycle application, recorded during the forward
/// pass. The topology is static, so no operation log is needed: the backward
/// pass knows the cycle structure and only needs the inputs of each stage.
struct CycleRecord {
    std::vector<std::vector<double>> pre_inputs;   // input of each pre-smoothing step
    std::vector<double> smoothed;                  // state entering the coarse correction
    std::vector<double> residual;                  // A * smoothed (homogeneous cycle)
    std::vector<double> coarse_solution;           // (R A P)^{-1} R residual
    std::vector<std::vector<double>> post_inputs;  // input of each post-smoothing step
};

struct Tape {
    std::vector<CycleRecord> cycles;
    std::vector<double> output;
};

/// y = C^power z with every stage input recorded. The arithmetic matches
/// TwoGridContext::apply_iteration_inplace bit for bit, so recorded losses
/// agree exactly with estimate_loss.
inline std::vector<double> forward_with_tape(const TwoGridContext<TransferPair>& ctx,
                                             std::span<const double> z, int power, Tape& tape) {
    if (power < 1) throw ConfigError("forward_with_tape needs power >= 1");
    if (z.size() != static_cast<std::size_t>(ctx.size())) {
        throw DimensionError("forward_with_tape input length mismatch");
    }
    const auto& a = ctx.matrix();
    const auto& t = ctx.transfer();
    const int n = ctx.size();
    const int nc = ctx.coarse_size();
    const int s1 = ctx.config().pre_smooth;
    const int s2 = ctx.config().post_smooth;
    const double w = t.omega;
    tape.cycles.assign(power, {});
    std::vector<double> u(z.begin(), z.end());
    std::vector<double> au(n), rc(nc), corr(n);
    for (int c = 0; c < power; ++c) {
        auto& rec = tape.cycles[c];
        rec.pre_inputs.reserve(s1);
        for (int s = 0; s < s1; ++s) {
            rec.pre_inputs.push_back(u);
            a.matvec(u, au);
            for (int i = 0; i < n; ++i) u[i] -= w * au[i] / a.diag(i);
        }
        rec.smoothed = u;
        rec.residual.resize(n);
        a.matvec(u, rec.residual);
        t.restrict_into(rec.residual, rc);
        rec.coarse_solution.resize(nc);
        ctx.coarse_lu().solve(rc, rec.coarse_solution);
        t.prolong_into(rec.coarse_solution, corr);
        for (int i = 0; i < n; ++i) u[i] -= corr[i];
        rec.post_inputs.reserve(s2);
        for (int s = 0; s < s2; ++s) {
            rec.post_inputs.push_back(u);
            a.matvec(u, au);
            for (int i = 0; i < n; ++i) u[i] -= w * au[i] / a.diag(i);
        }
    }
    tape.output = u;
    return u;
}

namespace detail {

/// Adjoint of one homogeneous smoothing step y = x - omega D^{-1} A x:
/// lambda_x = lambda_y - omega A^T (D^{-1} lambda_y), and
/// d_omega -= <lambda_y, D^{-1} A x> with A x recomputed from the stored x.
inline void smooth_backward(const TridiagonalMatrix& a, double omega,
                            std::span<const double> x, std::vector<double>& lambda,
                            double& d_omega, std::vector<double>& ax, std::vector<double>& sc) {
    const int n = a.size();
    a.matvec(x, ax);
    for (int i = 0; i < n; ++i) d_omega -= lambda[i] * ax[i] / a.diag(i);
    for (int i = 0; i < n; ++i) sc[i] = lambda[i] / a.diag(i);
    a.matvec_transpose(sc, ax);
    for (int i = 0; i < n; ++i) lambda[i] -= omega * ax[i];
}

}  // namespace detail

/// Reverse sweep over one recorded C^power application. `lambda` enters as
/// the cotangent of the output and leaves as the cotangent of the input;
/// parameter adjoints accumulate into `grad`. The coarse-solve adjoint routes
/// through the Galerkin product, so changes of R and P inside A_c = R A P are
/// fully accounted for.
inline void backward_accumulate(const TwoGridContext<TransferPair>& ctx, const Tape& tape,
                                std::vector<double>& lambda, ParamGradient& grad) {
    const auto& a = ctx.matrix();
    const auto& t = ctx.transfer();
    const int n = ctx.size();
    const int nc = ctx.coarse_size();
    if (lambda.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("backward cotangent length mismatch");
    }
    if (grad.coarse_size() != nc) throw DimensionError("backward gradient shape mismatch");
    const double w = t.omega;
    std::vector<double> buf_a(n), buf_b(n), corr(n), wvec(n), vvec(n), rt(n);
    std::vector<double> lc(nc), g(nc);
    for (auto cyc = tape.cycles.rbegin(); cyc != tape.cycles.rend(); ++cyc) {
        for (auto x = cyc->post_inputs.rbegin(); x != cyc->post_inputs.rend(); ++x) {
            detail::smooth_backward(a, w, *x, lambda, grad.d_omega, buf_a, buf_b);
        }
        // Correction u = smoothed - P uc: lambda is the cotangent of u here.
        const auto& uc = cyc->coarse_solution;
        for (int j = 0; j < nc; ++j) {
            for (int d = 0; d < 3; ++d) grad.d_prolongation[j][d] -= lambda[2 * j + d] * uc[j];
        }
        t.prolongation.apply_transpose(lambda, lc);
        for (int j = 0; j < nc; ++j) lc[j] = -lc[j];  // cotangent of uc
        // uc = A_c^{-1} rc: adjoint g = A_c^{-T} lambda_uc is both the
        // cotangent of rc and the left factor of dA_c = -g uc^T.
        ctx.coarse_lu().solve_transpose(lc, g);
        t.prolongation.apply(uc, corr);
        a.matvec(corr, wvec);  // (A P) uc, the right factor for dR inside A_c
        t.restriction.apply_transpose(g, rt);
        a.matvec_transpose(rt, vvec);  // A^T R^T g: dP factor and residual adjoint
        for (int i = 0; i < nc; ++i) {
            for (int d = 0; d < 3; ++d) {
                grad.d_restriction[i][d] += g[i] * (cyc->residual[2 * i + d] - wvec[2 * i + d]);
            }
        }
        for (int j = 0; j < nc; ++j) {
            for (int d = 0; d < 3; ++d) grad.d_prolongation[j][d] -= vvec[2 * j + d] * uc[j];
        }
        // residual = A smoothed, rc = R residual: the smoothed state's
        // cotangent gains A^T R^T g on top of the direct correction term.
        for (int i = 0; i < n; ++i) lambda[i] += vvec[i];
        for (auto x = cyc->pre_inputs.rbegin(); x != cyc->pre_inputs.rend(); ++x) {
            detail::smooth_backward(a, w, *x, lambda, grad.d_omega, buf_a, buf_b);
        }
    }
}

struct BackwardResult {
    ParamGradient gradient;
    std::vector<double> input_cotangent;
};

inline BackwardResult backward(const TwoGridContext<TransferPair>& ctx, const Tape& tape,
                               std::span<const double> cotangent) {
    BackwardResult res{ParamGradient(ctx.coarse_size()),
                       std::vector<double>(cotangent.begin(), cotangent.end())};
    backward_accumulate(ctx, tape, res.input_cotangent, res.gradient);
    return res;
}

struct GradResult {
    double loss = 0.0;
    ParamGradient gradient;
};

/// Loss and exact gradient of (1/N) sum_i ||C^power z_i||^2 over the given
/// probes. The loss equals what estimate_loss computes for the same probes.
inline GradResult grad_loss(const TwoGridContext<TransferPair>& ctx,
                            const std::vector<std::vector<double>>& probes, int power) {
    if (probes.empty()) throw ConfigError("grad_loss needs at least one probe");
    const int n = ctx.size();
    const double batch = static_cast<double>(probes.size());
    GradResult res{0.0, ParamGradient(ctx.coarse_size())};
    Tape tape;
    std::vector<double> lambda(n);
    for (const auto& z : probes) {
        forward_with_tape(ctx, z, power, tape);
        for (double v : tape.output) res.loss += v * v;
        for (int i = 0; i < n; ++i) lambda[i] = 2.0 / batch * tape.output[i];
        backward_accumulate(ctx, tape, lambda, res.gradient);
    }
    res.loss /= batch;
    return res;
}

/// Convenience overload drawing the batch from the same substreams
/// estimate_loss uses, so the returned loss matches it exactly.
inline GradResult grad_loss(const TwoGridContext<TransferPair>& ctx, const LossConfig& cfg,
                            std::uint64_t iteration = 0) {
    cfg.validate();
    RademacherSampler sampler(cfg.seed);
    std::vector<std::vector<double>> probes;
    probes.reserve(cfg.batch);
    for (int i = 0; i < cfg.batch; ++i) {
        probes.push_back(sampler.draw(ctx.size(), iteration, static_cast<std::uint64_t>(i)));
    }
    return grad_loss(ctx, probes, cfg.power);
}

}  // namespace dmg
