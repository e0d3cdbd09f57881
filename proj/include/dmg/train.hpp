#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmg/errors.hpp"
#include "dmg/grad.hpp"
#include "dmg/loss.hpp"
#include "dmg/spectral.hpp"
#include "dmg/transfer.hpp"
#include "dmg/tridiag.hpp"
#include "dmg/twogrid.hpp"

namespace dmg {

struct AdamConfig {
    double step = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int iterations = 1000;

    void validate() const {
        if (!(step > 0.0)) throw ConfigError("Adam step must be > 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
            throw ConfigError("Adam betas must lie in [0, 1)");
        }
        if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
        if (iterations < 0) throw ConfigError("iteration count must be >= 0");
    }
};

/// First and second moment estimates, same shape as the parameters.
struct AdamState {
    ParamGradient m, v;
    long t = 0;

    explicit AdamState(int coarse_size) : m(coarse_size), v(coarse_size) {}
};

namespace detail {

inline void adam_update_scalar(double& theta, double g, double& m, double& v, double step,
                               double beta1, double beta2, double epsilon, double bc1,
                               double bc2) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    theta -= step * (m / bc1) / (std::sqrt(v / bc2) + epsilon);
}

}  // namespace detail

/// One bias-corrected Adam update of the transfer parameters in place.
inline void adam_step(AdamState& state, TransferPair& params, const ParamGradient& grad,
                      const AdamConfig& cfg, double step_scale = 1.0) {
    cfg.validate();
    if (params.coarse_size() != grad.coarse_size() || state.m.coarse_size() != grad.coarse_size()) {
        throw DimensionError("adam_step shape mismatch");
    }
    if (!grad.finite()) throw NumericalError("non-finite gradient in Adam update");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    const double step = cfg.step * step_scale;
    const int nc = params.coarse_size();
    for (int i = 0; i < nc; ++i) {
        for (int d = 0; d < 3; ++d) {
            detail::adam_update_scalar(params.restriction.row(i)[d], grad.d_restriction[i][d],
                                       state.m.d_restriction[i][d], state.v.d_restriction[i][d],
                                       step, cfg.beta1, cfg.beta2, cfg.epsilon, bc1, bc2);
            detail::adam_update_scalar(params.prolongation.col(i)[d], grad.d_prolongation[i][d],
                                       state.m.d_prolongation[i][d], state.v.d_prolongation[i][d],
                                       step, cfg.beta1, cfg.beta2, cfg.epsilon, bc1, bc2);
        }
    }
    detail::adam_update_scalar(params.omega, grad.d_omega, state.m.d_omega, state.v.d_omega, step,
                               cfg.beta1, cfg.beta2, cfg.epsilon, bc1, bc2);
}

struct TrainReport {
    TransferPair params;       // final parameters
    std::vector<double> loss_trace;       // estimate at each iteration's params, plus final
    std::vector<double> surrogate_trace;  // loss^(1/(2K)) of the same entries
    int iterations = 0;                   // optimizer steps taken (all stages)
    std::uint64_t substream_draws = 0;    // batch substreams consumed
    double verified_radius = std::numeric_limits<double>::quiet_NaN();
    // Homotopy bookkeeping (empty for plain training):
    std::vector<double> stage_alphas;      // accepted blend positions
    std::vector<double> stage_surrogates;  // their acceptance estimates
    std::vector<double> stage_radii;       // exact radius at accepted stages
    int rejected_stages = 0;

    explicit TrainReport(TransferPair p) : params(std::move(p)) {}
};

/// Stochastic descent on the rooted objective loss^(1/(2K)). The root is a
/// monotone rescaling, so minimizers coincide with those of the raw power-K
/// loss, but gradient magnitudes stay O(surrogate) instead of collapsing to
/// the 2K-th power of a contraction factor, which would stall Adam whenever
/// the iteration starts out strongly convergent.
///
/// Batches come from substreams (seed, iteration_offset + t, i). A coarse
/// operator turning singular after an update is handled by rolling the step
/// back and retrying with a fresh batch and a halved step, up to 5 times.
inline TrainReport train(const TridiagonalMatrix& a, const TwoGridConfig& tg, TransferPair init,
                         const AdamConfig& adam, const LossConfig& loss,
                         std::uint64_t iteration_offset = 0, int dense_cap = 2048) {
    adam.validate();
    loss.validate();
    TrainReport report(std::move(init));
    report.loss_trace.reserve(adam.iterations + 1);
    report.surrogate_trace.reserve(adam.iterations + 1);
    AdamState state(report.params.coarse_size());
    std::uint64_t draws = 0;
    auto build = [&](const TransferPair& p) { return TwoGridContext<TransferPair>(a, p, tg); };
    TwoGridContext<TransferPair> ctx = build(report.params);
    for (int it = 0; it < adam.iterations; ++it) {
        GradResult g = grad_loss(ctx, loss, iteration_offset + draws);
        ++draws;
        if (!std::isfinite(g.loss)) {
            throw NumericalError("training diverged: non-finite loss at iteration " +
                                 std::to_string(it));
        }
        report.loss_trace.push_back(g.loss);
        report.surrogate_trace.push_back(surrogate_from_loss(g.loss, loss.power));
        // d/dtheta loss^(1/(2K)) = (1/(2K)) loss^(1/(2K)-1) * d loss/dtheta
        if (g.loss > 0.0) {
            g.gradient.scale(std::pow(g.loss, 1.0 / (2.0 * loss.power) - 1.0) /
                             (2.0 * loss.power));
        }
        const TransferPair before = report.params;
        const AdamState state_before = state;
        double step_scale = 1.0;
        for (int attempt = 0;; ++attempt) {
            adam_step(state, report.params, g.gradient, adam, step_scale);
            try {
                ctx = build(report.params);
                break;
            } catch (const NumericalError& e) {
                if (attempt + 1 >= 5) {
                    throw NumericalError(
                        "training aborted at iteration " + std::to_string(it) +
                            ": coarse operator stayed singular through 5 damped retries (" +
                            e.what() + ")",
                        e.magnitude());
                }
                report.params = before;
                state = state_before;
                step_scale *= 0.5;
                g = grad_loss(ctx, loss, iteration_offset + draws);  // fresh batch, old params
                ++draws;
                if (g.loss > 0.0) {
                    g.gradient.scale(std::pow(g.loss, 1.0 / (2.0 * loss.power) - 1.0) /
                                     (2.0 * loss.power));
                }
            }
        }
        ++report.iterations;
    }
    const double final_loss = estimate_loss(ctx, loss, iteration_offset + draws);
    ++draws;
    report.loss_trace.push_back(final_loss);
    report.surrogate_trace.push_back(surrogate_from_loss(final_loss, loss.power));
    report.substream_draws = draws;
    if (ctx.size() <= dense_cap) {
        report.verified_radius = spectral_radius(ctx, dense_cap);
    }
    return report;
}

struct HomotopyConfig {
    TridiagonalMatrix start;   // easy endpoint, blend position 0
    TridiagonalMatrix target;  // hard endpoint, blend position 1
    double tau = 0.5;
    double delta = 0.1;
    int max_halvings = 6;

    void validate() const {
        if (start.size() != target.size()) {
            throw DimensionError("homotopy endpoints differ in size: " +
                                 std::to_string(start.size()) + " vs " +
                                 std::to_string(target.size()));
        }
        if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
        if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
        if (max_halvings < 0 || max_halvings > 60) {
            throw ConfigError("max_halvings must lie in [0, 60]");
        }
    }
};

/// Continuation training along M(alpha) = (1-alpha) start + alpha target.
/// Stage 0 trains on the start matrix; each later stage advances alpha by
/// delta/2^p, retrains from the last accepted parameters, and accepts when
/// the fresh surrogate radius drops below tau. A rejection halves the
/// increment (p grows); acceptance resets p. Traces concatenate every stage,
/// accepted or not, so the report's iteration count is the true total cost.
inline TrainReport homotopy_train(const HomotopyConfig& hom, const TwoGridConfig& tg,
                                  TransferPair init, const AdamConfig& adam,
                                  const LossConfig& loss, int dense_cap = 2048) {
    hom.validate();
    adam.validate();
    loss.validate();
    std::uint64_t draws = 0;
    TrainReport report = train(hom.start, tg, std::move(init), adam, loss, draws, dense_cap);
    draws = report.substream_draws;
    auto record_stage = [&](double alpha, double surrogate, const TridiagonalMatrix& m) {
        report.stage_alphas.push_back(alpha);
        report.stage_surrogates.push_back(surrogate);
        double radius = std::numeric_limits<double>::quiet_NaN();
        if (m.size() <= dense_cap) {
            radius = spectral_radius(TwoGridContext<TransferPair>(m, report.params, tg), dense_cap);
        }
        report.stage_radii.push_back(radius);
    };
    record_stage(0.0, report.surrogate_trace.back(), hom.start);
    double alpha = 0.0;
    int halvings = 0;
    while (alpha < 1.0) {
        const double step = std::ldexp(hom.delta, -halvings);
        const double alpha_try = std::min(alpha + step, 1.0);
        const TridiagonalMatrix m =
            TridiagonalMatrix::blend(1.0 - alpha_try, hom.start, alpha_try, hom.target);
        TrainReport stage = train(m, tg, report.params, adam, loss, draws, dense_cap);
        draws += stage.substream_draws;
        report.loss_trace.insert(report.loss_trace.end(), stage.loss_trace.begin(),
                                 stage.loss_trace.end());
        report.surrogate_trace.insert(report.surrogate_trace.end(),
                                      stage.surrogate_trace.begin(),
                                      stage.surrogate_trace.end());
        report.iterations += stage.iterations;
        const double accept_estimate = surrogate_from_loss(
            estimate_loss(TwoGridContext<TransferPair>(m, stage.params, tg), loss, draws),
            loss.power);
        ++draws;
        if (accept_estimate < hom.tau) {
            alpha = alpha_try;
            halvings = 0;
            report.params = stage.params;
            record_stage(alpha, accept_estimate, m);
        } else {
            ++report.rejected_stages;
            ++halvings;
            if (halvings > hom.max_halvings) {
                throw NumericalError(
                    "homotopy stalled at blend position " + std::to_string(alpha) +
                        ": surrogate " + std::to_string(accept_estimate) + " never fell below " +
                        std::to_string(hom.tau) + " within " + std::to_string(hom.max_halvings) +
                        " halvings",
                    accept_estimate);
            }
        }
    }
    report.substream_draws = draws;
    if (hom.target.size() <= dense_cap) {
        report.verified_radius = spectral_radius(
            TwoGridContext<TransferPair>(hom.target, report.params, tg), dense_cap);
    } else {
        report.verified_radius = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

}  // namespace dmg
