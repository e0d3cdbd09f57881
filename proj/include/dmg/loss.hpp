#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dmg/dense.hpp"
#include "dmg/errors.hpp"
#include "dmg/rng.hpp"
#include "dmg/twogrid.hpp"

namespace dmg {

/// Configuration of the stochastic contraction-norm estimate
/// (1/N) sum_i ||C^K z_i||^2 over Rademacher probes z_i.
struct LossConfig {
    int power = 10;        // K, number of cycle applications per probe
    int batch = 10;        // N, number of probes
    std::uint64_t seed = 0;

    void validate() const {
        if (power < 1) throw ConfigError("loss power must be >= 1, got " + std::to_string(power));
        if (batch < 1) throw ConfigError("loss batch must be >= 1, got " + std::to_string(batch));
    }
};

/// Anything that applies a fixed linear iteration operator in place.
template <class T>
concept IterationOperator = requires(const T& t, std::span<double> u, TwoGridWorkspace& ws) {
    { t.size() } -> std::convertible_to<int>;
    t.apply_iteration_inplace(u, ws);
};

/// Unbiased estimate of ||C^K||_F^2. Probe i of iteration t comes from
/// substream (seed, t, i), so estimates are reproducible and independent
/// across iterations.
template <IterationOperator Op>
double estimate_loss(const Op& ctx, const LossConfig& cfg, std::uint64_t iteration = 0) {
    cfg.validate();
    RademacherSampler sampler(cfg.seed);
    TwoGridWorkspace ws;
    double acc = 0.0;
    for (int i = 0; i < cfg.batch; ++i) {
        std::vector<double> u = sampler.draw(ctx.size(), iteration, static_cast<std::uint64_t>(i));
        for (int k = 0; k < cfg.power; ++k) ctx.apply_iteration_inplace(u, ws);
        for (double v : u) acc += v * v;
    }
    return acc / cfg.batch;
}

/// Root that turns the power-K norm estimate into a contraction-rate scale:
/// loss^(1/(2K)) approximates the spectral radius from above as K grows.
inline double surrogate_from_loss(double loss, int power) {
    if (power < 1) throw ConfigError("loss power must be >= 1");
    if (loss < 0.0) throw NumericalError("negative loss estimate", loss);
    return std::pow(loss, 1.0 / (2.0 * power));
}

template <IterationOperator Op>
double surrogate_radius(const Op& ctx, const LossConfig& cfg, std::uint64_t iteration = 0) {
    return surrogate_from_loss(estimate_loss(ctx, cfg, iteration), cfg.power);
}

/// ||C^K||_F^2 by repeated dense multiplication; the exact value the
/// stochastic estimate targets.
inline double exact_frobenius_power(const DenseMatrix& c, int power) {
    if (c.rows() != c.cols()) throw DimensionError("exact_frobenius_power needs a square matrix");
    if (power < 1) throw ConfigError("power must be >= 1");
    DenseMatrix m = c;
    for (int k = 1; k < power; ++k) m = m.multiply(c);
    return m.frobenius_norm_sq();
}

/// Exact variance of the batch-N Rademacher estimate of ||C^K||_F^2:
/// with G = (C^K)^T C^K, Var = (2/N) (||G||_F^2 - sum_i G_ii^2).
inline double estimator_variance(const DenseMatrix& c, int power, int batch) {
    if (c.rows() != c.cols()) throw DimensionError("estimator_variance needs a square matrix");
    if (power < 1 || batch < 1) throw ConfigError("estimator_variance needs power, batch >= 1");
    DenseMatrix m = c;
    for (int k = 1; k < power; ++k) m = m.multiply(c);
    DenseMatrix g = m.transpose().multiply(m);
    double diag_sq = 0.0;
    for (int i = 0; i < g.rows(); ++i) diag_sq += g(i, i) * g(i, i);
    return 2.0 / batch * (g.frobenius_norm_sq() - diag_sq);
}

}  // namespace dmg
