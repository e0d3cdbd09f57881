#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <gtest/gtest.h>

#include "dmg/dense.hpp"
#include "dmg/errors.hpp"
#include "dmg/grid.hpp"
#include "dmg/loss.hpp"
#include "dmg/problems.hpp"
#include "dmg/rng.hpp"
#include "dmg/spectral.hpp"
#include "dmg/transfer.hpp"
#include "dmg/twogrid.hpp"

namespace {

using namespace dmg;

/// Iteration operator y <- alpha * y, for which the norm estimate has the
/// closed form alpha^(2K) * n regardless of the probe batch.
struct ScalingOp {
    int n = 0;
    double alpha = 0.0;
    int size() const { return n; }
    void apply_iteration_inplace(std::span<double> u, TwoGridWorkspace&) const {
        for (auto& x : u) x *= alpha;
    }
};

DenseMatrix dense_cycle_matrix(const TwoGridContext<TransferPair>& ctx) {
    const int n = ctx.size();
    DenseMatrix c(n, n);
    std::vector<double> basis(n);
    for (int j = 0; j < n; ++j) {
        std::fill(basis.begin(), basis.end(), 0.0);
        basis[j] = 1.0;
        const std::vector<double> col = apply_iteration_matrix(ctx, basis);
        for (int i = 0; i < n; ++i) c(i, j) = col[i];
    }
    return c;
}

TEST(Sampler, DrawsAreReproducibleAndIndependent) {
    const RademacherSampler sampler(99);
    const std::vector<double> a = sampler.draw(64, 3, 7);
    const std::vector<double> b = sampler.draw(64, 3, 7);
    ASSERT_EQ(a.size(), 64u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, sampler.draw(64, 4, 7));
    EXPECT_NE(a, sampler.draw(64, 3, 8));
    EXPECT_NE(a, RademacherSampler(100).draw(64, 3, 7));
    EXPECT_EQ(a, sample_rademacher(sampler, 64, 3, 7));
}

TEST(Sampler, EntriesAreUnitSigns) {
    const RademacherSampler sampler(5);
    for (std::uint64_t t = 0; t < 20; ++t) {
        const std::vector<double> z = sampler.draw(33, t, 0);
        double sq = 0.0;
        for (double v : z) {
            EXPECT_TRUE(v == 1.0 || v == -1.0);
            sq += v * v;
        }
        EXPECT_EQ(sq, 33.0);
    }
}

TEST(Sampler, SignsAreBalancedPerCoordinate) {
    const RademacherSampler sampler(123);
    const int n = 16;
    const int draws = 10000;
    std::vector<int> plus(n, 0);
    for (int t = 0; t < draws; ++t) {
        const std::vector<double> z = sampler.draw(n, 0, static_cast<std::uint64_t>(t));
        for (int i = 0; i < n; ++i) plus[i] += z[i] > 0.0 ? 1 : 0;
    }
    for (int i = 0; i < n; ++i) {
        EXPECT_GE(plus[i], 4700) << "coordinate " << i;
        EXPECT_LE(plus[i], 5300) << "coordinate " << i;
    }
}

TEST(Loss, ScalingOperatorHasClosedForm) {
    const ScalingOp op{16, 0.5};
    LossConfig cfg;
    cfg.power = 3;
    cfg.batch = 4;
    cfg.seed = 7;
    // Every probe contributes exactly alpha^(2K) * n, so the estimate is
    // deterministic and, with these powers of two, exact.
    EXPECT_DOUBLE_EQ(estimate_loss(op, cfg), 0.25);
    const double expected = 0.5 * std::pow(16.0, 1.0 / 6.0);
    EXPECT_NEAR(surrogate_radius(op, cfg), expected, 1e-14);
}

TEST(Loss, ZeroOperatorGivesExactlyZero) {
    const ScalingOp op{8, 0.0};
    LossConfig cfg;
    cfg.power = 10;
    cfg.batch = 3;
    EXPECT_EQ(estimate_loss(op, cfg), 0.0);
    EXPECT_EQ(surrogate_radius(op, cfg), 0.0);
}

TEST(Loss, EstimateIsDeterministicPerSubstream) {
    const TridiagonalMatrix a = assemble_poisson(make_grid(15));
    const TwoGridContext ctx(a, linear_baseline(15));
    LossConfig cfg;
    cfg.power = 4;
    cfg.batch = 3;
    cfg.seed = 21;
    const double first = estimate_loss(ctx, cfg, 5);
    EXPECT_EQ(first, estimate_loss(ctx, cfg, 5));
    EXPECT_NE(first, estimate_loss(ctx, cfg, 6));
}

TEST(Loss, EstimatorIsUnbiasedWithPredictedVariance) {
    const TridiagonalMatrix a = assemble_poisson(make_grid(7));
    const TwoGridContext ctx(a, linear_baseline(7));
    const DenseMatrix c = dense_cycle_matrix(ctx);
    const int power = 2;
    const int batch = 4;
    const double exact = exact_frobenius_power(c, power);
    const double variance = estimator_variance(c, power, batch);
    ASSERT_GT(exact, 0.0);
    ASSERT_GT(variance, 0.0);

    const int seeds = 200;
    LossConfig cfg;
    cfg.power = power;
    cfg.batch = batch;
    std::vector<double> estimates(seeds);
    double mean = 0.0;
    for (int s = 0; s < seeds; ++s) {
        cfg.seed = static_cast<std::uint64_t>(s);
        estimates[s] = estimate_loss(ctx, cfg);
        mean += estimates[s];
    }
    mean /= seeds;
    const double se = std::sqrt(variance / seeds);
    EXPECT_NEAR(mean, exact, 3.0 * se);

    double sample_var = 0.0;
    for (double e : estimates) sample_var += (e - mean) * (e - mean);
    sample_var /= seeds - 1;
    EXPECT_NEAR(sample_var, variance, 0.4 * variance);
}

TEST(Loss, SurrogateBracketsSpectralRadius) {
    const TridiagonalMatrix a = assemble_poisson(make_grid(31));
    const TwoGridContext ctx(a, linear_baseline(31));
    const double rho = 0.061728;
    LossConfig cfg;
    cfg.power = 10;
    cfg.batch = 10;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        cfg.seed = seed;
        const double s = surrogate_radius(ctx, cfg);
        EXPECT_GE(s, 0.8 * rho) << "seed " << seed;
        EXPECT_LE(s, 0.55) << "seed " << seed;
    }
}

TEST(Loss, ExactNormPowersMatchSmallCases) {
    EXPECT_DOUBLE_EQ(exact_frobenius_power(DenseMatrix::identity(5), 3), 5.0);

    DenseMatrix half(3, 3);
    for (int i = 0; i < 3; ++i) half(i, i) = 0.5;
    EXPECT_DOUBLE_EQ(exact_frobenius_power(half, 2), 0.1875);

    DenseMatrix rect(2, 3);
    EXPECT_THROW(exact_frobenius_power(rect, 1), DimensionError);
    EXPECT_THROW(exact_frobenius_power(half, 0), ConfigError);
    EXPECT_THROW(estimator_variance(half, 1, 0), ConfigError);
}

TEST(Loss, ExactNormPowerMatchesMonteCarlo) {
    SplitMix64 rng{31};
    const int n = 5;
    DenseMatrix c(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) c(i, j) = 0.4 * rng.next_symmetric();
    }
    const int power = 4;
    const double exact = exact_frobenius_power(c, power);
    const double var_single = estimator_variance(c, power, 1);

    const RademacherSampler sampler(77);
    const int draws = 100000;
    double mean = 0.0;
    std::vector<double> u(n), v(n);
    for (int t = 0; t < draws; ++t) {
        std::vector<double> z = sampler.draw(n, static_cast<std::uint64_t>(t), 0);
        u = z;
        for (int k = 0; k < power; ++k) {
            c.matvec(u, v);
            std::swap(u, v);
        }
        double sq = 0.0;
        for (double x : u) sq += x * x;
        mean += sq;
    }
    mean /= draws;
    const double se = std::sqrt(var_single / draws);
    EXPECT_NEAR(mean, exact, 3.0 * se);
}

TEST(Loss, NormBoundTightensWithPower) {
    SplitMix64 rng{41};
    for (int draw = 0; draw < 30; ++draw) {
        TransferPair t = linear_baseline(9);
        for (int i = 0; i < t.coarse_size(); ++i) {
            for (int d = 0; d < 3; ++d) {
                t.restriction.row(i)[d] += 0.05 * rng.next_symmetric();
                t.prolongation.col(i)[d] += 0.05 * rng.next_symmetric();
            }
        }
        t.omega += 0.05 * rng.next_symmetric();
        const TwoGridContext ctx(assemble_poisson(make_grid(9)), t);
        const DenseMatrix c = dense_cycle_matrix(ctx);
        const double rho = spectral_radius(c);
        const double b1 = surrogate_from_loss(exact_frobenius_power(c, 1), 1);
        const double b5 = surrogate_from_loss(exact_frobenius_power(c, 5), 5);
        const double b10 = surrogate_from_loss(exact_frobenius_power(c, 10), 10);
        EXPECT_LE(rho, b10 * (1.0 + 1e-12));
        EXPECT_LE(b10, b5 * (1.0 + 1e-12));
        EXPECT_LE(b5, b1 * (1.0 + 1e-12));
    }
}

TEST(Loss, ConfigurationIsValidated) {
    const ScalingOp op{4, 0.5};
    LossConfig cfg;
    cfg.power = 0;
    EXPECT_THROW(estimate_loss(op, cfg), ConfigError);
    cfg.power = 2;
    cfg.batch = 0;
    EXPECT_THROW(estimate_loss(op, cfg), ConfigError);
    EXPECT_THROW(surrogate_from_loss(-1e-3, 2), NumericalError);
    EXPECT_THROW(surrogate_from_loss(1.0, 0), ConfigError);
}

}  // namespace
