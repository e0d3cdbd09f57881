#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
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

DenseMatrix random_matrix(int n, SplitMix64& rng, double scale = 1.0) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = scale * rng.next_symmetric();
    }
    return m;
}

/// Greedy nearest-neighbour pairing between two eigenvalue sets; returns the
/// largest pairing distance.
double match_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
    double worst = 0.0;
    for (const auto& x : a) {
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double d = std::abs(x - b[j]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        worst = std::max(worst, best_d);
        b.erase(b.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return worst;
}

TEST(Eigen, DiagonalMatrixSortedByMagnitude) {
    DenseMatrix m(3, 3);
    m(0, 0) = 0.5;
    m(1, 1) = 3.0;
    m(2, 2) = -1.0;
    const Spectrum spec = eigenvalues(m);
    ASSERT_EQ(spec.eigenvalues.size(), 3u);
    EXPECT_NEAR(spec.eigenvalues[0].real(), 3.0, 1e-14);
    EXPECT_NEAR(spec.eigenvalues[1].real(), -1.0, 1e-14);
    EXPECT_NEAR(spec.eigenvalues[2].real(), 0.5, 1e-14);
    for (const auto& e : spec.eigenvalues) EXPECT_EQ(e.imag(), 0.0);
    EXPECT_NEAR(spec.spectral_radius(), 3.0, 1e-14);
}

TEST(Eigen, RotationGivesConjugatePair) {
    DenseMatrix m(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = -1.0;
    const Spectrum spec = eigenvalues(m);
    ASSERT_EQ(spec.eigenvalues.size(), 2u);
    EXPECT_NEAR(spec.eigenvalues[0].real(), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(spec.eigenvalues[0].imag()), 1.0, 1e-14);
    EXPECT_NEAR(spec.eigenvalues[1].real(), 0.0, 1e-14);
    EXPECT_EQ(spec.eigenvalues[0].imag(), -spec.eigenvalues[1].imag());
    EXPECT_NEAR(spec.spectral_radius(), 1.0, 1e-14);

    const double theta = 0.7;
    DenseMatrix r(2, 2);
    r(0, 0) = std::cos(theta);
    r(0, 1) = -std::sin(theta);
    r(1, 0) = std::sin(theta);
    r(1, 1) = std::cos(theta);
    const Spectrum rs = eigenvalues(r);
    EXPECT_NEAR(rs.eigenvalues[0].real(), std::cos(theta), 1e-12);
    EXPECT_NEAR(std::abs(rs.eigenvalues[0].imag()), std::sin(theta), 1e-12);
    EXPECT_NEAR(rs.spectral_radius(), 1.0, 1e-12);
}

TEST(Eigen, JacobiSmootherSpectrumIsAnalytic) {
    const int n = 15;
    const Grid1D g = make_grid(n);
    const TridiagonalMatrix a = assemble_poisson(g);
    const double omega = 2.0 / 3.0;
    DenseMatrix s = DenseMatrix::identity(n);
    const DenseMatrix ad = to_dense(a);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) s(i, j) -= omega * ad(i, j) / a.diag(i);
    }
    Spectrum spec = eigenvalues(s);
    std::vector<double> got;
    for (const auto& e : spec.eigenvalues) {
        EXPECT_NEAR(e.imag(), 0.0, 1e-12);
        got.push_back(e.real());
    }
    std::vector<double> want;
    for (int j = 1; j <= n; ++j) {
        want.push_back(1.0 - omega * (1.0 - std::cos(j * std::numbers::pi * g.h)));
    }
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (int i = 0; i < n; ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
}

TEST(Eigen, TraceAndDeterminantIdentities) {
    SplitMix64 rng{61};
    for (int n : {5, 16}) {
        for (int trial = 0; trial < 5; ++trial) {
            const DenseMatrix m = random_matrix(n, rng);
            const Spectrum spec = eigenvalues(m);
            ASSERT_EQ(spec.eigenvalues.size(), static_cast<std::size_t>(n));

            std::complex<double> sum = 0.0, prod = 1.0;
            for (const auto& e : spec.eigenvalues) {
                sum += e;
                prod *= e;
            }
            double trace = 0.0;
            for (int i = 0; i < n; ++i) trace += m(i, i);
            EXPECT_NEAR(sum.real(), trace, 1e-10 * (1.0 + std::abs(trace)));
            EXPECT_NEAR(sum.imag(), 0.0, 1e-10);

            const double det = LuFactorization(m).determinant();
            EXPECT_NEAR(prod.real(), det, 1e-8 * (1.0 + std::abs(det)));
            EXPECT_NEAR(prod.imag(), 0.0, 1e-8 * (1.0 + std::abs(det)));
        }
    }
}

TEST(Eigen, SpectrumIsSimilarityInvariant) {
    SplitMix64 rng{62};
    const int n = 12;
    const DenseMatrix m = random_matrix(n, rng);
    DenseMatrix q = DenseMatrix::identity(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) q(i, j) += 0.1 * rng.next_symmetric();
    }
    // Q^{-1} (M Q), column by column through the LU factors of Q.
    const DenseMatrix mq = m.multiply(q);
    const LuFactorization lu((DenseMatrix(q)));
    DenseMatrix sim(n, n);
    std::vector<double> col(n), x(n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) col[i] = mq(i, j);
        lu.solve(col, x);
        for (int i = 0; i < n; ++i) sim(i, j) = x[i];
    }
    const double dist =
        match_distance(eigenvalues(m).eigenvalues, eigenvalues(sim).eigenvalues);
    EXPECT_LE(dist, 1e-8);
}

TEST(Eigen, RejectsNonSquareInput) {
    DenseMatrix rect(3, 4);
    EXPECT_THROW(eigenvalues(rect), DimensionError);
}

TEST(Materialize, ColumnsReproduceOperatorAction) {
    const TridiagonalMatrix a = assemble_poisson(make_grid(15));
    const TwoGridContext ctx(a, linear_baseline(15));
    const DenseMatrix c = materialize_iteration_matrix(ctx);
    ASSERT_EQ(c.rows(), 15);
    SplitMix64 rng{63};
    std::vector<double> z(15), got(15);
    for (int trial = 0; trial < 5; ++trial) {
        for (auto& v : z) v = rng.next_symmetric();
        c.matvec(z, got);
        const std::vector<double> applied = apply_iteration_matrix(ctx, z);
        for (int i = 0; i < 15; ++i) EXPECT_NEAR(got[i], applied[i], 1e-12);
    }
}

TEST(Materialize, RefusesOversizeProblems) {
    const TridiagonalMatrix a = assemble_poisson(make_grid(31));
    const TwoGridContext ctx(a, linear_baseline(31));
    EXPECT_THROW(materialize_iteration_matrix(ctx, 16), ConfigError);
    EXPECT_THROW(spectral_radius(ctx, 16), ConfigError);
}

TEST(Cycle, BaselineContractionRatesMatchReference) {
    const TwoGridContext poisson(assemble_poisson(make_grid(7)), linear_baseline(7));
    EXPECT_NEAR(spectral_radius(poisson), 0.061728, 1e-5);

    const TwoGridContext helmholtz(
        assemble_helmholtz(make_grid(13), KProfile::constant(10.0)), linear_baseline(13));
    EXPECT_NEAR(spectral_radius(helmholtz), 1.808608, 1e-4);
}

TEST(Cycle, RadiusNeverExceedsNormBound) {
    for (int n : {7, 15, 31}) {
        const TwoGridContext ctx(assemble_poisson(make_grid(n)), linear_baseline(n));
        const DenseMatrix c = materialize_iteration_matrix(ctx);
        const double rho = eigenvalues(c).spectral_radius();
        for (int power : {1, 5, 10}) {
            const double bound = surrogate_from_loss(exact_frobenius_power(c, power), power);
            EXPECT_LE(rho, bound * (1.0 + 1e-12)) << "n=" << n << " power=" << power;
        }
    }
}

}  // namespace
