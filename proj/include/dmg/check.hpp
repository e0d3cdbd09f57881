#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dmg/experiment.hpp"
#include "dmg/grad.hpp"
#include "dmg/loss.hpp"
#include "dmg/problems.hpp"
#include "dmg/rng.hpp"
#include "dmg/spectral.hpp"
#include "dmg/train.hpp"
#include "dmg/transfer.hpp"
#include "dmg/twogrid.hpp"

namespace dmg {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail{};
    double seconds = 0.0;
};

namespace checks {

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

/// Linear-baseline contraction rate on the Laplacian is grid-independent.
inline CheckResult poisson_linear_rho() {
    CheckResult res{"poisson_linear_rho"};
    const double expected = 0.061728;
    double worst = 0.0;
    for (int n : {7, 15, 31, 63, 127}) {
        TwoGridContext<TransferPair> ctx(assemble_poisson(make_grid(n)), linear_baseline(n));
        worst = std::max(worst, std::abs(spectral_radius(ctx) - expected));
    }
    res.pass = worst <= 1e-5;
    res.detail = "max |rho - " + fmt(expected) + "| = " + fmt(worst) + " over n in {7..127}";
    return res;
}

/// Linear-baseline rates for indefinite operators, including one large grid.
inline CheckResult helmholtz_linear_rho() {
    CheckResult res{"helmholtz_linear_rho"};
    struct Case {
        int n;
        double k, expected, tol;
    };
    const Case cases[] = {{7, 5.0, 0.226356, 1e-3},
                          {13, 10.0, 1.808608, 1e-3},
                          {17, 15.0, 0.826753, 1e-3},
                          {23, 20.0, 3.388036, 1e-3},
                          {1115, 100.0, 0.180680, 1e-2}};
    res.pass = true;
    std::string worst_desc;
    for (const auto& c : cases) {
        const Grid1D grid = make_grid(c.n);
        TwoGridContext<TransferPair> ctx(assemble_helmholtz(grid, KProfile::constant(c.k)),
                                         linear_baseline(c.n));
        const double rho = spectral_radius(ctx);
        const double err = std::abs(rho - c.expected);
        if (err > c.tol) res.pass = false;
        worst_desc += "(n=" + std::to_string(c.n) + ",k=" + fmt(c.k) + "): " + fmt(rho) + " ";
    }
    res.detail = worst_desc;
    return res;
}

/// Learned parameters beat the linear baseline on the Laplacian.
inline CheckResult poisson_training_improvement() {
    CheckResult res{"poisson_training_improvement"};
    std::vector<double> radii;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const TridiagonalMatrix a = assemble_poisson(make_grid(31));
        AdamConfig adam;  // step 1e-4, 1000 iterations
        LossConfig loss{10, 10, seed};
        radii.push_back(train(a, TwoGridConfig{}, linear_baseline(31), adam, loss)
                            .verified_radius);
    }
    std::vector<double> sorted = radii;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[2];
    res.pass = median < 0.0618;
    res.detail = "median rho = " + fmt(median) + " (target <= 0.05 " +
                 (median <= 0.05 ? "met" : "missed") + "); seeds:";
    for (double r : radii) res.detail += " " + fmt(r);
    return res;
}

/// Training handles a mildly indefinite operator on most seeds.
inline CheckResult helmholtz_lowfreq_training() {
    CheckResult res{"helmholtz_lowfreq_training"};
    int wins = 0;
    std::string all;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Grid1D grid = make_grid(13);
        const TridiagonalMatrix a = assemble_helmholtz(grid, KProfile::constant(10.0));
        AdamConfig adam;
        LossConfig loss{10, 10, seed};
        const double rho =
            train(a, TwoGridConfig{}, linear_baseline(13), adam, loss).verified_radius;
        if (rho < 0.2) ++wins;
        all += " " + fmt(rho);
    }
    res.pass = wins >= 4;
    res.detail = std::to_string(wins) + "/5 seeds below 0.2;" + all;
    return res;
}

/// Continuation from the Laplacian tames a strongly indefinite operator that
/// stalls direct training, at equal iteration budget.
inline CheckResult homotopy_highfreq() {
    CheckResult res{"homotopy_highfreq"};
    ExperimentSpec spec;
    spec.problem = "helmholtz";
    spec.n = 113;
    spec.k = 100.0;
    spec.iterations = 100;  // per stage
    spec.tau = 0.5;
    spec.delta = 0.1;
    spec.seed = 5;
    const CompareInitResult cmp = run_compare_init(spec);
    const double hom = cmp.homotopy.verified_radius;
    const double std_rho = cmp.standard.verified_radius;
    res.pass = hom <= std_rho && hom < 1.0;
    res.detail = "homotopy rho = " + fmt(hom) + ", standard rho = " + fmt(std_rho) +
                 ", budget = " + std::to_string(cmp.budget);
    return res;
}

/// Trained parameters dominate the linear baseline across a diffusion sweep.
inline CheckResult convdiff_sweep_dominance() {
    CheckResult res{"convdiff_sweep_dominance"};
    ExperimentSpec spec;
    spec.problem = "convdiff";
    spec.n = 63;
    spec.axis = "eps";
    spec.from = 1.01 / 64.0;  // just inside the h < eps regime
    spec.to = 0.1;
    spec.points = 5;
    spec.power = 10;
    spec.batch = 5;
    spec.iterations = 500;
    spec.seed = 6;
    const auto rows = run_sweep(spec);
    int wins = 0;
    std::string all;
    for (const auto& r : rows) {
        if (r.trained_rho <= r.linear_rho) ++wins;
        all += " (" + fmt(r.value) + ": " + fmt(r.trained_rho) + " vs " + fmt(r.linear_rho) + ")";
    }
    res.pass = wins >= 4;
    res.detail = std::to_string(wins) + "/5 points dominate;" + all;
    return res;
}

namespace detail_check {

inline double& param_ref(TransferPair& p, int idx) {
    const int nc = p.coarse_size();
    if (idx < 3 * nc) return p.restriction.row(idx / 3)[idx % 3];
    idx -= 3 * nc;
    if (idx < 3 * nc) return p.prolongation.col(idx / 3)[idx % 3];
    return p.omega;
}

inline double batch_loss(const TridiagonalMatrix& a, const TransferPair& p,
                         const TwoGridConfig& tg, const std::vector<std::vector<double>>& probes,
                         int power) {
    TwoGridContext<TransferPair> ctx(a, p, tg);
    TwoGridWorkspace ws;
    double acc = 0.0;
    for (const auto& z : probes) {
        std::vector<double> u = z;
        for (int k = 0; k < power; ++k) ctx.apply_iteration_inplace(u, ws);
        for (double v : u) acc += v * v;
    }
    return acc / probes.size();
}

inline TransferPair perturbed_baseline(int n, double amplitude, double omega, SplitMix64& rng) {
    TransferPair p = linear_baseline(n);
    for (int i = 0; i < p.coarse_size(); ++i) {
        for (int d = 0; d < 3; ++d) {
            p.restriction.row(i)[d] += amplitude * rng.next_symmetric();
            p.prolongation.col(i)[d] += amplitude * rng.next_symmetric();
        }
    }
    p.omega = omega;
    return p;
}

inline TridiagonalMatrix random_problem(int n, SplitMix64& rng) {
    const Grid1D grid = make_grid(n);
    switch (rng.next() % 3) {
        case 0:
            return assemble_poisson(grid);
        case 1:
            return assemble_helmholtz(grid, KProfile::constant(1.0 + 4.0 * rng.next_unit()));
        default:
            return assemble_convection_diffusion(grid, grid.h * (1.5 + 2.0 * rng.next_unit()));
    }
}

}  // namespace detail_check

/// Reverse-mode gradients agree with central finite differences.
inline CheckResult gradient_finite_difference() {
    CheckResult res{"gradient_finite_difference"};
    SplitMix64 rng{7};
    double worst = 0.0;
    for (int cfg = 0; cfg < 20; ++cfg) {
        const int n = 5 + 2 * static_cast<int>(rng.next() % 4);  // 5..11
        const int power = 1 + static_cast<int>(rng.next() % 3);
        const TwoGridConfig tg{static_cast<int>(rng.next() % 3),
                               static_cast<int>(rng.next() % 3)};
        TridiagonalMatrix a = detail_check::random_problem(n, rng);
        TransferPair params = detail_check::perturbed_baseline(
            n, 0.3, 0.3 + 0.5 * rng.next_unit(), rng);
        for (int attempt = 0; attempt < 100; ++attempt) {
            try {
                TwoGridContext<TransferPair>(a, params, tg);
                break;
            } catch (const NumericalError&) {
                params = detail_check::perturbed_baseline(n, 0.3, 0.3 + 0.5 * rng.next_unit(),
                                                          rng);
            }
        }
        RademacherSampler sampler(rng.next());
        std::vector<std::vector<double>> probes;
        for (int i = 0; i < 2; ++i) probes.push_back(sampler.draw(n, 0, i));
        TwoGridContext<TransferPair> ctx(a, params, tg);
        const GradResult g = grad_loss(ctx, probes, power);
        const int count = params.parameter_count();
        double max_fd = 0.0, max_diff = 0.0;
        for (int idx = 0; idx < count; ++idx) {
            TransferPair plus = params, minus = params;
            const double theta = detail_check::param_ref(plus, idx);
            const double h = 6e-6 * std::max(1.0, std::abs(theta));
            detail_check::param_ref(plus, idx) += h;
            detail_check::param_ref(minus, idx) -= h;
            const double fd = (detail_check::batch_loss(a, plus, tg, probes, power) -
                               detail_check::batch_loss(a, minus, tg, probes, power)) /
                              (2.0 * h);
            double ad;
            if (idx < 3 * params.coarse_size()) {
                ad = g.gradient.d_restriction[idx / 3][idx % 3];
            } else if (idx < 6 * params.coarse_size()) {
                const int j = idx - 3 * params.coarse_size();
                ad = g.gradient.d_prolongation[j / 3][j % 3];
            } else {
                ad = g.gradient.d_omega;
            }
            max_fd = std::max(max_fd, std::abs(fd));
            max_diff = std::max(max_diff, std::abs(ad - fd));
        }
        worst = std::max(worst, max_diff / std::max(max_fd, 1e-12));
    }
    res.pass = worst <= 1e-5;
    res.detail = "max relative error = " + fmt(worst) + " over 20 configurations";
    return res;
}

/// The probe estimate is unbiased with the predicted variance.
inline CheckResult estimator_moments() {
    CheckResult res{"estimator_moments"};
    SplitMix64 rng{42};
    const int n = 7, power = 2, batch = 4;
    const TridiagonalMatrix a = assemble_poisson(make_grid(n));
    const TransferPair params = detail_check::perturbed_baseline(n, 0.05, 0.6, rng);
    TwoGridContext<TransferPair> ctx(a, params, TwoGridConfig{});
    const DenseMatrix c = materialize_iteration_matrix(ctx);
    const double exact = exact_frobenius_power(c, power);
    const double var_exact = estimator_variance(c, power, batch);
    const int reps = 500;
    std::vector<double> samples(reps);
    for (int r = 0; r < reps; ++r) {
        samples[r] = estimate_loss(ctx, LossConfig{power, batch, static_cast<std::uint64_t>(r)});
    }
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= reps;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= reps - 1;
    const double se = std::sqrt(var_exact / reps);
    const bool mean_ok = std::abs(mean - exact) <= 3.0 * se;
    const bool var_ok = std::abs(var / var_exact - 1.0) <= 0.20;
    res.pass = mean_ok && var_ok;
    res.detail = "mean " + fmt(mean) + " vs exact " + fmt(exact) + " (|dev| = " +
                 fmt(std::abs(mean - exact)) + ", 3se = " + fmt(3.0 * se) + "); variance ratio " +
                 fmt(var / var_exact);
    return res;
}

/// The rooted power norm never undercuts the true spectral radius.
inline CheckResult gelfand_bound() {
    CheckResult res{"gelfand_bound"};
    SplitMix64 rng{9};
    double worst_margin = 1e300;
    res.pass = true;
    for (int draw = 0; draw < 100; ++draw) {
        const int n = 5 + 2 * static_cast<int>(rng.next() % 14);  // 5..31
        const TwoGridConfig tg{static_cast<int>(rng.next() % 3),
                               static_cast<int>(rng.next() % 3)};
        TridiagonalMatrix a = detail_check::random_problem(n, rng);
        TransferPair params =
            detail_check::perturbed_baseline(n, 0.3, 0.2 + 0.6 * rng.next_unit(), rng);
        for (int attempt = 0; attempt < 100; ++attempt) {
            try {
                TwoGridContext<TransferPair>(a, params, tg);
                break;
            } catch (const NumericalError&) {
                params = detail_check::perturbed_baseline(n, 0.3, 0.2 + 0.6 * rng.next_unit(),
                                                          rng);
            }
        }
        TwoGridContext<TransferPair> ctx(a, params, tg);
        const DenseMatrix c = materialize_iteration_matrix(ctx);
        const double rho = spectral_radius(c);
        for (int power : {1, 5, 10}) {
            const double bound =
                std::pow(exact_frobenius_power(c, power), 1.0 / (2.0 * power));
            worst_margin = std::min(worst_margin, bound - rho);
            if (rho > bound * (1.0 + 1e-10) + 1e-12) res.pass = false;
        }
    }
    res.detail = "min (bound - rho) = " + fmt(worst_margin) + " over 100 draws x K in {1,5,10}";
    return res;
}

/// Eigensolver sanity against closed-form oracles.
inline CheckResult eigensolver_identities() {
    CheckResult res{"eigensolver_identities"};
    SplitMix64 rng{10};
    res.pass = true;
    std::string notes;
    // Trace and determinant identities on random dense matrices.
    for (int n : {2, 3, 5, 9, 17, 33, 64}) {
        DenseMatrix a(n, n);
        double trace = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) a(i, j) = rng.next_symmetric();
            trace += a(i, i);
        }
        const double det = LuFactorization(a).determinant();
        const Spectrum spec = eigenvalues(a);
        std::complex<double> sum = 0.0, prod = 1.0;
        for (const auto& e : spec.eigenvalues) {
            sum += e;
            prod *= e;
        }
        const double trace_err = std::abs(sum - std::complex<double>(trace));
        const double det_err = std::abs(prod - std::complex<double>(det));
        if (trace_err > 1e-8 * (1.0 + std::abs(trace)) || det_err > 1e-8 * (1.0 + std::abs(det))) {
            res.pass = false;
            notes += " FAIL(n=" + std::to_string(n) + ": dtr=" + fmt(trace_err) +
                     ", ddet=" + fmt(det_err) + ")";
        }
    }
    // Damped-Jacobi spectrum on the Laplacian: 1 - omega (1 - cos(i pi h)).
    {
        const int n = 63;
        const Grid1D grid = make_grid(n);
        const TridiagonalMatrix a = assemble_poisson(grid);
        const double omega = 2.0 / 3.0;
        DenseMatrix s = DenseMatrix::identity(n);
        const DenseMatrix ad = to_dense(a);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s(i, j) -= omega * ad(i, j) / a.diag(i);
        Spectrum spec = eigenvalues(std::move(s));
        std::vector<double> got;
        for (const auto& e : spec.eigenvalues) got.push_back(e.real());
        std::vector<double> want(n);
        constexpr double pi = 3.14159265358979323846;
        for (int i = 1; i <= n; ++i) want[i - 1] = 1.0 - omega * (1.0 - std::cos(i * pi * grid.h));
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        double worst = 0.0;
        for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        if (worst > 1e-8) {
            res.pass = false;
            notes += " FAIL(jacobi spectrum dev=" + fmt(worst) + ")";
        } else {
            notes += " jacobi spectrum dev=" + fmt(worst);
        }
    }
    // A pure rotation block must come back as a conjugate pair.
    {
        DenseMatrix r(2, 2);
        const double theta = 0.7;
        r(0, 0) = std::cos(theta);
        r(0, 1) = -std::sin(theta);
        r(1, 0) = std::sin(theta);
        r(1, 1) = std::cos(theta);
        const Spectrum spec = eigenvalues(r);
        const double dev =
            std::abs(spec.eigenvalues[0] - std::complex<double>(std::cos(theta), std::sin(theta)));
        if (dev > 1e-8 || std::abs(spec.eigenvalues[1] - std::conj(spec.eigenvalues[0])) > 0.0) {
            res.pass = false;
            notes += " FAIL(rotation pair dev=" + fmt(dev) + ")";
        }
    }
    res.detail = notes.empty() ? "trace/det/rotation/jacobi oracles hold" : notes;
    return res;
}

}  // namespace checks

/// Runs the full acceptance suite, invoking `on_result` as each finishes.
inline std::vector<CheckResult> run_acceptance_checks(
    const std::function<void(const CheckResult&)>& on_result = {}) {
    using Fn = CheckResult (*)();
    struct Entry {
        const char* name;
        Fn fn;
    };
    const Entry entries[] = {{"poisson_linear_rho", checks::poisson_linear_rho},
                             {"helmholtz_linear_rho", checks::helmholtz_linear_rho},
                             {"poisson_training_improvement", checks::poisson_training_improvement},
                             {"helmholtz_lowfreq_training", checks::helmholtz_lowfreq_training},
                             {"homotopy_highfreq", checks::homotopy_highfreq},
                             {"convdiff_sweep_dominance", checks::convdiff_sweep_dominance},
                             {"gradient_finite_difference", checks::gradient_finite_difference},
                             {"estimator_moments", checks::estimator_moments},
                             {"gelfand_bound", checks::gelfand_bound},
                             {"eigensolver_identities", checks::eigensolver_identities}};
    std::vector<CheckResult> results;
    results.reserve(std::size(entries));
    for (const Entry& entry : entries) {
        const auto start = std::chrono::steady_clock::now();
        CheckResult r;
        try {
            r = entry.fn();
        } catch (const std::exception& e) {
            r.name = entry.name;
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(r);
        if (on_result) on_result(results.back());
    }
    return results;
}

}  // namespace dmg
