#pragma once

#include <concepts>
#include <string>
#include <utility>

#include "dmg/errors.hpp"
#include "dmg/grid.hpp"
#include "dmg/tridiag.hpp"

namespace dmg {

enum class ProblemKind { poisson, helmholtz, convection_diffusion };

/// Wavenumber profile k(x): either constant or the two-level step
/// k(x) = 1 for x < 1/2 and k(x) = k_max for x >= 1/2.
class KProfile {
public:
    static KProfile constant(double k) { return KProfile{false, k}; }
    static KProfile step(double k_max) { return KProfile{true, k_max}; }

    double operator()(double x) const {
        if (!piecewise_) return value_;
        return x < 0.5 ? 1.0 : value_;
    }

    bool piecewise() const { return piecewise_; }
    double value() const { return value_; }

private:
    KProfile(bool piecewise, double value) : piecewise_(piecewise), value_(value) {}

    bool piecewise_;
    double value_;
};

struct ProblemSpec {
    ProblemKind kind = ProblemKind::poisson;
    Grid1D grid;
    KProfile k = KProfile::constant(0.0);
    double eps = 1.0;
};

/// 1-D Dirichlet Laplacian: (1/h^2) tridiag(-1, 2, -1).
inline TridiagonalMatrix assemble_poisson(const Grid1D& grid) {
    TridiagonalMatrix a(grid.n);
    const double w = 1.0 / (grid.h * grid.h);
    for (int i = 0; i < grid.n; ++i) {
        a.set_row(i, i > 0 ? -w : 0.0, 2.0 * w, i + 1 < grid.n ? -w : 0.0);
    }
    return a;
}

/// Helmholtz operator: Laplacian minus diag(k(x_i)^2) at the interior nodes.
template <std::invocable<double> KFn>
TridiagonalMatrix assemble_helmholtz(const Grid1D& grid, KFn&& k_profile) {
    TridiagonalMatrix a = assemble_poisson(grid);
    for (int i = 0; i < grid.n; ++i) {
        const double k = k_profile(grid.node(i + 1));
        a.set_row(i, a.sub(i), a.diag(i) - k * k, a.super(i));
    }
    return a;
}

/// Convection-diffusion with upwind convection:
/// (eps/h^2) tridiag(-1, 2, -1) + (1/h) bidiag(main = -1, super = +1).
/// Requires h < eps so the discretization stays within its stable regime.
inline TridiagonalMatrix assemble_convection_diffusion(const Grid1D& grid, double eps) {
    if (grid.h >= eps) {
        throw ConfigError("convection-diffusion requires h < eps, got h=" +
                          std::to_string(grid.h) + ", eps=" + std::to_string(eps));
    }
    TridiagonalMatrix a(grid.n);
    const double d = eps / (grid.h * grid.h);
    const double c = 1.0 / grid.h;
    for (int i = 0; i < grid.n; ++i) {
        a.set_row(i, i > 0 ? -d : 0.0, 2.0 * d - c, i + 1 < grid.n ? -d + c : 0.0);
    }
    return a;
}

inline TridiagonalMatrix assemble(const ProblemSpec& spec) {
    switch (spec.kind) {
        case ProblemKind::poisson:
            return assemble_poisson(spec.grid);
        case ProblemKind::helmholtz:
            return assemble_helmholtz(spec.grid, spec.k);
        case ProblemKind::convection_diffusion:
            return assemble_convection_diffusion(spec.grid, spec.eps);
    }
    throw ConfigError("unknown problem kind");
}

}  // namespace dmg
