#pragma once

#include <string>

#include "dmg/errors.hpp"

namespace dmg {

/// Uniform 1-D grid on (0, 1) with n interior nodes x_i = i * h, h = 1/(n+1).
/// n must be odd and >= 3 so the standard coarsening n_c = (n-1)/2 applies.
struct Grid1D {
    int n = 3;
    double h = 0.25;

    /// Interior node count after one coarsening step.
    int coarse_n() const { return (n - 1) / 2; }

    /// Node coordinate, 1-based index i in [1, n].
    double node(int i) const { return i * h; }
};

inline Grid1D make_grid(int n) {
    if (n < 3 || n % 2 == 0) {
        throw ConfigError("grid size must be odd and >= 3, got n=" + std::to_string(n));
    }
    return Grid1D{n, 1.0 / (n + 1)};
}

/// Grid with n = 2^level - 1 interior nodes (level >= 2), the sizes for which
/// repeated halving stays within the odd-size family all the way down.
inline Grid1D grid_from_level(int level) {
    if (level < 2 || level > 30) {
        throw ConfigError("grid level must be in [2, 30], got " + std::to_string(level));
    }
    return make_grid((1 << level) - 1);
}

}  // namespace dmg
