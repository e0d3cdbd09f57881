#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "dmg/dense.hpp"
#include "dmg/errors.hpp"
#include "dmg/tridiag.hpp"

namespace dmg {

namespace detail {

inline int coarse_size_for(int n) {
    if (n < 3 || n % 2 == 0) {
        throw ConfigError("transfer operators need odd fine size >= 3, got n=" + std::to_string(n));
    }
    return (n - 1) / 2;
}

}  // namespace detail

/// Restriction from n fine nodes to n_c = (n-1)/2 coarse nodes. Row i holds
/// three weights acting on fine nodes (2i, 2i+1, 2i+2); consecutive rows
/// overlap in one fine node.
class RestrictionOp {
public:
    explicit RestrictionOp(int n)
        : n_(n), rows_(detail::coarse_size_for(n), std::array<double, 3>{}) {}

    int fine_size() const { return n_; }
    int coarse_size() const { return static_cast<int>(rows_.size()); }

    std::array<double, 3>& row(int i) { return rows_[i]; }
    const std::array<double, 3>& row(int i) const { return rows_[i]; }

    /// out = R v, shapes (n_c) <- (n).
    void apply(std::span<const double> v, std::span<double> out) const {
        check(v.size(), n_, "restriction input");
        check(out.size(), rows_.size(), "restriction output");
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const auto& w = rows_[i];
            out[i] = w[0] * v[2 * i] + w[1] * v[2 * i + 1] + w[2] * v[2 * i + 2];
        }
    }

    /// out = R^T w, shapes (n) <- (n_c).
    void apply_transpose(std::span<const double> w, std::span<double> out) const {
        check(w.size(), rows_.size(), "restriction transpose input");
        check(out.size(), n_, "restriction transpose output");
        for (int i = 0; i < n_; ++i) out[i] = 0.0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const auto& r = rows_[i];
            out[2 * i] += r[0] * w[i];
            out[2 * i + 1] += r[1] * w[i];
            out[2 * i + 2] += r[2] * w[i];
        }
    }

private:
    static void check(std::size_t got, std::size_t want, const char* what) {
        if (got != want) {
            throw DimensionError(std::string(what) + " length " + std::to_string(got) +
                                 ", expected " + std::to_string(want));
        }
    }

    int n_;
    std::vector<std::array<double, 3>> rows_;
};

/// Prolongation from n_c coarse nodes to n = 2 n_c + 1 fine nodes. Column j
/// holds three weights feeding fine nodes (2j, 2j+1, 2j+2).
class ProlongationOp {
public:
    explicit ProlongationOp(int n)
        : n_(n), cols_(detail::coarse_size_for(n), std::array<double, 3>{}) {}

    int fine_size() const { return n_; }
    int coarse_size() const { return static_cast<int>(cols_.size()); }

    std::array<double, 3>& col(int j) { return cols_[j]; }
    const std::array<double, 3>& col(int j) const { return cols_[j]; }

    /// out = P v, shapes (n) <- (n_c).
    void apply(std::span<const double> v, std::span<double> out) const {
        check(v.size(), cols_.size(), "prolongation input");
        check(out.size(), n_, "prolongation output");
        for (int i = 0; i < n_; ++i) out[i] = 0.0;
        for (std::size_t j = 0; j < cols_.size(); ++j) {
            const auto& c = cols_[j];
            out[2 * j] += c[0] * v[j];
            out[2 * j + 1] += c[1] * v[j];
            out[2 * j + 2] += c[2] * v[j];
        }
    }

    /// out = P^T v, shapes (n_c) <- (n).
    void apply_transpose(std::span<const double> v, std::span<double> out) const {
        check(v.size(), n_, "prolongation transpose input");
        check(out.size(), cols_.size(), "prolongation transpose output");
        for (std::size_t j = 0; j < cols_.size(); ++j) {
            const auto& c = cols_[j];
            out[j] = c[0] * v[2 * j] + c[1] * v[2 * j + 1] + c[2] * v[2 * j + 2];
        }
    }

private:
    static void check(std::size_t got, std::size_t want, const char* what) {
        if (got != want) {
            throw DimensionError(std::string(what) + " length " + std::to_string(got) +
                                 ", expected " + std::to_string(want));
        }
    }

    int n_;
    std::vector<std::array<double, 3>> cols_;
};

/// The trainable parameters of the two-grid method: restriction and
/// prolongation stencils plus the Jacobi damping factor. 6 n_c + 1 scalars.
struct TransferPair {
    RestrictionOp restriction;
    ProlongationOp prolongation;
    double omega = 0.0;

    TransferPair(RestrictionOp r, ProlongationOp p, double w)
        : restriction(std::move(r)), prolongation(std::move(p)), omega(w) {
        if (restriction.fine_size() != prolongation.fine_size()) {
            throw DimensionError("restriction acts on " + std::to_string(restriction.fine_size()) +
                                 " nodes but prolongation on " +
                                 std::to_string(prolongation.fine_size()));
        }
    }

    int fine_size() const { return restriction.fine_size(); }
    int coarse_size() const { return restriction.coarse_size(); }
    int parameter_count() const { return 6 * coarse_size() + 1; }

    void restrict_into(std::span<const double> v, std::span<double> out) const {
        restriction.apply(v, out);
    }
    void prolong_into(std::span<const double> v, std::span<double> out) const {
        prolongation.apply(v, out);
    }
};

/// Full-weighting restriction (1/4, 1/2, 1/4), linear interpolation
/// (1/2, 1, 1/2), and the classical Jacobi damping 2/3.
inline TransferPair linear_baseline(int n) {
    RestrictionOp r(n);
    ProlongationOp p(n);
    for (int i = 0; i < r.coarse_size(); ++i) {
        r.row(i) = {0.25, 0.5, 0.25};
        p.col(i) = {0.5, 1.0, 0.5};
    }
    return TransferPair(std::move(r), std::move(p), 2.0 / 3.0);
}

inline std::vector<double> restrict_vector(const RestrictionOp& r, std::span<const double> v) {
    std::vector<double> out(r.coarse_size());
    r.apply(v, out);
    return out;
}

inline std::vector<double> prolong_vector(const ProlongationOp& p, std::span<const double> v) {
    std::vector<double> out(p.fine_size());
    p.apply(v, out);
    return out;
}

/// Coarse operator A_c = R A P, built one coarse column at a time.
inline DenseMatrix galerkin_project(const RestrictionOp& r, const TridiagonalMatrix& a,
                                    const ProlongationOp& p) {
    if (a.size() != r.fine_size() || a.size() != p.fine_size()) {
        throw DimensionError("galerkin projection shape mismatch");
    }
    const int n = a.size();
    const int nc = r.coarse_size();
    DenseMatrix ac(nc, nc);
    std::vector<double> pj(n), apj(n), col(nc);
    for (int j = 0; j < nc; ++j) {
        std::fill(pj.begin(), pj.end(), 0.0);
        const auto& c = p.col(j);
        pj[2 * j] = c[0];
        pj[2 * j + 1] = c[1];
        pj[2 * j + 2] = c[2];
        a.matvec(pj, apj);
        r.apply(apj, col);
        for (int i = 0; i < nc; ++i) ac(i, j) = col[i];
    }
    return ac;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& field, const std::string& what) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw ConfigError("malformed " + what + " value '" + field + "'");
    }
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    return fields;
}

}  // namespace detail

/// Writes a transfer pair as CSV: a shape/damping header, a column header,
/// then one row per coarse node with the three restriction weights followed
/// by the three prolongation weights. Values round-trip bit-exactly.
inline void save_operators_csv(const TransferPair& t, std::ostream& out) {
    out << "n,n_c,omega\n";
    out << t.fine_size() << ',' << t.coarse_size() << ',' << detail::format_double(t.omega)
        << '\n';
    out << "R0,R1,R2,P0,P1,P2\n";
    for (int i = 0; i < t.coarse_size(); ++i) {
        const auto& r = t.restriction.row(i);
        const auto& p = t.prolongation.col(i);
        out << detail::format_double(r[0]) << ',' << detail::format_double(r[1]) << ','
            << detail::format_double(r[2]) << ',' << detail::format_double(p[0]) << ','
            << detail::format_double(p[1]) << ',' << detail::format_double(p[2]) << '\n';
    }
}

inline void save_operators_csv(const TransferPair& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    save_operators_csv(t, out);
    if (!out.flush()) throw ConfigError("failed writing '" + path.string() + "'");
}

inline TransferPair load_operators_csv(std::istream& in) {
    std::string line;
    // Skip the commented reproducibility block tools may prepend.
    while (std::getline(in, line) && !line.empty() && line.front() == '#') {
    }
    if (!in || line != "n,n_c,omega") {
        throw ConfigError("operator CSV: expected header 'n,n_c,omega'");
    }
    if (!std::getline(in, line)) throw ConfigError("operator CSV: missing shape row");
    auto shape = detail::split_csv_line(line);
    if (shape.size() != 3) throw ConfigError("operator CSV: shape row needs 3 fields");
    const int n = static_cast<int>(detail::parse_double(shape[0], "n"));
    const int nc = static_cast<int>(detail::parse_double(shape[1], "n_c"));
    const double omega = detail::parse_double(shape[2], "omega");
    if (n < 3 || n % 2 == 0 || nc != (n - 1) / 2) {
        throw ConfigError("operator CSV: inconsistent shape n=" + std::to_string(n) +
                          ", n_c=" + std::to_string(nc));
    }
    if (!std::getline(in, line) || line != "R0,R1,R2,P0,P1,P2") {
        throw ConfigError("operator CSV: expected header 'R0,R1,R2,P0,P1,P2'");
    }
    RestrictionOp r(n);
    ProlongationOp p(n);
    for (int i = 0; i < nc; ++i) {
        if (!std::getline(in, line)) {
            throw ConfigError("operator CSV: expected " + std::to_string(nc) +
                              " stencil rows, got " + std::to_string(i));
        }
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 6) {
            throw ConfigError("operator CSV: stencil row " + std::to_string(i) + " needs 6 fields");
        }
        for (int d = 0; d < 3; ++d) {
            r.row(i)[d] = detail::parse_double(fields[d], "stencil");
            p.col(i)[d] = detail::parse_double(fields[3 + d], "stencil");
        }
    }
    if (std::getline(in, line) && !line.empty()) {
        throw ConfigError("operator CSV: trailing content after stencil rows");
    }
    TransferPair t(std::move(r), std::move(p), omega);
    for (int i = 0; i < nc; ++i) {
        for (int d = 0; d < 3; ++d) {
            if (!std::isfinite(t.restriction.row(i)[d]) || !std::isfinite(t.prolongation.col(i)[d])) {
                throw ConfigError("operator CSV: non-finite stencil entry in row " +
                                  std::to_string(i));
            }
        }
    }
    if (!std::isfinite(omega)) throw ConfigError("operator CSV: non-finite omega");
    return t;
}

inline TransferPair load_operators_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
    return load_operators_csv(in);
}

}  // namespace dmg
