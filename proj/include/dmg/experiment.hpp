#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmg/errors.hpp"
#include "dmg/grid.hpp"
#include "dmg/loss.hpp"
#include "dmg/problems.hpp"
#include "dmg/rng.hpp"
#include "dmg/spectral.hpp"
#include "dmg/train.hpp"
#include "dmg/transfer.hpp"
#include "dmg/twogrid.hpp"

namespace dmg {

/// Everything a run needs, assembled from config file and command line.
/// Serializes to the commented reproducibility header of every output CSV.
struct ExperimentSpec {
    std::string problem = "poisson";  // poisson | helmholtz | convdiff
    int n = 31;
    double k = 0.0;      // constant wavenumber (helmholtz)
    double kmax = 0.0;   // > 0 selects the two-level step profile instead
    double eps = 0.1;    // diffusion coefficient (convdiff)
    int s1 = 2;
    int s2 = 2;
    int power = 10;       // probes are pushed through C^power    (flag --K)
    int batch = 10;       // probes per estimate                  (flag --N)
    int iterations = 1000;  // optimizer steps / steps per stage  (flag --T)
    double step = 1e-4;
    double tau = 0.5;
    double delta = 0.1;
    std::uint64_t seed = 0;
    bool homotopy = false;  // train: continue from the matching Poisson operator
    std::string out;        // output path stem; empty = stdout summary only
    std::string ops;        // operator CSV: eval input / train initializer
    std::string axis;       // sweep: k | eps
    double from = 0.0;      // sweep range start
    double to = 0.0;        // sweep range end
    int points = 1;         // sweep point count

    void validate() const {
        if (problem != "poisson" && problem != "helmholtz" && problem != "convdiff") {
            throw ConfigError("unknown problem '" + problem +
                              "' (expected poisson, helmholtz or convdiff)");
        }
        make_grid(n);
        if (k < 0.0) throw ConfigError("wavenumber k must be >= 0");
        if (kmax < 0.0) throw ConfigError("kmax must be >= 0");
        if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
        if (s1 < 0 || s2 < 0) throw ConfigError("smoothing counts must be >= 0");
        LossConfig{power, batch, seed}.validate();
        if (iterations < 0) throw ConfigError("iteration count T must be >= 0");
        if (!(step > 0.0)) throw ConfigError("step must be > 0");
        if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
        if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
        if (!axis.empty() && axis != "k" && axis != "eps") {
            throw ConfigError("sweep axis must be 'k' or 'eps'");
        }
        if (points < 1) throw ConfigError("sweep needs points >= 1");
    }

    ProblemSpec problem_spec() const {
        ProblemSpec p;
        p.grid = make_grid(n);
        if (problem == "poisson") {
            p.kind = ProblemKind::poisson;
        } else if (problem == "helmholtz") {
            p.kind = ProblemKind::helmholtz;
            p.k = kmax > 0.0 ? KProfile::step(kmax) : KProfile::constant(k);
        } else {
            p.kind = ProblemKind::convection_diffusion;
            p.eps = eps;
        }
        return p;
    }

    TwoGridConfig two_grid_config() const { return TwoGridConfig{s1, s2}; }
    LossConfig loss_config() const { return LossConfig{power, batch, seed}; }

    AdamConfig adam_config() const {
        AdamConfig a;
        a.step = step;
        a.iterations = iterations;
        return a;
    }

    /// Key-value view used by the config parser and the CSV echo.
    std::vector<std::pair<std::string, std::string>> items() const {
        auto fmt = [](double v) { return detail::format_double(v); };
        return {{"problem", problem},
                {"n", std::to_string(n)},
                {"k", fmt(k)},
                {"kmax", fmt(kmax)},
                {"eps", fmt(eps)},
                {"s1", std::to_string(s1)},
                {"s2", std::to_string(s2)},
                {"K", std::to_string(power)},
                {"N", std::to_string(batch)},
                {"T", std::to_string(iterations)},
                {"step", fmt(step)},
                {"tau", fmt(tau)},
                {"delta", fmt(delta)},
                {"seed", std::to_string(seed)},
                {"homotopy", homotopy ? "1" : "0"},
                {"out", out},
                {"ops", ops},
                {"axis", axis},
                {"from", fmt(from)},
                {"to", fmt(to)},
                {"points", std::to_string(points)}};
    }

    void set(const std::string& key, const std::string& value) {
        auto to_int = [&](const std::string& v) {
            int out_v = 0;
            auto res = std::from_chars(v.data(), v.data() + v.size(), out_v);
            if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
                throw ConfigError("key '" + key + "' needs an integer, got '" + v + "'");
            }
            return out_v;
        };
        auto to_u64 = [&](const std::string& v) {
            std::uint64_t out_v = 0;
            auto res = std::from_chars(v.data(), v.data() + v.size(), out_v);
            if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
                throw ConfigError("key '" + key + "' needs an unsigned integer, got '" + v + "'");
            }
            return out_v;
        };
        auto to_dbl = [&](const std::string& v) { return detail::parse_double(v, "key " + key); };
        auto to_bool = [&](const std::string& v) {
            if (v == "1" || v == "true") return true;
            if (v == "0" || v == "false") return false;
            throw ConfigError("key '" + key + "' needs a boolean (0/1/true/false), got '" + v +
                              "'");
        };
        if (key == "problem") problem = value;
        else if (key == "n") n = to_int(value);
        else if (key == "k") k = to_dbl(value);
        else if (key == "kmax") kmax = to_dbl(value);
        else if (key == "eps") eps = to_dbl(value);
        else if (key == "s1") s1 = to_int(value);
        else if (key == "s2") s2 = to_int(value);
        else if (key == "K") power = to_int(value);
        else if (key == "N") batch = to_int(value);
        else if (key == "T") iterations = to_int(value);
        else if (key == "step") step = to_dbl(value);
        else if (key == "tau") tau = to_dbl(value);
        else if (key == "delta") delta = to_dbl(value);
        else if (key == "seed") seed = to_u64(value);
        else if (key == "homotopy") homotopy = to_bool(value);
        else if (key == "out") out = value;
        else if (key == "ops") ops = value;
        else if (key == "axis") axis = value;
        else if (key == "from") from = to_dbl(value);
        else if (key == "to") to = to_dbl(value);
        else if (key == "points") points = to_int(value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
};

/// Flat key=value config file; '#' starts a comment, blank lines are ignored,
/// unknown keys are rejected.
inline void load_config_file(ExperimentSpec& spec, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string trimmed = line.substr(first, last - first + 1);
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: '" +
                              trimmed + "'");
        }
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        try {
            spec.set(strip(trimmed.substr(0, eq)), strip(trimmed.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

/// Reproducibility header: the full spec echo as CSV comments.
inline void write_spec_echo(std::ostream& out, const ExperimentSpec& spec,
                            const std::string& command) {
    out << "# command=" << command << '\n';
    for (const auto& [key, value] : spec.items()) out << "# " << key << '=' << value << '\n';
}

/// Per-point seed for sweeps: independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(0x9E3779B97F4A7C15ULL * (index + 1)));
}

struct EvalResult {
    double rho = 0.0;
    double surrogate = 0.0;
    TransferPair params;
};

/// Spectral radius and surrogate of one fixed configuration; parameters come
/// from the `ops` CSV when given, otherwise the linear baseline.
inline EvalResult run_eval(const ExperimentSpec& spec) {
    spec.validate();
    const TridiagonalMatrix a = assemble(spec.problem_spec());
    TransferPair params = spec.ops.empty() ? linear_baseline(spec.n)
                                           : load_operators_csv(std::filesystem::path(spec.ops));
    if (params.fine_size() != spec.n) {
        throw ConfigError("operator file is for n=" + std::to_string(params.fine_size()) +
                          ", experiment has n=" + std::to_string(spec.n));
    }
    TwoGridContext<TransferPair> ctx(a, params, spec.two_grid_config());
    EvalResult res{spectral_radius(ctx), surrogate_radius(ctx, spec.loss_config()),
                   std::move(params)};
    return res;
}

inline void write_eval_csv(std::ostream& out, const ExperimentSpec& spec, const EvalResult& res) {
    write_spec_echo(out, spec, "eval");
    out << "problem,n,k,kmax,eps,omega,rho,surrogate\n";
    out << spec.problem << ',' << spec.n << ',' << detail::format_double(spec.k) << ','
        << detail::format_double(spec.kmax) << ',' << detail::format_double(spec.eps) << ','
        << detail::format_double(res.params.omega) << ',' << detail::format_double(res.rho) << ','
        << detail::format_double(res.surrogate) << '\n';
}

/// Training entry point shared by the CLI and tests. Homotopy runs continue
/// from the Poisson operator on the same grid toward the requested problem.
inline TrainReport run_train(const ExperimentSpec& spec) {
    spec.validate();
    const TridiagonalMatrix a = assemble(spec.problem_spec());
    TransferPair init = spec.ops.empty() ? linear_baseline(spec.n)
                                         : load_operators_csv(std::filesystem::path(spec.ops));
    if (init.fine_size() != spec.n) {
        throw ConfigError("operator file is for n=" + std::to_string(init.fine_size()) +
                          ", experiment has n=" + std::to_string(spec.n));
    }
    if (spec.homotopy) {
        HomotopyConfig hom{assemble_poisson(make_grid(spec.n)), a, spec.tau, spec.delta};
        return homotopy_train(hom, spec.two_grid_config(), std::move(init), spec.adam_config(),
                              spec.loss_config());
    }
    return train(a, spec.two_grid_config(), std::move(init), spec.adam_config(),
                 spec.loss_config());
}

inline void write_trace_csv(std::ostream& out, const ExperimentSpec& spec,
                            const TrainReport& report, const std::string& command) {
    write_spec_echo(out, spec, command);
    out << "# iterations=" << report.iterations << '\n';
    out << "# rejected_stages=" << report.rejected_stages << '\n';
    out << "# verified_rho=" << detail::format_double(report.verified_radius) << '\n';
    out << "iteration,loss,surrogate\n";
    for (std::size_t i = 0; i < report.loss_trace.size(); ++i) {
        out << i << ',' << detail::format_double(report.loss_trace[i]) << ','
            << detail::format_double(report.surrogate_trace[i]) << '\n';
    }
}

inline void write_stages_csv(std::ostream& out, const ExperimentSpec& spec,
                             const TrainReport& report) {
    write_spec_echo(out, spec, "train");
    out << "stage,alpha,surrogate,rho\n";
    for (std::size_t i = 0; i < report.stage_alphas.size(); ++i) {
        out << i << ',' << detail::format_double(report.stage_alphas[i]) << ','
            << detail::format_double(report.stage_surrogates[i]) << ','
            << detail::format_double(report.stage_radii[i]) << '\n';
    }
}

struct SweepPoint {
    double value = 0.0;
    double linear_rho = 0.0;
    double trained_rho = 0.0;
    double trained_surrogate = 0.0;
};

/// Parameter sweep. k sweeps walk a linear grid and warm-start each point
/// from the previous solution; eps sweeps walk a geometric grid and restart
/// from the linear baseline at every point. Point 0 runs under the master
/// seed (a single-point sweep is exactly a train run); later points derive
/// seeds from (master seed, point index), so results do not depend on
/// evaluation order beyond the warm-start chain itself.
inline std::vector<SweepPoint> run_sweep(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.axis.empty()) throw ConfigError("sweep needs an axis (k or eps)");
    const bool k_axis = spec.axis == "k";
    if (k_axis && spec.problem != "helmholtz") {
        throw ConfigError("k sweeps require problem=helmholtz");
    }
    if (!k_axis && spec.problem != "convdiff") {
        throw ConfigError("eps sweeps require problem=convdiff");
    }
    std::vector<double> values(spec.points);
    if (spec.points == 1) {
        values[0] = spec.from;
    } else if (k_axis) {
        for (int i = 0; i < spec.points; ++i) {
            values[i] = spec.from + (spec.to - spec.from) * i / (spec.points - 1);
        }
    } else {
        if (!(spec.from > 0.0 && spec.to > 0.0)) {
            throw ConfigError("eps sweeps need positive bounds");
        }
        const double ratio = std::pow(spec.to / spec.from, 1.0 / (spec.points - 1));
        values[0] = spec.from;
        for (int i = 1; i < spec.points; ++i) values[i] = values[i - 1] * ratio;
    }
    std::vector<SweepPoint> rows;
    rows.reserve(values.size());
    std::optional<TransferPair> warm;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ExperimentSpec pt = spec;
        pt.seed = i == 0 ? spec.seed : derive_seed(spec.seed, i);
        if (k_axis) {
            pt.k = values[i];
        } else {
            pt.eps = values[i];
        }
        const TridiagonalMatrix a = assemble(pt.problem_spec());
        const TwoGridConfig tg = pt.two_grid_config();
        TwoGridContext<TransferPair> base(a, linear_baseline(pt.n), tg);
        TransferPair init = (k_axis && warm) ? *warm : linear_baseline(pt.n);
        TrainReport rep =
            train(a, tg, std::move(init), pt.adam_config(), pt.loss_config());
        if (k_axis) warm = rep.params;
        rows.push_back(SweepPoint{values[i], spectral_radius(base), rep.verified_radius,
                                  rep.surrogate_trace.back()});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec,
                            const std::vector<SweepPoint>& rows) {
    write_spec_echo(out, spec, "sweep");
    out << "index," << (spec.axis == "k" ? "k" : "eps") << ",linear_rho,dmg_rho,dmg_surrogate\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << i << ',' << detail::format_double(rows[i].value) << ','
            << detail::format_double(rows[i].linear_rho) << ','
            << detail::format_double(rows[i].trained_rho) << ','
            << detail::format_double(rows[i].trained_surrogate) << '\n';
    }
}

struct CompareInitResult {
    TrainReport homotopy;
    TrainReport standard;
    int budget = 0;  // optimizer steps each run consumed
};

/// Homotopy-from-Poisson versus plain training from the linear baseline at
/// equal total iteration budget: the standard run gets exactly as many
/// optimizer steps as the homotopy run consumed across all its stages.
inline CompareInitResult run_compare_init(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.problem == "poisson") {
        throw ConfigError("compare-init needs a non-Poisson target problem");
    }
    const TridiagonalMatrix a = assemble(spec.problem_spec());
    const TwoGridConfig tg = spec.two_grid_config();
    if (spec.iterations == 0) {
        // Budget-zero degenerate case: both traces are the initial loss only.
        LossConfig lc{spec.power, spec.batch, derive_seed(spec.seed, 0)};
        TwoGridContext<TransferPair> ctx(a, linear_baseline(spec.n), tg);
        const double l0 = estimate_loss(ctx, lc);
        TrainReport base(linear_baseline(spec.n));
        base.loss_trace = {l0};
        base.surrogate_trace = {surrogate_from_loss(l0, spec.power)};
        base.verified_radius = spectral_radius(ctx);
        CompareInitResult res{base, base, 0};
        return res;
    }
    LossConfig hom_loss{spec.power, spec.batch, derive_seed(spec.seed, 0)};
    HomotopyConfig hom{assemble_poisson(make_grid(spec.n)), a, spec.tau, spec.delta};
    CompareInitResult res{
        homotopy_train(hom, tg, linear_baseline(spec.n), spec.adam_config(), hom_loss),
        TrainReport(linear_baseline(spec.n)), 0};
    res.budget = res.homotopy.iterations;
    AdamConfig std_adam = spec.adam_config();
    std_adam.iterations = res.budget;
    LossConfig std_loss{spec.power, spec.batch, derive_seed(spec.seed, 1)};
    res.standard = train(a, tg, linear_baseline(spec.n), std_adam, std_loss);
    return res;
}

inline void write_compare_csv(std::ostream& out, const ExperimentSpec& spec,
                              const CompareInitResult& res) {
    write_spec_echo(out, spec, "compare-init");
    out << "# budget=" << res.budget << '\n';
    out << "# homotopy_rho=" << detail::format_double(res.homotopy.verified_radius) << '\n';
    out << "# standard_rho=" << detail::format_double(res.standard.verified_radius) << '\n';
    out << "series,iteration,loss,surrogate\n";
    auto dump = [&](const char* name, const TrainReport& rep) {
        for (std::size_t i = 0; i < rep.loss_trace.size(); ++i) {
            out << name << ',' << i << ',' << detail::format_double(rep.loss_trace[i]) << ','
                << detail::format_double(rep.surrogate_trace[i]) << '\n';
        }
    };
    dump("homotopy", res.homotopy);
    dump("standard", res.standard);
}

}  // namespace dmg
