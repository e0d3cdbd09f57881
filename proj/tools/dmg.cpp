// Two-grid operator learning CLI: evaluate, train, sweep, compare
// initializations, and run the built-in acceptance checks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dmg/check.hpp"
#include "dmg/errors.hpp"
#include "dmg/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheckFailed = 4;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw dmg::ConfigError("cannot open '" + path + "' for writing");
    return out;
}

void attach_common(CLI::App* cmd, dmg::ExperimentSpec& spec, std::string& config_path) {
    cmd->add_option("--config", config_path, "flat key=value config file (flags override it)");
    cmd->add_option("--problem", spec.problem, "poisson | helmholtz | convdiff");
    cmd->add_option("--n", spec.n, "interior grid points (odd, >= 3)");
    cmd->add_option("--k", spec.k, "constant wavenumber (helmholtz)");
    cmd->add_option("--kmax", spec.kmax, "step-profile wavenumber; > 0 overrides --k");
    cmd->add_option("--eps", spec.eps, "diffusion coefficient (convdiff)");
    cmd->add_option("--s1", spec.s1, "pre-smoothing steps");
    cmd->add_option("--s2", spec.s2, "post-smoothing steps");
    cmd->add_option("--K", spec.power, "cycle applications per probe");
    cmd->add_option("--N", spec.batch, "probes per loss estimate");
    cmd->add_option("--T", spec.iterations, "optimizer iterations (per stage when homotopy)");
    cmd->add_option("--step", spec.step, "Adam step size");
    cmd->add_option("--tau", spec.tau, "homotopy acceptance threshold");
    cmd->add_option("--delta", spec.delta, "homotopy blend increment");
    cmd->add_option("--seed", spec.seed, "master seed");
    cmd->add_option("--out", spec.out, "output path stem for CSV files");
    cmd->add_option("--ops", spec.ops, "operator CSV (eval input / training initializer)");
}

// Flags override config-file values: load the file into a fresh spec, then
// re-apply every flag the user passed explicitly.
void merge_config(const CLI::App* cmd, dmg::ExperimentSpec& spec, const std::string& config_path) {
    if (config_path.empty()) return;
    const dmg::ExperimentSpec flag_values = spec;
    dmg::ExperimentSpec merged;
    dmg::load_config_file(merged, config_path);
    auto keep_flag = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (keep_flag("--problem")) merged.problem = flag_values.problem;
    if (keep_flag("--n")) merged.n = flag_values.n;
    if (keep_flag("--k")) merged.k = flag_values.k;
    if (keep_flag("--kmax")) merged.kmax = flag_values.kmax;
    if (keep_flag("--eps")) merged.eps = flag_values.eps;
    if (keep_flag("--s1")) merged.s1 = flag_values.s1;
    if (keep_flag("--s2")) merged.s2 = flag_values.s2;
    if (keep_flag("--K")) merged.power = flag_values.power;
    if (keep_flag("--N")) merged.batch = flag_values.batch;
    if (keep_flag("--T")) merged.iterations = flag_values.iterations;
    if (keep_flag("--step")) merged.step = flag_values.step;
    if (keep_flag("--tau")) merged.tau = flag_values.tau;
    if (keep_flag("--delta")) merged.delta = flag_values.delta;
    if (keep_flag("--seed")) merged.seed = flag_values.seed;
    if (keep_flag("--out")) merged.out = flag_values.out;
    if (keep_flag("--ops")) merged.ops = flag_values.ops;
    if (cmd->get_option_no_throw("--homotopy") && keep_flag("--homotopy")) {
        merged.homotopy = flag_values.homotopy;
    }
    if (cmd->get_option_no_throw("--axis")) {
        if (keep_flag("--axis")) merged.axis = flag_values.axis;
        if (keep_flag("--from")) merged.from = flag_values.from;
        if (keep_flag("--to")) merged.to = flag_values.to;
        if (keep_flag("--points")) merged.points = flag_values.points;
    }
    spec = merged;
}

std::string fmt(double v) { return dmg::detail::format_double(v); }

int cmd_eval(const dmg::ExperimentSpec& spec) {
    const dmg::EvalResult res = dmg::run_eval(spec);
    if (!spec.out.empty()) {
        auto out = open_out(spec.out);
        dmg::write_eval_csv(out, spec, res);
    }
    std::cout << "eval problem=" << spec.problem << " n=" << spec.n << " rho=" << fmt(res.rho)
              << " surrogate=" << fmt(res.surrogate) << '\n';
    return kExitOk;
}

int cmd_train(const dmg::ExperimentSpec& spec) {
    const dmg::TrainReport report = dmg::run_train(spec);
    if (!spec.out.empty()) {
        auto trace = open_out(spec.out + "_trace.csv");
        dmg::write_trace_csv(trace, spec, report, "train");
        auto ops = open_out(spec.out + "_ops.csv");
        dmg::write_spec_echo(ops, spec, "train");
        dmg::save_operators_csv(report.params, ops);
        if (spec.homotopy) {
            auto stages = open_out(spec.out + "_stages.csv");
            dmg::write_stages_csv(stages, spec, report);
        }
    }
    std::cout << "train problem=" << spec.problem << " n=" << spec.n
              << " iterations=" << report.iterations << " final_loss="
              << fmt(report.loss_trace.back()) << " surrogate="
              << fmt(report.surrogate_trace.back()) << " verified_rho="
              << fmt(report.verified_radius);
    if (spec.homotopy) {
        std::cout << " stages=" << report.stage_alphas.size()
                  << " rejected=" << report.rejected_stages;
    }
    std::cout << '\n';
    return kExitOk;
}

int cmd_sweep(const dmg::ExperimentSpec& spec) {
    const auto rows = dmg::run_sweep(spec);
    if (!spec.out.empty()) {
        auto out = open_out(spec.out);
        dmg::write_sweep_csv(out, spec, rows);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::cout << "sweep " << spec.axis << "=" << fmt(rows[i].value)
                  << " linear_rho=" << fmt(rows[i].linear_rho)
                  << " dmg_rho=" << fmt(rows[i].trained_rho) << '\n';
    }
    return kExitOk;
}

int cmd_compare_init(const dmg::ExperimentSpec& spec) {
    const dmg::CompareInitResult res = dmg::run_compare_init(spec);
    if (!spec.out.empty()) {
        auto out = open_out(spec.out);
        dmg::write_compare_csv(out, spec, res);
    }
    std::cout << "compare-init problem=" << spec.problem << " n=" << spec.n
              << " budget=" << res.budget
              << " homotopy_rho=" << fmt(res.homotopy.verified_radius)
              << " standard_rho=" << fmt(res.standard.verified_radius) << '\n';
    return kExitOk;
}

int cmd_check() {
    bool all_pass = true;
    dmg::run_acceptance_checks([&](const dmg::CheckResult& r) {
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "PASS" : "FAIL") << ' ' << r.name << " [" << std::fixed
                  << std::setprecision(1) << r.seconds << "s] " << r.detail << '\n'
                  << std::defaultfloat;
        std::cout.flush();
    });
    return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned two-grid solvers: spectral evaluation and operator training"};
    app.require_subcommand(0, 1);
    bool top_check = false;
    app.add_flag("--check", top_check, "run the acceptance suite (same as the check subcommand)");

    dmg::ExperimentSpec spec;
    std::string config_path;

    CLI::App* eval = app.add_subcommand("eval", "spectral radius of a fixed configuration");
    attach_common(eval, spec, config_path);

    CLI::App* train = app.add_subcommand("train", "learn transfer operators and damping");
    attach_common(train, spec, config_path);
    train->add_flag("--homotopy", spec.homotopy,
                    "continue from the Poisson operator on the same grid");

    CLI::App* sweep = app.add_subcommand("sweep", "train across a parameter range");
    attach_common(sweep, spec, config_path);
    sweep->add_option("--axis", spec.axis, "k (warm-started) or eps (independent points)");
    sweep->add_option("--from", spec.from, "range start");
    sweep->add_option("--to", spec.to, "range end");
    sweep->add_option("--points", spec.points, "number of sweep points");

    CLI::App* compare =
        app.add_subcommand("compare-init", "homotopy vs standard init at equal budget");
    attach_common(compare, spec, config_path);

    CLI::App* check = app.add_subcommand("check", "run the built-in acceptance suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        for (CLI::App* cmd : {eval, train, sweep, compare}) {
            if (cmd->parsed()) merge_config(cmd, spec, config_path);
        }
        if (eval->parsed()) return cmd_eval(spec);
        if (train->parsed()) return cmd_train(spec);
        if (sweep->parsed()) return cmd_sweep(spec);
        if (compare->parsed()) return cmd_compare_init(spec);
        if (check->parsed() || top_check) return cmd_check();
        std::cout << app.help();
        return kExitOk;
    } catch (const dmg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const dmg::DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const dmg::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
