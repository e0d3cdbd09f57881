#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dmg/errors.hpp"
#include "dmg/experiment.hpp"
#include "dmg/grid.hpp"
#include "dmg/problems.hpp"
#include "dmg/spectral.hpp"
#include "dmg/train.hpp"
#include "dmg/transfer.hpp"
#include "dmg/twogrid.hpp"

namespace {

using namespace dmg;
namespace fs = std::filesystem;

/// Temp file that removes itself when the test ends.
class TempFile {
public:
    explicit TempFile(const std::string& name) : path_(fs::temp_directory_path() / name) {}
    ~TempFile() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    const fs::path& path() const { return path_; }
    void write(const std::string& text) const {
        std::ofstream out(path_);
        out << text;
    }

private:
    fs::path path_;
};

TEST(Spec, DefaultsValidateAndBadValuesThrow) {
    ExperimentSpec spec;
    EXPECT_NO_THROW(spec.validate());

    auto expect_invalid = [](auto&& mutate) {
        ExperimentSpec s;
        mutate(s);
        EXPECT_THROW(s.validate(), ConfigError);
    };
    expect_invalid([](ExperimentSpec& s) { s.problem = "heat"; });
    expect_invalid([](ExperimentSpec& s) { s.n = 8; });
    expect_invalid([](ExperimentSpec& s) { s.n = 1; });
    expect_invalid([](ExperimentSpec& s) { s.k = -1.0; });
    expect_invalid([](ExperimentSpec& s) { s.eps = 0.0; });
    expect_invalid([](ExperimentSpec& s) { s.s1 = -1; });
    expect_invalid([](ExperimentSpec& s) { s.power = 0; });
    expect_invalid([](ExperimentSpec& s) { s.batch = 0; });
    expect_invalid([](ExperimentSpec& s) { s.iterations = -1; });
    expect_invalid([](ExperimentSpec& s) { s.step = 0.0; });
    expect_invalid([](ExperimentSpec& s) { s.tau = 1.0; });
    expect_invalid([](ExperimentSpec& s) { s.delta = 1.5; });
    expect_invalid([](ExperimentSpec& s) { s.axis = "omega"; });
    expect_invalid([](ExperimentSpec& s) { s.points = 0; });
}

TEST(Spec, SetParsesEveryKeyAndRejectsUnknown) {
    ExperimentSpec spec;
    spec.set("problem", "helmholtz");
    spec.set("n", "63");
    spec.set("k", "12.5");
    spec.set("seed", "42");
    spec.set("homotopy", "true");
    spec.set("T", "77");
    spec.set("K", "6");
    spec.set("N", "3");
    EXPECT_EQ(spec.problem, "helmholtz");
    EXPECT_EQ(spec.n, 63);
    EXPECT_DOUBLE_EQ(spec.k, 12.5);
    EXPECT_EQ(spec.seed, 42u);
    EXPECT_TRUE(spec.homotopy);
    EXPECT_EQ(spec.iterations, 77);
    EXPECT_EQ(spec.power, 6);
    EXPECT_EQ(spec.batch, 3);

    try {
        spec.set("granularity", "fine");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("granularity"), std::string::npos);
    }
    EXPECT_THROW(spec.set("n", "sixty"), ConfigError);
    EXPECT_THROW(spec.set("step", "fast"), ConfigError);
    EXPECT_THROW(spec.set("homotopy", "maybe"), ConfigError);
    EXPECT_THROW(spec.set("seed", "-1"), ConfigError);
}

TEST(Spec, ItemsRoundTripThroughSet) {
    ExperimentSpec original;
    original.problem = "convdiff";
    original.n = 63;
    original.eps = 0.03125;
    original.seed = 1234;
    original.axis = "eps";
    original.from = 0.015625;
    original.to = 0.1;
    original.points = 5;
    original.homotopy = true;

    ExperimentSpec rebuilt;
    for (const auto& [key, value] : original.items()) rebuilt.set(key, value);
    EXPECT_EQ(rebuilt.items(), original.items());
}

TEST(ConfigFile, ParsesCommentsAndSpacing) {
    const TempFile file("dmg_test_config.txt");
    file.write(
        "# experiment description\n"
        "\n"
        "problem = helmholtz\n"
        "  n=63\t\n"
        "k = 12.5   # inline comment\n"
        "seed=42\n"
        "homotopy = true\n");
    ExperimentSpec spec;
    load_config_file(spec, file.path());
    EXPECT_EQ(spec.problem, "helmholtz");
    EXPECT_EQ(spec.n, 63);
    EXPECT_DOUBLE_EQ(spec.k, 12.5);
    EXPECT_EQ(spec.seed, 42u);
    EXPECT_TRUE(spec.homotopy);
}

TEST(ConfigFile, ErrorsNameTheLine) {
    const TempFile file("dmg_test_config_bad.txt");
    file.write("problem = poisson\nthis line has no assignment\n");
    ExperimentSpec spec;
    try {
        load_config_file(spec, file.path());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }

    file.write("n = 31\nseed = 7\nwavelength = 3\n");
    try {
        load_config_file(spec, file.path());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 3"), std::string::npos);
        EXPECT_NE(msg.find("wavelength"), std::string::npos);
    }

    EXPECT_THROW(load_config_file(spec, fs::path("/nonexistent/dmg.cfg")), ConfigError);
}

TEST(Eval, PoissonBaselineContractionRate) {
    ExperimentSpec spec;
    spec.n = 63;
    const EvalResult res = run_eval(spec);
    EXPECT_NEAR(res.rho, 0.061728, 1e-5);
    EXPECT_GT(res.surrogate, 0.0);
    EXPECT_LT(res.surrogate, 0.55);
    EXPECT_DOUBLE_EQ(res.params.omega, 2.0 / 3.0);
}

TEST(Eval, HelmholtzReferenceRate) {
    ExperimentSpec spec;
    spec.problem = "helmholtz";
    spec.n = 23;
    spec.k = 20.0;
    const EvalResult res = run_eval(spec);
    EXPECT_NEAR(res.rho, 3.388036, 1e-3);
}

TEST(Eval, ConvectionDiffusionGridPrecondition) {
    ExperimentSpec spec;
    spec.problem = "convdiff";
    spec.n = 63;
    spec.eps = 1.0 / 64.0;  // equals h: violates h < eps
    EXPECT_THROW(run_eval(spec), ConfigError);
    spec.eps = 0.1;
    EXPECT_NO_THROW(run_eval(spec));
}

TEST(Eval, TrainedOperatorFileReproducesRadius) {
    ExperimentSpec spec;
    spec.n = 15;
    spec.iterations = 40;
    spec.step = 1e-3;
    spec.seed = 11;
    const TrainReport report = run_train(spec);
    ASSERT_TRUE(std::isfinite(report.verified_radius));

    const TempFile ops("dmg_test_trained_ops.csv");
    {
        std::ofstream out(ops.path());
        write_spec_echo(out, spec, "train");
        save_operators_csv(report.params, out);
    }
    ExperimentSpec eval_spec;
    eval_spec.n = 15;
    eval_spec.ops = ops.path().string();
    const EvalResult res = run_eval(eval_spec);
    EXPECT_NEAR(res.rho, report.verified_radius, 1e-10);

    eval_spec.n = 31;  // operator file disagrees with the grid
    EXPECT_THROW(run_eval(eval_spec), ConfigError);
}

TEST(Train, RepeatedSeedProducesByteIdenticalOutputs) {
    ExperimentSpec spec;
    spec.n = 15;
    spec.iterations = 30;
    spec.power = 5;
    spec.batch = 4;
    spec.seed = 21;
    const TrainReport r1 = run_train(spec);
    const TrainReport r2 = run_train(spec);

    std::ostringstream t1, t2, o1, o2;
    write_trace_csv(t1, spec, r1, "train");
    write_trace_csv(t2, spec, r2, "train");
    EXPECT_EQ(t1.str(), t2.str());
    save_operators_csv(r1.params, o1);
    save_operators_csv(r2.params, o2);
    EXPECT_EQ(o1.str(), o2.str());
}

TEST(Csv, OutputsEmbedFullSpecEcho) {
    ExperimentSpec spec;
    spec.problem = "helmholtz";
    spec.n = 13;
    spec.k = 10.0;
    spec.seed = 7;
    const EvalResult res = run_eval(spec);
    std::ostringstream out;
    write_eval_csv(out, spec, res);
    const std::string text = out.str();
    EXPECT_NE(text.find("# command=eval\n"), std::string::npos);
    EXPECT_NE(text.find("# problem=helmholtz\n"), std::string::npos);
    EXPECT_NE(text.find("# n=13\n"), std::string::npos);
    EXPECT_NE(text.find("# seed=7\n"), std::string::npos);
    EXPECT_NE(text.find("# K=10\n"), std::string::npos);
    EXPECT_NE(text.find("problem,n,k,kmax,eps,omega,rho,surrogate\n"), std::string::npos);

    ExperimentSpec tspec;
    tspec.n = 15;
    tspec.iterations = 0;
    std::ostringstream trace;
    write_trace_csv(trace, tspec, run_train(tspec), "train");
    EXPECT_NE(trace.str().find("# command=train\n"), std::string::npos);
    EXPECT_NE(trace.str().find("# verified_rho="), std::string::npos);
    EXPECT_NE(trace.str().find("iteration,loss,surrogate\n"), std::string::npos);
}

TEST(Sweep, SinglePointEqualsPlainTraining) {
    ExperimentSpec sweep_spec;
    sweep_spec.problem = "helmholtz";
    sweep_spec.n = 15;
    sweep_spec.axis = "k";
    sweep_spec.from = 1.0;
    sweep_spec.to = 1.0;
    sweep_spec.points = 1;
    sweep_spec.iterations = 20;
    sweep_spec.power = 5;
    sweep_spec.batch = 4;
    sweep_spec.step = 1e-3;
    sweep_spec.seed = 3;
    const std::vector<SweepPoint> rows = run_sweep(sweep_spec);
    ASSERT_EQ(rows.size(), 1u);

    ExperimentSpec train_spec = sweep_spec;
    train_spec.axis.clear();
    train_spec.k = 1.0;
    const TrainReport report = run_train(train_spec);
    EXPECT_EQ(rows[0].value, 1.0);
    EXPECT_EQ(rows[0].trained_rho, report.verified_radius);
    EXPECT_EQ(rows[0].trained_surrogate, report.surrogate_trace.back());

    const TwoGridContext base(
        assemble_helmholtz(make_grid(15), KProfile::constant(1.0)), linear_baseline(15));
    EXPECT_EQ(rows[0].linear_rho, spectral_radius(base));
}

TEST(Sweep, LowFrequencyBandStaysContracting) {
    ExperimentSpec spec;
    spec.problem = "helmholtz";
    spec.n = 225;
    spec.axis = "k";
    spec.from = 1.0;
    spec.to = 16.0;
    spec.points = 4;  // k = 1, 6, 11, 16
    spec.iterations = 200;
    spec.seed = 0;
    const std::vector<SweepPoint> rows = run_sweep(spec);
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_NEAR(rows[i].value, 1.0 + 5.0 * static_cast<double>(i), 1e-12);
        EXPECT_LT(rows[i].trained_rho, 0.15) << "k=" << rows[i].value;
    }
}

TEST(Sweep, GeometricEpsGridAndValidation) {
    ExperimentSpec spec;
    spec.problem = "convdiff";
    spec.n = 31;
    spec.axis = "eps";
    spec.from = 0.04;
    spec.to = 0.16;
    spec.points = 3;
    spec.iterations = 5;
    spec.power = 5;
    spec.batch = 2;
    const std::vector<SweepPoint> rows = run_sweep(spec);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_NEAR(rows[0].value, 0.04, 1e-12);
    EXPECT_NEAR(rows[1].value, 0.08, 1e-12);
    EXPECT_NEAR(rows[2].value, 0.16, 1e-12);
    for (const auto& row : rows) {
        EXPECT_GT(row.linear_rho, 0.0);
        EXPECT_GT(row.trained_rho, 0.0);
    }

    ExperimentSpec bad = spec;
    bad.axis.clear();
    EXPECT_THROW(run_sweep(bad), ConfigError);
    bad = spec;
    bad.problem = "helmholtz";
    EXPECT_THROW(run_sweep(bad), ConfigError);
    bad = spec;
    bad.axis = "k";
    EXPECT_THROW(run_sweep(bad), ConfigError);
    bad = spec;
    bad.from = 0.0;
    EXPECT_THROW(run_sweep(bad), ConfigError);
}

TEST(CompareInit, ZeroBudgetYieldsSingleInitialPoints) {
    ExperimentSpec spec;
    spec.problem = "helmholtz";
    spec.n = 13;
    spec.k = 10.0;
    spec.iterations = 0;
    const CompareInitResult res = run_compare_init(spec);
    EXPECT_EQ(res.budget, 0);
    ASSERT_EQ(res.homotopy.loss_trace.size(), 1u);
    ASSERT_EQ(res.standard.loss_trace.size(), 1u);
    EXPECT_EQ(res.homotopy.loss_trace[0], res.standard.loss_trace[0]);
    EXPECT_EQ(res.homotopy.verified_radius, res.standard.verified_radius);

    std::ostringstream out;
    write_compare_csv(out, spec, res);
    EXPECT_NE(out.str().find("# budget=0\n"), std::string::npos);
    EXPECT_NE(out.str().find("series,iteration,loss,surrogate\n"), std::string::npos);
    EXPECT_NE(out.str().find("homotopy,0,"), std::string::npos);
    EXPECT_NE(out.str().find("standard,0,"), std::string::npos);
}

TEST(CompareInit, RequiresNonPoissonTarget) {
    ExperimentSpec spec;
    spec.problem = "poisson";
    EXPECT_THROW(run_compare_init(spec), ConfigError);
}

TEST(CompareInit, SmallWavenumberBothConvergeWell) {
    // k = 5 at seven points per wavelength.
    ExperimentSpec spec;
    spec.problem = "helmholtz";
    spec.n = 5;
    spec.k = 5.0;
    spec.iterations = 200;
    spec.step = 1e-3;
    spec.seed = 1;
    const CompareInitResult res = run_compare_init(spec);
    EXPECT_GT(res.budget, 0);
    EXPECT_EQ(res.standard.iterations, res.budget);
    EXPECT_EQ(res.homotopy.iterations, res.budget);
    EXPECT_LT(res.homotopy.verified_radius, 0.2);
    EXPECT_LT(res.standard.verified_radius, 0.2);
    EXPECT_FALSE(res.homotopy.loss_trace.empty());
    EXPECT_FALSE(res.standard.loss_trace.empty());
}

}  // namespace
