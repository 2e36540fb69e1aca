#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "beamlqr/cli.hpp"

namespace {

using namespace beamlqr;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("beamlqr_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_rows(const std::string& csv_text) {
  int rows = 0;
  for (char c : csv_text) rows += c == '\n';
  return rows - 1;
}

// --- config ----------------------------------------------------------------

TEST(Config, DefaultsMatchDocumentedValues) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.beam.alpha, 0.0);
  EXPECT_EQ(c.beam.beta, 1.0);
  EXPECT_EQ(c.beam.R, 1.0);
  EXPECT_EQ(c.weights.q, 1.0);
  EXPECT_EQ(c.weights.r, 9.0);
  EXPECT_EQ(c.weights.N, 32);
  EXPECT_EQ(c.grid.points, 257);
  EXPECT_EQ(c.sim.c_mode, 0.25);
}

TEST(Config, ParsesEverySection) {
  const RunConfig c = parse_config(
      "# comment\n"
      "beam.alpha = 0.5\n"
      "\n"
      "weights.mask=2, 5\n"
      "weights.base=1,0.25,0.5\n"
      "sim.mode=coupled\n"
      "sim.input=physical\n"
      "sim.sign=derivative\n"
      "sim.initial_displacement=single_mode:3\n"
      "output.format=long\n"
      "verify.fit_hi=30\n");
  EXPECT_EQ(c.beam.alpha, 0.5);
  EXPECT_EQ(c.weights.mask, (std::set<int>{2, 5}));
  EXPECT_EQ(c.weights.base.q12, 0.25);
  EXPECT_EQ(c.sim.mode, SimMode::coupled);
  EXPECT_EQ(c.sim.input, InputConvention::physical);
  EXPECT_EQ(c.sim.sign, SignConvention::derivative);
  EXPECT_EQ(c.sim.initial_displacement, "single_mode:3");
  EXPECT_EQ(c.output.format, TrajectoryFormat::long_format);
  EXPECT_EQ(c.verify.fit_hi, 30);
}

TEST(Config, RoundTripIsExact) {
  RunConfig c;
  c.beam.alpha = 0.1;  // not exactly representable
  c.beam.R = 1.0 / 3.0;
  c.weights.q = 2.0 / 7.0;
  c.weights.mask = {1, 4};
  c.weights.base = {0.9, -0.1, 0.3};
  c.sim.dt = 1e-3 / 3.0;
  c.sim.mode = SimMode::open_loop;
  const std::string text = serialize(c);
  const RunConfig d = parse_config(text);
  EXPECT_EQ(serialize(d), text);
  EXPECT_EQ(d.beam.alpha, c.beam.alpha);
  EXPECT_EQ(d.beam.R, c.beam.R);
  EXPECT_EQ(d.sim.dt, c.sim.dt);
  EXPECT_EQ(d.weights.mask, c.weights.mask);
}

class BadConfig : public ::testing::TestWithParam<const char*> {};

TEST_P(BadConfig, IsRejected) {
  EXPECT_THROW(parse_config(GetParam()), ConfigError) << GetParam();
}

INSTANTIATE_TEST_SUITE_P(
    Cases, BadConfig,
    ::testing::Values("beam.gamma=1\n", "beam.alpha\n", "beam.alpha=abc\n",
                      "beam.alpha=1\nbeam.alpha=2\n", "beam.alpha=-1\n",
                      "beam.R=0\n", "beam.beta=nan\n", "weights.N=0\n",
                      "weights.N=4\nweights.mask=5\n", "weights.mask=2,2\n",
                      "weights.base=1,0\n", "weights.base=1,2,1\n",
                      "weights.base=2,0,1\n", "sim.mode=fast\n",
                      "sim.dt=0\n", "sim.stride=0\n",
                      "sim.quadrature_intervals=10\n",
                      "sim.initial_velocity=wave\n", "output.format=tall\n",
                      "verify.fit_lo=9\nverify.fit_hi=9\n", "weights.N=1.5\n"));

// --- commands --------------------------------------------------------------

TEST(Synthesize, DefaultConfigGivesThirtyTwoCleanRows) {
  const cli::FileSet f = cli::cmd_synthesize(RunConfig{});
  const std::string& modes = f.at("modes.csv");
  EXPECT_EQ(count_rows(modes), 32);
  EXPECT_EQ(modes.substr(0, modes.find('\n')),
            "n,p11,p12,p22,k1,k2,res11,res12,res22,mu_re,mu_im");
  for (const ModeSolution& s : cli::synthesize(RunConfig{})) {
    EXPECT_LT(s.riccati.residuals.max_relative(), 1e-9);
  }
  EXPECT_EQ(count_rows(f.at("kernel_P.csv")), 257 * 257);
  EXPECT_EQ(count_rows(f.at("kernel_K.csv")), 257);
}

TEST(Synthesize, ZeroAmplitudeGivesZeroTable) {
  RunConfig c;
  c.weights.q = 0.0;
  c.weights.N = 4;
  const std::string modes = cli::cmd_synthesize(c).at("modes.csv");
  EXPECT_NE(modes.find("\n1,0,0,0,0,0,0,0,0,0,"), std::string::npos);
  EXPECT_NE(modes.find("\n4,0,0,0,0,0,0,0,0,0,"), std::string::npos);
}

TEST(Synthesize, MaskLeavesOneNonzeroRow) {
  RunConfig c;
  c.weights.N = 5;
  c.weights.mask = {2};
  const auto sols = cli::synthesize(c);
  int nonzero = 0;
  for (const ModeSolution& s : sols) nonzero += !s.riccati.is_zero();
  EXPECT_EQ(nonzero, 1);
  EXPECT_FALSE(sols[1].riccati.is_zero());
}

TEST(Spectrum, UnweightedUndampedKeepsOpenLoopColumns) {
  RunConfig c;
  c.weights.q = 0.0;
  c.weights.N = 6;
  const auto sols = cli::synthesize(c);
  for (const ModeSolution& s : sols) {
    const EigenPair ol = open_loop_eigenvalues(s.n, 0.0);
    const EigenPair cl = closed_loop_eigenvalues(s.n, c.beam, s.riccati);
    EXPECT_EQ(ol.plus, cl.plus);
    EXPECT_EQ(ol.minus, cl.minus);
  }
  EXPECT_EQ(count_rows(cli::cmd_spectrum(c).at("spectrum.csv")), 6);
}

TEST(Spectrum, CriticalDampingGivesDoubleRoot) {
  const EigenPair e =
      open_loop_eigenvalues(ModeIndex(1), 2.0 * kPi * kPi);
  EXPECT_NEAR(e.plus.real(), -kPi * kPi, 1e-12);
  EXPECT_NEAR(e.minus.real(), -kPi * kPi, 1e-12);
  EXPECT_EQ(e.plus.imag(), 0.0);
}

TEST(Simulate, ZeroInitialDataStaysZero) {
  RunConfig c;
  c.weights.N = 4;
  c.sim.initial_displacement = "zero";
  c.sim.T = 0.1;
  const std::string tr = cli::cmd_simulate(c).at("trajectory.csv");
  std::istringstream in(tr);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const std::string after_t = line.substr(line.find(',') + 1);
    for (char ch : after_t) {
      EXPECT_TRUE(ch == '0' || ch == ',') << line;
    }
  }
}

TEST(Simulate, DecoupledLyapunovColumnDecreases) {
  RunConfig c;
  c.weights.N = 8;
  c.sim.T = 1.0;
  const std::string e = cli::cmd_simulate(c).at("energy.csv");
  std::istringstream in(e);
  std::string line;
  std::getline(in, line);
  double prev = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(in, line)) {
    const double v = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_LT(v, prev);
    prev = v;
    ++rows;
  }
  EXPECT_EQ(rows, 101);
}

TEST(Simulate, OpenLoopConservesEnergyColumn) {
  RunConfig c;
  c.weights.N = 6;
  c.sim.mode = SimMode::open_loop;
  c.sim.initial_velocity = "single_mode:2";
  const std::string e = cli::cmd_simulate(c).at("energy.csv");
  std::istringstream in(e);
  std::string line;
  std::getline(in, line);
  std::optional<double> e0;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    const double v = std::stod(line.substr(a + 1, b - a - 1));
    if (!e0) e0 = v;
    EXPECT_NEAR(v, *e0, 1e-9 * *e0);
  }
}

TEST(Simulate, EchoedConfigReparsesToSameConfig) {
  RunConfig c;
  c.weights.N = 5;
  c.beam.alpha = 0.3;
  c.sim.mode = SimMode::coupled;
  c.sim.T = 0.2;
  const std::string echo = cli::cmd_simulate(c).at("run_config.txt");
  EXPECT_EQ(serialize(parse_config(echo)), serialize(c));
}

TEST(Simulate, CoupledModeWritesAllFiles) {
  RunConfig c;
  c.weights.N = 4;
  c.sim.mode = SimMode::coupled;
  c.sim.input = InputConvention::physical;
  c.sim.T = 0.2;
  c.output.format = TrajectoryFormat::long_format;
  const cli::FileSet f = cli::cmd_simulate(c);
  EXPECT_EQ(f.size(), 4u);
  EXPECT_EQ(f.at("trajectory.csv").substr(0, 21), "t,u,mode,a_pos,a_vel\n");
  EXPECT_EQ(f.at("field.csv").substr(0, 26), "t,x,displacement,velocity\n");
}

TEST(Verify, DefaultConfigPasses) {
  const cli::VerifyResult r = cli::cmd_verify(RunConfig{});
  EXPECT_TRUE(r.passed) << r.files.at("verify.txt");
  EXPECT_EQ(r.files.at("verify.txt").find("FAIL"), std::string::npos);
}

TEST(Verify, SlowDecayMarksCostSeriesDivergentButPasses) {
  RunConfig c;
  c.weights.r = 1.5;
  const cli::VerifyResult r = cli::cmd_verify(c);
  const std::string& text = r.files.at("verify.txt");
  EXPECT_TRUE(r.passed) << text;
  EXPECT_NE(text.find("p11_converges=false"), std::string::npos);
  EXPECT_NE(text.find("gain_converges=true"), std::string::npos);
}

TEST(Verify, ViolatedToleranceFailsRun) {
  RunConfig c;
  c.weights.N = 8;
  c.verify.cost_tol = 1e-300;
  c.verify.residual_tol = 1e-300;
  const cli::VerifyResult r = cli::cmd_verify(c);
  EXPECT_FALSE(r.passed);
  EXPECT_NE(r.files.at("verify.txt").find("FAIL riccati_residuals"),
            std::string::npos);
}

TEST(Verify, ReportIsDeterministic) {
  RunConfig c;
  c.weights.N = 12;
  EXPECT_EQ(cli::cmd_verify(c).files.at("verify.txt"),
            cli::cmd_verify(c).files.at("verify.txt"));
}

// --- end-to-end run() --------------------------------------------------------

TEST(Run, CorruptedConfigExitsTwoWithoutOutput) {
  const fs::path dir = scratch("corrupt");
  fs::create_directories(dir);
  const fs::path cfg = dir / "bad.cfg";
  std::ofstream(cfg) << "beam.alpha=0\nweights.q=\n";
  const fs::path out = dir / "out";
  cli::Options o{"verify", cfg.string(), out.string(), {}, {}};
  std::ostringstream so, se;
  EXPECT_EQ(cli::run(o, so, se), cli::kConfigError);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(se.str().find("weights.q"), std::string::npos);
}

TEST(Run, MissingConfigFileIsConfigError) {
  cli::Options o{"synthesize", "/nonexistent/beam.cfg", "/tmp/unused", {}, {}};
  std::ostringstream so, se;
  EXPECT_EQ(cli::run(o, so, se), cli::kConfigError);
}

TEST(Run, ModesOverrideIsValidated) {
  const fs::path dir = scratch("modes");
  fs::create_directories(dir);
  const fs::path cfg = dir / "mask.cfg";
  std::ofstream(cfg) << "weights.mask=10\n";
  cli::Options o{"synthesize", cfg.string(), (dir / "out").string(), 4, {}};
  std::ostringstream so, se;
  EXPECT_EQ(cli::run(o, so, se), cli::kConfigError);
  o.modes = 12;
  EXPECT_EQ(cli::run(o, so, se), cli::kSuccess);
  EXPECT_EQ(count_rows(slurp(dir / "out" / "modes.csv")), 12);
}

TEST(Run, NumericFailureExitsThree) {
  const fs::path dir = scratch("numeric");
  fs::create_directories(dir);
  const fs::path cfg = dir / "long.cfg";
  std::ofstream(cfg) << "sim.T=1e12\nsim.dt=1e-3\n";
  cli::Options o{"simulate", cfg.string(), (dir / "out").string(), {}, {}};
  std::ostringstream so, se;
  EXPECT_EQ(cli::run(o, so, se), cli::kNumericError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Run, RepeatedRunsAreByteIdentical) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const char* cmd : {"synthesize", "spectrum", "simulate", "verify"}) {
    std::ostringstream so, se;
    cli::Options oa{cmd, {}, a.string(), 10, "long"};
    cli::Options ob{cmd, {}, b.string(), 10, "long"};
    ASSERT_EQ(cli::run(oa, so, se), cli::kSuccess) << cmd << se.str();
    ASSERT_EQ(cli::run(ob, so, se), cli::kSuccess) << cmd << se.str();
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    // The echoed config names its own output directory.
    if (entry.path().filename() == "run_config.txt") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename()))
        << entry.path();
  }
  EXPECT_EQ(files, 9);
}

}  // namespace
