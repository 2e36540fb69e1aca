#pragma once

// Command implementations behind the `beamlqr` executable. Each command
// builds all of its output in memory first, so a failing run writes nothing.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "beamlqr/beam_sim.hpp"
#include "beamlqr/config.hpp"
#include "beamlqr/csv.hpp"
#include "beamlqr/errors.hpp"
#include "beamlqr/kernel_assembly.hpp"
#include "beamlqr/modal_riccati.hpp"

namespace beamlqr::cli {

/// Output file name -> contents.
using FileSet = std::map<std::string, std::string>;

enum ExitCode : int {
  kSuccess = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kNumericError = 3,
};

inline std::vector<ModeSolution> synthesize(const RunConfig& cfg) {
  return solve_profile(cfg.weights, cfg.beam);
}

inline ModalState initial_state(const RunConfig& cfg) {
  const InitialShape f1 = InitialShape::parse(cfg.sim.initial_displacement);
  const InitialShape f2 = InitialShape::parse(cfg.sim.initial_velocity);
  return project_initial(
      InitialData::from_functions(f1, f2, cfg.sim.quadrature_intervals),
      cfg.weights.N);
}

inline FileSet cmd_synthesize(const RunConfig& cfg) {
  const auto sols = synthesize(cfg);
  csv::Writer modes({"n", "p11", "p12", "p22", "k1", "k2", "res11", "res12",
                     "res22", "mu_re", "mu_im"});
  for (const ModeSolution& s : sols) {
    const RiccatiResiduals& r = s.riccati.residuals;
    const EigenPair mu = closed_loop_eigenvalues(s.n, cfg.beam, s.riccati);
    modes.field(s.n.value())
        .field(s.riccati.p11)
        .field(s.riccati.p12)
        .field(s.riccati.p22)
        .field(s.gain.k1)
        .field(s.gain.k2)
        .field(r.eq11)
        .field(r.eq12)
        .field(r.eq22)
        .field(mu.plus.real())
        .field(mu.plus.imag());
    modes.end_row();
  }
  const std::vector<double> grid = uniform_grid(cfg.grid.points);
  const auto rows = gain_rows(sols);
  return {
      {"modes.csv", modes.str()},
      {"kernel_P.csv", kernel_csv(assemble_kernel(value_kernel(sols), grid))},
      {"kernel_K.csv",
       feedback_csv(assemble_feedback_kernel(rows, grid, cfg.sim.sign))},
  };
}

inline FileSet cmd_spectrum(const RunConfig& cfg) {
  const auto sols = synthesize(cfg);
  csv::Writer w({"n", "open_plus_re", "open_plus_im", "open_minus_re",
                 "open_minus_im", "closed_plus_re", "closed_plus_im",
                 "closed_minus_re", "closed_minus_im"});
  for (const ModeSolution& s : sols) {
    const EigenPair ol = open_loop_eigenvalues(s.n, cfg.beam.alpha);
    const EigenPair cl = closed_loop_eigenvalues(s.n, cfg.beam, s.riccati);
    w.field(s.n.value())
        .field(ol.plus.real())
        .field(ol.plus.imag())
        .field(ol.minus.real())
        .field(ol.minus.imag())
        .field(cl.plus.real())
        .field(cl.plus.imag())
        .field(cl.minus.real())
        .field(cl.minus.imag());
    w.end_row();
  }
  return {{"spectrum.csv", w.str()}};
}

inline FileSet cmd_simulate(const RunConfig& cfg) {
  const auto sols = synthesize(cfg);
  const ModalState s0 = initial_state(cfg);
  std::vector<ModalGain> gains = gains_of(sols);
  Trajectory tr;
  switch (cfg.sim.mode) {
    case SimMode::open_loop:
      std::fill(gains.begin(), gains.end(), ModalGain{});
      tr = simulate_decoupled(s0, gains, cfg.beam, cfg.sim.T, cfg.sim.dt,
                              cfg.sim.stride);
      break;
    case SimMode::decoupled:
      tr = simulate_decoupled(s0, gains, cfg.beam, cfg.sim.T, cfg.sim.dt,
                              cfg.sim.stride);
      break;
    case SimMode::coupled:
      tr = evolve_coupled(s0, gains, cfg.beam,
                          {cfg.sim.input, cfg.sim.sign, 0.0}, cfg.sim.T,
                          cfg.sim.dt, cfg.sim.stride);
      break;
  }

  csv::Writer energy({"t", "energy", "lyapunov"});
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const ModalState s = tr.state(i);
    energy.field(tr.t[i]).field(modal_energy(s)).field(lyapunov_value(s, sols));
    energy.end_row();
  }

  std::vector<std::size_t> snaps;
  const auto k = static_cast<std::size_t>(cfg.grid.field_snapshots);
  const std::size_t last = tr.size() - 1;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t idx = k == 1 ? 0 : (j * last + (k - 1) / 2) / (k - 1);
    if (snaps.empty() || snaps.back() != idx) snaps.push_back(idx);
  }
  const std::vector<double> x = uniform_grid(cfg.grid.points);

  return {
      {"trajectory.csv", trajectory_csv(tr, cfg.output.format)},
      {"field.csv", field_csv(tr, snaps, x)},
      {"energy.csv", energy.str()},
      {"run_config.txt", serialize(cfg)},
  };
}

/// Accumulates the PASS/FAIL lines of a verify run.
class Report {
 public:
  void check(bool ok, const std::string& name, const std::string& detail) {
    lines_ += (ok ? "PASS " : "FAIL ") + name + "  " + detail + "\n";
    ++total_;
    if (ok) ++passed_;
  }
  void info(const std::string& line) { lines_ += "  " + line + "\n"; }
  void section(const std::string& title) { lines_ += "\n[" + title + "]\n"; }

  [[nodiscard]] bool all_passed() const { return passed_ == total_; }
  [[nodiscard]] std::string text() const {
    return lines_ + "\nrequired checks passed: " + std::to_string(passed_) +
           "/" + std::to_string(total_) + "\n";
  }

 private:
  std::string lines_;
  int passed_ = 0;
  int total_ = 0;
};

struct VerifyResult {
  FileSet files;
  bool passed = false;
};

namespace detail {

inline std::string fmt(double v) { return csv::format_double(v); }

inline std::string kv(const std::string& k, double v) {
  return k + "=" + fmt(v);
}

inline std::string yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace detail

/// Residuals, oracle agreement, eigenvalue consistency, stability, cost
/// identity and tail bounds for the configured profile. Spillover and the
/// coupled cost identity are reported but never fail the run.
inline VerifyResult cmd_verify(const RunConfig& cfg) {
  using detail::fmt;
  using detail::kv;
  const VerifySettings& v = cfg.verify;
  const BeamParams& p = cfg.beam;
  const auto sols = synthesize(cfg);
  Report rep;
  rep.section("configuration");
  rep.info(kv("alpha", p.alpha) + " " + kv("beta", p.beta) + " " +
           kv("R", p.R) + " " + kv("q", cfg.weights.q) + " " +
           kv("r", cfg.weights.r) + " N=" + std::to_string(cfg.weights.N));
  rep.section("required");

  {
    double worst = 0.0;
    int at = 0;
    for (const ModeSolution& s : sols) {
      const double r = s.riccati.residuals.max_relative();
      if (r > worst) {
        worst = r;
        at = s.n.value();
      }
    }
    rep.check(worst <= v.residual_tol, "riccati_residuals",
              kv("max_rel", worst) + " at n=" + std::to_string(at) + " " +
                  kv("tol", v.residual_tol));
  }

  {
    double worst = 0.0;
    int at = 0;
    std::string err;
    for (const ModeSolution& s : sols) {
      try {
        const Eigen::Matrix2d X = care_oracle_for_mode(s.n, s.weight, p);
        const double gap = (s.riccati.matrix() - X).cwiseAbs().maxCoeff() /
                           std::max(1.0, X.cwiseAbs().maxCoeff());
        if (gap > worst) {
          worst = gap;
          at = s.n.value();
        }
      } catch (const NumericError& e) {
        err = "n=" + std::to_string(s.n.value()) + ": " + e.what();
        break;
      }
    }
    if (!err.empty()) {
      rep.check(false, "oracle_equivalence", "oracle failed at " + err);
    } else {
      rep.check(worst <= v.oracle_tol, "oracle_equivalence",
                kv("max_gap", worst) + " at n=" + std::to_string(at) + " " +
                    kv("tol", v.oracle_tol));
    }
  }

  {
    double worst = 0.0;
    for (const ModeSolution& s : sols) {
      const Eigen::Matrix2d M = closed_loop_matrix(s.n, p, s.gain);
      const EigenPair a = eigenvalues_2x2(M);
      const EigenPair b = closed_loop_eigenvalues_formula(s.n, p, s.riccati);
      const double mag = std::max(1.0, std::abs(a.plus));
      worst = std::max({worst, std::abs(a.plus - b.plus) / mag,
                        std::abs(a.minus - b.minus) / mag});
      const double tr = M.trace(), det = M.determinant();
      worst = std::max(worst, std::abs((a.plus + a.minus).real() - tr) /
                                  std::max(1.0, std::abs(tr)));
      worst = std::max(worst, std::abs((a.plus * a.minus).real() - det) /
                                  std::max(1.0, std::abs(det)));
    }
    rep.check(worst <= v.eigen_tol, "eigenvalue_consistency",
              kv("max_rel", worst) + " " + kv("tol", v.eigen_tol));
  }

  {
    bool ok = true;
    double max_re = -std::numeric_limits<double>::infinity();
    int strict = 0;
    for (const ModeSolution& s : sols) {
      const EigenPair mu = closed_loop_eigenvalues(s.n, p, s.riccati);
      const double re = std::max(mu.plus.real(), mu.minus.real());
      max_re = std::max(max_re, re);
      if (s.weight.is_positive_definite()) {
        ++strict;
        ok = ok && re < 0.0;
      } else if (s.weight.is_zero() && p.alpha > 0.0) {
        const double a = s.n.stiffness();
        const double bound = -std::min(p.alpha / 2.0, a / p.alpha);
        ok = ok && re <= bound * (1.0 - 1e-12);
      } else {
        ok = ok && re <= 1e-12 * std::max(1.0, std::abs(mu.plus));
      }
    }
    rep.check(ok, "closed_loop_stability",
              kv("max_re_mu", max_re) + " strict_modes=" +
                  std::to_string(strict));
  }

  {
    const int upto = std::min(v.cost_modes, cfg.weights.N);
    std::string detail;
    bool ok = true;
    if (upto == 0) {
      detail = "skipped (verify.cost_modes=0)";
    } else {
      try {
        const ModalState s0 = initial_state(cfg);
        std::vector<ModeSolution> low(sols.begin(), sols.begin() + upto);
        const CostIdentityReport cr =
            verify_cost_identity(s0, low, p, SimMode::decoupled);
        double worst_lyap = 0.0;
        for (const ModeCost& m : cr.modes) {
          ok = ok && m.rel_error <= v.cost_tol;
          const double lyap_gap =
              std::abs(m.lyapunov - m.predicted) / (1.0 + m.predicted);
          worst_lyap = std::max(worst_lyap, lyap_gap);
          ok = ok && lyap_gap <= v.oracle_tol;
          rep.info("mode " + std::to_string(m.n) + ": " +
                   kv("predicted", m.predicted) + " " +
                   kv("quadrature", m.measured) + " " +
                   kv("lyapunov", m.lyapunov) + " " +
                   kv("rel_error", m.rel_error));
        }
        detail = "modes=" + std::to_string(cr.modes.size()) + " " +
                 kv("total_rel_error", cr.rel_error) + " " +
                 kv("max_lyapunov_gap", worst_lyap) + " " +
                 kv("tol", v.cost_tol);
      } catch (const NumericError& e) {
        ok = false;
        detail = e.what();
      }
    }
    rep.check(ok, "cost_identity_decoupled", detail);
  }

  const ConvergenceReport tail = tail_report(
      sols, cfg.weights, p, {1, v.fit_lo, v.fit_hi, v.exponent_tol});
  rep.check(tail.p12_bound_holds, "p12_tail_bound",
            "p12 <= q/(2 n^(3+r) pi^3) for n >= 2");
  rep.check(tail.gain_converges, "gain_series_converges",
            kv("r", tail.r) + " " + kv("threshold", tail.gain_threshold));

  rep.section("tail report (informational)");
  rep.info("p11_converges=" + detail::yes_no(tail.p11_converges) +
           " p12_converges=" + detail::yes_no(tail.p12_converges) +
           " p22_converges=" + detail::yes_no(tail.p22_converges) +
           " gain_converges=" + detail::yes_no(tail.gain_converges));
  rep.info(kv("p22_constant", tail.p22_constant) + " " +
           kv("p22_expected_exponent", tail.p22_expected_exponent) +
           " p22_fitted_exponent=" +
           (tail.p22_fitted_exponent ? fmt(*tail.p22_fitted_exponent) : "n/a") +
           " gain_fitted_exponent=" +
           (tail.gain_fitted_exponent ? fmt(*tail.gain_fitted_exponent)
                                      : "n/a"));
  rep.info("p22_bound_holds=" + detail::yes_no(tail.p22_bound_holds));

  rep.section("spillover (informational)");
  try {
    const ModalState s0 = initial_state(cfg);
    const auto gains = gains_of(sols);
    const CoupledOptions co{cfg.sim.input, cfg.sim.sign, 0.0};
    const SpilloverReport sp =
        measure_spillover(s0, gains, p, co, v.spillover_T, v.spillover_dt);
    rep.info(kv("horizon", sp.horizon) + " " + kv("dt", sp.dt));
    for (const SpilloverMode& m : sp.modes) {
      if (m.n > 8) break;
      rep.info("mode " + std::to_string(m.n) + ": " +
               kv("max_deviation", m.max_abs_deviation) + " " +
               kv("max_decoupled", m.max_abs_decoupled));
    }
    IdentityOptions io;
    io.coupled = co;
    const CostIdentityReport cr =
        verify_cost_identity(s0, sols, p, SimMode::coupled, io);
    rep.info("coupled cost identity: " + kv("predicted", cr.predicted) + " " +
             kv("quadrature", cr.measured) + " " +
             kv("rel_error", cr.rel_error) +
             (cr.note.empty() ? "" : " (" + cr.note + ")"));
  } catch (const Error& e) {
    rep.info(std::string("not measured: ") + e.what());
  }

  return {{{"verify.txt", rep.text()}}, rep.all_passed()};
}

struct Options {
  std::string command;
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<int> modes;
  std::optional<std::string> format;
};

/// Loads the config, applies command-line overrides and validates.
inline RunConfig effective_config(const Options& opt) {
  RunConfig cfg = opt.config_path ? load_config(*opt.config_path) : RunConfig{};
  if (opt.out_dir) cfg.output.dir = *opt.out_dir;
  if (opt.modes) cfg.weights.N = *opt.modes;
  if (opt.format) {
    cfg.output.format = config_detail::parse_format("--format", *opt.format);
  }
  cfg.validate();
  return cfg;
}

inline void write_files(const std::string& dir, const FileSet& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "'");
  for (const auto& [name, content] : files) {
    csv::write_file((std::filesystem::path(dir) / name).string(), content);
  }
}

/// Runs one command end to end and maps failures onto exit codes.
inline int run(const Options& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = effective_config(opt);
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    FileSet files;
    int code = kSuccess;
    if (opt.command == "synthesize") {
      files = cmd_synthesize(cfg);
    } else if (opt.command == "spectrum") {
      files = cmd_spectrum(cfg);
    } else if (opt.command == "simulate") {
      files = cmd_simulate(cfg);
    } else if (opt.command == "verify") {
      VerifyResult r = cmd_verify(cfg);
      files = std::move(r.files);
      code = r.passed ? kSuccess : kCheckFailed;
    } else {
      err << "unknown command '" << opt.command << "'\n";
      return kConfigError;
    }
    write_files(cfg.output.dir, files);
    for (const auto& [name, content] : files) {
      out << (std::filesystem::path(cfg.output.dir) / name).string() << "\n";
    }
    if (code == kCheckFailed) err << "verify: some required checks failed\n";
    return code;
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  }
}

}  // namespace beamlqr::cli
