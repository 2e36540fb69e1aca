#pragma once

// Sine-series kernels Q(x₁,x₂), P(x₁,x₂) and K(x) built from per-mode blocks,
// modal weight families with power-law decay, and tail/convergence reports.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamlqr/csv.hpp"
#include "beamlqr/errors.hpp"
#include "beamlqr/modal_riccati.hpp"

namespace beamlqr {

/// How the boundary derivative of sin nπx enters the feedback kernel.
/// `paper` drops the cos nπ = (−1)ⁿ factor, `derivative` keeps it.
enum class SignConvention { paper, derivative };

inline double convention_sign(SignConvention c, int n) {
  if (c == SignConvention::paper) return 1.0;
  return (n % 2 == 0) ? 1.0 : -1.0;
}

/// sin(π t), exactly zero at integer t.
inline double sin_pi(double t) {
  double r = std::fmod(t, 2.0);
  if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
  if (r > 1.0) r -= 2.0;
  if (r < -1.0) r += 2.0;
  // r in (−1, 1); fold onto [−½, ½] for accuracy.
  if (r > 0.5) r = 1.0 - r;
  if (r < -0.5) r = -1.0 - r;
  return std::sin(kPi * r);
}

/// `points` uniform samples of [0, 1], endpoints included.
inline std::vector<double> uniform_grid(int points) {
  if (points < 2) {
    throw InvalidInput("grid needs at least 2 points");
  }
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  }
  g.back() = 1.0;
  return g;
}

struct WeightProfile {
  double q = 1.0;  ///< amplitude
  double r = 9.0;  ///< decay exponent
  int N = 32;      ///< truncation order
  /// Modes that receive weight; empty means all of 1..N.
  std::set<int> mask;
  /// Shape multiplied by q/nʳ; entries bounded by 1 in magnitude.
  ModalWeight base = ModalWeight::identity();

  [[nodiscard]] bool includes(int n) const {
    return n >= 1 && n <= N && (mask.empty() || mask.contains(n));
  }

  void validate() const {
    if (!std::isfinite(q) || q < 0.0) {
      throw InvalidProfile("weights.q must be finite and >= 0");
    }
    if (!std::isfinite(r) || r <= 0.0) {
      throw InvalidProfile("weights.r must be finite and > 0");
    }
    if (N < 1) {
      throw InvalidProfile("weights.N must be >= 1");
    }
    for (int n : mask) {
      if (n < 1 || n > N) {
        throw InvalidProfile("weights.mask entry " + std::to_string(n) +
                             " outside 1.." + std::to_string(N));
      }
    }
    if (!base.is_psd()) {
      throw InvalidProfile("weights.base is not nonnegative definite");
    }
    if (base.norm() > 1.0) {
      throw InvalidProfile("weights.base entries must not exceed 1");
    }
  }
};

struct WeightedMode {
  ModeIndex n;
  ModalWeight weight;
};

/// Weights Qⁿ’ⁿ = (q/nʳ)·base for every included mode, ascending in n.
inline std::vector<WeightedMode> synthesize_modal_weights(
    const WeightProfile& profile) {
  profile.validate();
  std::vector<WeightedMode> out;
  for (int n = 1; n <= profile.N; ++n) {
    if (!profile.includes(n)) continue;
    const double scale = profile.q / std::pow(static_cast<double>(n), profile.r);
    out.push_back({ModeIndex(n), profile.base.scaled(scale)});
  }
  return out;
}

/// Everything synthesized for one mode.
struct ModeSolution {
  ModeIndex n;
  ModalWeight weight;
  ModalRiccati riccati;
  ModalGain gain;
};

/// Solves every mode 1..N of the profile; masked-out modes carry zero weight.
inline std::vector<ModeSolution> solve_profile(const WeightProfile& profile,
                                               const BeamParams& params) {
  profile.validate();
  params.validate();
  std::vector<ModalWeight> weights(static_cast<std::size_t>(profile.N));
  for (const WeightedMode& wm : synthesize_modal_weights(profile)) {
    weights[static_cast<std::size_t>(wm.n.value() - 1)] = wm.weight;
  }
  std::vector<ModeSolution> out;
  out.reserve(weights.size());
  for (int n = 1; n <= profile.N; ++n) {
    const ModeIndex m(n);
    const ModalWeight& q = weights[static_cast<std::size_t>(n - 1)];
    const ModalRiccati P = solve_mode_riccati(m, q, params);
    out.push_back({m, q, P, mode_gain(P, m, params)});
  }
  return out;
}

enum class KernelKind { cost_weight, value_kernel, gain_kernel };

struct ModeBlock {
  ModeIndex n;
  Eigen::Matrix2d block;
};

struct ModeRow {
  ModeIndex n;
  Eigen::RowVector2d row;
};

/// Truncated double sine series Σₙ blockⁿ sin nπx₁ sin nπx₂.
struct SineKernel {
  KernelKind kind = KernelKind::value_kernel;
  int order = 0;
  std::vector<ModeBlock> blocks;
};

inline SineKernel cost_kernel(std::span<const ModeSolution> sols) {
  SineKernel k{KernelKind::cost_weight, 0, {}};
  for (const ModeSolution& s : sols) {
    k.blocks.push_back({s.n, s.weight.matrix()});
    k.order = std::max(k.order, s.n.value());
  }
  return k;
}

inline SineKernel value_kernel(std::span<const ModeSolution> sols) {
  SineKernel k{KernelKind::value_kernel, 0, {}};
  for (const ModeSolution& s : sols) {
    k.blocks.push_back({s.n, s.riccati.matrix()});
    k.order = std::max(k.order, s.n.value());
  }
  return k;
}

/// Samples of a 2x2 kernel on grid × grid; values(i, j) is at (xᵢ, xⱼ).
struct SampledKernel {
  std::vector<double> grid;
  Eigen::MatrixXd c11, c12, c21, c22;

  [[nodiscard]] Eigen::Matrix2d at(Eigen::Index i, Eigen::Index j) const {
    Eigen::Matrix2d m;
    m << c11(i, j), c12(i, j), c21(i, j), c22(i, j);
    return m;
  }
};

namespace detail {

/// basis(k, i) = sin(n_k π x_i)
template <typename Modes>
Eigen::MatrixXd sine_basis(const Modes& modes, std::span<const double> grid) {
  Eigen::MatrixXd B(static_cast<Eigen::Index>(modes.size()),
                    static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index k = 0; k < B.rows(); ++k) {
    const double n = modes[static_cast<std::size_t>(k)].n.value();
    for (Eigen::Index i = 0; i < B.cols(); ++i) {
      B(k, i) = sin_pi(n * grid[static_cast<std::size_t>(i)]);
    }
  }
  return B;
}

inline void check_grid(std::span<const double> grid) {
  for (double x : grid) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw InvalidInput("grid points must lie in [0, 1]");
    }
  }
}

}  // namespace detail

/// Exact partial sum Σₙ blockⁿ sin nπx₁ sin nπx₂ on grid × grid.
inline SampledKernel assemble_kernel(std::span<const ModeBlock> blocks,
                                     std::span<const double> grid) {
  detail::check_grid(grid);
  const Eigen::MatrixXd B = detail::sine_basis(blocks, grid);
  SampledKernel out;
  out.grid.assign(grid.begin(), grid.end());
  auto component = [&](int r, int c) {
    Eigen::VectorXd w(B.rows());
    for (Eigen::Index k = 0; k < B.rows(); ++k) {
      w(k) = blocks[static_cast<std::size_t>(k)].block(r, c);
    }
    return Eigen::MatrixXd(B.transpose() * w.asDiagonal() * B);
  };
  out.c11 = component(0, 0);
  out.c12 = component(0, 1);
  out.c21 = component(1, 0);
  out.c22 = component(1, 1);
  return out;
}

inline SampledKernel assemble_kernel(const SineKernel& kernel,
                                     std::span<const double> grid) {
  return assemble_kernel(std::span<const ModeBlock>(kernel.blocks), grid);
}

struct SampledFeedback {
  std::vector<double> grid;
  Eigen::VectorXd k1, k2;
};

/// K(x) = Σₙ σₙ Kⁿ’ⁿ sin nπx, σₙ = 1 (`paper`) or (−1)ⁿ (`derivative`).
inline SampledFeedback assemble_feedback_kernel(std::span<const ModeRow> gains,
                                                std::span<const double> grid,
                                                SignConvention convention) {
  detail::check_grid(grid);
  const Eigen::MatrixXd B = detail::sine_basis(gains, grid);
  Eigen::VectorXd w1(B.rows()), w2(B.rows());
  for (Eigen::Index k = 0; k < B.rows(); ++k) {
    const ModeRow& g = gains[static_cast<std::size_t>(k)];
    const double s = convention_sign(convention, g.n.value());
    w1(k) = s * g.row(0);
    w2(k) = s * g.row(1);
  }
  SampledFeedback out;
  out.grid.assign(grid.begin(), grid.end());
  out.k1 = B.transpose() * w1;
  out.k2 = B.transpose() * w2;
  return out;
}

inline std::vector<ModeRow> gain_rows(std::span<const ModeSolution> sols) {
  std::vector<ModeRow> rows;
  rows.reserve(sols.size());
  for (const ModeSolution& s : sols) {
    rows.push_back({s.n, s.gain.row()});
  }
  return rows;
}

/// Columns x1,x2,P11,P12,P22.
inline std::string kernel_csv(const SampledKernel& k) {
  csv::Writer w({"x1", "x2", "P11", "P12", "P22"});
  const auto m = static_cast<Eigen::Index>(k.grid.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      w.field(k.grid[static_cast<std::size_t>(i)])
          .field(k.grid[static_cast<std::size_t>(j)])
          .field(k.c11(i, j))
          .field(k.c12(i, j))
          .field(k.c22(i, j));
      w.end_row();
    }
  }
  return w.str();
}

/// Columns x,K1,K2.
inline std::string feedback_csv(const SampledFeedback& k) {
  csv::Writer w({"x", "K1", "K2"});
  for (std::size_t i = 0; i < k.grid.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    w.field(k.grid[i]).field(k.k1(e)).field(k.k2(e));
    w.end_row();
  }
  return w.str();
}

/// Least-squares slope of log|y| on log n over entries with n in [lo, hi] and
/// y ≠ 0. Returns nullopt with fewer than three usable points. The decay
/// exponent is the negated slope.
inline std::optional<double> fit_loglog_slope(std::span<const int> n,
                                              std::span<const double> y,
                                              int lo, int hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] < lo || n[i] > hi || y[i] == 0.0 || !std::isfinite(y[i])) {
      continue;
    }
    const double lx = std::log(static_cast<double>(n[i]));
    const double ly = std::log(std::abs(y[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 3) return std::nullopt;
  const double den = m * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (m * sxy - sx * sy) / den;
}

struct ModeTail {
  int n = 0;
  double p12 = 0.0;
  double p12_bound = 0.0;  ///< q / (2 n^{3+r} π³)
  bool p12_ok = true;
  double p22 = 0.0;
  /// α > 0 only: (Q₂₂ + 2P₁₂) / (2α); NaN when α = 0.
  double p22_damped_bound = std::numeric_limits<double>::quiet_NaN();
  bool p22_ok = true;
  // Sup-norm of the mode-n term of each series, i.e. its coefficient size.
  double inc_p11 = 0.0;
  double inc_p12 = 0.0;
  double inc_p22 = 0.0;
  double inc_gain = 0.0;  ///< max(|k1|, |k2|)
};

struct ConvergenceReport {
  double q = 0.0;
  double r = 0.0;
  double alpha = 0.0;
  int n0 = 1;  ///< bounds are checked for n > n0
  int fit_lo = 8;
  int fit_hi = 64;
  std::vector<ModeTail> modes;

  bool p12_bound_holds = true;
  /// sup over n > n0 of P₂₂ⁿ’ⁿ n^{1+r/2}; the constant c in P₂₂ ≤ c/n^{1+r/2}.
  double p22_constant = 0.0;
  bool p22_bound_holds = true;
  std::optional<double> p22_fitted_exponent;
  double p22_expected_exponent = 0.0;
  std::optional<double> gain_fitted_exponent;

  // Thresholds on r for each series and the resulting verdicts.
  double gain_threshold = 1.0;
  double p12_threshold = 1.0;
  double p22_threshold = 1.0;
  double p11_threshold = 8.0;
  bool gain_converges = false;
  bool p12_converges = false;
  bool p22_converges = false;
  bool p11_converges = false;
};

struct TailOptions {
  int n0 = 1;
  int fit_lo = 8;
  int fit_hi = 64;
  double exponent_tol = 0.3;
};

/// Per-mode tail bounds, coefficient decay fits and series verdicts.
///
/// `solutions` must hold every mode 1..profile.N exactly once. Bound
/// violations are reported in the flags, never thrown.
inline ConvergenceReport tail_report(std::span<const ModeSolution> solutions,
                                     const WeightProfile& profile,
                                     const BeamParams& params,
                                     const TailOptions& opts = {}) {
  profile.validate();
  std::vector<const ModeSolution*> by_mode(
      static_cast<std::size_t>(profile.N), nullptr);
  for (const ModeSolution& s : solutions) {
    const int n = s.n.value();
    if (n > profile.N) continue;
    if (by_mode[static_cast<std::size_t>(n - 1)] != nullptr) {
      throw InvalidInput("tail_report: mode " + std::to_string(n) +
                         " given twice");
    }
    by_mode[static_cast<std::size_t>(n - 1)] = &s;
  }
  for (int n = 1; n <= profile.N; ++n) {
    if (by_mode[static_cast<std::size_t>(n - 1)] == nullptr) {
      throw MissingModes("tail_report: no solution for mode " +
                         std::to_string(n));
    }
  }

  ConvergenceReport rep;
  rep.q = profile.q;
  rep.r = profile.r;
  rep.alpha = params.alpha;
  rep.n0 = opts.n0;
  rep.fit_lo = opts.fit_lo;
  rep.fit_hi = opts.fit_hi;
  rep.p22_expected_exponent = 1.0 + profile.r / 2.0;

  const double pi3 = kPi * kPi * kPi;
  std::vector<int> ns;
  std::vector<double> p22s, gains;
  for (const ModeSolution* s : by_mode) {
    const int n = s->n.value();
    const double nd = n;
    ModeTail t;
    t.n = n;
    t.p12 = s->riccati.p12;
    t.p12_bound = profile.q / (2.0 * std::pow(nd, 3.0 + profile.r) * pi3);
    t.p12_ok = t.p12 <= t.p12_bound;
    t.p22 = s->riccati.p22;
    if (params.alpha > 0.0) {
      t.p22_damped_bound =
          (s->weight.q22 + 2.0 * s->riccati.p12) / (2.0 * params.alpha);
      // One ulp of slack for the rationalized root.
      t.p22_ok = t.p22 <= t.p22_damped_bound * (1.0 + 4e-16);
    }
    t.inc_p11 = std::abs(s->riccati.p11);
    t.inc_p12 = std::abs(s->riccati.p12);
    t.inc_p22 = std::abs(s->riccati.p22);
    t.inc_gain = std::max(std::abs(s->gain.k1), std::abs(s->gain.k2));
    if (n > opts.n0) {
      rep.p12_bound_holds = rep.p12_bound_holds && t.p12_ok;
      rep.p22_constant = std::max(
          rep.p22_constant, t.p22 * std::pow(nd, rep.p22_expected_exponent));
      if (params.alpha > 0.0) {
        rep.p22_bound_holds = rep.p22_bound_holds && t.p22_ok;
      }
    }
    ns.push_back(n);
    p22s.push_back(t.p22);
    gains.push_back(t.inc_gain);
    rep.modes.push_back(t);
  }

  if (auto slope = fit_loglog_slope(ns, p22s, opts.fit_lo, opts.fit_hi)) {
    rep.p22_fitted_exponent = -*slope;
  }
  if (auto slope = fit_loglog_slope(ns, gains, opts.fit_lo, opts.fit_hi)) {
    rep.gain_fitted_exponent = -*slope;
  }
  if (params.alpha == 0.0) {
    rep.p22_bound_holds =
        std::isfinite(rep.p22_constant) &&
        (!rep.p22_fitted_exponent ||
         std::abs(*rep.p22_fitted_exponent - rep.p22_expected_exponent) <=
             opts.exponent_tol);
  }

  rep.p11_threshold = params.alpha == 0.0 ? 8.0 : 5.0;
  rep.gain_converges = profile.r > rep.gain_threshold;
  rep.p12_converges = profile.r > rep.p12_threshold;
  rep.p22_converges = profile.r > rep.p22_threshold;
  rep.p11_converges = profile.r > rep.p11_threshold;
  return rep;
}

}  // namespace beamlqr
