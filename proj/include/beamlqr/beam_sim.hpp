#pragma once

// Spectral Galerkin simulation of the beam in sine coordinates
// z(x,t) = Σₙ (aₙ,₁(t), aₙ,₂(t)) sin nπx: open loop, the idealized decoupled
// closed loop (each mode driven by its own control), and the coupled closed
// loop in which one scalar boundary input feeds every mode.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "beamlqr/csv.hpp"
#include "beamlqr/errors.hpp"
#include "beamlqr/kernel_assembly.hpp"
#include "beamlqr/lyapunov.hpp"
#include "beamlqr/modal_riccati.hpp"

namespace beamlqr {

enum class SimMode { open_loop, decoupled, coupled };

/// Input coefficient bₙ multiplying u(t) in the mode-n velocity equation.
/// `paper_beta`: bₙ = nπβ. `physical`: bₙ = 2nπ(−1)ⁿ, the projection of the
/// bending-moment boundary condition f_xx(1,t) = u(t).
enum class InputConvention { paper_beta, physical };

inline double input_coefficient(InputConvention c, ModeIndex n,
                                const BeamParams& params) {
  if (c == InputConvention::paper_beta) {
    return n.wavenumber() * params.beta;
  }
  const double sign = (n.value() % 2 == 0) ? 1.0 : -1.0;
  return 2.0 * n.wavenumber() * sign;
}

/// Sine coefficients of a contiguous band of modes first_mode..last_mode().
/// coeffs = [pos, vel] per mode, in ascending mode order.
struct ModalState {
  int first_mode = 1;
  Eigen::VectorXd coeffs;
  double t = 0.0;

  static ModalState zero(int order) {
    if (order < 1) throw InvalidInput("ModalState order must be >= 1");
    return {1, Eigen::VectorXd::Zero(2 * order), 0.0};
  }
  /// One mode carried on its own.
  static ModalState single(int n, double pos, double vel) {
    ModeIndex m(n);
    ModalState s{m.value(), Eigen::VectorXd(2), 0.0};
    s.coeffs << pos, vel;
    return s;
  }

  [[nodiscard]] int count() const {
    return static_cast<int>(coeffs.size() / 2);
  }
  [[nodiscard]] int last_mode() const { return first_mode + count() - 1; }
  [[nodiscard]] bool holds(int n) const {
    return n >= first_mode && n <= last_mode();
  }
  [[nodiscard]] Eigen::Vector2d mode(int n) const {
    if (!holds(n)) return Eigen::Vector2d::Zero();
    return coeffs.segment<2>(2 * (n - first_mode));
  }
  void set_mode(int n, double pos, double vel) {
    if (!holds(n)) throw InvalidInput("mode outside state band");
    coeffs(2 * (n - first_mode)) = pos;
    coeffs(2 * (n - first_mode) + 1) = vel;
  }
};

/// Initial displacement f1 and velocity f2 sampled on a uniform grid of
/// [0, 1] with a multiple of four intervals (Simpson at two resolutions).
struct InitialData {
  std::vector<double> f1;
  std::vector<double> f2;

  [[nodiscard]] int intervals() const {
    return static_cast<int>(f1.size()) - 1;
  }

  static InitialData from_functions(const std::function<double(double)>& g1,
                                    const std::function<double(double)>& g2,
                                    int intervals = 4096) {
    if (intervals < 4 || intervals % 4 != 0) {
      throw InvalidInput("initial data needs a multiple of 4 intervals");
    }
    InitialData d;
    d.f1.resize(static_cast<std::size_t>(intervals) + 1);
    d.f2.resize(d.f1.size());
    for (int i = 0; i <= intervals; ++i) {
      const double x = static_cast<double>(i) / intervals;
      d.f1[static_cast<std::size_t>(i)] = g1(x);
      d.f2[static_cast<std::size_t>(i)] = g2(x);
    }
    return d;
  }

  static InitialData samples(std::vector<double> f1, std::vector<double> f2) {
    if (f1.size() != f2.size()) {
      throw InvalidInput("initial data: f1 and f2 sample counts differ");
    }
    const auto m = static_cast<int>(f1.size()) - 1;
    if (m < 4 || m % 4 != 0) {
      throw InvalidInput("initial data needs a multiple of 4 intervals");
    }
    return {std::move(f1), std::move(f2)};
  }
};

/// Named built-in profiles for either component of the initial data.
struct InitialShape {
  enum class Kind { zero, parabola, single_mode };
  Kind kind = Kind::zero;
  int mode = 1;        ///< single_mode only
  double scale = 1.0;

  [[nodiscard]] double operator()(double x) const {
    switch (kind) {
      case Kind::zero:
        return 0.0;
      case Kind::parabola:
        return scale * x * (1.0 - x);
      case Kind::single_mode:
        return scale * sin_pi(mode * x);
    }
    return 0.0;
  }

  static InitialShape parse(const std::string& text) {
    if (text == "zero") return {Kind::zero, 1, 1.0};
    if (text == "parabola") return {Kind::parabola, 1, 1.0};
    const std::string prefix = "single_mode:";
    if (text.rfind(prefix, 0) == 0) {
      const std::string rest = text.substr(prefix.size());
      std::size_t used = 0;
      int k = 0;
      try {
        k = std::stoi(rest, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != rest.size() || k < 1) {
        throw InvalidInput("bad single_mode index in '" + text + "'");
      }
      return {Kind::single_mode, k, 1.0};
    }
    throw InvalidInput("unknown initial shape '" + text + "'");
  }

  [[nodiscard]] std::string to_string() const {
    switch (kind) {
      case Kind::zero:
        return "zero";
      case Kind::parabola:
        return "parabola";
      case Kind::single_mode:
        return "single_mode:" + std::to_string(mode);
    }
    return "zero";
  }
};

struct ProjectionOptions {
  double tolerance = 1e-8;
};

/// aₙ = 2∫₀¹ f(x) sin nπx dx by composite Simpson, for n = 1..N.
///
/// The quadrature is repeated on every other sample; a difference above the
/// tolerance raises GridTooCoarse. f1 must vanish at both ends.
inline ModalState project_initial(const InitialData& data, int N,
                                  const ProjectionOptions& opts = {}) {
  const int m = data.intervals();
  if (m < 4 || m % 4 != 0 || data.f2.size() != data.f1.size()) {
    throw InvalidInput("project_initial: malformed initial data");
  }
  if (N < 1) throw InvalidInput("project_initial: N must be >= 1");
  const double f1_max =
      std::abs(*std::max_element(data.f1.begin(), data.f1.end(),
                                 [](double a, double b) {
                                   return std::abs(a) < std::abs(b);
                                 }));
  if (std::abs(data.f1.front()) > opts.tolerance * (1.0 + f1_max) ||
      std::abs(data.f1.back()) > opts.tolerance * (1.0 + f1_max)) {
    throw InvalidInput("project_initial: f1 must vanish at x = 0 and x = 1");
  }

  auto simpson = [&](const std::vector<double>& f, int n, int step) {
    const int intervals = m / step;
    const double h = static_cast<double>(step) / m;
    double acc = 0.0;
    for (int i = 0; i <= intervals; ++i) {
      const int j = i * step;
      const double x = static_cast<double>(j) / m;
      const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * f[static_cast<std::size_t>(j)] * sin_pi(n * x);
    }
    return 2.0 * acc * h / 3.0;
  };

  ModalState s = ModalState::zero(N);
  for (int n = 1; n <= N; ++n) {
    const double a1 = simpson(data.f1, n, 1);
    const double a2 = simpson(data.f2, n, 1);
    const double e1 = std::abs(a1 - simpson(data.f1, n, 2));
    const double e2 = std::abs(a2 - simpson(data.f2, n, 2));
    if (e1 > opts.tolerance * std::max(1.0, std::abs(a1)) ||
        e2 > opts.tolerance * std::max(1.0, std::abs(a2))) {
      throw GridTooCoarse("project_initial: quadrature estimate for mode " +
                          std::to_string(n) + " exceeds tolerance");
    }
    s.set_mode(n, a1, a2);
  }
  return s;
}

struct Field {
  std::vector<double> x;
  std::vector<double> displacement;
  std::vector<double> velocity;
};

/// Pointwise sine synthesis of displacement and velocity.
inline Field reconstruct(const ModalState& state, std::span<const double> x) {
  Field f;
  f.x.assign(x.begin(), x.end());
  f.displacement.assign(x.size(), 0.0);
  f.velocity.assign(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
      throw InvalidInput("reconstruct: grid points must lie in [0, 1]");
    }
    for (int n = state.first_mode; n <= state.last_mode(); ++n) {
      const double s = sin_pi(n * x[i]);
      const Eigen::Vector2d a = state.mode(n);
      f.displacement[i] += a(0) * s;
      f.velocity[i] += a(1) * s;
    }
  }
  return f;
}

/// exp(M t) for a real 2x2 M, closed form.
///
/// With s = tr/2 and δ = s² − det, exp(Mt) = e^{st}(C I + S (M − sI)) where
/// C = cosh(√δ t) and S = sinh(√δ t)/√δ (their trigonometric forms for
/// δ < 0). S is evaluated by series near δ t² = 0, which covers the defective
/// (critically damped) case.
inline Eigen::Matrix2d expm_2x2(const Eigen::Matrix2d& M, double t) {
  const double s = 0.5 * M.trace();
  const double delta = s * s - M.determinant();
  const double z = delta * t * t;
  double c = 0.0, sh = 0.0;  // already multiplied by e^{st}
  if (std::abs(z) < 1e-3) {
    const double e = std::exp(s * t);
    c = e * (1.0 + z / 2.0 + z * z / 24.0 + z * z * z / 720.0);
    sh = e * t * (1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0);
  } else if (delta < 0.0) {
    const double w = std::sqrt(-delta);
    const double e = std::exp(s * t);
    c = e * std::cos(w * t);
    sh = e * std::sin(w * t) / w;
  } else {
    const double r = std::sqrt(delta);
    const double up = std::exp((s + r) * t);
    const double down = std::exp((s - r) * t);
    c = 0.5 * (up + down);
    sh = 0.5 * (up - down) / r;
  }
  Eigen::Matrix2d shifted = M;
  shifted.diagonal().array() -= s;
  return c * Eigen::Matrix2d::Identity() + sh * shifted;
}

/// Per-mode gains indexed by n − 1, so the span must cover every mode of the
/// state band.
inline void check_gain_coverage(const ModalState& state,
                                std::span<const ModalGain> gains) {
  if (static_cast<int>(gains.size()) < state.last_mode()) {
    throw MissingModes("gains cover modes 1.." + std::to_string(gains.size()) +
                       " but the state reaches mode " +
                       std::to_string(state.last_mode()));
  }
}

inline std::vector<ModalGain> gains_of(std::span<const ModeSolution> sols) {
  std::vector<ModalGain> g;
  for (const ModeSolution& s : sols) {
    const auto idx = static_cast<std::size_t>(s.n.value() - 1);
    if (g.size() <= idx) g.resize(idx + 1);
    g[idx] = s.gain;
  }
  return g;
}

inline std::vector<ModalWeight> weights_of(std::span<const ModeSolution> sols) {
  std::vector<ModalWeight> w;
  for (const ModeSolution& s : sols) {
    const auto idx = static_cast<std::size_t>(s.n.value() - 1);
    if (w.size() <= idx) w.resize(idx + 1);
    w[idx] = s.weight;
  }
  return w;
}

/// u = Σₙ σₙ Kⁿ’ⁿ aₙ over the modes of the state.
inline double boundary_control_signal(const ModalState& state,
                                      std::span<const ModalGain> gains,
                                      SignConvention convention) {
  check_gain_coverage(state, gains);
  double u = 0.0;
  for (int n = state.first_mode; n <= state.last_mode(); ++n) {
    const Eigen::Vector2d a = state.mode(n);
    u += convention_sign(convention, n) *
         gains[static_cast<std::size_t>(n - 1)].apply(a(0), a(1));
  }
  return u;
}

/// Advances each mode by the exact exponential of its own closed-loop matrix
/// F + G K (G = [0; nπβ]).
inline ModalState evolve_decoupled(const ModalState& state,
                                   std::span<const ModalGain> gains,
                                   const BeamParams& params, double t) {
  check_gain_coverage(state, gains);
  ModalState out = state;
  out.t = state.t + t;
  for (int n = state.first_mode; n <= state.last_mode(); ++n) {
    const Eigen::Matrix2d M = closed_loop_matrix(
        ModeIndex(n), params, gains[static_cast<std::size_t>(n - 1)]);
    const Eigen::Vector2d a = expm_2x2(M, t) * state.mode(n);
    out.set_mode(n, a(0), a(1));
  }
  return out;
}

/// Sampled trajectory of a state band; uniform output times.
struct Trajectory {
  int first_mode = 1;
  int count = 0;
  std::vector<double> t;
  std::vector<double> u;
  std::vector<double> coeffs;  ///< row-major, 2·count per sample

  [[nodiscard]] std::size_t size() const { return t.size(); }
  [[nodiscard]] int last_mode() const { return first_mode + count - 1; }

  [[nodiscard]] ModalState state(std::size_t i) const {
    ModalState s{first_mode, Eigen::VectorXd(2 * count), t[i]};
    for (int k = 0; k < 2 * count; ++k) {
      s.coeffs(k) = coeffs[i * static_cast<std::size_t>(2 * count) +
                           static_cast<std::size_t>(k)];
    }
    return s;
  }
  [[nodiscard]] Eigen::Vector2d mode(std::size_t i, int n) const {
    if (n < first_mode || n > last_mode()) return Eigen::Vector2d::Zero();
    const std::size_t base = i * static_cast<std::size_t>(2 * count) +
                             static_cast<std::size_t>(2 * (n - first_mode));
    return {coeffs[base], coeffs[base + 1]};
  }

  void push(double time, double control, const Eigen::VectorXd& a) {
    t.push_back(time);
    u.push_back(control);
    coeffs.insert(coeffs.end(), a.data(), a.data() + a.size());
  }
};

struct StepPlan {
  long long steps = 0;
  double dt = 0.0;
};

/// Whole number of steps covering the horizon with step ≤ dt.
inline StepPlan plan_steps(double horizon, double dt) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidInput("horizon must be finite and > 0");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidInput("dt must be finite and > 0");
  }
  const double raw = horizon / dt;
  if (raw > 5e8) {
    throw HorizonTooLong("horizon/dt exceeds 5e8 steps");
  }
  const auto steps =
      std::max(1LL, static_cast<long long>(std::ceil(raw - 1e-9)));
  return {steps, horizon / static_cast<double>(steps)};
}

/// Decoupled (or, with zero gains, open-loop) evolution with output every
/// `stride` steps; u(t) is the sum of the per-mode controls Kⁿ’ⁿ aₙ.
inline Trajectory simulate_decoupled(const ModalState& initial,
                                     std::span<const ModalGain> gains,
                                     const BeamParams& params, double horizon,
                                     double dt, int stride = 1) {
  check_gain_coverage(initial, gains);
  if (stride < 1) throw InvalidInput("stride must be >= 1");
  const StepPlan plan = plan_steps(horizon, dt);
  std::vector<Eigen::Matrix2d> step;
  for (int n = initial.first_mode; n <= initial.last_mode(); ++n) {
    step.push_back(expm_2x2(
        closed_loop_matrix(ModeIndex(n), params,
                           gains[static_cast<std::size_t>(n - 1)]),
        plan.dt));
  }
  Trajectory tr{initial.first_mode, initial.count(), {}, {}, {}};
  tr.t.reserve(static_cast<std::size_t>(plan.steps / stride + 2));
  Eigen::VectorXd a = initial.coeffs;
  auto record = [&](long long k) {
    ModalState s{initial.first_mode, a, 0.0};
    tr.push(initial.t + static_cast<double>(k) * plan.dt,
            boundary_control_signal(s, gains, SignConvention::paper), a);
  };
  record(0);
  for (long long k = 1; k <= plan.steps; ++k) {
    for (int j = 0; j < initial.count(); ++j) {
      a.segment<2>(2 * j) = step[static_cast<std::size_t>(j)] *
                            Eigen::Vector2d(a.segment<2>(2 * j));
    }
    if (k % stride == 0 || k == plan.steps) record(k);
  }
  return tr;
}

struct CoupledOptions {
  InputConvention input = InputConvention::paper_beta;
  SignConvention sign = SignConvention::paper;
  /// Constant input added to the feedback, u = Σ σₙKₙaₙ + forced_input.
  double forced_input = 0.0;
};

/// Closed-loop matrix of the band when one input u = Σ σₙ Kⁿ’ⁿ aₙ drives
/// every mode through bₙ.
inline Eigen::MatrixXd coupled_matrix(const ModalState& band,
                                      std::span<const ModalGain> gains,
                                      const BeamParams& params,
                                      const CoupledOptions& opts) {
  check_gain_coverage(band, gains);
  const int c = band.count();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * c, 2 * c);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * c);
  Eigen::RowVectorXd k = Eigen::RowVectorXd::Zero(2 * c);
  for (int j = 0; j < c; ++j) {
    const int n = band.first_mode + j;
    const ModeIndex m(n);
    A.block<2, 2>(2 * j, 2 * j) = open_loop_matrix(m, params.alpha);
    b(2 * j + 1) = input_coefficient(opts.input, m, params);
    const ModalGain& g = gains[static_cast<std::size_t>(n - 1)];
    const double s = convention_sign(opts.sign, n);
    k(2 * j) = s * g.k1;
    k(2 * j + 1) = s * g.k2;
  }
  A += b * k;
  return A;
}

/// Coupled evolution by repeated application of exp(A·dt), A the coupled
/// matrix (augmented by a constant state when an input is forced). The
/// exponential is taken in balanced coordinates (ωₙ·position, velocity).
inline Trajectory evolve_coupled(const ModalState& initial,
                                 std::span<const ModalGain> gains,
                                 const BeamParams& params,
                                 const CoupledOptions& opts, double horizon,
                                 double dt, int stride = 1) {
  if (stride < 1) throw InvalidInput("stride must be >= 1");
  const StepPlan plan = plan_steps(horizon, dt);
  const int c = initial.count();
  const Eigen::MatrixXd A = coupled_matrix(initial, gains, params, opts);

  Eigen::RowVectorXd k = Eigen::RowVectorXd::Zero(2 * c);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * c);
  Eigen::VectorXd scale(2 * c + 1);
  for (int j = 0; j < c; ++j) {
    const ModeIndex m(initial.first_mode + j);
    const ModalGain& g = gains[static_cast<std::size_t>(m.value() - 1)];
    const double s = convention_sign(opts.sign, m.value());
    k(2 * j) = s * g.k1;
    k(2 * j + 1) = s * g.k2;
    b(2 * j + 1) = input_coefficient(opts.input, m, params);
    scale(2 * j) = m.wavenumber_sq();
    scale(2 * j + 1) = 1.0;
  }
  scale(2 * c) = 1.0;

  // Augmented generator [[A, b], [0, 0]] acting on (a, u₀).
  Eigen::MatrixXd Aug = Eigen::MatrixXd::Zero(2 * c + 1, 2 * c + 1);
  Aug.topLeftCorner(2 * c, 2 * c) = A;
  Aug.topRightCorner(2 * c, 1) = b;
  const Eigen::MatrixXd balanced =
      scale.asDiagonal() * Aug * scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd scaled_step = balanced * plan.dt;
  if (scaled_step.cwiseAbs().colwise().sum().maxCoeff() > 1e6) {
    throw HorizonTooLong("evolve_coupled: |A·dt| too large for the "
                         "matrix exponential; reduce dt");
  }
  const Eigen::MatrixXd Phi_b = scaled_step.exp();
  if (!Phi_b.allFinite()) {
    throw HorizonTooLong("evolve_coupled: matrix exponential overflowed");
  }
  Eigen::MatrixXd Phi =
      scale.cwiseInverse().asDiagonal() * Phi_b * scale.asDiagonal();
  // The forced input is constant: its row of the propagator is exactly eₙ.
  Phi.row(2 * c).setZero();
  Phi(2 * c, 2 * c) = 1.0;

  Trajectory tr{initial.first_mode, c, {}, {}, {}};
  tr.t.reserve(static_cast<std::size_t>(plan.steps / stride + 2));
  Eigen::VectorXd x(2 * c + 1);
  x.head(2 * c) = initial.coeffs;
  x(2 * c) = opts.forced_input;
  auto record = [&](long long step) {
    const double u = k.dot(x.head(2 * c)) + x(2 * c);
    tr.push(initial.t + static_cast<double>(step) * plan.dt, u, x.head(2 * c));
  };
  record(0);
  for (long long s = 1; s <= plan.steps; ++s) {
    x = Phi * x;
    if (s % stride == 0 || s == plan.steps) {
      if (!x.allFinite()) {
        throw HorizonTooLong("evolve_coupled: state overflowed");
      }
      record(s);
    }
  }
  return tr;
}

/// Σₙ (n⁴π⁴ aₙ,₁² + aₙ,₂²)
inline double modal_energy(const ModalState& s) {
  double e = 0.0;
  for (int n = s.first_mode; n <= s.last_mode(); ++n) {
    const Eigen::Vector2d a = s.mode(n);
    e += ModeIndex(n).stiffness() * a(0) * a(0) + a(1) * a(1);
  }
  return e;
}

/// Σₙ aₙᵀ Pⁿ’ⁿ aₙ over the modes of the state that have a solution.
inline double lyapunov_value(const ModalState& s,
                             std::span<const ModeSolution> sols) {
  double v = 0.0;
  for (const ModeSolution& sol : sols) {
    if (!s.holds(sol.n.value())) continue;
    const Eigen::Vector2d a = s.mode(sol.n.value());
    v += sol.riccati.quadratic_form(a(0), a(1));
  }
  return v;
}

struct CostOptions {
  double c_mode = 0.25;
  double decay_eps = 1e-6;
};

/// ∫₀ᵀ [c_mode Σₙ aₙᵀQⁿ’ⁿaₙ + R u²] dt by composite Simpson on the output
/// samples (Simpson 3/8 closes an odd interval count).
///
/// Throws NotDecayed when ‖a(T)‖ > decay_eps·‖a(0)‖.
inline double run_cost_quadrature(const Trajectory& traj,
                                  std::span<const ModalWeight> weights,
                                  const BeamParams& params,
                                  const CostOptions& opts = {}) {
  const std::size_t m = traj.size();
  if (m < 2) throw InvalidInput("run_cost_quadrature: need >= 2 samples");
  const double n0 = traj.state(0).coeffs.norm();
  if (n0 == 0.0) return 0.0;
  const double nT = traj.state(m - 1).coeffs.norm();
  if (nT > opts.decay_eps * n0) {
    throw NotDecayed("run_cost_quadrature: |a(T)|/|a(0)| = " +
                     csv::format_double(nT / n0) + " exceeds " +
                     csv::format_double(opts.decay_eps));
  }

  std::vector<double> f(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double state_cost = 0.0;
    for (int n = traj.first_mode; n <= traj.last_mode(); ++n) {
      const auto idx = static_cast<std::size_t>(n - 1);
      if (idx >= weights.size()) continue;
      const ModalWeight& q = weights[idx];
      const Eigen::Vector2d a = traj.mode(i, n);
      state_cost += q.q11 * a(0) * a(0) + 2.0 * q.q12 * a(0) * a(1) +
                    q.q22 * a(1) * a(1);
    }
    f[i] = opts.c_mode * state_cost + params.R * traj.u[i] * traj.u[i];
  }

  const double h = (traj.t.back() - traj.t.front()) / static_cast<double>(m - 1);
  const std::size_t intervals = m - 1;
  if (intervals == 1) return 0.5 * h * (f[0] + f[1]);
  std::size_t simpson_end = intervals;
  double acc = 0.0;
  if (intervals % 2 == 1) {
    simpson_end = intervals - 3;
    acc += 3.0 * h / 8.0 *
           (f[simpson_end] + 3.0 * f[simpson_end + 1] +
            3.0 * f[simpson_end + 2] + f[simpson_end + 3]);
  }
  double s = f[0] + f[simpson_end];
  for (std::size_t i = 1; i < simpson_end; ++i) {
    s += (i % 2 ? 4.0 : 2.0) * f[i];
  }
  return acc + s * h / 3.0;
}

/// Cost of the per-mode closed loop from a0, ∫ aᵀ(Q + R KᵀK)a dt, by a
/// Lyapunov solve. Independent of the Riccati closed forms.
inline double lyapunov_mode_cost(ModeIndex n, const ModalGain& K,
                                 const ModalWeight& q, const BeamParams& params,
                                 const Eigen::Vector2d& a0) {
  const Eigen::Matrix2d Ac = closed_loop_matrix(n, params, K);
  const Eigen::Matrix2d W =
      q.matrix() + params.R * K.row().transpose() * K.row();
  return quadratic_cost_to_go(Ac, W, a0);
}

struct ModeCost {
  int n = 0;
  double predicted = 0.0;   ///< c_mode · a(0)ᵀ P a(0)
  double measured = 0.0;    ///< quadrature
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
  double rel_error = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
};

struct CostIdentityReport {
  SimMode mode = SimMode::decoupled;
  double c_mode = 1.0;
  std::vector<ModeCost> modes;  ///< decoupled only
  double predicted = 0.0;
  double measured = 0.0;
  double rel_error = 0.0;
  bool decayed = true;
  std::string note;
};

struct IdentityOptions {
  double horizon_decays = 20.0;  ///< T = horizon_decays / |Re μ_slowest|
  double dt_change_tol = 1e-3;   ///< accept dt once halving moves cost less
  int max_halvings = 8;
  long long max_steps = 4'000'000;         ///< per-mode (2x2) runs
  long long coupled_max_steps = 200'000;  ///< full-band runs
  CoupledOptions coupled{};
};

namespace detail {

inline double relative_gap(double measured, double predicted) {
  if (predicted == 0.0) return measured == 0.0 ? 0.0 : std::abs(measured);
  return std::abs(measured - predicted) / std::abs(predicted);
}

}  // namespace detail

/// Quadrature cost of the closed loop against the initial P quadratic form.
///
/// decoupled: every weighted mode with nonzero initial data is simulated on
/// its own with its own control, c_mode = 1, and compared with aₙ(0)ᵀPaₙ(0)
/// (and the Lyapunov cost). coupled: the full band under one scalar input is
/// compared with ¼ Σₙ aₙ(0)ᵀPaₙ(0); if the coupled loop is not Hurwitz the
/// report carries decayed = false instead of a cost.
inline CostIdentityReport verify_cost_identity(
    const ModalState& initial, std::span<const ModeSolution> sols,
    const BeamParams& params, SimMode mode, const IdentityOptions& opts = {}) {
  const std::vector<ModalGain> gains = gains_of(sols);
  const std::vector<ModalWeight> weights = weights_of(sols);
  CostIdentityReport rep;
  rep.mode = mode;

  if (mode == SimMode::decoupled || mode == SimMode::open_loop) {
    rep.c_mode = 1.0;
    for (const ModeSolution& s : sols) {
      const int n = s.n.value();
      const Eigen::Vector2d a0 = initial.mode(n);
      if (a0.isZero(0.0) || s.weight.is_zero()) continue;
      ModeCost mc;
      mc.n = n;
      mc.predicted = s.riccati.quadratic_form(a0(0), a0(1));
      mc.lyapunov = lyapunov_mode_cost(s.n, s.gain, s.weight, params, a0);
      const EigenPair mu = closed_loop_eigenvalues(s.n, params, s.riccati);
      const double decay =
          std::min(std::abs(mu.plus.real()), std::abs(mu.minus.real()));
      const double freq = std::max(std::abs(mu.plus), std::abs(mu.minus));
      mc.horizon = opts.horizon_decays / decay;
      double dt = std::min(2.0 * kPi / freq / 32.0, mc.horizon / 2000.0);
      if (mc.horizon / dt > static_cast<double>(opts.max_steps)) {
        throw HorizonTooLong("cost identity: mode " + std::to_string(n) +
                             " decays too slowly to simulate");
      }
      const ModalState one = ModalState::single(n, a0(0), a0(1));
      const CostOptions co{1.0, 1e-6};
      double prev =
          run_cost_quadrature(simulate_decoupled(one, gains, params,
                                                 mc.horizon, dt),
                              weights, params, co);
      for (int h = 0; h < opts.max_halvings; ++h) {
        dt *= 0.5;
        const double next = run_cost_quadrature(
            simulate_decoupled(one, gains, params, mc.horizon, dt), weights,
            params, co);
        const double change = detail::relative_gap(prev, next);
        prev = next;
        if (change < opts.dt_change_tol) break;
      }
      mc.measured = prev;
      mc.dt = dt;
      mc.rel_error = detail::relative_gap(mc.measured, mc.predicted);
      rep.predicted += mc.predicted;
      rep.measured += mc.measured;
      rep.modes.push_back(mc);
    }
    rep.rel_error = detail::relative_gap(rep.measured, rep.predicted);
    return rep;
  }

  rep.c_mode = 0.25;
  for (const ModeSolution& s : sols) {
    const Eigen::Vector2d a0 = initial.mode(s.n.value());
    rep.predicted += rep.c_mode * s.riccati.quadratic_form(a0(0), a0(1));
  }
  if (initial.coeffs.isZero(0.0)) {
    return rep;
  }
  const Eigen::MatrixXd A = coupled_matrix(initial, gains, params,
                                           opts.coupled);
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  double slowest = std::numeric_limits<double>::infinity();
  double fastest = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    slowest = std::min(slowest, -es.eigenvalues()(i).real());
    fastest = std::max(fastest, std::abs(es.eigenvalues()(i)));
  }
  if (!(slowest > 0.0)) {
    rep.decayed = false;
    rep.measured = std::numeric_limits<double>::infinity();
    rep.rel_error = std::numeric_limits<double>::infinity();
    rep.note = "coupled closed loop is not Hurwitz (max Re = " +
               csv::format_double(-slowest) + ")";
    return rep;
  }
  const double horizon = opts.horizon_decays / slowest;
  const double dt = 2.0 * kPi / fastest / 16.0;
  if (horizon / dt > static_cast<double>(opts.coupled_max_steps)) {
    rep.decayed = false;
    rep.measured = std::numeric_limits<double>::quiet_NaN();
    rep.rel_error = std::numeric_limits<double>::quiet_NaN();
    rep.note = "coupled loop decays too slowly to simulate (slowest rate " +
               csv::format_double(slowest) + ")";
    return rep;
  }
  const Trajectory tr =
      evolve_coupled(initial, gains, params, opts.coupled, horizon, dt);
  try {
    rep.measured =
        run_cost_quadrature(tr, weights, params, CostOptions{rep.c_mode, 1e-6});
  } catch (const NotDecayed& e) {
    rep.decayed = false;
    rep.measured = std::numeric_limits<double>::quiet_NaN();
    rep.note = e.what();
  }
  rep.rel_error = detail::relative_gap(rep.measured, rep.predicted);
  return rep;
}

struct SpilloverMode {
  int n = 0;
  double max_abs_deviation = 0.0;  ///< max_t |a_coupled − a_decoupled|
  double max_abs_decoupled = 0.0;  ///< max_t |a_decoupled|
};

struct SpilloverReport {
  std::vector<SpilloverMode> modes;
  double horizon = 0.0;
  double dt = 0.0;
};

/// Mode-by-mode gap between coupled and decoupled evolution of the same
/// initial state.
inline SpilloverReport measure_spillover(const ModalState& initial,
                                         std::span<const ModalGain> gains,
                                         const BeamParams& params,
                                         const CoupledOptions& opts,
                                         double horizon, double dt) {
  const Trajectory dec =
      simulate_decoupled(initial, gains, params, horizon, dt);
  const Trajectory cpl =
      evolve_coupled(initial, gains, params, opts, horizon, dt);
  SpilloverReport rep;
  rep.horizon = horizon;
  rep.dt = plan_steps(horizon, dt).dt;
  for (int n = initial.first_mode; n <= initial.last_mode(); ++n) {
    SpilloverMode m;
    m.n = n;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      m.max_abs_deviation = std::max(
          m.max_abs_deviation, (cpl.mode(i, n) - dec.mode(i, n)).norm());
      m.max_abs_decoupled = std::max(m.max_abs_decoupled, dec.mode(i, n).norm());
    }
    rep.modes.push_back(m);
  }
  return rep;
}

enum class TrajectoryFormat { wide, long_format };

inline std::string trajectory_csv(const Trajectory& tr, TrajectoryFormat fmt) {
  if (fmt == TrajectoryFormat::long_format) {
    csv::Writer w({"t", "u", "mode", "a_pos", "a_vel"});
    for (std::size_t i = 0; i < tr.size(); ++i) {
      for (int n = tr.first_mode; n <= tr.last_mode(); ++n) {
        const Eigen::Vector2d a = tr.mode(i, n);
        w.field(tr.t[i]).field(tr.u[i]).field(n).field(a(0)).field(a(1));
        w.end_row();
      }
    }
    return w.str();
  }
  std::string header = "t,u";
  for (int n = tr.first_mode; n <= tr.last_mode(); ++n) {
    header += ",a" + std::to_string(n) + "_pos,a" + std::to_string(n) + "_vel";
  }
  csv::Writer w(header);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    w.field(tr.t[i]).field(tr.u[i]);
    for (int n = tr.first_mode; n <= tr.last_mode(); ++n) {
      const Eigen::Vector2d a = tr.mode(i, n);
      w.field(a(0)).field(a(1));
    }
    w.end_row();
  }
  return w.str();
}

/// Columns t,x,displacement,velocity for the given sample indices.
inline std::string field_csv(const Trajectory& tr,
                             std::span<const std::size_t> samples,
                             std::span<const double> x) {
  csv::Writer w({"t", "x", "displacement", "velocity"});
  for (std::size_t i : samples) {
    const Field f = reconstruct(tr.state(i), x);
    for (std::size_t j = 0; j < x.size(); ++j) {
      w.field(tr.t[i]).field(x[j]).field(f.displacement[j]).field(f.velocity[j]);
      w.end_row();
    }
  }
  return w.str();
}

}  // namespace beamlqr
