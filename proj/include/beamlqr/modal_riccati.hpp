#pragma once

// Closed-form LQR synthesis for the 2x2 modal subsystems of the boundary
// controlled Euler-Bernoulli beam
//
//   d/dt [a1; a2] = [0, 1; -n⁴π⁴, -α] [a1; a2] + [0; nπβ] u,
//
// plus an independent Hamiltonian-eigenvector CARE solver used to cross-check
// the closed forms.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "beamlqr/errors.hpp"
#include "beamlqr/lyapunov.hpp"

namespace beamlqr {

inline constexpr double kPi = std::numbers::pi;

/// Spatial frequency index, n ≥ 1. The paired eigenvalue branches ±n of a
/// mode are carried by EigenPair rather than by signed indices.
class ModeIndex {
 public:
  explicit ModeIndex(int n) : n_(n) {
    if (n < 1) {
      throw InvalidInput("mode index must be >= 1, got " + std::to_string(n));
    }
  }

  [[nodiscard]] int value() const { return n_; }
  /// nπ
  [[nodiscard]] double wavenumber() const { return n_ * kPi; }
  /// n²π²
  [[nodiscard]] double wavenumber_sq() const {
    const double k = wavenumber();
    return k * k;
  }
  /// n⁴π⁴, the open-loop stiffness of the mode.
  [[nodiscard]] double stiffness() const {
    const double k2 = wavenumber_sq();
    return k2 * k2;
  }

  friend bool operator==(ModeIndex, ModeIndex) = default;
  friend auto operator<=>(ModeIndex, ModeIndex) = default;

 private:
  int n_;
};

struct BeamParams {
  double alpha = 0.0;  ///< damping, α ≥ 0
  double beta = 1.0;   ///< control influence scale
  double R = 1.0;      ///< control weight, R > 0

  /// γ² = β²/R
  [[nodiscard]] double gamma_sq() const { return beta * beta / R; }

  void validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) {
      throw InvalidInput("beam.alpha must be finite and >= 0");
    }
    if (!std::isfinite(beta)) {
      throw InvalidInput("beam.beta must be finite");
    }
    if (!std::isfinite(R) || R <= 0.0) {
      throw InvalidInput("beam.R must be finite and > 0");
    }
  }
};

/// Symmetric 2x2 state weight of one spatial frequency.
struct ModalWeight {
  double q11 = 0.0;
  double q12 = 0.0;
  double q22 = 0.0;

  [[nodiscard]] Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << q11, q12, q12, q22;
    return m;
  }

  [[nodiscard]] bool is_zero() const {
    return q11 == 0.0 && q12 == 0.0 && q22 == 0.0;
  }

  /// Largest absolute entry.
  [[nodiscard]] double norm() const {
    return std::max({std::abs(q11), std::abs(q12), std::abs(q22)});
  }

  [[nodiscard]] bool is_psd(double tol = 0.0) const {
    const double scale = std::max(1.0, norm());
    return q11 >= -tol * scale && q22 >= -tol * scale &&
           q11 * q22 - q12 * q12 >= -tol * scale * scale;
  }

  [[nodiscard]] bool is_positive_definite() const {
    return q11 > 0.0 && q11 * q22 - q12 * q12 > 0.0;
  }

  [[nodiscard]] ModalWeight scaled(double s) const {
    return {s * q11, s * q12, s * q22};
  }

  static ModalWeight identity() { return {1.0, 0.0, 1.0}; }
  static ModalWeight from_matrix(const Eigen::Matrix2d& m) {
    return {m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), m(1, 1)};
  }
};

/// Left-minus-right values of the four modal Riccati equations, i.e. the
/// entries (1,1), (1,2), (2,1), (2,2) of FᵀP + PF − PGR⁻¹GᵀP + Q.
struct RiccatiResiduals {
  double eq11 = 0.0;
  double eq12 = 0.0;
  double eq21 = 0.0;
  double eq22 = 0.0;
  /// 1 + ‖q‖ + largest magnitude of any individual term in the equations.
  double scale = 1.0;

  [[nodiscard]] double max_abs() const {
    return std::max({std::abs(eq11), std::abs(eq12), std::abs(eq21),
                     std::abs(eq22)});
  }
  [[nodiscard]] double max_relative() const { return max_abs() / scale; }
};

/// Symmetric 2x2 modal Riccati solution with its residual diagnostics.
struct ModalRiccati {
  double p11 = 0.0;
  double p12 = 0.0;
  double p22 = 0.0;
  RiccatiResiduals residuals{};

  [[nodiscard]] Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << p11, p12, p12, p22;
    return m;
  }

  [[nodiscard]] bool is_zero() const {
    return p11 == 0.0 && p12 == 0.0 && p22 == 0.0;
  }

  /// a0ᵀ P a0
  [[nodiscard]] double quadratic_form(double pos, double vel) const {
    return p11 * pos * pos + 2.0 * p12 * pos * vel + p22 * vel * vel;
  }
};

/// Row gain acting on a mode's (position, velocity) pair.
struct ModalGain {
  double k1 = 0.0;
  double k2 = 0.0;

  [[nodiscard]] double apply(double pos, double vel) const {
    return k1 * pos + k2 * vel;
  }
  [[nodiscard]] Eigen::RowVector2d row() const { return {k1, k2}; }
};

/// Eigenvalues of the ±n branches of one mode. `plus` has nonnegative
/// imaginary part when the pair is complex.
struct EigenPair {
  std::complex<double> plus;
  std::complex<double> minus;
};

namespace detail {

/// Roots of λ² − trace·λ + det = 0, computed without cancellation.
inline EigenPair quadratic_roots(double trace, double det) {
  const double half = 0.5 * trace;
  const double disc = half * half - det;
  if (disc < 0.0) {
    const double im = std::sqrt(-disc);
    return {{half, im}, {half, -im}};
  }
  const double root = std::sqrt(disc);
  const double big = half + std::copysign(root, half);
  if (big == 0.0) {
    return {{0.0, 0.0}, {0.0, 0.0}};
  }
  const double small = det / big;
  if (half >= 0.0) {
    return {{big, 0.0}, {small, 0.0}};
  }
  return {{small, 0.0}, {big, 0.0}};
}

}  // namespace detail

/// Eigenvalues of the open-loop mode, (−α ± √(α² − 4n⁴π⁴)) / 2.
inline EigenPair open_loop_eigenvalues(ModeIndex n, double alpha) {
  if (!(alpha >= 0.0)) {
    throw InvalidInput("open_loop_eigenvalues: alpha must be >= 0");
  }
  return detail::quadratic_roots(-alpha, n.stiffness());
}

/// Open-loop matrix F = [0, 1; −n⁴π⁴, −α].
inline Eigen::Matrix2d open_loop_matrix(ModeIndex n, double alpha) {
  Eigen::Matrix2d F;
  F << 0.0, 1.0, -n.stiffness(), -alpha;
  return F;
}

/// Input column G = [0; nπβ].
inline Eigen::Vector2d input_matrix(ModeIndex n, const BeamParams& params) {
  return {0.0, n.wavenumber() * params.beta};
}

inline RiccatiResiduals riccati_residuals(const ModalRiccati& P, ModeIndex n,
                                          const ModalWeight& q,
                                          const BeamParams& params) {
  const double a = n.stiffness();
  const double g = n.wavenumber_sq() * params.gamma_sq();
  const double al = params.alpha;

  // P₂₁ = P₁₂, so the (1,2) and (2,1) equations share every term.
  const double cross = P.p12 * P.p22;
  RiccatiResiduals r;
  r.eq11 = -2.0 * a * P.p12 + q.q11 - g * P.p12 * P.p12;
  r.eq12 = P.p11 - a * P.p22 - al * P.p12 + q.q12 - g * cross;
  r.eq21 = P.p11 - a * P.p22 - al * P.p12 + q.q12 - g * cross;
  r.eq22 = 2.0 * P.p12 - 2.0 * al * P.p22 + q.q22 - g * P.p22 * P.p22;

  const double terms = std::max(
      {std::abs(2.0 * a * P.p12), std::abs(g * P.p12 * P.p12),
       std::abs(P.p11), std::abs(a * P.p22), std::abs(al * P.p12),
       std::abs(g * P.p12 * P.p22), std::abs(2.0 * P.p12),
       std::abs(2.0 * al * P.p22), std::abs(g * P.p22 * P.p22)});
  r.scale = 1.0 + q.norm() + terms;
  return r;
}

/// Closed-form stabilizing solution of the modal Riccati equations.
///
/// P₁₂ is the positive root of the (1,1) equation, P₂₂ the positive root of
/// the (2,2) equation given P₁₂, and P₁₁ follows from the (1,2) equation. Both roots are evaluated in rationalized form,
/// q / (b + √(b² + g q)), which is free of cancellation for large n.
inline ModalRiccati solve_mode_riccati(ModeIndex n, const ModalWeight& q,
                                       const BeamParams& params) {
  params.validate();
  ModalRiccati P;
  if (q.is_zero()) {
    P.residuals = riccati_residuals(P, n, q, params);
    return P;
  }
  if (params.beta == 0.0) {
    throw BetaZero("mode " + std::to_string(n.value()) +
                   ": beta = 0 leaves a weighted mode uncontrollable");
  }

  const double a = n.stiffness();
  const double g = n.wavenumber_sq() * params.gamma_sq();
  const double al = params.alpha;

  const double disc12 = a * a + g * q.q11;
  if (disc12 < 0.0) {
    throw NegativeDiscriminant("mode " + std::to_string(n.value()) +
                               ": negative discriminant for P12");
  }
  P.p12 = q.q11 / (a + std::sqrt(disc12));

  const double s = q.q22 + 2.0 * P.p12;
  const double disc22 = al * al + g * s;
  if (disc22 < 0.0) {
    throw NegativeDiscriminant("mode " + std::to_string(n.value()) +
                               ": negative discriminant for P22");
  }
  const double denom = al + std::sqrt(disc22);
  P.p22 = denom > 0.0 ? s / denom : 0.0;

  P.p11 = al * P.p12 + a * P.p22 - q.q12 + g * P.p12 * P.p22;
  P.residuals = riccati_residuals(P, n, q, params);
  return P;
}

/// K = −R⁻¹ Gᵀ P with G = [0; nπβ].
inline ModalGain mode_gain(const ModalRiccati& P, ModeIndex n,
                           const BeamParams& params) {
  const double c = -n.wavenumber() * params.beta / params.R;
  return {c * P.p12, c * P.p22};
}

/// F + G K for the mode.
inline Eigen::Matrix2d closed_loop_matrix(ModeIndex n, const BeamParams& params,
                                          const ModalGain& K) {
  const double b = n.wavenumber() * params.beta;
  Eigen::Matrix2d M;
  M << 0.0, 1.0, -n.stiffness() + b * K.k1, -params.alpha + b * K.k2;
  return M;
}

/// Eigenvalues of an arbitrary real 2x2 matrix.
inline EigenPair eigenvalues_2x2(const Eigen::Matrix2d& M) {
  return detail::quadratic_roots(M.trace(), M.determinant());
}

/// Closed-loop eigenvalues, taken from the assembled closed-loop matrix.
inline EigenPair closed_loop_eigenvalues(ModeIndex n, const BeamParams& params,
                                         const ModalRiccati& P) {
  return eigenvalues_2x2(
      closed_loop_matrix(n, params, mode_gain(P, n, params)));
}

/// Direct evaluation of the textbook closed-loop eigenvalue formula
///   μ = −(α + n²π²γ²P₂₂)/2 ± √((α + n²π²γ²P₂₂)² − 4(n⁴π⁴ + n²π²γ²P₁₂))/2.
/// Kept as a cross-check of closed_loop_eigenvalues; not cancellation-safe.
inline EigenPair closed_loop_eigenvalues_formula(ModeIndex n,
                                                 const BeamParams& params,
                                                 const ModalRiccati& P) {
  const double g = n.wavenumber_sq() * params.gamma_sq();
  const double damp = params.alpha + g * P.p22;
  const double stiff = n.stiffness() + g * P.p12;
  const std::complex<double> root =
      std::sqrt(std::complex<double>(damp * damp - 4.0 * stiff, 0.0));
  return {-0.5 * damp + 0.5 * root, -0.5 * damp - 0.5 * root};
}

struct CareOptions {
  int max_newton_passes = 6;
  double singular_tol = 1e-12;
};

/// Stabilizing nonnegative solution of Fᵀ P + P F − P G R⁻¹ Gᵀ P + Q = 0.
///
/// The stable invariant subspace of the balanced Hamiltonian matrix gives a
/// first solution, which Newton-Kleinman passes then refine. Q = 0 returns
/// the minimal nonnegative solution P = 0 even when F is only marginally
/// stable.
inline Eigen::Matrix2d care_oracle(const Eigen::Matrix2d& F,
                                   const Eigen::Vector2d& G,
                                   const Eigen::Matrix2d& Q, double R,
                                   const CareOptions& opts = {}) {
  if (!(R > 0.0)) {
    throw InvalidInput("care_oracle: R must be > 0");
  }
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
    throw InvalidInput("care_oracle: Q must be symmetric");
  }
  if (Q.isZero(0.0)) {
    return Eigen::Matrix2d::Zero();
  }

  // Diagonal similarity x = S x̃ equalizing |F₁₂| and |F₂₁|.
  Eigen::Vector2d s(1.0, 1.0);
  if (F(0, 1) != 0.0 && F(1, 0) != 0.0) {
    s(1) = std::sqrt(std::abs(F(1, 0)) / std::abs(F(0, 1)));
  }
  const Eigen::Matrix2d S = s.asDiagonal();
  const Eigen::Matrix2d Sinv = s.cwiseInverse().asDiagonal();
  const Eigen::Matrix2d Fs = Sinv * F * S;
  const Eigen::Vector2d Gs = Sinv * G;
  const Eigen::Matrix2d Qs = S * Q * S;
  const Eigen::Matrix2d GRG = Gs * Gs.transpose() / R;

  Eigen::Matrix4d H;
  H << Fs, -GRG, -Qs, -Fs.transpose();

  Eigen::ComplexEigenSolver<Eigen::Matrix4d> es(H);
  if (es.info() != Eigen::Success) {
    throw IllConditioned("care_oracle: Hamiltonian eigensolver failed");
  }
  const double hnorm = H.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::Matrix<std::complex<double>, 4, 2> U;
  int stable = 0;
  for (int i = 0; i < 4; ++i) {
    const double re = es.eigenvalues()(i).real();
    if (re < -1e-13 * hnorm) {
      if (stable == 2) {
        throw NotStabilizable("care_oracle: too many stable eigenvalues");
      }
      U.col(stable++) = es.eigenvectors().col(i);
    }
  }
  if (stable != 2) {
    throw NotStabilizable(
        "care_oracle: Hamiltonian has eigenvalues on the imaginary axis");
  }
  const Eigen::Matrix2cd U1 = U.topRows<2>();
  const Eigen::Matrix2cd U2 = U.bottomRows<2>();
  Eigen::FullPivLU<Eigen::Matrix2cd> lu(U1);
  if (lu.rcond() < opts.singular_tol) {
    throw IllConditioned("care_oracle: stable subspace basis is singular");
  }
  Eigen::Matrix2d Ps = (U2 * lu.inverse()).real();
  Ps = 0.5 * (Ps + Ps.transpose());

  auto care_residual = [&](const Eigen::Matrix2d& X) {
    return (Fs.transpose() * X + X * Fs - X * GRG * X + Qs)
        .cwiseAbs()
        .maxCoeff();
  };

  double best = care_residual(Ps);
  for (int pass = 0; pass < opts.max_newton_passes && best > 0.0; ++pass) {
    const Eigen::RowVector2d K = Gs.transpose() * Ps / R;
    const Eigen::Matrix2d Ac = Fs - Gs * K;
    Eigen::Matrix2d next;
    try {
      next = solve_lyapunov(Ac, Qs + K.transpose() * R * K);
    } catch (const IllConditioned&) {
      break;
    }
    const double res = care_residual(next);
    if (!(res < best)) {
      break;
    }
    best = res;
    Ps = next;
  }

  const Eigen::Matrix2d Ac = Fs - Gs * (Gs.transpose() * Ps / R);
  const EigenPair cl = eigenvalues_2x2(Ac);
  if (!(std::max(cl.plus.real(), cl.minus.real()) < 0.0)) {
    throw NotStabilizable("care_oracle: closed loop is not Hurwitz");
  }
  return Sinv * Ps * Sinv;
}

/// Convenience: the modal CARE data (F, G, Q, R) fed to care_oracle.
inline Eigen::Matrix2d care_oracle_for_mode(ModeIndex n, const ModalWeight& q,
                                            const BeamParams& params,
                                            const CareOptions& opts = {}) {
  return care_oracle(open_loop_matrix(n, params.alpha),
                     input_matrix(n, params), q.matrix(), params.R, opts);
}

}  // namespace beamlqr
