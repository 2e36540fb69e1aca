#include "beamlqr/modal_riccati.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "oracles.hpp"

namespace beamlqr {
namespace {

constexpr double kPi2 = kPi * kPi;
constexpr double kPi4 = kPi2 * kPi2;

// Values of the n = 1, β = R = 1, Q = I problem from SciPy's
// solve_continuous_are (Schur method) on the same (F, G, Q, R).
constexpr double kUndampedP11 = 3.118118817698929e+01;
constexpr double kUndampedP12 = 5.131657036181202e-03;
constexpr double kUndampedP22 = 3.199391735506028e-01;
constexpr double kDampedP11 = 2.2837839833311868e+01;
constexpr double kDampedP12 = 5.1316570361830344e-03;
constexpr double kDampedP22 = 2.3427836496720292e-01;

double max_abs_diff(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Componentwise agreement scaled by the size of the solution.
double oracle_gap(const ModalRiccati& P, const Eigen::Matrix2d& X) {
  return max_abs_diff(P.matrix(), X) /
         std::max(1.0, X.cwiseAbs().maxCoeff());
}

TEST(ModeIndex, RejectsNonPositive) {
  EXPECT_THROW(ModeIndex(0), InvalidInput);
  EXPECT_THROW(ModeIndex(-3), InvalidInput);
  EXPECT_DOUBLE_EQ(ModeIndex(2).stiffness(), 16.0 * kPi4);
}

TEST(OpenLoopEigenvalues, UndampedModesArePureImaginary) {
  const EigenPair e1 = open_loop_eigenvalues(ModeIndex(1), 0.0);
  EXPECT_DOUBLE_EQ(e1.plus.real(), 0.0);
  EXPECT_NEAR(e1.plus.imag(), kPi2, 1e-12);
  EXPECT_NEAR(e1.minus.imag(), -kPi2, 1e-12);
  EXPECT_NEAR(e1.plus.imag(), 9.8696, 1e-4);

  const EigenPair e2 = open_loop_eigenvalues(ModeIndex(2), 0.0);
  EXPECT_NEAR(e2.plus.imag(), 4.0 * kPi2, 1e-11);
  EXPECT_NEAR(e2.plus.imag(), 39.478, 1e-3);
  EXPECT_EQ(e2.minus, std::conj(e2.plus));
}

TEST(OpenLoopEigenvalues, CriticalDampingGivesDoubleRoot) {
  const EigenPair e = open_loop_eigenvalues(ModeIndex(1), 2.0 * kPi2);
  EXPECT_NEAR(e.plus.real(), -kPi2, 1e-12);
  EXPECT_NEAR(e.minus.real(), -kPi2, 1e-12);
  EXPECT_EQ(e.plus.imag(), 0.0);
  EXPECT_EQ(e.minus.imag(), 0.0);
}

TEST(OpenLoopEigenvalues, MatchDenseSolverIncludingOverdamped) {
  for (double alpha : {0.0, 0.5, 3.0, 25.0, 400.0}) {
    for (int n = 1; n <= 6; ++n) {
      const EigenPair e = open_loop_eigenvalues(ModeIndex(n), alpha);
      const auto [l0, l1] =
          testing::eig_sorted(open_loop_matrix(ModeIndex(n), alpha));
      const double scale = std::abs(l0) + 1.0;
      EXPECT_LT(std::abs(e.plus - l0), 1e-12 * scale) << n << " " << alpha;
      EXPECT_LT(std::abs(e.minus - l1), 1e-12 * scale) << n << " " << alpha;
    }
  }
}

TEST(SolveModeRiccati, ZeroWeightGivesZeroSolutionAndGain) {
  for (const BeamParams p : {BeamParams{0.0, 1.0, 1.0},
                             BeamParams{2.0, 3.0, 0.1},
                             BeamParams{1.0, 0.0, 1.0}}) {
    const ModalRiccati P = solve_mode_riccati(ModeIndex(1), {}, p);
    EXPECT_TRUE(P.is_zero());
    const ModalGain K = mode_gain(P, ModeIndex(1), p);
    EXPECT_EQ(K.k1, 0.0);
    EXPECT_EQ(K.k2, 0.0);
  }
}

TEST(SolveModeRiccati, UndampedIdentityWeightMatchesReference) {
  const BeamParams p{0.0, 1.0, 1.0};
  const ModalRiccati P =
      solve_mode_riccati(ModeIndex(1), ModalWeight::identity(), p);
  EXPECT_NEAR(P.p12, kUndampedP12, 1e-12 * kUndampedP12);
  EXPECT_NEAR(P.p22, kUndampedP22, 1e-12);
  EXPECT_NEAR(P.p11, kUndampedP11, 1e-10);
  // Rounded values quoted for this case.
  EXPECT_NEAR(P.p12, 0.0051317, 1e-7);
  EXPECT_NEAR(P.p22, 0.31994, 1e-5);
  EXPECT_NEAR(P.p11, 31.1811, 1e-4);
  EXPECT_LT(P.residuals.max_relative(), 1e-12);
}

TEST(SolveModeRiccati, DampedIdentityWeightMatchesOracles) {
  const BeamParams p{1.0, 1.0, 1.0};
  const ModalRiccati P =
      solve_mode_riccati(ModeIndex(1), ModalWeight::identity(), p);
  Eigen::Matrix2d ref;
  ref << kDampedP11, kDampedP12, kDampedP12, kDampedP22;
  EXPECT_LT(max_abs_diff(P.matrix(), ref), 1e-10);

  const Eigen::Matrix2d care =
      care_oracle_for_mode(ModeIndex(1), ModalWeight::identity(), p);
  EXPECT_LT(max_abs_diff(P.matrix(), care), 1e-8);
}

TEST(SolveModeRiccati, RejectsUncontrollableWeightedMode) {
  EXPECT_THROW(solve_mode_riccati(ModeIndex(3), ModalWeight::identity(),
                                  BeamParams{0.5, 0.0, 1.0}),
               BetaZero);
}

TEST(SolveModeRiccati, NegativeDiscriminantOnIndefiniteWeight) {
  const BeamParams p{0.0, 1.0, 1.0};
  // a² + g q11 < 0 needs q11 < −π⁶.
  EXPECT_THROW(solve_mode_riccati(ModeIndex(1), {-2000.0, 0.0, 1.0}, p),
               NegativeDiscriminant);
  // Valid P12 = 0 branch, but q22 + 2 P12 < 0 with α = 0.
  EXPECT_THROW(solve_mode_riccati(ModeIndex(1), {0.0, 0.0, -1.0}, p),
               NegativeDiscriminant);
}

TEST(SolveModeRiccati, RejectsInvalidParams) {
  EXPECT_THROW(solve_mode_riccati(ModeIndex(1), ModalWeight::identity(),
                                  BeamParams{-1.0, 1.0, 1.0}),
               InvalidInput);
  EXPECT_THROW(solve_mode_riccati(ModeIndex(1), ModalWeight::identity(),
                                  BeamParams{0.0, 1.0, 0.0}),
               InvalidInput);
}

TEST(RiccatiResiduals, ZeroSolutionZeroWeight) {
  const RiccatiResiduals r =
      riccati_residuals({}, ModeIndex(4), {}, BeamParams{});
  EXPECT_EQ(r.max_abs(), 0.0);
}

TEST(RiccatiResiduals, PerturbingP12ShiftsEq11ByPolynomialIdentity) {
  const BeamParams p{0.3, 1.7, 0.6};
  const ModalWeight q{2.0, 0.4, 0.9};
  for (int n : {1, 2, 5}) {
    const ModeIndex m(n);
    ModalRiccati P = solve_mode_riccati(m, q, p);
    const double base = riccati_residuals(P, m, q, p).eq11;
    const double p12 = P.p12;
    P.p12 += 1.0;
    const double shifted = riccati_residuals(P, m, q, p).eq11;
    const double g = m.wavenumber_sq() * p.gamma_sq();
    const double expected = -2.0 * m.stiffness() - g * (2.0 * p12 + 1.0);
    EXPECT_NEAR(shifted - base, expected, 1e-12 * std::abs(expected));
  }
}

TEST(RiccatiResiduals, SymmetricEquationsAgree) {
  const BeamParams p{0.5, 1.0, 10.0};
  const ModalRiccati P = solve_mode_riccati(ModeIndex(7), {1.0, 0.3, 0.5}, p);
  EXPECT_EQ(P.residuals.eq12, P.residuals.eq21);
}

TEST(ModeGain, IdentityWeightExample) {
  const BeamParams p{0.0, 1.0, 1.0};
  const ModalRiccati P =
      solve_mode_riccati(ModeIndex(1), ModalWeight::identity(), p);
  const ModalGain K = mode_gain(P, ModeIndex(1), p);
  EXPECT_NEAR(K.k1, -0.01612157604560923, 1e-13);
  EXPECT_NEAR(K.k2, -1.0051185572221637, 1e-12);
  EXPECT_NEAR(K.k1, -0.016122, 1e-6);
  EXPECT_NEAR(K.k2, -1.005118, 1e-6);
}

TEST(ModeGain, DoublingBetaAndQuadruplingRHalvesGain) {
  const ModalWeight q{0.7, -0.2, 1.3};
  const BeamParams base{0.4, 1.0, 1.0};
  const BeamParams scaled{0.4, 2.0, 4.0};
  for (int n : {1, 3, 9}) {
    const ModeIndex m(n);
    const ModalRiccati P1 = solve_mode_riccati(m, q, base);
    const ModalRiccati P2 = solve_mode_riccati(m, q, scaled);
    EXPECT_EQ(base.gamma_sq(), scaled.gamma_sq());
    EXPECT_EQ(P1.matrix(), P2.matrix());
    const ModalGain K1 = mode_gain(P1, m, base);
    const ModalGain K2 = mode_gain(P2, m, scaled);
    EXPECT_DOUBLE_EQ(K2.k1, 0.5 * K1.k1);
    EXPECT_DOUBLE_EQ(K2.k2, 0.5 * K1.k2);
  }
}

TEST(ClosedLoopMatrix, ZeroGainIsOpenLoop) {
  for (int n : {1, 4}) {
    EXPECT_EQ(closed_loop_matrix(ModeIndex(n), BeamParams{0.3, 1.0, 1.0}, {}),
              open_loop_matrix(ModeIndex(n), 0.3));
  }
}

TEST(ClosedLoopMatrix, IdentityWeightExample) {
  const BeamParams p{0.0, 1.0, 1.0};
  const ModalRiccati P =
      solve_mode_riccati(ModeIndex(1), ModalWeight::identity(), p);
  const Eigen::Matrix2d M =
      closed_loop_matrix(ModeIndex(1), p, mode_gain(P, ModeIndex(1), p));
  EXPECT_EQ(M(0, 0), 0.0);
  EXPECT_EQ(M(0, 1), 1.0);
  EXPECT_NEAR(M(1, 0), -97.45973845887158, 1e-10);
  EXPECT_NEAR(M(1, 1), -3.1576730753559215, 1e-12);
  // Algebraic form in terms of P.
  const double g = kPi2 * p.gamma_sq();
  EXPECT_NEAR(M(1, 0), -kPi4 - g * P.p12, 1e-12);
  EXPECT_NEAR(M(1, 1), -g * P.p22, 1e-14);
}

TEST(ClosedLoopEigenvalues, IdentityWeightExample) {
  const BeamParams p{0.0, 1.0, 1.0};
  const ModalRiccati P =
      solve_mode_riccati(ModeIndex(1), ModalWeight::identity(), p);
  const EigenPair mu = closed_loop_eigenvalues(ModeIndex(1), p, P);
  EXPECT_NEAR(mu.plus.real(), -1.5788365376779607, 1e-12);
  EXPECT_NEAR(mu.plus.imag(), 9.745102033645654, 1e-12);
  EXPECT_EQ(mu.minus, std::conj(mu.plus));
}

TEST(ClosedLoopEigenvalues, ZeroWeightKeepsOpenLoopSpectrum) {
  const BeamParams p{0.0, 1.0, 1.0};
  const EigenPair mu = closed_loop_eigenvalues(ModeIndex(1), p, {});
  EXPECT_EQ(mu.plus.real(), 0.0);
  EXPECT_NEAR(mu.plus.imag(), kPi2, 1e-12);
}

TEST(CareOracle, ZeroWeightWithHurwitzDynamicsIsZero) {
  Eigen::Matrix2d F;
  F << -1.0, 0.5, 0.0, -2.0;
  EXPECT_TRUE(care_oracle(F, {0.0, 1.0}, Eigen::Matrix2d::Zero(), 1.0)
                  .isZero(0.0));
}

TEST(CareOracle, ZeroWeightUndampedIsZero) {
  const Eigen::Matrix2d P =
      care_oracle(open_loop_matrix(ModeIndex(1), 0.0), {0.0, kPi},
                  Eigen::Matrix2d::Zero(), 1.0);
  EXPECT_TRUE(P.isZero(0.0));
}

TEST(CareOracle, UndampedModeMatchesClosedForm) {
  Eigen::Matrix2d F;
  F << 0.0, 1.0, -kPi4, 0.0;
  const Eigen::Matrix2d X =
      care_oracle(F, {0.0, kPi}, Eigen::Matrix2d::Identity(), 1.0);
  const ModalRiccati P = solve_mode_riccati(
      ModeIndex(1), ModalWeight::identity(), BeamParams{0.0, 1.0, 1.0});
  EXPECT_LT(max_abs_diff(P.matrix(), X), 1e-8);
}

TEST(CareOracle, UncontrollableUndampedModeIsNotStabilizable) {
  EXPECT_THROW(care_oracle(open_loop_matrix(ModeIndex(1), 0.0), {0.0, 0.0},
                           Eigen::Matrix2d::Identity(), 1.0),
               NotStabilizable);
}

TEST(CareOracle, GenericSystemSatisfiesCare) {
  Eigen::Matrix2d A;
  A << -3.0, 2.0, 1.0, 1.0;
  Eigen::Matrix2d Q = 3.0 * Eigen::Matrix2d::Identity();
  const Eigen::Vector2d B(0.0, 1.0);
  const Eigen::Matrix2d X = care_oracle(A, B, Q, 3.0);
  const Eigen::Matrix2d res =
      A.transpose() * X + X * A - X * B * B.transpose() * X / 3.0 + Q;
  EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-10 * (1.0 + 3.0));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(X);
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
}

TEST(CareOracle, AgreesWithNewtonKleinmanReference) {
  testing::PsdSampler sample(7);
  for (double alpha : {0.0, 0.5, 2.0}) {
    for (int n : {1, 2, 5, 17}) {
      const ModeIndex m(n);
      for (int i = 0; i < 20; ++i) {
        const Eigen::Matrix2d Q = sample() + 1e-3 * Eigen::Matrix2d::Identity();
        const BeamParams p{alpha, 1.0, 1.0};
        const Eigen::Matrix2d F = open_loop_matrix(m, alpha);
        const Eigen::Vector2d G = input_matrix(m, p);
        // u = −(0, 1/G₂) x adds unit velocity damping: stabilizing start.
        const Eigen::Matrix2d ref = testing::care_newton(
            F, G, Q, p.R, Eigen::RowVector2d(0.0, 1.0 / G(1)));
        const Eigen::Matrix2d X = care_oracle(F, G, Q, p.R);
        EXPECT_LT(max_abs_diff(X, ref) / std::max(1.0, ref.norm()), 1e-9)
            << "n=" << n << " alpha=" << alpha;
      }
    }
  }
}

struct SweepCase {
  double alpha;
  double R;
};

class ModalSweep : public ::testing::TestWithParam<SweepCase> {};

TEST_P(ModalSweep, ClosedFormInvariants) {
  const auto [alpha, R] = GetParam();
  const BeamParams p{alpha, 1.0, R};
  testing::PsdSampler sample(1234);
  double worst_res = 0.0, worst_gap = 0.0, worst_eig = 0.0;
  for (int n = 1; n <= 64; ++n) {
    const ModeIndex m(n);
    for (int i = 0; i < 200; ++i) {
      const ModalWeight q = ModalWeight::from_matrix(sample());
      const ModalRiccati P = solve_mode_riccati(m, q, p);
      worst_res = std::max(worst_res, P.residuals.max_relative());
      EXPECT_EQ(P.residuals.eq12, P.residuals.eq21);

      // Nonnegative definite, nonnegative roots.
      const double scale = std::max(1.0, P.matrix().cwiseAbs().maxCoeff());
      EXPECT_GE(P.p12, 0.0);
      EXPECT_GE(P.p22, 0.0);
      EXPECT_GE(P.p11 + P.p22, 0.0);
      EXPECT_GE(P.matrix().determinant(), -1e-12 * scale * scale);

      if (n % 8 == 1 && i % 10 == 0) {
        const Eigen::Matrix2d X = care_oracle_for_mode(m, q, p);
        worst_gap = std::max(worst_gap, oracle_gap(P, X));
      }

      const EigenPair mu = closed_loop_eigenvalues(m, p, P);
      const Eigen::Matrix2d M = closed_loop_matrix(m, p, mode_gain(P, m, p));
      const auto [l0, l1] = testing::eig_sorted(M);
      const double mag = std::abs(l0);
      worst_eig = std::max(
          {worst_eig, std::abs(mu.plus - l0) / mag,
           std::abs(mu.minus - l1) / mag});

      const double g = m.wavenumber_sq() * p.gamma_sq();
      const double prod = m.stiffness() + g * P.p12;
      const double sum = -(alpha + g * P.p22);
      EXPECT_NEAR((mu.plus * mu.minus).real(), prod, 1e-10 * prod);
      EXPECT_NEAR((mu.plus + mu.minus).real(), sum,
                  1e-10 * std::max(std::abs(sum), 1e-300));
      if (alpha > 0.0 || q.is_positive_definite()) {
        EXPECT_LT(mu.plus.real(), 0.0);
        EXPECT_LT(mu.minus.real(), 0.0);
      }
    }
  }
  EXPECT_LE(worst_res, 1e-9);
  EXPECT_LE(worst_gap, 1e-8);
  EXPECT_LE(worst_eig, 1e-10);
  RecordProperty("worst_residual", std::to_string(worst_res));
  RecordProperty("worst_oracle_gap", std::to_string(worst_gap));
}

INSTANTIATE_TEST_SUITE_P(
    Params, ModalSweep,
    ::testing::Values(SweepCase{0.0, 0.1}, SweepCase{0.0, 1.0},
                      SweepCase{0.0, 10.0}, SweepCase{0.5, 1.0},
                      SweepCase{2.0, 0.1}, SweepCase{2.0, 10.0}));

TEST(ModalRiccatiProperties, ZeroWeightKeepsOpenLoopSpectrumExactly) {
  for (double alpha : {0.0, 0.5, 2.0}) {
    for (int n = 1; n <= 64; ++n) {
      const BeamParams p{alpha, 1.0, 1.0};
      const ModeIndex m(n);
      const ModalRiccati P = solve_mode_riccati(m, {}, p);
      const EigenPair cl = closed_loop_eigenvalues(m, p, P);
      const EigenPair ol = open_loop_eigenvalues(m, alpha);
      EXPECT_EQ(cl.plus, ol.plus);
      EXPECT_EQ(cl.minus, ol.minus);
    }
  }
}

TEST(ModalRiccatiProperties, P22MonotoneInQ22) {
  testing::PsdSampler sample(99);
  for (double alpha : {0.0, 1.0}) {
    for (int n : {1, 3, 10, 40}) {
      const BeamParams p{alpha, 1.0, 1.0};
      for (int i = 0; i < 50; ++i) {
        ModalWeight q = ModalWeight::from_matrix(sample());
        double prev = solve_mode_riccati(ModeIndex(n), q, p).p22;
        for (int step = 0; step < 10; ++step) {
          q.q22 += 0.25 * (step + 1);
          const double next = solve_mode_riccati(ModeIndex(n), q, p).p22;
          EXPECT_GE(next, prev);
          prev = next;
        }
      }
    }
  }
}

TEST(ModalRiccatiProperties, FormulaEigenvaluesMatchMatrixEigenvalues) {
  testing::PsdSampler sample(5);
  for (double alpha : {0.0, 0.5, 2.0}) {
    for (int n = 1; n <= 64; n += 3) {
      const BeamParams p{alpha, 1.0, 1.0};
      const ModeIndex m(n);
      const ModalRiccati P =
          solve_mode_riccati(m, ModalWeight::from_matrix(sample()), p);
      const EigenPair a = closed_loop_eigenvalues(m, p, P);
      const EigenPair b = closed_loop_eigenvalues_formula(m, p, P);
      const double mag = std::abs(a.plus);
      EXPECT_LT(std::abs(a.plus - b.plus), 1e-10 * mag);
      EXPECT_LT(std::abs(a.minus - b.minus), 1e-10 * mag);
    }
  }
}

}  // namespace
}  // namespace beamlqr
