#pragma once

#include <Eigen/Dense>

#include "beamlqr/errors.hpp"

namespace beamlqr {

/// Solves Aᵀ X + X A + C = 0 for X by the Kronecker (vectorized) form.
/// Intended for the small systems of this library (n ≤ 8); cost is O(n⁶).
/// Throws IllConditioned when A has eigenvalue pairs with λᵢ + λⱼ ≈ 0.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& C) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || C.rows() != n || C.cols() != n) {
    throw InvalidInput("solve_lyapunov: dimension mismatch");
  }
  const Eigen::Index nn = n * n;
  // vec(AᵀX + XA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(X), column-major vec.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nn, nn);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = i + j * n;
      for (Eigen::Index k = 0; k < n; ++k) {
        L(row, k + j * n) += A(k, i);
        L(row, i + k * n) += A(k, j);
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw IllConditioned("solve_lyapunov: operator is singular");
  }
  const Eigen::VectorXd rhs =
      -Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(C).data(), nn);
  Eigen::VectorXd x = lu.solve(rhs);
  Eigen::MatrixXd X = Eigen::Map<Eigen::MatrixXd>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

/// Infinite-horizon cost ∫ xᵀ W x dt of ẋ = A x from x(0) = x0, A Hurwitz.
inline double quadratic_cost_to_go(const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& W,
                                   const Eigen::VectorXd& x0) {
  const Eigen::MatrixXd X = solve_lyapunov(A, W);
  return x0.dot(X * x0);
}

}  // namespace beamlqr
