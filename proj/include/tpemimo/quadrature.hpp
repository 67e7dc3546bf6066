// SPDX-License-Identifier: MIT
#pragma once

/// @file quadrature.hpp
/// Gauss-Legendre quadrature rules (Golub-Welsch construction).

#include <Eigen/Dense>

#include "tpemimo/common.hpp"

namespace tpemimo {

/// Nodes/weights of an n-point rule on [-1, 1].
struct Quadrature {
  VecR nodes;
  VecR weights;
};

/// n-point Gauss-Legendre rule via eigendecomposition of the Jacobi matrix:
/// nodes are its eigenvalues, weights are 2*(first eigenvector component)^2.
inline Quadrature gauss_legendre(int n) {
  require(n >= 1, "gauss_legendre: need n >= 1");
  MatR jacobi = MatR::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatR> es(jacobi);
  require(es.info() == Eigen::Success, "gauss_legendre: eigensolver failed");
  Quadrature q;
  q.nodes = es.eigenvalues();
  q.weights = 2.0 * es.eigenvectors().row(0).array().square();
  return q;
}

/// Shared 512-point rule used for all covariance integrals.
inline const Quadrature& gauss_legendre_512() {
  static const Quadrature q = gauss_legendre(512);
  return q;
}

}  // namespace tpemimo
