// SPDX-License-Identifier: MIT
#pragma once

/// @file common.hpp
/// Shared scalar/matrix aliases and error helpers for the tpemimo library.

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tpemimo {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

/// Thrown for invalid arguments and violated numerical contracts alike; the
/// message carries the failed condition.
[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error("tpemimo: " + msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

/// Largest absolute imaginary component of a complex matrix/vector, used to
/// check quantities that must be real up to roundoff before discarding the
/// imaginary part.
inline double max_imag(const MatC& a) {
  return a.imag().cwiseAbs().maxCoeff();
}

}  // namespace tpemimo
