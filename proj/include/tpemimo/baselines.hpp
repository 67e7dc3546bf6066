// SPDX-License-Identifier: MIT
#pragma once

/// @file baselines.hpp
/// Reference precoders and detectors: conjugate beamforming, the exact MMSE
/// receiver, regularized zero-forcing via Householder-QR inversion, and the
/// single-weight-vector polynomial competitor with pathloss-only knowledge.

#include <vector>

#include <Eigen/Dense>

#include "tpemimo/asymptotics.hpp"
#include "tpemimo/common.hpp"
#include "tpemimo/tpe.hpp"

namespace tpemimo {

/// Matched-filter columns v_k = h_k / ‖h_k‖.
inline MatC conj_bf(const MatC& h) {
  MatC v = h;
  for (int k = 0; k < v.cols(); ++k) {
    const double norm = v.col(k).norm();
    require(norm > 0.0, "conj_bf: zero channel column");
    v.col(k) /= norm;
  }
  return v;
}

struct MmseResult {
  MatC v;     ///< unit-norm receive vectors, M×K
  VecR sinr;  ///< closed-form SINR per user
};

/// SINR-maximizing receive vectors through the Gram-matrix form
/// v_k ∝ H (GPG + νG)^{-1} g_k and the closed-form SINR τ/(1-τ) with
/// τ_k = p_k g_k^H (GPG + νG)^{-1} g_k.
inline MmseResult mmse_receiver(const MatC& h, const VecR& p, double nu) {
  const int k_dim = int(h.cols());
  require(p.size() == k_dim, "mmse_receiver: power vector length");
  require(nu > 0.0, "mmse_receiver: noise level must be positive");
  const MatC gram = h.adjoint() * h;
  const MatC system =
      gram * p.cast<cplx>().asDiagonal() * gram + nu * gram;
  Eigen::LDLT<MatC> ldlt(system);
  require(ldlt.info() == Eigen::Success, "mmse_receiver: singular system");
  const MatC solved = ldlt.solve(gram);  // column k = (GPG+νG)^{-1} g_k
  MmseResult out;
  out.v = h * solved;
  out.sinr.resize(k_dim);
  for (int k = 0; k < k_dim; ++k) {
    const double norm = out.v.col(k).norm();
    require(norm > 0.0, "mmse_receiver: degenerate direction");
    out.v.col(k) /= norm;
    const cplx tau_c = (gram.col(k).adjoint() * solved.col(k))(0, 0);
    require(std::abs(tau_c.imag()) <=
                1e-10 * std::max(1.0, std::abs(tau_c.real())),
            "mmse_receiver: quadratic form not real");
    const double tau = p(k) * tau_c.real();
    require(tau < 1.0, "mmse_receiver: nonphysical SINR form");
    out.sinr(k) = tau / (1.0 - tau);
  }
  return out;
}

/// Inverse of a Hermitian positive-definite K×K matrix by Householder QR:
/// reflector construction (σ, α, μ, φ, ζ), column-zeroing updates, reflector
/// accumulation, then back substitution of R X = Q.
inline MatC qrh_invert(const MatC& g) {
  const int k_dim = int(g.rows());
  require(g.cols() == k_dim, "qrh_invert: matrix must be square");
  MatC r = g;
  MatC q = MatC::Identity(k_dim, k_dim);
  for (int k = 0; k + 1 < k_dim; ++k) {
    const int tail = k_dim - k - 1;
    const double sigma = r.col(k).segment(k + 1, tail).squaredNorm();
    const double alpha = std::norm(r(k, k));
    require(alpha > 0.0, "qrh_invert: zero pivot");
    // mu = 1 + sqrt(1 + sigma/alpha) shifts the pivot along its own phase,
    // the cancellation-free reflector choice; with zeta = 2/(mu^2 alpha +
    // sigma) the reflection zeroes the subcolumn exactly.
    const double mu = 1.0 + std::sqrt(1.0 + sigma / alpha);
    VecC phi = VecC::Zero(k_dim - k);
    phi(0) = mu * r(k, k);
    phi.segment(1, tail) = r.col(k).segment(k + 1, tail);
    const double zeta = 2.0 / (mu * mu * alpha + sigma);
    r.bottomRightCorner(k_dim - k, k_dim - k) -=
        (zeta * phi) * (phi.adjoint() * r.bottomRightCorner(k_dim - k, k_dim - k));
    q.bottomRows(k_dim - k) -=
        (zeta * phi) * (phi.adjoint() * q.bottomRows(k_dim - k));
  }
  // Back substitution on the upper-triangular factor: R X = Q.
  MatC x(k_dim, k_dim);
  for (int k = k_dim - 1; k >= 0; --k) {
    require(std::abs(r(k, k)) > 0.0, "qrh_invert: zero pivot");
    x.row(k) = q.row(k) / r(k, k);
    if (k > 0)
      q.topRows(k) -= r.col(k).head(k) * x.row(k);
  }
  return x;
}

/// Regularized zero-forcing precoder H (G + εI)^{-1}, columns normalized to
/// unit norm; the inversion goes through qrh_invert.
inline MatC rzf_precoder(const MatC& h, double epsilon) {
  const int k_dim = int(h.cols());
  require(epsilon >= 0.0, "rzf_precoder: negative regularization");
  MatC system = h.adjoint() * h;
  system.diagonal().array() += cplx(epsilon, 0.0);
  MatC v = h * qrh_invert(system);
  for (int k = 0; k < k_dim; ++k) {
    const double norm = v.col(k).norm();
    require(norm > 0.0, "rzf_precoder: zero-norm column");
    v.col(k) /= norm;
  }
  return v;
}

/// Free-probability moments of the normalized i.i.d. Gram spectrum:
/// ρ̆_ℓ = (1/ℓ) Σ_{i=0}^{ℓ-1} C(ℓ,i) C(ℓ,i+1) β^i (ρ̆_0 = 1); equal to
/// mp_moment(β, ℓ)/β for ℓ ≥ 1.
inline VecR zarei_moments(double beta, int count) {
  require(count >= 1, "zarei_moments: need at least one moment");
  VecR out(count);
  out(0) = 1.0;
  for (int ell = 1; ell < count; ++ell) {
    double acc = 0.0;
    double beta_pow = 1.0;
    for (int i = 0; i <= ell - 1; ++i) {
      acc += detail::binomial(ell, i) * detail::binomial(ell, i + 1) * beta_pow;
      beta_pow *= beta;
    }
    out(ell) = acc / double(ell);
  }
  return out;
}

/// Shared-weight polynomial model: one ω vector for all users computed from
/// the spectrum moments and the power-spread scalars b1 = (1/K)tr(P̆^{-1}),
/// b2 = (1/K)tr(P̆).
struct ZareiModel {
  VecR omega;
  double b1 = 1.0;
  double b2 = 1.0;
  VecR moments;
};

inline ZareiModel zarei_weights(double beta, double b1, double b2, double nu,
                                int order) {
  require(order >= 0 && order <= 8, "zarei_weights: order must be in 0..8");
  ZareiModel model;
  model.b1 = b1;
  model.b2 = b2;
  model.moments = zarei_moments(beta, 2 * order + 3);
  VecR a(order + 1);
  MatR b(order + 1, order + 1), c(order + 1, order + 1);
  for (int l = 0; l <= order; ++l) {
    a(l) = model.moments(l + 1);
    for (int lp = 0; lp <= order; ++lp) {
      b(l, lp) = model.moments(l + lp + 2);
      c(l, lp) = model.moments(l + lp + 1);
    }
  }
  const MatR system = (1.0 - b1 * b2) * (a * a.transpose()) + b1 * b2 * b +
                      nu * b1 * c;
  model.omega = detail::factor_with_jitter(system).solve(a);
  require(model.omega.allFinite(), "zarei_weights: non-finite weights");
  return model;
}

/// Competitor precoder: applies the shared ω on the pathloss-equalized
/// channel ℍ = H·diag(A)^{-1/2} (covariance knowledge reduced to A_k I),
/// columns normalized to unit norm.
inline MatC zarei_precoder(const MatC& h, const VecR& pathloss, const VecR& p,
                           double nu, int order) {
  const int k_dim = int(h.cols());
  require(pathloss.size() == k_dim, "zarei_precoder: pathloss length");
  require(pathloss.minCoeff() > 0.0, "zarei_precoder: nonpositive pathloss");
  require(p.size() == k_dim, "zarei_precoder: power vector length");
  require(p.minCoeff() > 0.0, "zarei_precoder: nonpositive power");
  const double beta = double(k_dim) / double(h.rows());
  const double b1 = p.cwiseInverse().sum() / double(k_dim);
  const double b2 = p.sum() / double(k_dim);
  const ZareiModel model = zarei_weights(beta, b1, b2, nu, order);
  const MatC equalized =
      h * pathloss.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal();
  std::vector<TpeWeights> shared;
  shared.resize(std::size_t(k_dim));
  for (auto& w : shared) {
    w.w = model.omega;
    w.alpha_star = 1.0;
    w.sinr = 0.0;
  }
  return horner_precoder(equalized, VecR::Ones(k_dim), shared, order);
}

}  // namespace tpemimo
