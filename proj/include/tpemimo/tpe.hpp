// SPDX-License-Identifier: MIT
#pragma once

/// @file tpe.hpp
/// Truncated polynomial expansion receive/precoding vectors: quadratic-form
/// coefficients (finite-sample and asymptotic), optimal per-user weights,
/// SINR evaluation, and the Horner-style precoder and transmit recursions.

#include <ostream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "tpemimo/common.hpp"

namespace tpemimo {

/// Quadratic-form coefficients for one user at expansion order J:
/// a_l = h̄_k^H Γ̄^l h̄_k, B_{l,l'} = h̄_k^H Γ̄^{l+l'+1} h̄_k,
/// C_{l,l'} = h̄_k^H Γ̄^{l+l'} h̄_k, all for l,l' in 0..J, with Γ̄ = H̄H̄^H
/// and H̄ the power-scaled channel. B and C are symmetric Hankel.
struct TpeQuadratics {
  VecR a;
  MatR b;
  MatR c;
  int order = 0;
  int user = 0;
};

/// Optimal weight vector for one user together with its normalization
/// scalar and the SINR the weights achieve.
struct TpeWeights {
  VecR w;
  double alpha_star = 0.0;
  double sinr = 0.0;
};

enum class LinkSide { uplink, downlink };

namespace detail {

/// Moments x^H Γ̄^n x for n = 0..count-1 with Γ̄ = H̄H̄^H, evaluated by
/// iterated Krylov products (Γ̄ is never formed). The forms are real for
/// Hermitian Γ̄; the numerical imaginary residue is checked then dropped.
inline VecR krylov_moments(const MatC& hbar, const VecC& x, int count) {
  VecR moments(count);
  VecC power = x;
  for (int n = 0; n < count; ++n) {
    const cplx form = x.dot(power);
    require(std::abs(form.imag()) <= 1e-10 * std::max(1.0, std::abs(form.real())),
            "krylov_moments: quadratic form has non-negligible imaginary part");
    moments(n) = form.real();
    if (n + 1 < count) power = hbar * (hbar.adjoint() * power);
  }
  return moments;
}

inline TpeQuadratics quadratics_from_moments(const VecR& moments, int order,
                                             int user) {
  TpeQuadratics q;
  q.order = order;
  q.user = user;
  q.a = moments.head(order + 1);
  q.b.resize(order + 1, order + 1);
  q.c.resize(order + 1, order + 1);
  for (int l = 0; l <= order; ++l)
    for (int lp = 0; lp <= order; ++lp) {
      q.b(l, lp) = moments(l + lp + 1);
      q.c(l, lp) = moments(l + lp);
    }
  return q;
}

/// Cholesky solve of (B + νC) with escalating diagonal jitter. Hankel moment
/// matrices are positive definite in exact arithmetic but ill-conditioned,
/// so a failed factorization gets jitter 1e-12·tr/(J+1), escalated tenfold
/// up to 1e-6·tr before giving up.
inline Eigen::LLT<MatR> factor_with_jitter(const MatR& system) {
  Eigen::LLT<MatR> llt(system);
  if (llt.info() == Eigen::Success) return llt;
  const double trace = system.trace();
  double jitter = 1e-12 * trace / double(system.rows());
  const double cap = 1e-6 * trace;
  while (jitter <= cap) {
    MatR bumped = system;
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 10.0;
  }
  fail("optimal_weights: weight system not positive definite after jitter");
}

}  // namespace detail

/// Finite-sample quadratic coefficients for user k from the power-scaled
/// channel H̄ (M×K). Needs Γ̄ moments of h̄_k up to order 2J+1.
inline TpeQuadratics quadratics_finite(const MatC& hbar, int k, int order) {
  require(order >= 0 && order <= 8, "quadratics_finite: order must be in 0..8");
  require(k >= 0 && k < hbar.cols(), "quadratics_finite: user out of range");
  const VecR moments =
      detail::krylov_moments(hbar, hbar.col(k), 2 * order + 2);
  return detail::quadratics_from_moments(moments, order, k);
}

/// Asymptotic quadratic coefficients from a column of full-matrix moments
/// ρ_{k,0..2J+1}: a_l = ρ_l, B_{l,l'} = ρ_{l+l'+1}, C_{l,l'} = ρ_{l+l'}.
inline TpeQuadratics quadratics_asymptotic(const VecR& rho_row, int k,
                                           int order) {
  require(order >= 0 && order <= 8,
          "quadratics_asymptotic: order must be in 0..8");
  require(rho_row.size() >= 2 * order + 2,
          "quadratics_asymptotic: need moments up to order 2J+1");
  return detail::quadratics_from_moments(rho_row.head(2 * order + 2), order, k);
}

/// Optimal TPE weights for one user: w = α*(B+νC)^{-1}a with α* chosen so
/// the resulting vector has squared norm wᵀCw/p_k = 1, and the attained
/// SINR t/(1-t) with t = aᵀ(B+νC)^{-1}a.
inline TpeWeights optimal_weights(const TpeQuadratics& q, double nu,
                                  double p_k) {
  require(p_k > 0.0, "optimal_weights: user power must be positive");
  require(nu >= 0.0, "optimal_weights: noise level must be nonnegative");
  const MatR system = q.b + nu * q.c;
  // The moment matrices are graded like Hilbert matrices at high orders, so
  // a raw factorization loses several digits once J approaches K. A Jacobi
  // rescaling plus one step of iterative refinement keeps the solve accurate
  // without changing the fixture for well-conditioned low orders.
  const VecR scale = system.diagonal().cwiseSqrt();
  require(scale.minCoeff() > 0.0, "optimal_weights: nonpositive diagonal");
  const MatR scaled =
      scale.cwiseInverse().asDiagonal() * system *
      scale.cwiseInverse().asDiagonal();
  const Eigen::LLT<MatR> llt = detail::factor_with_jitter(scaled);
  const auto solve = [&](const VecR& rhs) -> VecR {
    return VecR(llt.solve(VecR(rhs.cwiseQuotient(scale))))
        .cwiseQuotient(scale);
  };
  VecR x = solve(q.a);
  x += solve(VecR(q.a - system * x));
  const double t = q.a.dot(x);
  require(t < 1.0,
          "optimal_weights: SINR denominator nonpositive (inconsistent "
          "coefficients)");
  const double cxx = x.dot(q.c * x);
  require(cxx > 0.0, "optimal_weights: degenerate normalization quadratic");
  TpeWeights out;
  out.alpha_star = std::sqrt(p_k / cxx);
  out.w = out.alpha_star * x;
  out.sinr = t / (1.0 - t);
  require(out.sinr >= 0.0, "optimal_weights: negative SINR");
  return out;
}

/// Weights for every user from the finite-sample quadratics of H̄ = H·P^{1/2}.
inline std::vector<TpeWeights> tpe_weights(const MatC& h, const VecR& p,
                                           double nu, int order) {
  require(p.size() == h.cols(), "tpe_weights: power vector length mismatch");
  require(p.minCoeff() > 0.0, "tpe_weights: powers must be positive");
  const MatC hbar =
      h * p.cwiseSqrt().cast<cplx>().asDiagonal();
  std::vector<TpeWeights> out;
  out.reserve(std::size_t(h.cols()));
  for (int k = 0; k < h.cols(); ++k)
    out.push_back(optimal_weights(quadratics_finite(hbar, k, order), nu, p(k)));
  return out;
}

/// Weights for every user from asymptotic moments (rho is (L+1)×K with
/// L ≥ 2J+1, as produced by asymptotic_moments).
inline std::vector<TpeWeights> tpe_weights_asymptotic(const MatR& rho,
                                                      const VecR& p, double nu,
                                                      int order) {
  require(p.size() == rho.cols(),
          "tpe_weights_asymptotic: power vector length mismatch");
  std::vector<TpeWeights> out;
  out.reserve(std::size_t(rho.cols()));
  for (int k = 0; k < rho.cols(); ++k)
    out.push_back(
        optimal_weights(quadratics_asymptotic(rho.col(k), k, order), nu, p(k)));
  return out;
}

namespace detail {

/// Squared norms of the raw (pre-normalization) TPE columns
/// v_k = Σ_l w_{k,l} Γ̄^l h_k, via Krylov moments of the unscaled columns.
inline VecR raw_column_norms(const MatC& h, const MatC& hbar,
                             const std::vector<TpeWeights>& weights,
                             int order) {
  const int k_dim = int(h.cols());
  VecR norms(k_dim);
  for (int k = 0; k < k_dim; ++k) {
    const VecR moments = krylov_moments(hbar, h.col(k), 2 * order + 1);
    double norm_sq = 0.0;
    for (int l = 0; l <= order; ++l)
      for (int lp = 0; lp <= order; ++lp)
        norm_sq += weights[std::size_t(k)].w(l) *
                   weights[std::size_t(k)].w(lp) * moments(l + lp);
    require(norm_sq > 0.0, "tpe precoder: zero-norm column");
    norms(k) = std::sqrt(norm_sq);
  }
  return norms;
}

}  // namespace detail

/// TPE precoder via Horner's rule on the K×K Gram matrix:
/// V^{(J)} = W^{(J)}, V^{(n)} = W^{(n)} + PG·V^{(n+1)}, V = H·V^{(0)},
/// with W^{(l)} = diag_k(w_{k,l}); columns are then normalized to unit norm.
inline MatC horner_precoder(const MatC& h, const VecR& p,
                            const std::vector<TpeWeights>& weights,
                            int order) {
  const int k_dim = int(h.cols());
  require(int(weights.size()) == k_dim, "horner_precoder: weight count");
  require(p.size() == k_dim, "horner_precoder: power vector length");
  const MatC gram = h.adjoint() * h;
  const MatC pg = p.cast<cplx>().asDiagonal() * gram;
  MatC stage = MatC::Zero(k_dim, k_dim);
  for (int n = order; n >= 0; --n) {
    MatC next = pg * stage;
    for (int k = 0; k < k_dim; ++k)
      next(k, k) += cplx(weights[std::size_t(k)].w(n), 0.0);
    stage = std::move(next);
  }
  MatC v = h * stage;
  for (int k = 0; k < k_dim; ++k) {
    const double norm = v.col(k).norm();
    require(norm > 0.0, "horner_precoder: zero-norm column");
    v.col(k) /= norm;
  }
  return v;
}

/// Transmit vector x = V·s without forming the precoder matrix:
/// x^{(J)} = W^{(J)}s, x^{(n)} = W^{(n)}s + PG·x^{(n+1)}, x = H·x^{(0)}.
/// The per-column unit-norm policy of horner_precoder is reproduced by
/// rescaling each symbol with the raw column norm computed from Krylov
/// moments (cost O(J·MK), no M×K intermediate).
inline VecC direct_tpe_transmit(const MatC& h, const VecR& p,
                                const std::vector<TpeWeights>& weights,
                                const VecC& symbols, int order) {
  const int k_dim = int(h.cols());
  require(int(weights.size()) == k_dim, "direct_tpe_transmit: weight count");
  require(symbols.size() == k_dim, "direct_tpe_transmit: symbol count");
  const MatC hbar = h * p.cwiseSqrt().cast<cplx>().asDiagonal();
  const VecR norms = detail::raw_column_norms(h, hbar, weights, order);
  const VecC scaled = symbols.cwiseQuotient(norms.cast<cplx>());
  const MatC gram = h.adjoint() * h;
  const MatC pg = p.cast<cplx>().asDiagonal() * gram;
  VecC stage = VecC::Zero(k_dim);
  for (int n = order; n >= 0; --n) {
    VecC next = pg * stage;
    for (int k = 0; k < k_dim; ++k)
      next(k) += weights[std::size_t(k)].w(n) * scaled(k);
    stage = std::move(next);
  }
  return h * stage;
}

/// Finite-sample SINR of user k. Uplink: receiver column k of v_cols against
/// channel columns weighted by UL powers. Downlink: channel column k against
/// all precoder columns weighted by DL powers.
inline double finite_sinr(const MatC& h, const MatC& v_cols, const VecR& power,
                          double nu, int k, LinkSide side) {
  require(k >= 0 && k < h.cols(), "finite_sinr: user out of range");
  require(v_cols.cols() == h.cols() && v_cols.rows() == h.rows(),
          "finite_sinr: vector set shape mismatch");
  require(power.size() == h.cols(), "finite_sinr: power vector length");
  if (side == LinkSide::uplink) {
    const VecC v = v_cols.col(k);
    require(std::abs(v.norm() - 1.0) <= 1e-6,
            "finite_sinr: uplink receiver must be unit norm");
    const VecC cross = h.adjoint() * v;  // entry j = h_j^H v
    double interference = 0.0;
    for (int j = 0; j < h.cols(); ++j)
      if (j != k) interference += power(j) * std::norm(cross(j));
    const double denom = interference + nu * v.squaredNorm();
    require(denom > 0.0, "finite_sinr: zero denominator");
    return std::norm(cross(k)) * power(k) / denom;
  }
  const VecC cross = v_cols.adjoint() * h.col(k);  // entry j = v_j^H h_k
  double interference = 0.0;
  for (int j = 0; j < h.cols(); ++j)
    if (j != k) interference += power(j) * std::norm(cross(j));
  const double denom = interference + nu;
  require(denom > 0.0, "finite_sinr: zero denominator");
  return std::norm(cross(k)) * power(k) / denom;
}

/// All K SINRs for one side.
inline VecR all_sinrs(const MatC& h, const MatC& v_cols, const VecR& power,
                      double nu, LinkSide side) {
  VecR out(h.cols());
  for (int k = 0; k < h.cols(); ++k)
    out(k) = finite_sinr(h, v_cols, power, nu, k, side);
  return out;
}

/// CSV export: user, order, weight_0..weight_J, alpha_star, sinr.
inline void write_weights_csv(std::ostream& os,
                              const std::vector<TpeWeights>& weights) {
  if (weights.empty()) return;
  const int order = int(weights.front().w.size()) - 1;
  os << "user,order";
  for (int l = 0; l <= order; ++l) os << ",weight_" << l;
  os << ",alpha_star,sinr\n";
  for (std::size_t k = 0; k < weights.size(); ++k) {
    os << k << ',' << order;
    for (int l = 0; l <= order; ++l) os << ',' << weights[k].w(l);
    os << ',' << weights[k].alpha_star << ',' << weights[k].sinr << '\n';
  }
}

}  // namespace tpemimo
