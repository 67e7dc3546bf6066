// SPDX-License-Identifier: MIT
#pragma once

/// @file asymptotics.hpp
/// Large-system moment machinery: the ξ(x) recursion over a discretized
/// variance profile, leave-one-out moments γ^∞ and full-matrix moments ρ^∞,
/// and closed-form Marchenko-Pastur moments for the i.i.d. special case.

#include <vector>

#include <Eigen/Dense>

#include "tpemimo/channel.hpp"
#include "tpemimo/common.hpp"

namespace tpemimo {

/// Hard cap on moment orders: the quadratic-form machinery is used for TPE
/// degrees J ≤ 3 (needing moments to 2J+2) and accuracy of the large-system
/// approximation, not cost, is the binding constraint beyond that.
inline constexpr int kMaxMomentOrder = 8;

/// All ordered tuples of strictly positive integers summing to n
/// (compositions). There are exactly 2^{n-1}; n is capped at 16.
inline std::vector<std::vector<int>> compositions(int n) {
  require(n >= 1, "compositions: n must be >= 1");
  require(n <= 16, "compositions: n capped at 16 (2^{n-1} tuples)");
  std::vector<std::vector<int>> out;
  out.reserve(std::size_t(1) << (n - 1));
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<int> parts;
    int run = 1;
    for (int i = 0; i < n - 1; ++i) {
      if (mask & (1u << i)) {
        parts.push_back(run);
        run = 1;
      } else {
        ++run;
      }
    }
    parts.push_back(run);
    out.push_back(std::move(parts));
  }
  return out;
}

namespace detail {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  unsigned long long num = 1, den = 1;
  for (int i = 1; i <= k; ++i) {
    num *= static_cast<unsigned long long>(n - k + i);
    den *= static_cast<unsigned long long>(i);
  }
  return double(num) / double(den);
}

}  // namespace detail

/// ℓ-th moment of the Marchenko-Pastur distribution with ratio β:
/// (1/ℓ) Σ_{i=1..ℓ} C(ℓ,i) C(ℓ,i-1) β^i  (Narayana polynomial; equivalently
/// the sum of β^{|π|} over non-crossing partitions π of [ℓ]).
inline double mp_moment(double beta, int ell) {
  require(ell >= 0, "mp_moment: order must be >= 0");
  require(beta > 0.0, "mp_moment: beta must be positive");
  if (ell == 0) return 1.0;
  double acc = 0.0;
  double beta_pow = 1.0;
  for (int i = 1; i <= ell; ++i) {
    beta_pow *= beta;
    acc += detail::binomial(ell, i) * detail::binomial(ell, i - 1) * beta_pow;
  }
  return acc / double(ell);
}

/// Discretized ξ recursion over a variance profile D (M×K, nonnegative).
/// Returns an (L+1)×M table with row ℓ holding ξ_ℓ(m/M). The recursion is
///   ξ_ℓ(m) = β Σ_{j=1..ℓ} ξ_{j-1}(m) · (1/K) Σ_k D_{m,k} S_k(ℓ-j)
/// where S_k collects the ordered-partition sums of the expansion through the
/// convolution recurrence S_k(0)=1, S_k(n)=Σ_{i=1..n} t_k(i-1) S_k(n-i)
/// with t_k(n) = (1/M) Σ_m D_{m,k} ξ_n(m/M); the j=ℓ term (empty partition,
/// S_k(0)=1) reproduces the leading β ξ_{ℓ-1}(m)(1/K)Σ_k D_{m,k} term.
inline MatR xi_table(const MatR& d_sq, int max_order) {
  require(max_order >= 0, "xi_table: max order must be >= 0");
  require(max_order <= kMaxMomentOrder, "xi_table: max order capped at 8");
  const int m_dim = int(d_sq.rows());
  const int k_dim = int(d_sq.cols());
  require(m_dim >= 1 && k_dim >= 1, "xi_table: empty variance profile");
  require(d_sq.minCoeff() >= 0.0, "xi_table: negative variance profile entry");
  const double beta = double(k_dim) / double(m_dim);

  MatR xi(max_order + 1, m_dim);
  xi.row(0).setOnes();
  MatR t(max_order + 1, k_dim);   // t_k(n) = γ^∞ row n
  MatR s(max_order + 1, k_dim);   // S_k(n)
  t.row(0) = xi.row(0) * d_sq / double(m_dim);
  s.row(0).setOnes();

  for (int ell = 1; ell <= max_order; ++ell) {
    // S_k(ell-1) from t rows 0..ell-2 (available: t row n needs xi row n)
    const int n = ell - 1;
    if (n >= 1) {
      s.row(n).setZero();
      for (int i = 1; i <= n; ++i)
        s.row(n) += t.row(i - 1).cwiseProduct(s.row(n - i));
    }
    xi.row(ell).setZero();
    for (int j = 1; j <= ell; ++j) {
      // w(m) = (1/K) Σ_k D_{m,k} S_k(ℓ-j)
      const VecR w = d_sq * s.row(ell - j).transpose() / double(k_dim);
      xi.row(ell) += xi.row(j - 1).cwiseProduct(w.transpose());
    }
    xi.row(ell) *= beta;
    t.row(ell) = xi.row(ell) * d_sq / double(m_dim);
  }
  return xi;
}

/// Leave-one-out asymptotic moments: γ^∞_{k,ℓ} = (1/M) Σ_m ξ_ℓ(m/M) D_{m,k}.
/// Input xi is the (L+1)×M table from xi_table; output is (L+1)×K.
inline MatR gamma_infty(const MatR& d_sq, const MatR& xi) {
  require(xi.cols() == d_sq.rows(),
          "gamma_infty: xi table and profile dimensions disagree");
  return xi * d_sq / double(d_sq.rows());
}

/// Full-matrix moments from leave-one-out moments:
/// ρ_ℓ = γ_ℓ + Σ_{i=1..ℓ} γ_{ℓ-i} ρ_{i-1}. Exact at finite dimension.
inline VecR rho_from_gamma(const VecR& gamma) {
  const int count = int(gamma.size());
  VecR rho(count);
  for (int ell = 0; ell < count; ++ell) {
    double acc = gamma(ell);
    for (int i = 1; i <= ell; ++i) acc += gamma(ell - i) * rho(i - 1);
    rho(ell) = acc;
  }
  return rho;
}

/// Asymptotic trace moment lim (1/M) tr((H̄ H̄^H)^ℓ) = ∫ ξ_ℓ.
inline double trace_moment(const MatR& xi, int ell) {
  require(ell >= 0 && ell < xi.rows(), "trace_moment: order out of range");
  return xi.row(ell).mean();
}

/// Bundled ξ/γ/ρ tables for a variance profile.
struct MomentTable {
  MatR xi;     ///< (L+1)×M
  MatR gamma;  ///< (L+1)×K
  MatR rho;    ///< (L+1)×K
  int max_order = 0;
};

inline MomentTable asymptotic_moments(const MatR& d_sq, int max_order) {
  MomentTable table;
  table.max_order = max_order;
  table.xi = xi_table(d_sq, max_order);
  table.gamma = gamma_infty(d_sq, table.xi);
  table.rho.resizeLike(table.gamma);
  for (int k = 0; k < table.gamma.cols(); ++k)
    table.rho.col(k) = rho_from_gamma(table.gamma.col(k));
  return table;
}

inline MomentTable asymptotic_moments(const VarianceProfile& profile,
                                      int max_order) {
  return asymptotic_moments(profile.d_sq, max_order);
}

}  // namespace tpemimo
