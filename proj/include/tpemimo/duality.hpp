// SPDX-License-Identifier: MIT
#pragma once

/// @file duality.hpp
/// Uplink/downlink duality: coupling matrices, feasibility via the
/// Perron-Frobenius radius, minimum-power solves, and the translation of
/// uplink SINRs into downlink powers with matched SINRs and equal sum power.

#include <algorithm>
#include <limits>

#include <Eigen/Dense>

#include "tpemimo/common.hpp"
#include "tpemimo/tpe.hpp"

namespace tpemimo {

/// Coupling data for a fixed set of receive/precoding vectors and SINR
/// targets Γ: φ_{k,j} = |v_k^H H u_j|² (full matrix, diagonal included) and
/// μ_k = Γ_k / ((1+Γ_k) φ_{k,k}).
struct DualityCoupling {
  MatR phi;
  VecR mu;
  VecR targets;
  double nu = 0.0;
};

struct Feasibility {
  bool feasible = false;
  double radius = 0.0;
};

/// Squared-magnitude couplings φ_{k,j} = |v_k^H H u_j|² for transmit
/// directions u_j (K×K columns) and receive vectors v_k (M×K columns).
inline MatR coupling_matrix(const MatC& h, const MatC& u_vectors,
                            const MatC& v_vectors) {
  require(u_vectors.rows() == h.cols(), "coupling_matrix: u dimension");
  require(v_vectors.rows() == h.rows(), "coupling_matrix: v dimension");
  const MatC cross = v_vectors.adjoint() * (h * u_vectors);
  return cross.cwiseAbs2();
}

/// Couplings for the common case u_j = e_j, i.e. φ_{k,j} = |v_k^H h_j|².
inline MatR coupling_matrix(const MatC& h, const MatC& v_vectors) {
  const MatC cross = v_vectors.adjoint() * h;
  return cross.cwiseAbs2();
}

inline DualityCoupling make_coupling(const MatR& phi, const VecR& targets,
                                     double nu) {
  const int k_dim = int(phi.rows());
  require(phi.cols() == k_dim, "make_coupling: phi must be square");
  require(targets.size() == k_dim, "make_coupling: target count");
  require(phi.minCoeff() >= 0.0, "make_coupling: negative coupling entry");
  require(nu > 0.0, "make_coupling: noise level must be positive");
  DualityCoupling c;
  c.phi = phi;
  c.targets = targets;
  c.nu = nu;
  c.mu.resize(k_dim);
  for (int k = 0; k < k_dim; ++k) {
    require(targets(k) >= 0.0, "make_coupling: negative SINR target");
    require(phi(k, k) > 0.0, "make_coupling: zero direct-link coupling");
    c.mu(k) = targets(k) / ((1.0 + targets(k)) * phi(k, k));
  }
  return c;
}

/// Spectral radius of diag(μ)Φ by power iteration (all-ones seed,
/// tolerance 1e-12, capped at 10^4 sweeps); the target set is feasible iff
/// the radius stays below 1 - 1e-9. A clustered spectrum can stall the
/// ratio estimate without making the feasibility question ambiguous, so
/// every sweep also tightens a certified Collatz-Wielandt bracket
/// min_i (Ax)_i/x_i <= ρ <= max_i (Ax)_i/x_i (valid for nonnegative A and
/// positive x); when the cap is hit, the bracket answers the threshold test
/// whenever it clears 1 - 1e-9 on either side.
inline Feasibility feasibility(const DualityCoupling& coupling) {
  const MatR iter_matrix = coupling.mu.asDiagonal() * coupling.phi;
  VecR x = VecR::Ones(iter_matrix.rows());
  double radius = 0.0;
  bool converged = false;
  double bracket_lo = 0.0;
  double bracket_hi = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 10000; ++sweep) {
    VecR y = iter_matrix * x;
    const double norm = y.lpNorm<1>();
    if (norm <= 1e-300) {
      radius = 0.0;
      converged = true;
      break;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x(i) > 0.0) {
        lo = std::min(lo, y(i) / x(i));
        hi = std::max(hi, y(i) / x(i));
      }
    }
    bracket_lo = std::max(bracket_lo, lo);
    bracket_hi = std::min(bracket_hi, hi);
    const double estimate = norm / x.lpNorm<1>();
    x = y / norm;
    if (std::abs(estimate - radius) <= 1e-12 * std::max(1.0, estimate)) {
      radius = estimate;
      converged = true;
      break;
    }
    radius = estimate;
  }
  if (!converged) {
    if (bracket_hi < 1.0 - 1e-9) return {true, bracket_hi};
    if (bracket_lo >= 1.0 - 1e-9) return {false, bracket_lo};
  }
  require(converged, "feasibility: power iteration did not converge");
  return {radius < 1.0 - 1e-9, radius};
}

/// Minimum power vector meeting the SINR targets with the stored vectors:
/// solves (I - diag(μ)Φ) p' = μ (uplink) or the transposed system
/// (downlink) and returns the de-normalized powers ν·p'.
inline VecR min_powers(const DualityCoupling& coupling, LinkSide side) {
  const Feasibility feas = feasibility(coupling);
  require(feas.feasible, "min_powers: targets infeasible (radius >= 1)");
  MatR system = -(coupling.mu.asDiagonal() *
                  (side == LinkSide::uplink ? coupling.phi
                                            : MatR(coupling.phi.transpose())));
  system.diagonal().array() += 1.0;
  const VecR normalized = system.partialPivLu().solve(coupling.mu);
  require(normalized.minCoeff() >= -1e-12,
          "min_powers: negative solution despite feasible radius");
  return coupling.nu * normalized.cwiseMax(0.0);
}

/// Duality translation: achieved uplink SINRs with powers p become the
/// SINR targets of a downlink minimum-power solve, yielding q with the same
/// per-user SINRs and the same sum power.
inline VecR ul_to_dl(const MatC& h, const MatC& v_vectors, const VecR& p,
                     double nu) {
  const VecR gamma = all_sinrs(h, v_vectors, p, nu, LinkSide::uplink);
  const DualityCoupling coupling =
      make_coupling(coupling_matrix(h, v_vectors), gamma, nu);
  return min_powers(coupling, LinkSide::downlink);
}

}  // namespace tpemimo
