// SPDX-License-Identifier: MIT
#pragma once

/// @file power_control.hpp
/// Power allocation policies: pathloss inversion, Yates fixed-point minimum
/// power, max-min SINR bisection, weighted-sum-rate geometric programming in
/// the log domain, the virtual-queue scheduler step, and the alternating
/// weight/power optimization over channel statistics.

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "tpemimo/asymptotics.hpp"
#include "tpemimo/channel.hpp"
#include "tpemimo/common.hpp"
#include "tpemimo/tpe.hpp"

namespace tpemimo {

/// Mapping from a power allocation to the per-user SINRs it induces.
using SinrFn = std::function<VecR(const VecR&)>;

/// Pathloss inversion: p_k = (1/A_k) · K / Σ_j (1/A_j), so Σp = K exactly.
inline VecR conventional_power(const VecR& pathloss) {
  const int k_dim = int(pathloss.size());
  require(k_dim >= 1, "conventional_power: empty pathloss vector");
  require(pathloss.minCoeff() > 0.0, "conventional_power: nonpositive pathloss");
  const VecR inv = pathloss.cwiseInverse();
  return inv * (double(k_dim) / inv.sum());
}

/// SINRs from the asymptotic per-user TPE chain: variance profile at the
/// candidate powers, moment tables, optimal weights, reported SINR. Users
/// with (numerically) zero power report zero SINR.
inline SinrFn asymptotic_tpe_sinr_fn(const CovarianceModel& cov, double nu,
                                     int order) {
  return [cov, nu, order](const VecR& p) -> VecR {
    const VarianceProfile profile = variance_profile(cov, p);
    const MomentTable table =
        asymptotic_moments(profile.d_sq, 2 * order + 1);
    VecR sinr = VecR::Zero(p.size());
    for (int k = 0; k < p.size(); ++k) {
      if (p(k) <= 0.0) continue;
      const auto quad = quadratics_asymptotic(table.rho.col(k), k, order);
      sinr(k) = optimal_weights(quad, nu, p(k)).sinr;
    }
    return sinr;
  };
}

/// Per-iteration record of an iterative power-control run. The objective
/// column is algorithm-specific: target-attainment ratio min_k SINR_k/Γ_k
/// for the fixed-point solver, weighted log-SINR for the alternating scheme.
struct ConvergenceTrace {
  struct Row {
    int iteration = 0;
    double sum_power = 0.0;
    double min_sinr = 0.0;
    double objective = 0.0;
  };
  std::vector<Row> rows;
};

inline void write_convergence_csv(std::ostream& out,
                                  const ConvergenceTrace& trace) {
  out << "iteration,sum_power,min_sinr,objective\n";
  out.precision(17);
  for (const auto& row : trace.rows)
    out << row.iteration << ',' << row.sum_power << ',' << row.min_sinr
        << ',' << row.objective << '\n';
}

inline void write_convergence_csv(const std::string& path,
                                  const ConvergenceTrace& trace) {
  std::ofstream out(path);
  require(out.good(), "write_convergence_csv: cannot open " + path);
  write_convergence_csv(out, trace);
}

struct YatesOptions {
  double start = 1e-3;
  double rel_tol = 1e-8;
  double blow_up = 1e6;
  int max_iters = 10000;
};

struct YatesResult {
  bool feasible = false;
  VecR p;
  int iterations = 0;
};

/// Fixed-point iteration p_k ← p_k Γ_k / SINR_k(p) from a small uniform
/// start. Converges to the minimum power meeting the targets when feasible;
/// declares infeasibility on blow-up or iteration exhaustion.
inline YatesResult yates_min_power(const VecR& targets, const SinrFn& sinr_fn,
                                   const YatesOptions& opts = {},
                                   ConvergenceTrace* trace = nullptr) {
  const int k_dim = int(targets.size());
  require(k_dim >= 1, "yates_min_power: empty target vector");
  require(targets.minCoeff() >= 0.0, "yates_min_power: negative target");
  YatesResult result;
  result.p = VecR::Constant(k_dim, opts.start);
  for (int k = 0; k < k_dim; ++k)
    if (targets(k) == 0.0) result.p(k) = 0.0;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    result.iterations = iter;
    const VecR sinr = sinr_fn(result.p);
    if (trace != nullptr) {
      double attainment = std::numeric_limits<double>::infinity();
      for (int k = 0; k < k_dim; ++k)
        if (targets(k) > 0.0)
          attainment = std::min(attainment, sinr(k) / targets(k));
      trace->rows.push_back({iter, result.p.sum(), sinr.minCoeff(),
                             attainment});
    }
    VecR next = result.p;
    double rel_change = 0.0;
    for (int k = 0; k < k_dim; ++k) {
      if (targets(k) == 0.0) continue;
      if (sinr(k) <= 0.0) return result;  // target unreachable: infeasible
      next(k) = result.p(k) * targets(k) / sinr(k);
      rel_change = std::max(
          rel_change, std::abs(next(k) - result.p(k)) /
                          std::max(result.p(k), 1e-300));
    }
    result.p = next;
    if (result.p.maxCoeff() > opts.blow_up) return result;  // infeasible
    if (rel_change < opts.rel_tol) {
      result.feasible = true;
      return result;
    }
  }
  return result;  // cap reached: infeasible
}

struct MaxMinResult {
  double xi_star = 0.0;
  VecR p;
  int bisections = 0;
};

/// Max-min SINR under the sum budget: bisection on the common target ξ with
/// a Yates solve inside; ends when the minimum-power solution consumes the
/// budget to 0.1% or after max_iters halvings, then rescales to Σp = budget.
inline MaxMinResult max_min_sinr(const SinrFn& sinr_fn, int k_dim,
                                 double budget, double xi_max,
                                 int max_iters = 60) {
  require(k_dim >= 1 && budget > 0.0 && xi_max > 0.0,
          "max_min_sinr: bad arguments");
  double lo = 0.0, hi = xi_max;
  MaxMinResult best;
  bool have_point = false;
  for (int iter = 1; iter <= max_iters; ++iter) {
    const double xi = 0.5 * (lo + hi);
    const YatesResult inner =
        yates_min_power(VecR::Constant(k_dim, xi), sinr_fn);
    if (!inner.feasible || inner.p.sum() > budget) {
      hi = xi;
      continue;
    }
    lo = xi;
    best.xi_star = xi;
    best.p = inner.p;
    best.bisections = iter;
    have_point = true;
    if (std::abs(inner.p.sum() - budget) <= 1e-3 * budget) break;
  }
  require(have_point, "max_min_sinr: no feasible target in the bracket");
  best.p *= budget / best.p.sum();
  return best;
}

struct MwsrOptions {
  double kkt_tol = 1e-6;
  int max_iters = 500;
};

/// Weighted-sum-rate power allocation: maximize Σ Q_k log SINR_k(p) for the
/// affine interference model SINR_k = φ_kk p_k / (ν + Σ_{j≠k} φ_kj p_j)
/// subject to Σp = K. Solved as a barrier-Newton scheme on log-powers (the
/// objective is concave there); the optimum sits on the budget face since
/// every SINR grows with a uniform power scale-up.
inline VecR mwsr_power(const VecR& q_weights, const MatR& phi, double nu,
                       const MwsrOptions& opts = {}) {
  const int k_dim = int(phi.rows());
  require(phi.cols() == k_dim, "mwsr_power: phi must be square");
  require(q_weights.size() == k_dim, "mwsr_power: weight count");
  require(q_weights.minCoeff() >= 0.0, "mwsr_power: negative weight");
  require(nu > 0.0, "mwsr_power: noise level must be positive");
  for (int k = 0; k < k_dim; ++k)
    require(phi(k, k) > 0.0, "mwsr_power: zero direct-link coupling");
  const double budget = double(k_dim);
  if (q_weights.maxCoeff() == 0.0 || k_dim == 1)
    return VecR::Constant(k_dim, 1.0);

  const auto interference = [&](const VecR& p) -> VecR {
    VecR i_of(k_dim);
    for (int k = 0; k < k_dim; ++k) {
      double acc = nu;
      for (int j = 0; j < k_dim; ++j)
        if (j != k) acc += phi(k, j) * p(j);
      i_of(k) = acc;
    }
    return i_of;
  };
  const auto objective = [&](const VecR& p) -> double {
    const VecR i_of = interference(p);
    double f = 0.0;
    for (int k = 0; k < k_dim; ++k)
      if (q_weights(k) > 0.0)
        f += q_weights(k) * std::log(phi(k, k) * p(k) / i_of(k));
    return f;
  };

  VecR u = VecR::Constant(k_dim, std::log(0.5));  // strictly inside Σp < K
  double barrier_weight = 1.0;
  int newton_steps = 0;
  const auto barrier_value = [&](const VecR& u_pt, double t_hat) -> double {
    const VecR p = u_pt.array().exp();
    const double room = budget - p.sum();
    if (room <= 0.0) return std::numeric_limits<double>::infinity();
    return -t_hat * objective(p) - std::log(room);
  };

  for (int outer = 0; outer < 14; ++outer) {
    for (int inner = 0; inner < 64; ++inner) {
      require(++newton_steps <= opts.max_iters,
              "mwsr_power: iteration cap exceeded");
      const VecR p = u.array().exp();
      const VecR i_of = interference(p);
      const double room = budget - p.sum();

      VecR grad = VecR::Zero(k_dim);
      MatR hess = MatR::Zero(k_dim, k_dim);
      for (int k = 0; k < k_dim; ++k) {
        if (q_weights(k) == 0.0) continue;
        grad(k) += q_weights(k);
        VecR share = VecR::Zero(k_dim);
        for (int j = 0; j < k_dim; ++j)
          if (j != k) share(j) = phi(k, j) * p(j) / i_of(k);
        grad -= q_weights(k) * share;
        hess += q_weights(k) *
                (MatR(share.asDiagonal()) - share * share.transpose());
      }
      // psi = -t_hat * f + barrier; flip sign of the objective part.
      VecR psi_grad = -barrier_weight * grad + p / room;
      MatR psi_hess = barrier_weight * hess;
      psi_hess += MatR((p / room).asDiagonal());
      psi_hess += (p * p.transpose()) / (room * room);

      const VecR step = psi_hess.llt().solve(-psi_grad);
      const double decrement = -psi_grad.dot(step);
      if (decrement <= 1e-12 * (1.0 + std::abs(barrier_value(u, barrier_weight))))
        break;
      double scale = 1.0;
      const double base = barrier_value(u, barrier_weight);
      for (int halving = 0; halving < 60; ++halving) {
        const VecR candidate = u + scale * step;
        if (barrier_value(candidate, barrier_weight) <=
            base - 0.25 * scale * decrement) {
          u = candidate;
          break;
        }
        scale *= 0.5;
      }
    }
    barrier_weight *= 10.0;
  }

  VecR p = u.array().exp();
  p *= budget / p.sum();
  // KKT stationarity on the budget face: ∇_p f must be a constant vector.
  const VecR i_of = interference(p);
  VecR grad_p(k_dim);
  for (int k = 0; k < k_dim; ++k) {
    grad_p(k) = q_weights(k) / p(k);
    for (int j = 0; j < k_dim; ++j)
      if (j != k) grad_p(k) -= q_weights(j) * phi(j, k) / i_of(j);
  }
  const double lambda = grad_p.mean();
  const double residual =
      (grad_p.array() - lambda).abs().maxCoeff() /
      std::max(1.0, std::abs(lambda));
  require(residual <= opts.kkt_tol, "mwsr_power: KKT residual above tolerance");
  return p;
}

enum class SchedulerUtility { proportional_fair, sum_rate, max_min };

struct SchedulerState {
  VecR queues;
  double v = 1.0;
  double b_max = 1.0;
  SchedulerUtility utility = SchedulerUtility::proportional_fair;
};

/// One virtual-queue update: pick arrivals B maximizing V·U(B) - Σ Q_k B_k
/// over [0, B_max]^K in closed form, then Q ← [Q - R + B]_+. Returns B.
inline VecR scheduler_step(SchedulerState& state, const VecR& rates) {
  const int k_dim = int(state.queues.size());
  require(rates.size() == k_dim, "scheduler_step: rate vector length");
  require(rates.minCoeff() >= 0.0, "scheduler_step: negative rate");
  require(state.v > 0.0 && state.b_max > 0.0, "scheduler_step: bad state");
  VecR arrivals(k_dim);
  switch (state.utility) {
    case SchedulerUtility::proportional_fair:
      for (int k = 0; k < k_dim; ++k)
        arrivals(k) = state.queues(k) <= 0.0
                          ? state.b_max
                          : std::min(state.b_max, state.v / state.queues(k));
      break;
    case SchedulerUtility::sum_rate:
      for (int k = 0; k < k_dim; ++k)
        arrivals(k) = state.v > state.queues(k) ? state.b_max : 0.0;
      break;
    case SchedulerUtility::max_min: {
      const double common =
          state.v > state.queues.sum() ? state.b_max : 0.0;
      arrivals.setConstant(common);
      break;
    }
  }
  state.queues = (state.queues - rates + arrivals).cwiseMax(0.0);
  return arrivals;
}

struct AlternatingResult {
  std::vector<TpeWeights> weights;
  VecR p;
  VecR sinr;
  int rounds = 0;
  std::vector<double> objective;  ///< weighted log-SINR trace per round
  ConvergenceTrace trace;
};

namespace detail {

struct ChainPoint {
  std::vector<TpeWeights> weights;
  VecR sinr;
  VecR signal;        ///< S_k = (wᵀa)²
  VecR interference;  ///< I_k = wᵀBw - S_k
  VecR noise;         ///< N_k = ν wᵀCw
};

inline ChainPoint evaluate_statistics_chain(const CovarianceModel& cov,
                                            double nu, int order,
                                            const VecR& p) {
  const VarianceProfile profile = variance_profile(cov, p);
  const MomentTable table = asymptotic_moments(profile.d_sq, 2 * order + 1);
  ChainPoint point;
  const int k_dim = int(p.size());
  point.sinr.resize(k_dim);
  point.signal.resize(k_dim);
  point.interference.resize(k_dim);
  point.noise.resize(k_dim);
  point.weights.reserve(std::size_t(k_dim));
  for (int k = 0; k < k_dim; ++k) {
    const auto quad = quadratics_asymptotic(table.rho.col(k), k, order);
    TpeWeights w = optimal_weights(quad, nu, p(k));
    const double wa = w.w.dot(quad.a);
    point.signal(k) = wa * wa;
    point.interference(k) = w.w.dot(quad.b * w.w) - wa * wa;
    point.noise(k) = nu * w.w.dot(quad.c * w.w);
    point.sinr(k) =
        point.signal(k) / (point.interference(k) + point.noise(k));
    point.weights.push_back(std::move(w));
  }
  return point;
}

}  // namespace detail

/// Alternating optimization of TPE weights and powers from channel
/// statistics only: each round refits the asymptotic weights at the current
/// powers, extracts an effective affine coupling by finite differences of
/// the interference terms, re-solves the weighted-sum-rate program, and
/// accepts the new powers only if the true weighted log-SINR objective does
/// not decrease (backtracking halves the move otherwise).
inline AlternatingResult alternate_weights_powers(const CovarianceModel& cov,
                                                  double nu,
                                                  const VecR& q_weights,
                                                  int order,
                                                  int max_rounds = 50) {
  const int k_dim = int(cov.circulant_eigs.cols());
  require(q_weights.size() == k_dim, "alternate_weights_powers: weight count");
  require(q_weights.minCoeff() >= 0.0,
          "alternate_weights_powers: negative weight");
  const auto weighted_objective = [&](const VecR& sinr) -> double {
    double f = 0.0;
    for (int k = 0; k < k_dim; ++k)
      if (q_weights(k) > 0.0) f += q_weights(k) * std::log(sinr(k));
    return f;
  };

  AlternatingResult result;
  result.p = VecR::Ones(k_dim);
  auto point = detail::evaluate_statistics_chain(cov, nu, order, result.p);
  result.objective.push_back(weighted_objective(point.sinr));
  result.trace.rows.push_back(
      {0, result.p.sum(), point.sinr.minCoeff(), result.objective.back()});

  for (int round = 1; round <= max_rounds; ++round) {
    result.rounds = round;
    // Effective affine coupling matching the chain at the current powers:
    // diagonal from the signal/noise split, off-diagonal from forward
    // differences of the interference terms.
    MatR phi = MatR::Zero(k_dim, k_dim);
    for (int k = 0; k < k_dim; ++k)
      phi(k, k) = nu * point.signal(k) / (point.noise(k) * result.p(k));
    for (int j = 0; j < k_dim; ++j) {
      const double delta = 1e-4 * std::max(result.p(j), 0.1);
      VecR bumped = result.p;
      bumped(j) += delta;
      const auto shifted =
          detail::evaluate_statistics_chain(cov, nu, order, bumped);
      for (int k = 0; k < k_dim; ++k) {
        if (k == j) continue;
        const double slope =
            (shifted.interference(k) - point.interference(k)) / delta;
        phi(k, j) = nu * std::max(0.0, slope) / point.noise(k);
      }
    }

    const VecR proposal = mwsr_power(q_weights, phi, nu);
    bool accepted = false;
    double fraction = 1.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      VecR candidate =
          (1.0 - fraction) * result.p + fraction * proposal;
      candidate *= double(k_dim) / candidate.sum();
      const auto trial =
          detail::evaluate_statistics_chain(cov, nu, order, candidate);
      if (weighted_objective(trial.sinr) >=
          result.objective.back() - 1e-8) {
        const double max_change =
            (trial.sinr - point.sinr).cwiseAbs().maxCoeff();
        result.p = candidate;
        point = trial;
        result.objective.push_back(weighted_objective(point.sinr));
        result.trace.rows.push_back({round, result.p.sum(),
                                     point.sinr.minCoeff(),
                                     result.objective.back()});
        accepted = true;
        if (max_change < 1e-4) {
          result.weights = point.weights;
          result.sinr = point.sinr;
          return result;
        }
        break;
      }
      fraction *= 0.5;
    }
    if (!accepted) break;  // local point: no improving move found
  }
  result.weights = point.weights;
  result.sinr = point.sinr;
  return result;
}

}  // namespace tpemimo
