// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "tpemimo/duality.hpp"
#include "tpemimo/rng.hpp"
#include "tpemimo/tpe.hpp"

namespace {

using tpemimo::cplx;
using tpemimo::LinkSide;
using tpemimo::MatC;
using tpemimo::MatR;
using tpemimo::VecC;
using tpemimo::VecR;

MatC random_channel(std::uint64_t seed, int m_dim, int k_dim) {
  tpemimo::SplitMix64 rng(seed);
  return tpemimo::complex_normal_matrix(rng, m_dim, k_dim, 1.0 / m_dim);
}

MatC unit_columns(MatC m) {
  for (int k = 0; k < m.cols(); ++k) m.col(k) /= m.col(k).norm();
  return m;
}

double dense_radius(const MatR& a) {
  return Eigen::EigenSolver<MatR>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

TEST(CouplingMatrix, MatchesScalarLoop) {
  const int m_dim = 12, k_dim = 4;
  const MatC h = random_channel(1, m_dim, k_dim);
  tpemimo::SplitMix64 rng(2);
  const MatC u = tpemimo::complex_normal_matrix(rng, k_dim, k_dim, 1.0);
  const MatC v = unit_columns(tpemimo::complex_normal_matrix(rng, m_dim, k_dim, 1.0));
  const MatR phi = tpemimo::coupling_matrix(h, u, v);
  for (int k = 0; k < k_dim; ++k)
    for (int j = 0; j < k_dim; ++j) {
      const cplx inner = (v.col(k).adjoint() * (h * u.col(j)))(0, 0);
      ASSERT_NEAR(phi(k, j), std::norm(inner),
                  1e-12 * std::max(1.0, std::norm(inner)));
    }
}

TEST(CouplingMatrix, ConjugateBeamformingCase) {
  const MatC h = random_channel(3, 16, 3);
  const MatC v = unit_columns(h);
  const MatR phi = tpemimo::coupling_matrix(h, v);  // u_j = e_j
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      const double want =
          std::norm(h.col(k).dot(h.col(j))) / h.col(k).squaredNorm();
      ASSERT_NEAR(phi(k, j), want, 1e-12 * std::max(1.0, want));
    }
}

TEST(CouplingMatrix, OrthonormalEffectiveChannelsGiveDiagonal) {
  MatC h = MatC::Zero(6, 3);
  h(0, 0) = cplx(1.5, 0.0);
  h(1, 1) = cplx(0.0, 2.0);
  h(2, 2) = cplx(0.7, 0.7);
  const MatC v = unit_columns(h);
  const MatR phi = tpemimo::coupling_matrix(h, v);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      if (k == j) {
        ASSERT_GT(phi(k, j), 0.0);
      } else {
        ASSERT_NEAR(phi(k, j), 0.0, 1e-14);
      }
    }
}

TEST(Feasibility, DiagonalCouplingAlwaysFeasible) {
  MatR phi = MatR::Zero(3, 3);
  phi.diagonal() << 2.0, 0.5, 1.0;
  VecR targets(3);
  targets << 10.0, 250.0, 1e4;
  const auto coupling = tpemimo::make_coupling(phi, targets, 0.1);
  const auto feas = tpemimo::feasibility(coupling);
  EXPECT_TRUE(feas.feasible);
  // Successive-difference stopping leaves an error of order diff/(spectral
  // gap); with targets this close together 1e-8 is the honest bound.
  const double want = (targets.array() / (1.0 + targets.array())).maxCoeff();
  EXPECT_NEAR(feas.radius, want, 1e-8);
}

TEST(Feasibility, TwoByTwoClosedForm) {
  MatR phi(2, 2);
  phi << 1.0, 0.3, 0.4, 0.8;
  VecR targets(2);
  targets << 1.5, 2.5;
  const auto coupling = tpemimo::make_coupling(phi, targets, 0.2);
  const MatR a = coupling.mu.asDiagonal() * phi;
  const double half_trace = 0.5 * (a(0, 0) + a(1, 1));
  const double half_gap = 0.5 * (a(0, 0) - a(1, 1));
  const double closed =
      half_trace + std::sqrt(half_gap * half_gap + a(0, 1) * a(1, 0));
  const auto feas = tpemimo::feasibility(coupling);
  EXPECT_NEAR(feas.radius, closed, 1e-10);
}

TEST(Feasibility, FlipsExactlyWhereDenseRadiusCrossesOne) {
  tpemimo::SplitMix64 rng(77);
  MatR phi(4, 4);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j) phi(k, j) = 0.05 + rng.next_uniform();
  VecR base = VecR::Ones(4);
  // Bisection on the common target scale.
  double lo = 1e-3, hi = 1e5;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const auto coupling = tpemimo::make_coupling(phi, VecR(mid * base), 0.1);
    (tpemimo::feasibility(coupling).feasible ? lo : hi) = mid;
  }
  for (double scale : {lo * 0.999, hi * 1.001}) {
    const auto coupling = tpemimo::make_coupling(phi, VecR(scale * base), 0.1);
    const auto feas = tpemimo::feasibility(coupling);
    const double oracle = dense_radius(coupling.mu.asDiagonal() * phi);
    EXPECT_NEAR(feas.radius, oracle, 1e-9 * std::max(1.0, oracle));
    EXPECT_EQ(feas.feasible, oracle < 1.0 - 1e-9);
  }
  // The flip point brackets radius 1 tightly.
  EXPECT_NEAR(hi / lo, 1.0, 1e-6);
}

TEST(MinPowers, SingleUserClosedForm) {
  MatR phi = MatR::Constant(1, 1, 0.37);
  VecR targets = VecR::Constant(1, 4.2);
  const double nu = 0.15;
  const auto coupling = tpemimo::make_coupling(phi, targets, nu);
  const VecR p = tpemimo::min_powers(coupling, LinkSide::uplink);
  EXPECT_NEAR(p(0), targets(0) * nu / phi(0, 0), 1e-12);
}

TEST(MinPowers, DiagonalCouplingDecouples) {
  MatR phi = MatR::Zero(3, 3);
  phi.diagonal() << 0.5, 1.5, 2.5;
  VecR targets(3);
  targets << 1.0, 2.0, 3.0;
  const double nu = 0.3;
  const auto coupling = tpemimo::make_coupling(phi, targets, nu);
  for (LinkSide side : {LinkSide::uplink, LinkSide::downlink}) {
    const VecR p = tpemimo::min_powers(coupling, side);
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(p(k), nu * targets(k) / phi(k, k), 1e-12);
  }
}

TEST(MinPowers, AchievesTargetsExactly) {
  const int m_dim = 16, k_dim = 4;
  const MatC h = random_channel(11, m_dim, k_dim);
  tpemimo::SplitMix64 rng(12);
  const MatC v =
      unit_columns(tpemimo::complex_normal_matrix(rng, m_dim, k_dim, 1.0));
  const double nu = 0.2;
  // Targets strictly inside the achievable region: a fraction of the SINRs
  // realized at unit powers.
  const VecR targets =
      0.7 * tpemimo::all_sinrs(h, v, VecR::Ones(k_dim), nu, LinkSide::uplink);
  const auto coupling =
      tpemimo::make_coupling(tpemimo::coupling_matrix(h, v), targets, nu);
  ASSERT_TRUE(tpemimo::feasibility(coupling).feasible);

  const VecR p = tpemimo::min_powers(coupling, LinkSide::uplink);
  const VecR ul = tpemimo::all_sinrs(h, v, p, nu, LinkSide::uplink);
  for (int k = 0; k < k_dim; ++k)
    EXPECT_NEAR(ul(k), targets(k), 1e-8 * std::max(1.0, targets(k)));

  const VecR q = tpemimo::min_powers(coupling, LinkSide::downlink);
  const VecR dl = tpemimo::all_sinrs(h, v, q, nu, LinkSide::downlink);
  for (int k = 0; k < k_dim; ++k)
    EXPECT_NEAR(dl(k), targets(k), 1e-8 * std::max(1.0, targets(k)));
}

TEST(MinPowers, SumPowerConservation) {
  tpemimo::SplitMix64 rng(21);
  for (int instance = 0; instance < 100; ++instance) {
    const int k_dim = 2 + int(rng.next_uniform() * 5);
    MatR phi(k_dim, k_dim);
    for (int k = 0; k < k_dim; ++k)
      for (int j = 0; j < k_dim; ++j)
        phi(k, j) = (k == j ? 1.0 : 0.2) * (0.1 + rng.next_uniform());
    VecR targets(k_dim);
    for (int k = 0; k < k_dim; ++k) targets(k) = 0.1 + rng.next_uniform();
    const auto coupling = tpemimo::make_coupling(phi, targets, 0.25);
    if (!tpemimo::feasibility(coupling).feasible) continue;
    const VecR p = tpemimo::min_powers(coupling, LinkSide::uplink);
    const VecR q = tpemimo::min_powers(coupling, LinkSide::downlink);
    ASSERT_NEAR(p.sum(), q.sum(), 1e-10 * std::max(1.0, p.sum()))
        << "instance " << instance;
  }
}

TEST(MinPowers, ComponentwiseMinimalAmongFeasiblePoints) {
  // Any power vector is feasible for its own achieved SINRs; the minimum
  // power solve for those targets must come in at or below it everywhere.
  const int m_dim = 16, k_dim = 4;
  const MatC h = random_channel(31, m_dim, k_dim);
  tpemimo::SplitMix64 rng(32);
  const MatC v =
      unit_columns(tpemimo::complex_normal_matrix(rng, m_dim, k_dim, 1.0));
  const double nu = 0.3;
  for (int instance = 0; instance < 50; ++instance) {
    VecR p_feasible(k_dim);
    for (int k = 0; k < k_dim; ++k)
      p_feasible(k) = 0.05 + 2.0 * rng.next_uniform();
    const VecR achieved =
        tpemimo::all_sinrs(h, v, p_feasible, nu, LinkSide::uplink);
    const auto coupling =
        tpemimo::make_coupling(tpemimo::coupling_matrix(h, v), achieved, nu);
    const VecR p_min = tpemimo::min_powers(coupling, LinkSide::uplink);
    for (int k = 0; k < k_dim; ++k)
      ASSERT_LE(p_min(k), p_feasible(k) + 1e-8) << "instance " << instance;
  }
}

TEST(MinPowers, InfeasibleTargetsError) {
  MatR phi = MatR::Constant(3, 3, 1.0);
  VecR targets = VecR::Constant(3, 100.0);  // far beyond what coupling allows
  const auto coupling = tpemimo::make_coupling(phi, targets, 0.1);
  EXPECT_FALSE(tpemimo::feasibility(coupling).feasible);
  EXPECT_THROW(tpemimo::min_powers(coupling, LinkSide::uplink),
               std::runtime_error);
}

TEST(UlToDl, SymmetricOrthogonalUsersKeepUniformPowers) {
  MatC h = MatC::Zero(8, 4);
  for (int k = 0; k < 4; ++k) h(k, k) = cplx(0.9, 0.0);
  const MatC v = unit_columns(h);
  const VecR p = VecR::Ones(4);
  const VecR q = tpemimo::ul_to_dl(h, v, p, 0.2);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(q(k), 1.0, 1e-10);
}

TEST(UlToDl, CraftedAsymmetricTwoUserInstance) {
  MatC h = MatC::Zero(6, 2);
  h(0, 0) = cplx(1.2, 0.0);
  h(1, 0) = cplx(0.0, 0.4);
  h(0, 1) = cplx(0.5, 0.1);
  h(1, 1) = cplx(-0.8, 0.3);
  const MatC v = unit_columns(h);
  VecR p(2);
  p << 1.4, 0.6;
  const double nu = 0.12;
  const VecR ul = tpemimo::all_sinrs(h, v, p, nu, LinkSide::uplink);
  const VecR q = tpemimo::ul_to_dl(h, v, p, nu);
  const VecR dl = tpemimo::all_sinrs(h, v, q, nu, LinkSide::downlink);
  for (int k = 0; k < 2; ++k)
    EXPECT_NEAR(dl(k), ul(k), 1e-8 * std::max(1.0, ul(k)));
  EXPECT_NEAR(q.sum(), p.sum(), 1e-8 * p.sum());
}

TEST(UlToDl, TpePrecoderVectorsConserveSumPower) {
  const int m_dim = 32, k_dim = 4;
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    const MatC h = random_channel(seed, m_dim, k_dim);
    tpemimo::SplitMix64 rng(seed + 100);
    VecR p(k_dim);
    for (int k = 0; k < k_dim; ++k) p(k) = 0.3 + rng.next_uniform();
    p *= k_dim / p.sum();
    const double nu = 0.18;
    const auto weights = tpemimo::tpe_weights(h, p, nu, 2);
    const MatC v = tpemimo::horner_precoder(h, p, weights, 2);
    const VecR q = tpemimo::ul_to_dl(h, v, p, nu);
    EXPECT_NEAR(q.sum(), p.sum(), 1e-10 * p.sum()) << "seed " << seed;
    const VecR ul = tpemimo::all_sinrs(h, v, p, nu, LinkSide::uplink);
    const VecR dl = tpemimo::all_sinrs(h, v, q, nu, LinkSide::downlink);
    for (int k = 0; k < k_dim; ++k)
      EXPECT_NEAR(dl(k), ul(k), 1e-8 * std::max(1.0, ul(k)));
  }
}

}  // namespace
