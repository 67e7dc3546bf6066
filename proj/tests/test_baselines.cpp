// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "tpemimo/baselines.hpp"
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

MatC random_hermitian_pd(std::uint64_t seed, int k_dim) {
  tpemimo::SplitMix64 rng(seed);
  const MatC a = tpemimo::complex_normal_matrix(rng, k_dim + 4, k_dim, 1.0);
  MatC g = a.adjoint() * a;
  g.diagonal().array() += cplx(0.1 * k_dim, 0.0);
  return g;
}

TEST(ConjBf, OrthogonalColumnsGiveIdentityGram) {
  MatC h = MatC::Zero(8, 3);
  h(0, 0) = cplx(2.0, 0.0);
  h(1, 1) = cplx(0.0, -1.5);
  h(2, 2) = cplx(0.3, 0.4);
  const MatC v = tpemimo::conj_bf(h);
  const MatC gram = v.adjoint() * v;
  EXPECT_LT((gram - MatC::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ConjBf, MatchesZeroOrderTpeDirections) {
  const MatC h = random_channel(10, 24, 4);
  const VecR p = VecR::Ones(4);
  const auto weights = tpemimo::tpe_weights(h, p, 0.4, 0);
  const MatC tpe = tpemimo::horner_precoder(h, p, weights, 0);
  const MatC cbf = tpemimo::conj_bf(h);
  for (int k = 0; k < 4; ++k)
    EXPECT_LT((tpe.col(k) - cbf.col(k)).norm(), 1e-10);
}

TEST(ConjBf, SingleUserAttainsMmseSinrAndRejectsZeroColumn) {
  const MatC h = random_channel(11, 16, 1);
  const VecR p = VecR::Constant(1, 1.4);
  const double nu = 0.3;
  const MatC v = tpemimo::conj_bf(h);
  const auto mmse = tpemimo::mmse_receiver(h, p, nu);
  const double cbf_sinr = tpemimo::finite_sinr(h, v, p, nu, 0, LinkSide::uplink);
  EXPECT_NEAR(cbf_sinr, mmse.sinr(0), 1e-10 * std::max(1.0, mmse.sinr(0)));
  EXPECT_THROW(tpemimo::conj_bf(MatC::Zero(4, 1)), std::runtime_error);
}

TEST(MmseReceiver, SingleUserClosedForm) {
  const MatC h = random_channel(21, 12, 1);
  const VecR p = VecR::Constant(1, 0.9);
  const double nu = 0.25;
  const auto mmse = tpemimo::mmse_receiver(h, p, nu);
  EXPECT_NEAR(std::abs(h.col(0).normalized().dot(mmse.v.col(0))), 1.0, 1e-12);
  EXPECT_NEAR(mmse.sinr(0), 0.9 * h.col(0).squaredNorm() / nu,
              1e-10 * mmse.sinr(0));
}

TEST(MmseReceiver, MatchesRegularizedInverseDirection) {
  const int m_dim = 24, k_dim = 5;
  const MatC h = random_channel(22, m_dim, k_dim);
  tpemimo::SplitMix64 rng(23);
  VecR p(k_dim);
  for (int k = 0; k < k_dim; ++k) p(k) = 0.4 + rng.next_uniform();
  const double nu = 0.2;
  const auto mmse = tpemimo::mmse_receiver(h, p, nu);
  const MatC hbar = h * p.cwiseSqrt().cast<cplx>().asDiagonal();
  const MatC reg =
      hbar * hbar.adjoint() + nu * MatC::Identity(m_dim, m_dim);
  for (int k = 0; k < k_dim; ++k) {
    const VecC dir = reg.ldlt().solve(VecC(h.col(k))).normalized();
    EXPECT_NEAR(std::abs(dir.dot(mmse.v.col(k))), 1.0, 1e-9) << "user " << k;
  }
}

TEST(MmseReceiver, ClosedFormSinrMatchesDirectEvaluation) {
  const MatC h = random_channel(25, 32, 4);
  tpemimo::SplitMix64 rng(26);
  VecR p(4);
  for (int k = 0; k < 4; ++k) p(k) = 0.5 + rng.next_uniform();
  const double nu = 0.15;
  const auto mmse = tpemimo::mmse_receiver(h, p, nu);
  for (int k = 0; k < 4; ++k) {
    const double direct =
        tpemimo::finite_sinr(h, mmse.v, p, nu, k, LinkSide::uplink);
    EXPECT_NEAR(mmse.sinr(k), direct, 1e-9 * std::max(1.0, direct));
  }
}

TEST(MmseReceiver, HugeRegularizationApproachesConjugateBf) {
  const MatC h = random_channel(27, 16, 3);
  const VecR p = VecR::Ones(3);
  const MatC gram_full = h * h.adjoint();
  const double spectral =
      Eigen::SelfAdjointEigenSolver<MatC>(gram_full).eigenvalues().maxCoeff();
  const auto mmse = tpemimo::mmse_receiver(h, p, 1e6 * spectral);
  const MatC cbf = tpemimo::conj_bf(h);
  for (int k = 0; k < 3; ++k) {
    const double angle =
        std::acos(std::min(1.0, std::abs(cbf.col(k).dot(mmse.v.col(k)))));
    EXPECT_LT(angle, 1e-3);
  }
}

TEST(QrhInvert, IdentityAndDiagonalClosedForms) {
  EXPECT_LT((tpemimo::qrh_invert(MatC::Identity(5, 5)) - MatC::Identity(5, 5))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  MatC d = MatC::Zero(2, 2);
  d(0, 0) = cplx(2.0, 0.0);
  d(1, 1) = cplx(4.0, 0.0);
  const MatC inv = tpemimo::qrh_invert(d);
  EXPECT_NEAR(std::real(inv(0, 0)), 0.5, 1e-12);
  EXPECT_NEAR(std::real(inv(1, 1)), 0.25, 1e-12);
  EXPECT_LT(std::abs(inv(0, 1)) + std::abs(inv(1, 0)), 1e-12);
}

TEST(QrhInvert, MatchesLuOracleAcrossSizes) {
  for (int k_dim : {4, 8, 16, 32}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const MatC g = random_hermitian_pd(1000 * k_dim + seed, k_dim);
      const MatC inv = tpemimo::qrh_invert(g);
      const MatC lu = g.partialPivLu().solve(MatC::Identity(k_dim, k_dim));
      const double rel =
          (inv - lu).cwiseAbs().maxCoeff() / lu.cwiseAbs().maxCoeff();
      ASSERT_LT(rel, 1e-9) << "K=" << k_dim << " seed=" << seed;
      const double resid =
          (g * inv - MatC::Identity(k_dim, k_dim)).cwiseAbs().maxCoeff();
      ASSERT_LT(resid, 1e-9) << "K=" << k_dim << " seed=" << seed;
    }
  }
}

TEST(QrhInvert, RejectsZeroPivot) {
  EXPECT_THROW(tpemimo::qrh_invert(MatC::Zero(3, 3)), std::runtime_error);
}

TEST(RzfPrecoder, MatchedRegularizationEqualsDualMmse) {
  const int m_dim = 32, k_dim = 4;
  const MatC h = random_channel(31, m_dim, k_dim);
  const VecR p = VecR::Ones(k_dim);
  const double nu = 0.2;
  const MatC v = tpemimo::rzf_precoder(h, nu);
  const auto mmse = tpemimo::mmse_receiver(h, p, nu);
  for (int k = 0; k < k_dim; ++k) {
    const double rzf_sinr =
        tpemimo::finite_sinr(h, v, p, nu, k, LinkSide::uplink);
    EXPECT_NEAR(rzf_sinr, mmse.sinr(k), 1e-8 * std::max(1.0, mmse.sinr(k)));
  }
}

TEST(RzfPrecoder, ExtremeRegularizationAndOrthogonalCases) {
  const MatC h = random_channel(32, 16, 3);
  const MatC heavy = tpemimo::rzf_precoder(h, 1e9);
  const MatC cbf = tpemimo::conj_bf(h);
  for (int k = 0; k < 3; ++k)
    EXPECT_NEAR(std::abs(cbf.col(k).dot(heavy.col(k))), 1.0, 1e-6);

  MatC ortho = MatC::Zero(8, 3);
  ortho(0, 0) = cplx(1.0, 0.0);
  ortho(1, 1) = cplx(2.0, 0.0);
  ortho(2, 2) = cplx(0.0, 0.5);
  const MatC v = tpemimo::rzf_precoder(ortho, 0.0);
  const MatR phi = tpemimo::coupling_matrix(ortho, v);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      if (k != j) {
        ASSERT_NEAR(phi(k, j), 0.0, 1e-14);
      }
    }
}

TEST(ZareiMoments, ClosedFormValuesAndMpIdentity) {
  const double beta = 0.1;
  const VecR rho = tpemimo::zarei_moments(beta, 9);
  EXPECT_NEAR(rho(1), 1.0, 1e-15);
  EXPECT_NEAR(rho(2), 1.0 + beta, 1e-15);
  EXPECT_NEAR(rho(3), 1.0 + 3 * beta + beta * beta, 1e-14);
  for (double b : {0.1, 0.5, 1.0})
    for (int ell = 1; ell <= 8; ++ell)
      EXPECT_NEAR(tpemimo::zarei_moments(b, ell + 1)(ell),
                  tpemimo::mp_moment(b, ell) / b,
                  1e-12 * tpemimo::mp_moment(b, ell) / b);
}

TEST(ZareiMoments, MatchesMonteCarloTraceMoments) {
  const int m_dim = 512, k_dim = 128, trials = 30;
  const double beta = double(k_dim) / m_dim;
  const VecR rho = tpemimo::zarei_moments(beta, 5);
  VecR mc = VecR::Zero(5);
  for (int t = 0; t < trials; ++t) {
    const MatC h = random_channel(5000 + std::uint64_t(t), m_dim, k_dim);
    const MatC gram = h.adjoint() * h;
    MatC power = MatC::Identity(k_dim, k_dim);
    for (int ell = 1; ell <= 4; ++ell) {
      power = power * gram;
      mc(ell) += power.trace().real() / double(k_dim) / trials;
    }
  }
  for (int ell = 1; ell <= 4; ++ell)
    EXPECT_NEAR(mc(ell), rho(ell), 0.03 * rho(ell)) << "ell=" << ell;
}

TEST(ZareiPrecoder, OrderZeroIsConjugateBf) {
  const MatC h = random_channel(41, 24, 4);
  VecR pathloss(4);
  pathloss << 0.5, 1.0, 1.5, 2.0;
  const MatC v =
      tpemimo::zarei_precoder(h, pathloss, VecR::Ones(4), 0.3, 0);
  const MatC cbf = tpemimo::conj_bf(h);
  for (int k = 0; k < 4; ++k)
    EXPECT_NEAR(std::abs(cbf.col(k).dot(v.col(k))), 1.0, 1e-12);
}

TEST(ZareiPrecoder, IidSymmetricCaseMatchesAsymptoticPerUserTpe) {
  // In the symmetric i.i.d. case the per-user asymptotic quadratic-form
  // moments satisfy rho_ell = zarei rho(ell+1) exactly (a diagonal Gram
  // power entry concentrates on the normalized trace), so the two designs
  // produce the same weight direction and the same precoder columns. The
  // realization-adaptive finite-coefficient variant can only do better.
  const int m_dim = 64, k_dim = 16, order = 2;
  const double nu = double(k_dim) / m_dim / 10.0;  // 10 dB
  const VecR p = VecR::Ones(k_dim);
  const MatR d = MatR::Ones(m_dim, k_dim);
  const tpemimo::MomentTable table =
      tpemimo::asymptotic_moments(d, 2 * order + 1);
  const auto weights =
      tpemimo::tpe_weights_asymptotic(table.rho, p, nu, order);
  for (int t = 0; t < 5; ++t) {
    const MatC h = random_channel(7000 + std::uint64_t(t), m_dim, k_dim);
    const MatC v_tpe = tpemimo::horner_precoder(h, p, weights, order);
    const MatC v_z =
        tpemimo::zarei_precoder(h, VecR::Ones(k_dim), p, nu, order);
    for (int k = 0; k < k_dim; ++k)
      ASSERT_NEAR(std::abs(v_tpe.col(k).dot(v_z.col(k))), 1.0, 1e-9)
          << "trial " << t << " user " << k;

    const auto finite = tpemimo::tpe_weights(h, p, nu, order);
    const MatC v_fin = tpemimo::horner_precoder(h, p, finite, order);
    double rate_fin = 0.0, rate_z = 0.0;
    for (int k = 0; k < k_dim; ++k) {
      rate_fin += std::log2(
          1.0 + tpemimo::finite_sinr(h, v_fin, p, nu, k, LinkSide::uplink));
      rate_z += std::log2(
          1.0 + tpemimo::finite_sinr(h, v_z, p, nu, k, LinkSide::uplink));
    }
    ASSERT_GE(rate_fin, rate_z - 1e-9);
  }
}

}  // namespace
