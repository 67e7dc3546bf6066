// SPDX-License-Identifier: MIT
#pragma once

/// @file latency.hpp
/// Analytical cycle-count model of the hardware precoding pipeline: primitive
/// operation latencies, per-unit latencies (Householder vector computation,
/// column zeroing, back substitution, QRH inversion, the truncated-recursion
/// unit, Gram computation, precoding, direct transmission), DSP block counts,
/// latency-amplification ratios, and wall-clock conversion.

#include <cmath>
#include <vector>

#include "tpemimo/common.hpp"

namespace tpemimo {

/// Hardware cost parameters. Cycle counts for the real primitives follow the
/// usual DSP-block assumptions (adds and multiplies single-cycle, divides and
/// square roots four cycles). The complex-divide count n_cd is not pinned by
/// the primitive set; its default of 4 reproduces the reference pipeline
/// totals and can be overridden per configuration.
struct LatencyParams {
  long long n_a = 1;   ///< real addition
  long long n_m = 1;   ///< real multiplication
  long long n_rd = 4;  ///< real division
  long long n_s = 4;   ///< real square root
  long long n_cd = 4;  ///< complex division (documented, overridable)
  long long u = 4;     ///< parallelization index, power of two, u <= k
  long long m = 160;   ///< antennas
  long long k = 16;    ///< users
  long long j = 4;     ///< polynomial order
  double f_d = 300e6;  ///< DSP clock frequency [Hz]
  long long b = 100;   ///< resource blocks sharing one precoder computation
  long long s = 12;    ///< subcarriers per resource block

  long long n_ca() const { return n_a; }            ///< complex add
  long long n_cm() const { return n_m + n_a; }      ///< complex multiply
  long long n_ccm() const { return n_cm(); }        ///< conjugate multiply
};

/// Smallest integer exponent e with 2^e >= n.
inline long long ceil_log2(long long n) {
  require(n >= 1, "ceil_log2: argument must be positive");
  long long e = 0, v = 1;
  while (v < n) {
    v <<= 1;
    ++e;
  }
  return e;
}

namespace detail {

inline void validate_latency_params(const LatencyParams& lp) {
  require(lp.n_a >= 1 && lp.n_m >= 1 && lp.n_rd >= 1 && lp.n_s >= 1 &&
              lp.n_cd >= 1,
          "latency: primitive cycle counts must be positive");
  require(lp.m >= 1 && lp.k >= 1 && lp.j >= 1,
          "latency: dimensions must be positive");
  require(lp.k >= 3, "latency: at least three users (log2(K-2) domain)");
  require(lp.u >= 1 && (lp.u & (lp.u - 1)) == 0,
          "latency: parallelization index must be a power of two");
  require(lp.u <= lp.k,
          "latency: parallelization index must not exceed the user count");
  require(lp.b >= 1 && lp.s >= 1, "latency: block/subcarrier counts");
}

inline long long ceil_to_cycles(double x) {
  return static_cast<long long>(std::ceil(x - 1e-12));
}

}  // namespace detail

/// Pipelined dot product of the given length: one multiply, one add, and a
/// log-depth adder tree.
inline long long dot_product_latency(const LatencyParams& lp,
                                     long long length) {
  require(length >= 1, "dot_product_latency: length must be positive");
  return lp.n_m + lp.n_a + ceil_log2(length) * lp.n_a;
}

struct LatencyReport {
  // Unit latencies [cycles].
  long long hvc = 0;   ///< Householder vector computation
  long long bks = 0;   ///< back substitution
  long long qrh = 0;   ///< full QRH matrix inversion
  long long tr = 0;    ///< truncated-recursion (polynomial) unit
  long long gc = 0;    ///< Gram computation
  long long pc = 0;    ///< precoder application (full matrix)
  long long p = 0;     ///< per-subcarrier precoding unit; 0 when U·K >= M
  long long dtpe = 0;  ///< direct per-subcarrier transmission unit
  std::vector<long long> hcz;  ///< per-step column-zeroing latencies

  // Scheme totals [cycles].
  long long rzf = 0;
  long long tpe = 0;
  long long tpep = 0;   ///< tpe + s·p (pipelined over subcarriers)
  long long dtpep = 0;  ///< gc + s·dtpe

  // DSP block counts.
  long long chi_qrh = 0;
  long long chi_tr = 0;

  // Amplification ratios.
  double amplification = 0.0;  ///< rzf / tpe
  double alpha_dtpep = 0.0;    ///< dtpep / tpep
};

/// Evaluates every unit-latency formula; all logarithms are ceiled and each
/// unit total is ceiled to whole cycles (pipeline ratios may be fractional
/// when the parallelization index does not divide the dimensions).
inline LatencyReport unit_latencies(const LatencyParams& lp) {
  detail::validate_latency_params(lp);
  const double m = double(lp.m), k = double(lp.k), u = double(lp.u);
  const long long n_ca = lp.n_ca(), n_cm = lp.n_cm(), n_ccm = lp.n_ccm();
  LatencyReport rep;

  rep.hvc = 2 * n_ccm + (4 + ceil_log2(lp.k - 2)) * lp.n_a + lp.n_m +
            2 * lp.n_rd + lp.n_s;
  rep.hcz.reserve(std::size_t(lp.k - 1));
  long long zero_tree_sum = 0;
  for (long long step = 1; step <= lp.k - 1; ++step) {
    const long long depth = ceil_log2(lp.k - step + 1);
    rep.hcz.push_back(2 * n_cm + (1 + depth) * n_ca);
    zero_tree_sum += depth;
  }
  rep.bks = lp.k * (lp.n_cd + n_cm + n_ca);
  rep.qrh = (lp.k - 1) * rep.hvc + rep.bks + lp.k * (2 * n_cm + n_ca) +
            n_ca + n_ca * zero_tree_sum;

  rep.tr = detail::ceil_to_cycles(
      double(n_cm + n_ca) +
      double(lp.j - 1) * (double(n_cm + ceil_log2(lp.k) * n_ca) +
                          (k / u - 1.0) + double(n_ca)));

  if (lp.k * lp.k >= lp.m) {
    rep.gc = detail::ceil_to_cycles(double(lp.n_a + n_cm) +
                                    double(ceil_log2(lp.m) * n_ca) +
                                    (m / u - 1.0));
  } else {
    const double ratio = m / (k * k);
    rep.gc = detail::ceil_to_cycles(
        double(lp.n_a + n_cm) +
        double((ceil_log2(lp.k * lp.k) +
                ceil_log2(detail::ceil_to_cycles(ratio))) *
               n_ca) +
        (m / u - 1.0) * (1.0 + ratio));
  }

  rep.pc = detail::ceil_to_cycles(
      double(n_cm + ceil_log2(lp.k) * n_ca) + (m / u - 1.0));

  if (lp.u * lp.k < lp.m)
    rep.p = detail::ceil_to_cycles(double(n_cm + ceil_log2(lp.k) * n_ca) +
                                   (m / (u * k) - 1.0));
  // The direct path ends with the same per-subcarrier output stage the
  // matrix path uses, so its unit cost includes the P-unit term.
  rep.dtpe =
      n_cm + lp.j * (n_cm + ceil_log2(lp.k) * n_ca + n_ca) + rep.p;

  rep.rzf = rep.gc + rep.qrh + rep.pc;
  rep.tpe = rep.gc + rep.tr + rep.pc;
  rep.tpep = rep.tpe + lp.s * rep.p;
  rep.dtpep = rep.gc + lp.s * rep.dtpe;

  rep.chi_qrh = 4 * (lp.k * lp.k + 3 * lp.k);
  rep.chi_tr = 4 * lp.u * lp.k * lp.k;

  rep.amplification = double(rep.rzf) / double(rep.tpe);
  rep.alpha_dtpep = double(rep.dtpep) / double(rep.tpep);
  return rep;
}

enum class PrecodingScheme { rzf, tpe };

inline long long total_latency(const LatencyParams& lp,
                               PrecodingScheme scheme) {
  const LatencyReport rep = unit_latencies(lp);
  return scheme == PrecodingScheme::rzf ? rep.rzf : rep.tpe;
}

/// Wall-clock seconds to produce precoders for all resource blocks.
inline double wall_clock(const LatencyParams& lp, long long cycles) {
  require(lp.f_d > 0.0, "wall_clock: clock frequency must be positive");
  require(cycles >= 0, "wall_clock: negative cycle count");
  return double(lp.b) * double(cycles) / lp.f_d;
}

struct DtpepComparison {
  long long tpep = 0;   ///< matrix path: precoder computation + s applies
  long long dtpep = 0;  ///< direct path: Gram + s direct transmissions
  double alpha = 0.0;   ///< amplification ratio dtpep / tpep
};

/// Subcarrier-pipelined comparison of the matrix and direct transmission
/// paths. The ratio contains no resource-block factor, so it is exactly
/// independent of b.
inline DtpepComparison dtpep_comparison(const LatencyParams& lp) {
  const LatencyReport rep = unit_latencies(lp);
  return {rep.tpep, rep.dtpep, rep.alpha_dtpep};
}

}  // namespace tpemimo
