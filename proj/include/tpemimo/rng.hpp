// SPDX-License-Identifier: MIT
#pragma once

/// @file rng.hpp
/// Deterministic random number generation.
///
/// Simulations must reproduce bit-identically across platforms and across
/// worker splits, so this header implements the full path from integer state
/// to Gaussian samples instead of relying on std::normal_distribution (whose
/// algorithm is implementation-defined):
///   - splitmix64 for the integer stream,
///   - an explicit u64 -> (0,1] double mapping,
///   - Box-Muller for normal pairs.
/// Independent substreams (one per Monte-Carlo trial) are derived in counter
/// mode from a master seed, so the assignment of trials to workers cannot
/// change any drawn value.

#include <cmath>
#include <cstdint>

#include "tpemimo/common.hpp"

namespace tpemimo {

/// splitmix64: additive counter state passed through an avalanche mixer.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw in (0, 1]: 53 high bits, shifted so 0 is excluded (log of
  /// the result is always finite, which Box-Muller needs).
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second value of each generated pair
  /// is cached so consecutive scalar draws consume one uniform pair.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Circularly-symmetric complex normal with E|z|^2 = variance, i.e. real
  /// and imaginary parts are independent N(0, variance/2). Draws one
  /// Box-Muller pair directly (does not touch the scalar spare cache).
  cplx next_complex_normal(double variance = 1.0) {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-std::log(u1) * variance);
    const double a = 2.0 * kPi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Seed of the `index`-th substream of `master`. Counter mode: the state
/// jumps to master + (index+1)*gamma and one mixer output is taken, so
/// substreams are decorrelated even for adjacent indices.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  SplitMix64 g(master + index * 0x9e3779b97f4a7c15ULL);
  return g.next_u64();
}

/// Vector of i.i.d. CN(0, variance) entries, filled in index order.
inline VecC complex_normal_vector(SplitMix64& rng, Eigen::Index n,
                                  double variance = 1.0) {
  VecC v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.next_complex_normal(variance);
  return v;
}

/// Matrix of i.i.d. CN(0, variance) entries, filled column by column (Eigen's
/// storage order) so that draw order is well defined.
inline MatC complex_normal_matrix(SplitMix64& rng, Eigen::Index rows,
                                  Eigen::Index cols, double variance = 1.0) {
  MatC m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = rng.next_complex_normal(variance);
  return m;
}

}  // namespace tpemimo
