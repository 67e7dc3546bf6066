// SPDX-License-Identifier: MIT
#pragma once

/// @file channel.hpp
/// Geometric ULA channel model: array responses, Toeplitz covariances from
/// angular scattering functions, circulant approximations in the DFT basis,
/// variance profiles, and seeded random channel realizations.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tpemimo/common.hpp"
#include "tpemimo/quadrature.hpp"
#include "tpemimo/rng.hpp"

namespace tpemimo {

// ---------------------------------------------------------------- types ----

/// Global system dimensions and operating point.
struct SystemConfig {
  int M = 0;                           ///< antenna count (>= 2)
  int K = 0;                           ///< user count (>= 1, <= M)
  double snr = 1.0;                    ///< linear transmit SNR P/N0
  double beta = 0.0;                   ///< spatial load K/M
  double nu = 0.0;                     ///< per-component noise variance β/SNR
  double antenna_spacing_ratio = 0.5;  ///< d/λ
};

inline void validate_system_config(const SystemConfig& cfg) {
  require(cfg.M >= 2, "SystemConfig: M must be >= 2");
  require(cfg.K >= 1, "SystemConfig: K must be >= 1");
  require(cfg.M >= cfg.K, "SystemConfig: M must be >= K");
  require(cfg.snr > 0.0, "SystemConfig: snr must be positive");
  require(cfg.beta == double(cfg.K) / double(cfg.M),
          "SystemConfig: beta != K/M");
  require(cfg.nu == cfg.beta / cfg.snr, "SystemConfig: nu != beta/snr");
  require(cfg.antenna_spacing_ratio > 0.0,
          "SystemConfig: antenna spacing ratio must be positive");
}

/// Build a config with the derived fields (beta, nu) filled consistently.
inline SystemConfig make_system_config(int M, int K, double snr,
                                       double antenna_spacing_ratio = 0.5) {
  SystemConfig cfg;
  cfg.M = M;
  cfg.K = K;
  cfg.snr = snr;
  cfg.beta = double(K) / double(M);
  cfg.nu = cfg.beta / snr;
  cfg.antenna_spacing_ratio = antenna_spacing_ratio;
  validate_system_config(cfg);
  return cfg;
}

/// One scattering cluster: uniform angular density on
/// [center - spread/2, center + spread/2].
struct Cluster {
  double center = 0.0;  ///< center AoA, radians
  double spread = 0.0;  ///< angular spread Δ, radians
};

/// Cluster set, per-user cluster association, and the served AoA sector.
/// Each cluster carries scattering weight 1/S (S = total cluster count), so
/// the large-scale coefficient of user k is A_k = |S_k|/S.
struct ScatteringGeometry {
  std::vector<Cluster> clusters;
  std::vector<std::vector<int>> association;  ///< per user: cluster indices
  double sector_min = -kPi / 3.0;
  double sector_max = kPi / 3.0;
};

inline void validate_geometry(const ScatteringGeometry& geom) {
  const int s = int(geom.clusters.size());
  require(s >= 1, "ScatteringGeometry: need at least one cluster");
  require(geom.sector_min < geom.sector_max,
          "ScatteringGeometry: empty sector");
  for (const Cluster& c : geom.clusters) {
    require(c.spread > 0.0, "ScatteringGeometry: cluster spread must be > 0");
    require(c.center - c.spread / 2.0 >= geom.sector_min - 1e-12 &&
                c.center + c.spread / 2.0 <= geom.sector_max + 1e-12,
            "ScatteringGeometry: cluster support exceeds sector");
  }
  require(!geom.association.empty(),
          "ScatteringGeometry: association table is empty");
  for (const auto& sk : geom.association) {
    require(!sk.empty(), "ScatteringGeometry: user with empty cluster set");
    for (int idx : sk)
      require(idx >= 0 && idx < s,
              "ScatteringGeometry: cluster index out of range");
  }
}

/// A_k = |S_k|/S for flat per-cluster densities of weight 1/S.
inline double pathloss_coefficient(const ScatteringGeometry& geom, int k) {
  require(k >= 0 && k < int(geom.association.size()),
          "pathloss_coefficient: user index out of range");
  return double(geom.association[k].size()) / double(geom.clusters.size());
}

/// Per-user second-order statistics: Toeplitz generators, circulant spectra,
/// large-scale coefficients, and (optionally) cached covariance square roots
/// for exact-mode sampling.
struct CovarianceModel {
  std::vector<VecC> first_columns;  ///< per user: r_0..r_{M-1}
  MatR circulant_eigs;              ///< M×K, Λ_{m,k} >= 0
  VecR pathloss;                    ///< per user: A_k = tr(R_k)/M
  /// Hermitian square roots R_k^{1/2}; empty until prepare_exact_sampler is
  /// called (sample_channel falls back to computing them on the fly).
  std::vector<MatC> sqrt_factors;
};

/// Variance mask of the channel in the DFT basis: D_{m,k} = Λ_{m,k} p_k.
struct VarianceProfile {
  MatR d_sq;  ///< M×K, entries >= 0
};

enum class SampleMode { exact_toeplitz, circulant };

/// One seeded channel draw plus its provenance.
struct ChannelRealization {
  MatC h;  ///< M×K, column k is the (power-scaled) channel of user k
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::exact_toeplitz;
};

// ----------------------------------------------------------- operations ----

/// ULA response to a planar wavefront: element m is
/// exp(-j 2π m (d/λ) sin θ).
inline VecC array_response(double theta, const SystemConfig& cfg) {
  require(cfg.M >= 1, "array_response: M must be >= 1");
  VecC a(cfg.M);
  const double c = 2.0 * kPi * cfg.antenna_spacing_ratio * std::sin(theta);
  for (int m = 0; m < cfg.M; ++m) a(m) = std::polar(1.0, -c * m);
  return a;
}

/// First column of the Toeplitz covariance R_k:
/// r_n = ∫ exp(-j 2π (d/λ) n sin θ) ρ_k(θ) dθ with ρ_k flat of density
/// 1/(S·Δ_s) on each associated cluster. 512-point Gauss-Legendre per
/// cluster; entry 0 equals A_k up to quadrature roundoff.
inline VecC toeplitz_covariance(const ScatteringGeometry& geom, int k,
                                const SystemConfig& cfg) {
  require(k >= 0 && k < int(geom.association.size()),
          "toeplitz_covariance: user index out of range");
  require(!geom.association[k].empty(),
          "toeplitz_covariance: user has no associated clusters");
  const Quadrature& gl = gauss_legendre_512();
  const int nq = int(gl.nodes.size());
  const double s_total = double(geom.clusters.size());

  // Collect nodes mapped to each cluster support. The density 1/(S·Δ) and
  // the affine node map to width Δ combine to weight w_q / (2S).
  std::vector<double> sin_theta, weight;
  sin_theta.reserve(size_t(nq) * geom.association[k].size());
  weight.reserve(sin_theta.capacity());
  for (int ci : geom.association[k]) {
    const Cluster& cl = geom.clusters[ci];
    for (int q = 0; q < nq; ++q) {
      const double theta = cl.center + 0.5 * cl.spread * gl.nodes(q);
      sin_theta.push_back(std::sin(theta));
      weight.push_back(gl.weights(q) / (2.0 * s_total));
    }
  }

  VecC r(cfg.M);
  const double c = 2.0 * kPi * cfg.antenna_spacing_ratio;
  for (int n = 0; n < cfg.M; ++n) {
    cplx acc = 0.0;
    for (size_t q = 0; q < sin_theta.size(); ++q)
      acc += weight[q] * std::polar(1.0, -c * n * sin_theta[q]);
    r(n) = acc;
  }
  return r;
}

/// Dense Hermitian Toeplitz matrix from its first column (R = R^H exactly).
inline MatC toeplitz_from_column(const VecC& first_column) {
  const int m = int(first_column.size());
  MatC r(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      r(i, j) = (i >= j) ? first_column(i - j) : std::conj(first_column(j - i));
  return r;
}

/// Unitary DFT matrix [F]_{n,m} = (1/√M) exp(-j 2π n m / M).
inline MatC unitary_dft(int M) {
  require(M >= 1, "unitary_dft: M must be >= 1");
  MatC f(M, M);
  const double scale = 1.0 / std::sqrt(double(M));
  for (int n = 0; n < M; ++n)
    for (int m = 0; m < M; ++m)
      f(n, m) = scale * std::polar(1.0, -2.0 * kPi * double(n) * double(m) /
                                            double(M));
  return f;
}

/// Spectrum of the circulant approximation of a Hermitian Toeplitz matrix:
/// wrap the generator, r°_m = r_m + r_{m-M} (conjugate tail), and take its
/// DFT. The result must be real up to 1e-10 residue. Boxcar scattering
/// densities produce structural negative Gibbs lobes of a few percent of the
/// spectral peak at any M (up to ~20% for multi-cluster profiles at small M);
/// negatives down to -25% of the peak are therefore clipped to 0, anything
/// lower reports a badly non-PSD input.
inline VecR circulant_eigenvalues(const VecC& first_column, int M) {
  require(int(first_column.size()) == M,
          "circulant_eigenvalues: generator length != M");
  VecC wrapped(M);
  wrapped(0) = first_column(0);
  for (int m = 1; m < M; ++m)
    wrapped(m) = first_column(m) + std::conj(first_column(M - m));

  // R° = F diag(Λ) F^H with first column r° means r° = (1/M)·DFT(Λ), so the
  // eigenvalue of DFT bin m is the positive-exponent transform of r°.
  VecR lam(M);
  for (int m = 0; m < M; ++m) {
    cplx acc = 0.0;
    for (int n = 0; n < M; ++n)
      acc += wrapped(n) *
             std::polar(1.0, 2.0 * kPi * double(n) * double(m) / double(M));
    require(std::abs(acc.imag()) <= 1e-10,
            "circulant_eigenvalues: spectrum has imaginary residue > 1e-10");
    lam(m) = acc.real();
  }
  const double peak = lam.maxCoeff();
  require(peak > 0.0, "circulant_eigenvalues: spectrum has no positive mass");
  for (int m = 0; m < M; ++m) {
    if (lam(m) < 0.0) {
      require(lam(m) >= -0.25 * peak,
              "circulant_eigenvalues: eigenvalue below -25% of the spectral "
              "peak, input is not PSD within tolerance");
      lam(m) = 0.0;
    }
  }
  return lam;
}

/// Assemble per-user covariance statistics for a geometry.
inline CovarianceModel build_covariance_model(const ScatteringGeometry& geom,
                                              const SystemConfig& cfg) {
  validate_geometry(geom);
  require(int(geom.association.size()) == cfg.K,
          "build_covariance_model: association rows != K");
  CovarianceModel cov;
  cov.first_columns.resize(cfg.K);
  cov.circulant_eigs.resize(cfg.M, cfg.K);
  cov.pathloss.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    cov.first_columns[k] = toeplitz_covariance(geom, k, cfg);
    cov.circulant_eigs.col(k) = circulant_eigenvalues(cov.first_columns[k],
                                                      cfg.M);
    cov.pathloss(k) = cov.first_columns[k](0).real();
  }
  return cov;
}

/// Hermitian square root of a PSD Hermitian matrix with the shared clip
/// policy: eigenvalues in (-1e-6, 0) are clipped to 0, lower values error.
inline MatC psd_sqrt(const MatC& a, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<MatC> es(a);
  require(es.info() == Eigen::Success, what + ": eigensolver failed");
  VecR lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < 0.0) {
      require(lam(i) >= -1e-6,
              what + ": eigenvalue below -1e-6, matrix is not PSD within "
                     "tolerance");
      lam(i) = 0.0;
    }
  }
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Precompute and cache R_k^{1/2} for exact-mode sampling. One-time cost per
/// scenario; sampling afterwards is a matrix-vector product per user.
inline void prepare_exact_sampler(CovarianceModel& cov) {
  if (!cov.sqrt_factors.empty()) return;
  cov.sqrt_factors.resize(cov.first_columns.size());
  for (size_t k = 0; k < cov.first_columns.size(); ++k)
    cov.sqrt_factors[k] = psd_sqrt(toeplitz_from_column(cov.first_columns[k]),
                                   "prepare_exact_sampler");
}

/// Variance mask D_{m,k} = Λ_{m,k} p_k.
inline VarianceProfile variance_profile(const CovarianceModel& cov,
                                        const VecR& p) {
  require(p.size() == cov.circulant_eigs.cols(),
          "variance_profile: power vector length != K");
  for (int k = 0; k < p.size(); ++k)
    require(p(k) >= 0.0, "variance_profile: negative power");
  VarianceProfile vp;
  vp.d_sq = cov.circulant_eigs * p.asDiagonal();
  return vp;
}

/// Seeded channel draw.
///   circulant:      H̄ = F (𝕙 ⊙ √D) with 𝕙 i.i.d. CN(0, 1/M), D = Λ·diag(p)
///   exact_toeplitz: column k is (1/√M) R_k^{1/2} g_k √p_k, g_k i.i.d. CN(0,1)
/// Either mode consumes exactly M·K complex draws in column-major order, so
/// results are bit-deterministic given (seed, mode).
inline ChannelRealization sample_channel(const CovarianceModel& cov,
                                         const VecR& p,
                                         const SystemConfig& cfg,
                                         std::uint64_t seed, SampleMode mode) {
  require(int(cov.first_columns.size()) == cfg.K,
          "sample_channel: covariance model has wrong user count");
  require(cov.circulant_eigs.rows() == cfg.M,
          "sample_channel: covariance model has wrong antenna count");
  require(p.size() == cfg.K, "sample_channel: power vector length != K");
  SplitMix64 rng(seed);
  ChannelRealization out;
  out.seed = seed;
  out.mode = mode;
  if (mode == SampleMode::circulant) {
    const MatC noise = complex_normal_matrix(rng, cfg.M, cfg.K, 1.0 / cfg.M);
    const MatR d = variance_profile(cov, p).d_sq;
    const MatC f = unitary_dft(cfg.M);
    out.h = f * noise.cwiseProduct(d.cwiseSqrt().cast<cplx>());
  } else {
    const std::vector<MatC>* roots = &cov.sqrt_factors;
    std::vector<MatC> local;
    if (roots->empty()) {
      CovarianceModel tmp = cov;
      prepare_exact_sampler(tmp);
      local = std::move(tmp.sqrt_factors);
      roots = &local;
    }
    out.h.resize(cfg.M, cfg.K);
    const double scale_m = 1.0 / std::sqrt(double(cfg.M));
    for (int k = 0; k < cfg.K; ++k) {
      const VecC g = complex_normal_vector(rng, cfg.M, 1.0);
      out.h.col(k) = scale_m * std::sqrt(p(k)) * ((*roots)[k] * g);
    }
  }
  return out;
}

// ------------------------------------------------------ scenario loading ----

/// A named system + geometry pair, the unit the CLI and harness operate on.
struct Scenario {
  std::string name;
  SystemConfig cfg;
  ScatteringGeometry geom;
};

namespace detail {

inline std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double deg2rad(double d) { return d * kPi / 180.0; }

}  // namespace detail

/// Parse a scenario from structured text. Sections:
///   [system]       key = value lines: M, K (required), snr_db, spacing,
///                  sector_deg = <min> <max>, name
///   [clusters]     one line per cluster: <center_deg> <spread_deg>
///   [association]  K rows of S booleans (1/0, or * for member, ./- for not),
///                  mirroring the user-cluster membership grid; may be
///                  omitted when there is a single cluster (then all users
///                  belong to it)
/// '#' and ';' start comments. Unknown sections are ignored so that callers
/// can embed additional sections (e.g. experiment settings) in one file.
inline Scenario parse_scenario(const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  int m = 0, k = 0;
  double snr_db = 0.0, spacing = 0.5;
  double sector_min_deg = -60.0, sector_max_deg = 60.0;
  std::string name = "scenario";
  std::vector<Cluster> clusters;
  std::vector<std::vector<int>> association;

  while (std::getline(in, line)) {
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', "parse_scenario: malformed section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section == "system") {
      const auto eq = line.find('=');
      require(eq != std::string::npos, "parse_scenario: expected key = value");
      const std::string key = detail::strip(line.substr(0, eq));
      const std::string val = detail::strip(line.substr(eq + 1));
      std::istringstream vs(val);
      if (key == "M") vs >> m;
      else if (key == "K") vs >> k;
      else if (key == "snr_db") vs >> snr_db;
      else if (key == "spacing") vs >> spacing;
      else if (key == "sector_deg") vs >> sector_min_deg >> sector_max_deg;
      else if (key == "name") name = val;
      else fail("parse_scenario: unknown system key '" + key + "'");
      require(!vs.fail(), "parse_scenario: bad value for key '" + key + "'");
    } else if (section == "clusters") {
      std::istringstream vs(line);
      double center_deg = 0.0, spread_deg = 0.0;
      vs >> center_deg >> spread_deg;
      require(!vs.fail(), "parse_scenario: cluster line needs center and "
                          "spread in degrees");
      clusters.push_back(
          {detail::deg2rad(center_deg), detail::deg2rad(spread_deg)});
    } else if (section == "association") {
      std::istringstream vs(line);
      std::vector<int> row;
      std::string tok;
      int idx = 0;
      while (vs >> tok) {
        const bool member = (tok == "1" || tok == "*");
        const bool non_member = (tok == "0" || tok == "." || tok == "-");
        require(member || non_member,
                "parse_scenario: association entries must be 1/0/*/./-");
        if (member) row.push_back(idx);
        ++idx;
      }
      association.push_back(std::move(row));
    }
    // other sections: ignored here
  }

  require(m >= 2 && k >= 1, "parse_scenario: [system] must set M >= 2, K >= 1");
  require(!clusters.empty(), "parse_scenario: no clusters given");
  if (association.empty() && clusters.size() == 1)
    association.assign(size_t(k), {0});
  require(int(association.size()) == k,
          "parse_scenario: association rows != K");
  for (const auto& row : association)
    for (int ci : row)
      require(ci < int(clusters.size()),
              "parse_scenario: association column exceeds cluster count");

  Scenario sc;
  sc.name = name;
  sc.cfg = make_system_config(m, k, std::pow(10.0, snr_db / 10.0), spacing);
  sc.geom.clusters = std::move(clusters);
  sc.geom.association = std::move(association);
  sc.geom.sector_min = detail::deg2rad(sector_min_deg);
  sc.geom.sector_max = detail::deg2rad(sector_max_deg);
  validate_geometry(sc.geom);
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "load_scenario: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace tpemimo
