// SPDX-License-Identifier: MIT
#pragma once

/// @file experiment.hpp
/// Monte Carlo experiment engine: named scenario presets, experiment
/// configuration parsing, seeded trial execution with per-precoder downlink
/// rate statistics, and CSV/JSON/CDF artifact emission.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tpemimo/baselines.hpp"
#include "tpemimo/channel.hpp"
#include "tpemimo/common.hpp"
#include "tpemimo/duality.hpp"
#include "tpemimo/power_control.hpp"
#include "tpemimo/rng.hpp"
#include "tpemimo/tpe.hpp"

namespace tpemimo {

// ------------------------------------------------------ precoder choices ---

enum class PrecoderKind { conjbf, tpe, rzf, mmse, zarei };

struct PrecoderChoice {
  PrecoderKind kind = PrecoderKind::conjbf;
  int order = 0;  ///< polynomial order for tpe/zarei
  std::string label;
};

/// Parses labels of the form conjbf | rzf | mmse | tpe<J> | zarei<J>.
inline PrecoderChoice parse_precoder(const std::string& label) {
  PrecoderChoice pc;
  pc.label = label;
  const auto order_suffix = [&](std::size_t prefix_len) -> int {
    const std::string digits = label.substr(prefix_len);
    require(!digits.empty() &&
                digits.find_first_not_of("0123456789") == std::string::npos,
            "parse_precoder: expected integer order in '" + label + "'");
    return std::stoi(digits);
  };
  if (label == "conjbf") {
    pc.kind = PrecoderKind::conjbf;
  } else if (label == "rzf") {
    pc.kind = PrecoderKind::rzf;
  } else if (label == "mmse") {
    pc.kind = PrecoderKind::mmse;
  } else if (label.rfind("tpe", 0) == 0) {
    pc.kind = PrecoderKind::tpe;
    pc.order = order_suffix(3);
  } else if (label.rfind("zarei", 0) == 0) {
    pc.kind = PrecoderKind::zarei;
    pc.order = order_suffix(5);
  } else {
    fail("parse_precoder: unknown precoder '" + label + "'");
  }
  return pc;
}

// ------------------------------------------------------- power policies ----

enum class PowerPolicy { uniform, conventional, maxmin, minpower, mwsr };

struct PowerSpec {
  PowerPolicy policy = PowerPolicy::uniform;
  VecR targets;        ///< minpower: per-user SINR targets (or one, shared)
  VecR queue_weights;  ///< mwsr: per-user weights (or one, shared)
};

// ------------------------------------------------------ experiment spec ----

struct ExperimentSpec {
  Scenario scenario;
  std::vector<PrecoderChoice> precoders;
  PowerSpec power;
  std::vector<double> snr_db;
  int trials = 50;  ///< smoke default; builtin presets use 500
  std::uint64_t seed = 1;
  std::string out_dir;
};

/// Scenario presets matching the reference geometries: M=160, K=16,
/// half-wavelength spacing, served sector [-60°, 60°].
inline ExperimentSpec builtin_scenarios(const std::string& name) {
  ExperimentSpec es;
  Scenario sc;
  sc.name = name;
  sc.cfg = make_system_config(160, 16, std::pow(10.0, 10.0 / 10.0), 0.5);
  sc.geom.sector_min = -kPi / 3.0;
  sc.geom.sector_max = kPi / 3.0;
  const auto deg = [](double d) { return d * kPi / 180.0; };
  if (name == "single-cluster") {
    // Every user scatters from one broad cluster: common covariance.
    sc.geom.clusters = {{deg(0.0), deg(30.0)}};
    sc.geom.association.assign(16, {0});
  } else if (name == "quasi-orthogonal-8") {
    // Eight equally spaced narrow clusters spanning the sector, two users
    // each; angular spread 180/11 degrees.
    const double spread = 180.0 / 11.0;
    for (int i = 0; i < 8; ++i) {
      const double center =
          -60.0 + spread / 2.0 + double(i) * (120.0 - spread) / 7.0;
      sc.geom.clusters.push_back({deg(center), deg(spread)});
    }
    sc.geom.association.resize(16);
    for (int k = 0; k < 16; ++k) sc.geom.association[k] = {k / 2};
  } else if (name == "mixed-table1") {
    // Five overlapping clusters with the tabulated user association.
    const double aoa[5] = {-30.62, -17.56, -16.69, 7.5, 11.92};
    for (double a : aoa) sc.geom.clusters.push_back({deg(a), deg(30.0)});
    const std::vector<std::vector<int>> members = {
        {1, 4, 5, 6, 11, 14, 16},
        {3, 5, 9, 11, 12, 15, 16},
        {1, 2, 3, 8, 9, 10, 11, 12, 13, 14},
        {1, 2, 3, 4, 5, 11, 12, 13, 14, 15, 16},
        {2, 3, 4, 5, 7, 10, 11, 12, 13, 14, 16}};
    sc.geom.association.resize(16);
    for (int c = 0; c < 5; ++c)
      for (int user : members[std::size_t(c)])
        sc.geom.association[std::size_t(user - 1)].push_back(c);
  } else {
    fail("builtin_scenarios: unknown scenario '" + name + "'");
  }
  validate_geometry(sc.geom);
  es.scenario = std::move(sc);
  for (const char* label : {"conjbf", "tpe1", "tpe2", "tpe3", "rzf", "mmse"})
    es.precoders.push_back(parse_precoder(label));
  es.snr_db = {0.0, 10.0, 20.0, 30.0};
  es.trials = 500;
  return es;
}

namespace detail {

/// Lists accept both whitespace and comma separators.
inline std::string commas_to_spaces(std::string text) {
  for (char& c : text)
    if (c == ',') c = ' ';
  return text;
}

inline std::vector<double> parse_number_list(const std::string& text,
                                             const std::string& what) {
  std::istringstream in(commas_to_spaces(text));
  std::vector<double> out;
  double v = 0.0;
  while (in >> v) out.push_back(v);
  require(!out.empty(), "parse_experiment: empty list for " + what);
  return out;
}

}  // namespace detail

/// Parses an experiment description. The [experiment] section provides the
/// run parameters; the scenario comes either from a `scenario = <preset>`
/// key or from [system]/[clusters]/[association] sections in the same file.
inline ExperimentSpec parse_experiment(const std::string& text) {
  ExperimentSpec es;
  bool from_preset = false;
  bool have_precoders = false, have_snr = false;
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']',
              "parse_experiment: malformed section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section != "experiment") continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "parse_experiment: expected key = value");
    const std::string key = detail::strip(line.substr(0, eq));
    const std::string val = detail::strip(line.substr(eq + 1));
    if (key == "scenario") {
      es.scenario = builtin_scenarios(val).scenario;
      from_preset = true;
    } else if (key == "precoders") {
      std::istringstream vs(detail::commas_to_spaces(val));
      std::string label;
      es.precoders.clear();
      while (vs >> label) es.precoders.push_back(parse_precoder(label));
      have_precoders = true;
    } else if (key == "power") {
      std::istringstream vs(val);
      std::string policy;
      vs >> policy;
      std::vector<double> extra;
      double x = 0.0;
      while (vs >> x) extra.push_back(x);
      if (policy == "uniform") {
        es.power.policy = PowerPolicy::uniform;
      } else if (policy == "conventional") {
        es.power.policy = PowerPolicy::conventional;
      } else if (policy == "maxmin") {
        es.power.policy = PowerPolicy::maxmin;
      } else if (policy == "minpower") {
        es.power.policy = PowerPolicy::minpower;
        require(!extra.empty(), "parse_experiment: minpower needs targets");
        es.power.targets =
            Eigen::Map<const VecR>(extra.data(), long(extra.size()));
      } else if (policy == "mwsr") {
        es.power.policy = PowerPolicy::mwsr;
        require(!extra.empty(), "parse_experiment: mwsr needs weights");
        es.power.queue_weights =
            Eigen::Map<const VecR>(extra.data(), long(extra.size()));
      } else {
        fail("parse_experiment: unknown power policy '" + policy + "'");
      }
    } else if (key == "snr_db") {
      es.snr_db = detail::parse_number_list(val, "snr_db");
      have_snr = true;
    } else if (key == "trials") {
      es.trials = std::stoi(val);
    } else if (key == "seed") {
      es.seed = std::stoull(val);
    } else if (key == "out") {
      es.out_dir = val;
    } else {
      fail("parse_experiment: unknown experiment key '" + key + "'");
    }
  }
  if (!from_preset) es.scenario = parse_scenario(text);
  if (!have_precoders)
    for (const char* label : {"conjbf", "tpe2", "mmse"})
      es.precoders.push_back(parse_precoder(label));
  if (!have_snr) es.snr_db = {es.scenario.cfg.snr <= 0.0
                                  ? 10.0
                                  : 10.0 * std::log10(es.scenario.cfg.snr)};
  require(es.trials >= 1, "parse_experiment: trials must be >= 1");
  require(!es.snr_db.empty(), "parse_experiment: empty SNR grid");
  return es;
}

inline ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "load_experiment: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_experiment(ss.str());
}

// --------------------------------------------------------- result table ----

struct ResultRow {
  std::string precoder;
  double snr_db = 0.0;
  int user = 0;  ///< 1-based in reports
  double rate_mean = 0.0;
  double rate_stderr = 0.0;
};

struct SumRateRow {
  std::string precoder;
  double snr_db = 0.0;
  double sum_rate_mean = 0.0;
  double sum_rate_stderr = 0.0;
};

struct FailedCell {
  std::string precoder;
  double snr_db = 0.0;
  std::string reason;
};

struct CellSamples {
  std::string precoder;
  double snr_db = 0.0;
  MatR user_rates;  ///< trials × K per-user downlink rates [bit/s/Hz]
};

struct ResultTable {
  int trials = 0;
  std::vector<ResultRow> rows;
  std::vector<SumRateRow> sum_rates;
  std::vector<FailedCell> failures;
  std::vector<CellSamples> cells;  ///< successful cells, raw samples
};

// ------------------------------------------------------- trial pipeline ----

namespace detail {

/// Unit-norm transmit directions for one channel draw.
inline MatC precoder_vectors(const PrecoderChoice& pc, const MatC& h,
                             const VecR& pathloss, const VecR& p, double nu) {
  switch (pc.kind) {
    case PrecoderKind::conjbf:
      return conj_bf(h);
    case PrecoderKind::rzf:
      return rzf_precoder(h, nu);
    case PrecoderKind::mmse:
      return mmse_receiver(h, p, nu).v;
    case PrecoderKind::tpe: {
      const auto weights = tpe_weights(h, p, nu, pc.order);
      return horner_precoder(h, p, weights, pc.order);
    }
    case PrecoderKind::zarei:
      return zarei_precoder(h, pathloss, p, nu, pc.order);
  }
  fail("precoder_vectors: unreachable");
}

/// Downlink per-user rates for one (channel, precoder, noise level) triple:
/// uplink SINRs are mapped through the duality transform and re-evaluated on
/// the downlink side.
inline VecR downlink_rates(const MatC& h, const MatC& v, const VecR& p,
                           double nu) {
  const VecR q = ul_to_dl(h, v, p, nu);
  const VecR sinr = all_sinrs(h, v, q, nu, LinkSide::downlink);
  return (1.0 + sinr.array()).log() / std::log(2.0);
}

/// Asymptotic-chain order used by statistics-only power policies: the
/// largest polynomial order among the compared precoders, clamped to the
/// moment-table budget.
inline int policy_order(const std::vector<PrecoderChoice>& precoders) {
  int order = 0;
  for (const auto& pc : precoders)
    if (pc.kind == PrecoderKind::tpe || pc.kind == PrecoderKind::zarei)
      order = std::max(order, pc.order);
  if (order == 0) order = 3;
  return std::max(1, std::min(order, 3));
}

/// Statistics-only power allocation for one SNR point.
inline VecR policy_powers(const ExperimentSpec& es, const CovarianceModel& cov,
                          const SystemConfig& cfg) {
  const int k_dim = cfg.K;
  const auto broadcast = [k_dim](const VecR& v,
                                 const std::string& what) -> VecR {
    if (v.size() == k_dim) return v;
    require(v.size() == 1, what + ": need 1 or K values");
    return VecR::Constant(k_dim, v(0));
  };
  switch (es.power.policy) {
    case PowerPolicy::uniform:
      return VecR::Ones(k_dim);
    case PowerPolicy::conventional:
      return conventional_power(cov.pathloss);
    case PowerPolicy::maxmin: {
      const int order = policy_order(es.precoders);
      const SinrFn fn = asymptotic_tpe_sinr_fn(cov, cfg.nu, order);
      const double xi_max =
          cfg.snr * double(cfg.M) * cov.pathloss.maxCoeff();
      return max_min_sinr(fn, k_dim, double(k_dim), xi_max).p;
    }
    case PowerPolicy::minpower: {
      const int order = policy_order(es.precoders);
      const SinrFn fn = asymptotic_tpe_sinr_fn(cov, cfg.nu, order);
      const VecR targets = broadcast(es.power.targets, "minpower targets");
      const YatesResult yr = yates_min_power(targets, fn);
      require(yr.feasible, "policy_powers: minpower targets are infeasible");
      return yr.p;
    }
    case PowerPolicy::mwsr: {
      const int order = policy_order(es.precoders);
      const VecR q = broadcast(es.power.queue_weights, "mwsr weights");
      return alternate_weights_powers(cov, cfg.nu, q, order).p;
    }
  }
  fail("policy_powers: unreachable");
}

}  // namespace detail

/// Runs the Monte Carlo experiment. One channel draw per trial (exact
/// covariance mode, unit powers) is shared by every precoder and SNR point;
/// per-trial seeds are derived from the master seed so the result is
/// bit-identical for any worker count (per-trial storage, fixed-order
/// reduction). A module error marks the affected (precoder, snr) cell as
/// failed with its reason and leaves the other cells intact.
inline ResultTable run_experiment(const ExperimentSpec& es, int workers = 1) {
  require(es.trials >= 1, "run_experiment: trials must be >= 1");
  require(!es.snr_db.empty(), "run_experiment: empty SNR grid");
  require(!es.precoders.empty(), "run_experiment: no precoders selected");
  const SystemConfig& base = es.scenario.cfg;
  CovarianceModel cov = build_covariance_model(es.scenario.geom, base);
  prepare_exact_sampler(cov);

  const int n_snr = int(es.snr_db.size());
  const int n_pre = int(es.precoders.size());
  const int n_cells = n_snr * n_pre;

  // Per-SNR system configs and statistics-only power allocations.
  std::vector<SystemConfig> cfgs;
  std::vector<VecR> powers;
  for (double snr_db : es.snr_db) {
    const SystemConfig cfg = make_system_config(
        base.M, base.K, std::pow(10.0, snr_db / 10.0),
        base.antenna_spacing_ratio);
    cfgs.push_back(cfg);
    powers.push_back(detail::policy_powers(es, cov, cfg));
  }

  // Per-trial, per-cell storage: rates or the first error reason.
  struct CellTrial {
    bool ok = false;
    VecR rates;
    std::string reason;
  };
  std::vector<std::vector<CellTrial>> results(
      std::size_t(es.trials), std::vector<CellTrial>(std::size_t(n_cells)));

  const auto run_trial = [&](int trial) {
    const std::uint64_t trial_seed = substream_seed(es.seed, trial);
    const MatC h = sample_channel(cov, VecR::Ones(base.K), base, trial_seed,
                                  SampleMode::exact_toeplitz)
                       .h;
    for (int si = 0; si < n_snr; ++si) {
      const double nu = cfgs[std::size_t(si)].nu;
      const VecR& p = powers[std::size_t(si)];
      for (int pi = 0; pi < n_pre; ++pi) {
        CellTrial& cell = results[std::size_t(trial)]
                                 [std::size_t(si * n_pre + pi)];
        try {
          const MatC v = detail::precoder_vectors(
              es.precoders[std::size_t(pi)], h, cov.pathloss, p, nu);
          cell.rates = detail::downlink_rates(h, v, p, nu);
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.reason = e.what();
        }
      }
    }
  };

  const int worker_count = std::max(1, std::min(workers, es.trials));
  if (worker_count == 1) {
    for (int t = 0; t < es.trials; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(worker_count));
    for (int w = 0; w < worker_count; ++w)
      pool.emplace_back([&, w] {
        for (int t = w; t < es.trials; t += worker_count) run_trial(t);
      });
    for (auto& th : pool) th.join();
  }

  // Fixed-order reduction over trials, cell by cell.
  ResultTable table;
  table.trials = es.trials;
  for (int si = 0; si < n_snr; ++si) {
    for (int pi = 0; pi < n_pre; ++pi) {
      const std::string& label = es.precoders[std::size_t(pi)].label;
      const double snr_db = es.snr_db[std::size_t(si)];
      const int cell_idx = si * n_pre + pi;
      std::string reason;
      for (int t = 0; t < es.trials && reason.empty(); ++t)
        if (!results[std::size_t(t)][std::size_t(cell_idx)].ok)
          reason = results[std::size_t(t)][std::size_t(cell_idx)].reason;
      if (!reason.empty()) {
        table.failures.push_back({label, snr_db, reason});
        continue;
      }
      CellSamples samples;
      samples.precoder = label;
      samples.snr_db = snr_db;
      samples.user_rates.resize(es.trials, base.K);
      for (int t = 0; t < es.trials; ++t)
        samples.user_rates.row(t) =
            results[std::size_t(t)][std::size_t(cell_idx)].rates.transpose();

      const double nt = double(es.trials);
      for (int k = 0; k < base.K; ++k) {
        const VecR col = samples.user_rates.col(k);
        const double mean = col.mean();
        double var = 0.0;
        if (es.trials > 1)
          var = (col.array() - mean).square().sum() / (nt - 1.0);
        table.rows.push_back(
            {label, snr_db, k + 1, mean, std::sqrt(var / nt)});
      }
      const VecR per_trial_sum = samples.user_rates.rowwise().sum();
      const double sum_mean = per_trial_sum.mean();
      double sum_var = 0.0;
      if (es.trials > 1)
        sum_var =
            (per_trial_sum.array() - sum_mean).square().sum() / (nt - 1.0);
      table.sum_rates.push_back(
          {label, snr_db, sum_mean, std::sqrt(sum_var / nt)});
      table.cells.push_back(std::move(samples));
    }
  }
  return table;
}

// ------------------------------------------------------------- emission ----

inline std::string format_number(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

inline void write_rates_csv(std::ostream& out, const ResultTable& table) {
  out << "precoder,snr_db,user,rate_mean,rate_stderr\n";
  for (const ResultRow& r : table.rows)
    out << r.precoder << ',' << format_number(r.snr_db) << ',' << r.user
        << ',' << format_number(r.rate_mean) << ','
        << format_number(r.rate_stderr) << '\n';
}

/// Parses text produced by write_rates_csv (round-trip of the rows).
inline std::vector<ResultRow> parse_rates_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(std::getline(in, line) &&
              detail::strip(line) == "precoder,snr_db,user,rate_mean,"
                                     "rate_stderr",
          "parse_rates_csv: bad header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    line = detail::strip(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    ResultRow row;
    std::string field;
    require(bool(std::getline(ls, row.precoder, ',')),
            "parse_rates_csv: missing precoder");
    require(bool(std::getline(ls, field, ',')),
            "parse_rates_csv: missing snr");
    row.snr_db = std::stod(field);
    require(bool(std::getline(ls, field, ',')),
            "parse_rates_csv: missing user");
    row.user = std::stoi(field);
    require(bool(std::getline(ls, field, ',')),
            "parse_rates_csv: missing mean");
    row.rate_mean = std::stod(field);
    require(bool(std::getline(ls, field)),
            "parse_rates_csv: missing stderr");
    row.rate_stderr = std::stod(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Empirical CDF of the pooled per-user rates of one cell: N sorted samples
/// with probabilities 1/N .. 1.
inline void write_cdf_csv(std::ostream& out, const CellSamples& cell) {
  std::vector<double> samples(
      cell.user_rates.data(),
      cell.user_rates.data() + cell.user_rates.size());
  std::sort(samples.begin(), samples.end());
  out << "rate,probability\n";
  const double n = double(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out << format_number(samples[i]) << ','
        << format_number(double(i + 1) / n) << '\n';
}

inline nlohmann::json table_to_json(const ResultTable& table) {
  nlohmann::json j;
  j["trials"] = table.trials;
  j["rows"] = nlohmann::json::array();
  for (const ResultRow& r : table.rows)
    j["rows"].push_back({{"precoder", r.precoder},
                         {"snr_db", r.snr_db},
                         {"user", r.user},
                         {"rate_mean", r.rate_mean},
                         {"rate_stderr", r.rate_stderr}});
  j["sum_rates"] = nlohmann::json::array();
  for (const SumRateRow& r : table.sum_rates)
    j["sum_rates"].push_back({{"precoder", r.precoder},
                              {"snr_db", r.snr_db},
                              {"sum_rate_mean", r.sum_rate_mean},
                              {"sum_rate_stderr", r.sum_rate_stderr}});
  j["failures"] = nlohmann::json::array();
  for (const FailedCell& f : table.failures)
    j["failures"].push_back({{"precoder", f.precoder},
                             {"snr_db", f.snr_db},
                             {"reason", f.reason}});
  return j;
}

/// Writes rates.csv, rates.json, and one CDF file per successful cell into
/// the output directory. Returns the written paths.
inline std::vector<std::string> emit_results(const ResultTable& table,
                                             const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, "emit_results: cannot create directory '" + out_dir + "'");
  std::vector<std::string> written;
  const auto open = [&](const std::string& name) -> std::ofstream {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream out(path);
    require(out.good(), "emit_results: cannot open '" + path + "'");
    written.push_back(path);
    return out;
  };
  {
    std::ofstream out = open("rates.csv");
    write_rates_csv(out, table);
  }
  {
    std::ofstream out = open("rates.json");
    out << table_to_json(table).dump(2) << '\n';
  }
  for (const CellSamples& cell : table.cells) {
    std::ostringstream name;
    name << "cdf_" << cell.precoder << "_snr" << cell.snr_db << "dB.csv";
    std::ofstream out = open(name.str());
    write_cdf_csv(out, cell);
  }
  return written;
}

}  // namespace tpemimo
