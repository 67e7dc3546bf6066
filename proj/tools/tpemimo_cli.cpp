// SPDX-License-Identifier: MIT

/// @file tpemimo_cli.cpp
/// Command-line harness: seeded Monte Carlo rate experiments (`run`),
/// hardware cost-model sweeps (`latency`), and asymptotic moment tables
/// (`moments`).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "tpemimo/asymptotics.hpp"
#include "tpemimo/channel.hpp"
#include "tpemimo/experiment.hpp"
#include "tpemimo/latency.hpp"

namespace {

/// Accept either a spec file path or a builtin scenario name.
tpemimo::ExperimentSpec resolve_experiment(const std::string& ref) {
  if (std::filesystem::exists(ref)) return tpemimo::load_experiment(ref);
  try {
    return tpemimo::builtin_scenarios(ref);
  } catch (const std::exception&) {
    tpemimo::fail("'" + ref +
                  "' is neither a readable file nor a builtin scenario name");
  }
}

/// Run `body` against stdout or a freshly opened file.
int with_output(const std::string& path,
                const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
    return 0;
  }
  std::ofstream out(path);
  if (!out) tpemimo::fail("cannot open output file: " + path);
  body(out);
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_run(const tpemimo::ExperimentSpec& es, int workers) {
  const tpemimo::ResultTable table = tpemimo::run_experiment(es, workers);
  for (const tpemimo::SumRateRow& s : table.sum_rates)
    std::cout << s.precoder << " @ " << s.snr_db << " dB: sum rate "
              << s.sum_rate_mean << " +/- " << s.sum_rate_stderr
              << " bit/s/Hz (" << table.trials << " trials)\n";
  if (!es.out_dir.empty())
    for (const std::string& path : tpemimo::emit_results(table, es.out_dir))
      std::cout << "wrote " << path << '\n';
  for (const tpemimo::FailedCell& f : table.failures)
    std::cerr << "error: cell " << f.precoder << " @ " << f.snr_db
              << " dB failed: " << f.reason << '\n';
  return table.failures.empty() ? 0 : 1;
}

int cmd_latency(long long m, long long k, long long j, bool grid_default,
                const std::string& out_path) {
  std::vector<std::pair<long long, long long>> grid;
  if (grid_default)
    grid = {{40, 4}, {80, 8}, {160, 16}};
  else
    grid = {{m, k}};
  return with_output(out_path, [&](std::ostream& os) {
    os << "dsp_blocks,M,K,J,L_tpe,L_rzf,alpha\n";
    for (const auto& [grid_m, grid_k] : grid) {
      for (long long u = 2; u <= grid_k; u *= 2) {
        tpemimo::LatencyParams lp;
        lp.m = grid_m;
        lp.k = grid_k;
        lp.j = j;
        lp.u = u;
        const tpemimo::LatencyReport rep = tpemimo::unit_latencies(lp);
        os << rep.chi_tr << ',' << grid_m << ',' << grid_k << ',' << j << ','
           << rep.tpe << ',' << rep.rzf << ','
           << tpemimo::format_number(rep.amplification) << '\n';
      }
    }
  });
}

int cmd_moments(const std::string& ref, int order,
                const std::string& out_path) {
  const tpemimo::Scenario sc = std::filesystem::exists(ref)
                                   ? tpemimo::load_scenario(ref)
                                   : resolve_experiment(ref).scenario;
  const tpemimo::CovarianceModel cov =
      tpemimo::build_covariance_model(sc.geom, sc.cfg);
  const tpemimo::VecR p = tpemimo::VecR::Ones(sc.cfg.K);
  const tpemimo::MomentTable table =
      tpemimo::asymptotic_moments(tpemimo::variance_profile(cov, p), order);
  return with_output(out_path, [&](std::ostream& os) {
    os << "user,order,gamma,rho\n";
    for (int k = 0; k < sc.cfg.K; ++k)
      for (int ell = 0; ell <= order; ++ell)
        os << k + 1 << ',' << ell << ','
           << tpemimo::format_number(table.gamma(ell, k)) << ','
           << tpemimo::format_number(table.rho(ell, k)) << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated-polynomial-expansion precoding toolkit"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand(
      "run", "Run a Monte Carlo rate experiment and emit result tables");
  std::string run_spec;
  std::uint64_t seed = 0;
  int trials = 0;
  int workers = 1;
  std::string out_dir;
  run->add_option("--spec", run_spec,
                  "Experiment spec file or builtin scenario name "
                  "(single-cluster, quasi-orthogonal-8, mixed-table1)")
      ->required();
  auto* seed_opt = run->add_option("--seed", seed, "Master RNG seed");
  auto* trials_opt =
      run->add_option("--trials", trials, "Monte Carlo trials per cell")
          ->check(CLI::PositiveNumber);
  auto* out_opt = run->add_option(
      "--out", out_dir, "Artifact directory (rates.csv, rates.json, CDFs)");
  run->add_option("--workers", workers, "Worker threads")
      ->check(CLI::PositiveNumber);

  auto* latency = app.add_subcommand(
      "latency", "Sweep the hardware cost model over parallelization levels");
  long long lat_m = 160;
  long long lat_k = 16;
  long long lat_j = 4;
  std::string lat_out;
  auto* lat_m_opt = latency->add_option("--m", lat_m, "Antenna count");
  auto* lat_k_opt = latency->add_option("--k", lat_k, "User count");
  latency->add_option("--j", lat_j, "Polynomial order");
  latency->add_option("--out", lat_out, "Output CSV path (default stdout)");

  auto* moments = app.add_subcommand(
      "moments", "Tabulate asymptotic channel moments for a scenario");
  std::string mom_spec;
  int mom_order = tpemimo::kMaxMomentOrder;
  std::string mom_out;
  moments
      ->add_option("--spec", mom_spec,
                   "Scenario file or builtin scenario name")
      ->required();
  moments->add_option("--order", mom_order, "Highest moment order")
      ->check(CLI::Range(0, tpemimo::kMaxMomentOrder));
  moments->add_option("--out", mom_out, "Output CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      tpemimo::ExperimentSpec es = resolve_experiment(run_spec);
      if (*seed_opt) es.seed = seed;
      if (*trials_opt) es.trials = trials;
      if (*out_opt) es.out_dir = out_dir;
      return cmd_run(es, workers);
    }
    if (latency->parsed()) {
      const bool grid_default = !*lat_m_opt && !*lat_k_opt;
      return cmd_latency(lat_m, lat_k, lat_j, grid_default, lat_out);
    }
    if (moments->parsed()) return cmd_moments(mom_spec, mom_order, mom_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
