#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stackgda/fisher.hpp"

namespace stackgda::harness {

struct ClassParams {
  int horizon = 500;
  double eta_price = 3.0;
  double eta_alloc = 1.0;
  double delta = 0.0;
};

// Batch protocol: num_markets random markets per utility class, MBRD on each,
// exploitability of the running price average tracked against the per-market
// equilibrium oracle and reduced to a mean series.
struct ExperimentConfig {
  std::vector<fisher::UtilityClass> classes = {fisher::UtilityClass::Linear,
                                               fisher::UtilityClass::CobbDouglas,
                                               fisher::UtilityClass::Leontief};
  int num_markets = 50;  // desk scale; --paper-scale restores 500
  int num_buyers = 5;
  int num_goods = 8;
  std::map<fisher::UtilityClass, ClassParams> params = default_params();
  std::pair<double, double> budget_range{10.0, 20.0};
  std::pair<double, double> valuation_range{5.0, 15.0};
  std::pair<double, double> price_init_range{5.0, 15.0};
  std::uint64_t master_seed = 2022;
  int parallelism = 0;  // worker count; 0 = all cores, 1 = serial reference path
  std::string output_dir = "out";
  IntersectionMode projection = IntersectionMode::Dykstra;
  bool lagged_constraint = false;
  int exploit_stride = 1;
  long oracle_iterations = 200000;
  double oracle_tol = 0.05;  // clearing-residual certification threshold

  static std::map<fisher::UtilityClass, ClassParams> default_params();
  void validate() const;
  void apply_paper_scale() { num_markets = 500; }
  std::string to_json() const;
  // The experiment identity: to_json() minus execution parameters (parallelism,
  // output_dir), which cannot affect any output byte. Hashed into reports.
  std::string identity_json() const;
  static ExperimentConfig from_json(const std::string& text);
};

struct MarketRecord {
  fisher::UtilityClass cls = fisher::UtilityClass::Linear;
  int index = 0;
  std::uint64_t seed = 0;
  double f_star = 0.0;
  double clearing_residual = 0.0;
  bool certified = false;
  double final_exploitability = 0.0;
  std::vector<double> exploitability;  // of pbar^(t), t = 1..T
  fisher::FisherMarket market;
};

struct ClassSeries {
  fisher::UtilityClass cls = fisher::UtilityClass::Linear;
  int horizon = 0;
  int stride = 1;
  std::vector<double> mean_exploitability;  // length horizon, index t-1
  std::vector<double> normalized;           // mean * sqrt(t)
  int markets_included = 0;
  int markets_excluded = 0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<ClassSeries> series;
  std::vector<MarketRecord> markets;
  double wall_clock_seconds = 0.0;  // persisted only to the meta sidecar
  std::string content_hash;
};

RunReport run_experiment(const ExperimentConfig& config);

// Writes config.json, markets/*.json, series.csv, per_market.csv, report.json,
// plot.svg and the timestamp sidecar meta.json under dir. Everything except
// meta.json is a pure function of (config, master_seed).
void write_report(const RunReport& report, const std::string& dir);

void emit_plot(const RunReport& report, const std::string& path);

struct ExampleReplayResult {
  std::string name;
  bool pass = false;
  int first_divergent_t = -1;
  std::string detail;
};

// Replays the closed-form counterexample trajectories against their hard-coded
// iterate listings. step_scale != 1 perturbs the learning rates (used to test
// the replays' sensitivity).
std::vector<ExampleReplayResult> verify_examples(double step_scale = 1.0);

// Prints one row per replay; returns the number of failures (the exit code).
int print_verify_table(const std::vector<ExampleReplayResult>& results, std::ostream& os);

}  // namespace stackgda::harness
