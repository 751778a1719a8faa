#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stackgda/harness.hpp"
#include "stackgda/kkt_oracle.hpp"

namespace {

using namespace stackgda;

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

int cmd_solve(const std::string& game_id, const std::string& alg, int iters, double eta,
              std::uint64_t seed, const std::string& out_path, bool lagged,
              IntersectionMode mode, const std::vector<double>& lambda_star_arg) {
  const CatalogGame& cat = builtin_game(game_id);
  RunConfig cfg;
  cfg.horizon = iters;
  const StepSchedule schedule =
      eta > 0.0 ? StepSchedule::constant(eta) : StepSchedule::inverse_sqrt_horizon(iters);
  cfg.eta_lambda = cfg.eta_x = cfg.eta_y = schedule;
  cfg.seed = seed;
  cfg.lagged_constraint = lagged;
  cfg.projection_mode = mode;
  cfg.init = {Vec::Zero(cat.game.outer_dim), Vec::Zero(cat.game.inner_dim),
              Vec::Zero(cat.game.num_constraints)};

  const Vec lambda_star =
      lambda_star_arg.empty() ? cat.equilibrium.lambda_star : to_vec(lambda_star_arg);

  Trajectory traj;
  if (alg == "gda") {
    traj = run_vanilla_gda(cat.game, cfg);
  } else if (alg == "g2da") {
    traj = run_g2da(cat.game, cfg);
  } else if (alg == "lgda") {
    traj = run_lgda(cat.game, lambda_star, cfg);
  } else if (alg == "gdalo") {
    GdaloResult res = run_gdalo(cat.game, lambda_star, cfg);
    traj = std::move(res.trajectory);
    std::cout << "selected t=" << res.selected_t << " x=" << res.selected.x.transpose()
              << " y=" << res.selected.y.transpose()
              << " f=" << cat.game.objective(res.selected.x, res.selected.y) << "\n";
  } else {
    std::cerr << "unknown algorithm '" << alg << "'\n";
    return 2;
  }

  const auto& last = traj.points.back();
  std::cout << "final t=" << last.t << " x=" << last.x.transpose()
            << " y=" << last.y.transpose() << " f=" << last.objective
            << " xbar=" << traj.final_xbar.transpose() << " ybar=" << traj.final_ybar.transpose()
            << "\n";
  if (!out_path.empty()) {
    write_file(out_path, traj.to_csv());
    std::cout << "trajectory written to " << out_path << "\n";
  }
  return 0;
}

int cmd_fisher_run(const std::string& utility, int buyers, int goods, int iters, double eta_price,
                   double eta_alloc, double delta, bool has_delta, IntersectionMode mode,
                   bool lagged, std::uint64_t seed, const std::string& out_path) {
  const fisher::UtilityClass cls = fisher::utility_class_from_string(utility);
  const fisher::FisherMarket market =
      fisher::generate_market(seed, buyers, goods, {10.0, 20.0}, {5.0, 15.0}, cls);
  fisher::MbrdConfig cfg;
  cfg.horizon = iters;
  cfg.eta_price = StepSchedule::constant(eta_price);
  cfg.eta_alloc = StepSchedule::constant(eta_alloc);
  if (has_delta) {
    cfg.delta = delta;
  } else {
    cfg.delta = cls == fisher::UtilityClass::CobbDouglas ? 0.0 : 1e-3;
  }
  cfg.projection = mode;
  cfg.lagged_constraint = lagged;
  cfg.seed = derive_seed(seed, 2);
  Rng price_rng(derive_seed(seed, 1));
  cfg.init_prices = price_rng.uniform_vec(goods, 5.0, 15.0);

  fisher::MbrdResult result = fisher::run_mbrd(market, cfg);

  fisher::EquilibriumCertificate cert;
  if (cls == fisher::UtilityClass::CobbDouglas) {
    cert = fisher::equilibrium_oracle(market, fisher::EquilibriumMethod::AnalyticCobbDouglas,
                                      1e-9);
  } else {
    fisher::ReferenceDescentOptions opts;
    opts.seed = derive_seed(seed, 3);
    cert = fisher::equilibrium_oracle(market, fisher::EquilibriumMethod::ReferenceDescent, 0.05,
                                      opts);
  }

  const double final_exploit =
      fisher::exploitability(market, result.final_price_avg, cert.f_star, 0.0);
  std::cout << "market: " << buyers << " buyers, " << goods << " goods, " << utility
            << " utilities (seed " << seed << ")\n";
  std::cout << "oracle f* = " << cert.f_star << " (certified: " << (cert.certified ? "yes" : "no")
            << ", clearing residual " << cert.clearing_residual << ")\n";
  std::cout << "final prices: " << result.final_state.prices.transpose() << "\n";
  std::cout << "final averaged prices: " << result.final_price_avg.transpose() << "\n";
  std::cout << "exploitability of averaged prices: " << final_exploit << "\n";
  if (!out_path.empty()) {
    std::ostringstream os;
    result.write_csv(market, cert.f_star, 0.0, os);
    write_file(out_path, os.str());
    std::cout << "trajectory written to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solvers and experiments for min-max Stackelberg games"};
  app.require_subcommand(1);

  // verify-examples
  auto* verify = app.add_subcommand("verify-examples",
                                    "replay the closed-form counterexample trajectories");

  // solve
  auto* solve = app.add_subcommand("solve", "run one solver on a catalog game");
  std::string game_id = "example-1-1", alg = "gdalo", solve_out;
  int solve_iters = 1000;
  double solve_eta = 0.0;
  std::uint64_t solve_seed = 0;
  bool solve_lagged = false;
  std::string solve_projection = "dykstra";
  std::vector<double> solve_lambda;
  solve->add_option("--game", game_id, "game id (example-1-1, lgda-cycle, degenerate)");
  solve->add_option("--alg", alg, "gda | g2da | lgda | gdalo")->required();
  solve->add_option("--iters", solve_iters, "horizon T")->required();
  solve->add_option("--eta", solve_eta, "constant step size (default 1/sqrt(T))");
  solve->add_option("--seed", solve_seed, "seed for the gdalo output draw");
  solve->add_option("--out", solve_out, "trajectory CSV path");
  solve->add_option("--lambda-star", solve_lambda, "multipliers for lgda/gdalo");
  solve->add_flag("--lagged-constraint", solve_lagged, "use the previous iterate's slice");
  solve->add_option("--projection", solve_projection, "dykstra | pocs");

  // kkt
  auto* kkt_cmd = app.add_subcommand("kkt", "closed-form optimal KKT multipliers");
  std::vector<double> kkt_a, kkt_b, kkt_c;
  kkt_cmd->add_option("--a", kkt_a, "log-weights on f2 terms")->required();
  kkt_cmd->add_option("--b", kkt_b, "log-weights on f3 terms")->required();
  kkt_cmd->add_option("--c", kkt_c, "constraint right-hand sides")->required();

  // fisher run
  auto* fisher_cmd = app.add_subcommand("fisher", "Fisher market tools");
  auto* fisher_run = fisher_cmd->add_subcommand("run", "run MBRD on a random market");
  std::string fr_utility = "linear", fr_out, fr_projection = "dykstra";
  int fr_buyers = 5, fr_goods = 8, fr_iters = 1000;
  double fr_eta_price = 0.1, fr_eta_alloc = 3.0, fr_delta = 0.0;
  bool fr_lagged = false;
  std::uint64_t fr_seed = 0;
  fisher_run->add_option("--utility", fr_utility, "linear | cobb-douglas | leontief")->required();
  fisher_run->add_option("--buyers", fr_buyers, "number of buyers");
  fisher_run->add_option("--goods", fr_goods, "number of goods");
  fisher_run->add_option("--iters", fr_iters, "horizon T")->required();
  fisher_run->add_option("--eta-price", fr_eta_price, "price step size");
  fisher_run->add_option("--eta-alloc", fr_eta_alloc, "allocation step size");
  auto* delta_opt = fisher_run->add_option("--delta", fr_delta, "log reparametrization shift");
  fisher_run->add_option("--projection", fr_projection, "dykstra | pocs");
  fisher_run->add_flag("--lagged-constraint", fr_lagged, "budget sets at previous prices");
  fisher_run->add_option("--seed", fr_seed, "market seed");
  fisher_run->add_option("--out", fr_out, "trajectory CSV path");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "batch Fisher-market experiment");
  std::string exp_config, exp_out = "out";
  bool paper_scale = false;
  int jobs = 0;
  exp_cmd->add_option("--config", exp_config, "config JSON path (defaults if omitted)");
  exp_cmd->add_flag("--paper-scale", paper_scale, "500 markets per class");
  exp_cmd->add_option("--jobs", jobs, "worker count (1 = serial)");
  exp_cmd->add_option("--out", exp_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      auto results = harness::verify_examples();
      return harness::print_verify_table(results, std::cout);
    }
    if (solve->parsed()) {
      const IntersectionMode mode = solve_projection == "pocs" ? IntersectionMode::Pocs
                                                               : IntersectionMode::Dykstra;
      return cmd_solve(game_id, alg, solve_iters, solve_eta, solve_seed, solve_out, solve_lagged,
                       mode, solve_lambda);
    }
    if (kkt_cmd->parsed()) {
      kkt::StructuredGameSpec spec{to_vec(kkt_a), to_vec(kkt_b), to_vec(kkt_c)};
      const Vec lambda = kkt::closed_form_multipliers(spec);
      std::cout << "lambda* =";
      for (int i = 0; i < lambda.size(); ++i) std::cout << " " << lambda[i];
      std::cout << "\n";
      return 0;
    }
    if (fisher_run->parsed()) {
      const IntersectionMode mode =
          fr_projection == "pocs" ? IntersectionMode::Pocs : IntersectionMode::Dykstra;
      return cmd_fisher_run(fr_utility, fr_buyers, fr_goods, fr_iters, fr_eta_price, fr_eta_alloc,
                            fr_delta, delta_opt->count() > 0, mode, fr_lagged, fr_seed, fr_out);
    }
    if (exp_cmd->parsed()) {
      harness::ExperimentConfig config = exp_config.empty()
                                             ? harness::ExperimentConfig{}
                                             : harness::ExperimentConfig::from_json(
                                                   read_file(exp_config));
      if (paper_scale) config.apply_paper_scale();
      if (exp_cmd->count("--jobs") > 0) config.parallelism = jobs;
      config.output_dir = exp_out;
      if (const char* env_seed = std::getenv("STACKGDA_SEED")) {
        config.master_seed = std::strtoull(env_seed, nullptr, 10);
      }
      harness::RunReport report = harness::run_experiment(config);
      harness::write_report(report, config.output_dir);
      for (const auto& s : report.series) {
        std::cout << fisher::to_string(s.cls) << ": markets " << s.markets_included << " (+"
                  << s.markets_excluded << " excluded), final mean exploitability "
                  << s.mean_exploitability.back() << ", normalized " << s.normalized.back()
                  << "\n";
      }
      std::cout << "report written to " << config.output_dir << " (hash " << report.content_hash
                << ", " << report.wall_clock_seconds << " s)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
