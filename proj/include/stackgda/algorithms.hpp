#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "stackgda/game.hpp"

namespace stackgda {

class StepSchedule {
 public:
  static StepSchedule constant(double eta);
  // eta_t = 1/sqrt(T) for every t, the rate the convergence theorems assume.
  static StepSchedule inverse_sqrt_horizon(int horizon);

  double at(int t) const { return eta_; }

 private:
  explicit StepSchedule(double eta) : eta_(eta) {}
  double eta_ = 1.0;
};

struct RunConfig {
  int horizon = 100;
  StepSchedule eta_lambda = StepSchedule::constant(1.0);
  StepSchedule eta_x = StepSchedule::constant(1.0);
  StepSchedule eta_y = StepSchedule::constant(1.0);
  StrategyProfile init;
  std::uint64_t seed = 0;
  int record_every = 1;
  // Project the inner step onto the slice at the previous outer iterate instead
  // of the current one (reproduces the lagged constraint-set variant).
  bool lagged_constraint = false;
  double projection_tol = kProjectionTol;
  int projection_max_iter = kProjectionMaxIter;
  IntersectionMode projection_mode = IntersectionMode::Dykstra;
};

struct TrajectoryPoint {
  int t = 0;
  Vec x;
  Vec y;
  std::optional<Vec> lambda;
  double objective = 0.0;
  Vec xbar;  // mean of x^(1..t); equals x at t = 0
  Vec ybar;
};

struct Trajectory {
  int horizon = 0;
  std::vector<TrajectoryPoint> points;  // thinned by record_every; t = 0 and t = horizon always kept
  Vec final_xbar;                       // averages over every iterate 1..T regardless of thinning
  Vec final_ybar;

  void write_csv(std::ostream& os) const;
  std::string to_csv() const;
};

// Simultaneous projected GDA on the objective; the inner step projects onto the
// feasible slice { y in Y : g(x, y) >= 0 }. Known not to converge in general.
Trajectory run_vanilla_gda(const GameDefinition& game, const RunConfig& config);

// Descend lambda and x on the Lagrangian, ascend y on the Lagrangian, all onto
// the independent sets R+^d, X, Y; gradients read at the pre-update triple.
Trajectory run_g2da(const GameDefinition& game, const RunConfig& config);

// GDA on L(., ., lambda_star) over X x Y.
Trajectory run_lgda(const GameDefinition& game, const Vec& lambda_star, const RunConfig& config);

struct GdaloResult {
  StrategyProfile selected;
  int selected_t = 0;  // uniform draw from 1..T given config.seed
  Trajectory trajectory;
};

// Descend x on the Lagrangian, ascend y on the objective over the feasible
// slice; output drawn uniformly from the recorded iterates 1..T.
GdaloResult run_gdalo(const GameDefinition& game, const Vec& lambda_star, const RunConfig& config);

struct Band {
  double lower = 0.0;
  double upper = 0.0;
};

struct LgdaNorms {
  double y0_to_ystar_sq = 0.0;
  double x0_to_xbar_sq = 0.0;
  double x0_to_xstar_sq = 0.0;
  double y0_to_ybar_sq = 0.0;
};

// Two-sided band on f(xbar, ybar) - f(x*, y*) for LGDA on convex-strictly-concave
// games with eta = 1/sqrt(T).
Band lgda_average_bound(const LgdaNorms& norms, double lipschitz_lagrangian, int horizon);

// Two-sided band on E[f(selected)] - f(x*, y*) for GDALO with eta = 1/sqrt(T).
Band gdalo_expected_bound(double y0_to_ystar_sq, double x0_to_xstar_sq, double lipschitz_objective,
                          double lipschitz_lagrangian, int horizon);

struct LipschitzEstimate {
  double objective = 0.0;   // max sampled ||grad f||
  double lagrangian = 0.0;  // max sampled ||grad L(., ., lambda_star)||
};

// Monte-Carlo lower estimate of the sup gradient norms over X x Y. The sets
// must be bounded (boxes or intersections containing one). The estimate is a
// running max, so it is monotone in num_samples for a fixed seed.
LipschitzEstimate estimate_lipschitz(const GameDefinition& game, const Vec& lambda_star,
                                     int num_samples, std::uint64_t seed);

}  // namespace stackgda
