#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stackgda/projections.hpp"

namespace stackgda {

inline constexpr double kFeasibilityTol = 1e-9;

// A min-max game with dependent strategy sets:
//   min over x in outer_set of max over { y in inner_base_set : g(x, y) >= 0 } of f(x, y).
// Evaluators are immutable after construction; the whole definition is safe to
// share across threads.
struct GameDefinition {
  int outer_dim = 0;        // n
  int inner_dim = 0;        // m
  int num_constraints = 0;  // d

  std::function<double(const Vec&, const Vec&)> objective;
  std::function<Vec(const Vec&, const Vec&)> grad_x_objective;  // length n
  std::function<Vec(const Vec&, const Vec&)> grad_y_objective;  // length m
  std::function<Vec(const Vec&, const Vec&)> constraints;       // length d, feasible iff >= 0
  std::function<Mat(const Vec&, const Vec&)> grad_x_constraints;  // d x n
  std::function<Mat(const Vec&, const Vec&)> grad_y_constraints;  // d x m

  ProjectionSpec outer_set = ProjectionSpec::full_space(0);
  ProjectionSpec inner_base_set = ProjectionSpec::full_space(0);

  std::string id;
};

struct StrategyProfile {
  Vec x;
  Vec y;
  std::optional<Vec> lambda;
};

struct StackelbergGap {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Known solution attached to a catalog game.
struct EquilibriumTag {
  Vec x_star;
  Vec y_star;
  Vec lambda_star;
  double value = 0.0;  // f(x*, y*)
};

double eval_lagrangian(const GameDefinition& game, const Vec& x, const Vec& y, const Vec& lambda);

struct LagrangianGradients {
  Vec x;       // grad_x f + lambda^T grad_x g
  Vec y;       // grad_y f + lambda^T grad_y g
  Vec lambda;  // g(x, y)
};
LagrangianGradients lagrangian_gradients(const GameDefinition& game, const Vec& x, const Vec& y,
                                         const Vec& lambda);

// Exact solvers used to measure gaps independently of the iterative algorithms.
// best_response(x) returns (argmax y, value) of the inner problem at x;
// minmax_value() returns min over X of that value.
struct GameOracles {
  std::function<std::pair<Vec, double>(const Vec&)> best_response;
  std::function<double()> minmax_value;
};

// epsilon = V(x) - minmax value, delta = V(x) - f(x, y), both clipped below at
// -tol, where V(x) is the inner best-response value at x. The profile must be
// feasible within tol.
StackelbergGap stackelberg_gap(const GameDefinition& game, const StrategyProfile& profile,
                               const GameOracles& oracles, double tol = kFeasibilityTol);

struct GradientCheckReport {
  double grad_x_objective = 0.0;
  double grad_y_objective = 0.0;
  double grad_x_constraints = 0.0;
  double grad_y_constraints = 0.0;
  double max_error() const;
};

// Compares the four gradient evaluators against central finite differences at
// num_samples feasible points drawn from the sets' bounding boxes.
GradientCheckReport check_gradients(const GameDefinition& game, int num_samples, double step,
                                    std::uint64_t seed);

// Closed-form games used throughout the paper-style counterexample replays:
//   example-1-1 : min_{x in [-1,1]} max_{y in [-1,1], 1-(x+y)>=0} x^2 + y + 1
//   lgda-cycle  : same sets, objective x^2 - y^2 + 1
//   degenerate  : identical game to example-1-1
struct CatalogGame {
  GameDefinition game;
  EquilibriumTag equilibrium;
  GameOracles oracles;
};

const CatalogGame& builtin_game(std::string_view id);
std::vector<std::string> builtin_game_ids();

// Projection spec for the inner slice { y in Y : g(x, y) >= 0 } at fixed x.
// Constraints are assumed affine in y, so each row becomes the halfspace
// -grad_y g_k . y <= g_k(x, 0).
ProjectionSpec inner_slice(const GameDefinition& game, const Vec& x);

}  // namespace stackgda
