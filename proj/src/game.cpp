#include "stackgda/game.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace stackgda {

namespace {

void check_point(const GameDefinition& game, const Vec& x, const Vec& y) {
  require_dim(x, game.outer_dim, "x");
  require_dim(y, game.inner_dim, "y");
}

void check_multipliers(const GameDefinition& game, const Vec& lambda) {
  require_dim(lambda, game.num_constraints, "lambda");
  for (int k = 0; k < lambda.size(); ++k) {
    if (lambda[k] < 0.0) {
      throw DomainError("lambda[" + std::to_string(k) + "] is negative");
    }
  }
}

}  // namespace

double eval_lagrangian(const GameDefinition& game, const Vec& x, const Vec& y,
                       const Vec& lambda) {
  check_point(game, x, y);
  check_multipliers(game, lambda);
  double value = game.objective(x, y);
  if (game.num_constraints > 0) value += lambda.dot(game.constraints(x, y));
  return value;
}

LagrangianGradients lagrangian_gradients(const GameDefinition& game, const Vec& x, const Vec& y,
                                         const Vec& lambda) {
  check_point(game, x, y);
  check_multipliers(game, lambda);
  LagrangianGradients out;
  out.x = game.grad_x_objective(x, y);
  out.y = game.grad_y_objective(x, y);
  if (game.num_constraints > 0) {
    out.x += game.grad_x_constraints(x, y).transpose() * lambda;
    out.y += game.grad_y_constraints(x, y).transpose() * lambda;
    out.lambda = game.constraints(x, y);
  } else {
    out.lambda = Vec::Zero(0);
  }
  return out;
}

StackelbergGap stackelberg_gap(const GameDefinition& game, const StrategyProfile& profile,
                               const GameOracles& oracles, double tol) {
  check_point(game, profile.x, profile.y);
  if (game.outer_set.max_violation(profile.x) > tol ||
      game.inner_base_set.max_violation(profile.y) > tol) {
    throw FeasibilityError("profile lies outside the strategy sets");
  }
  if (game.num_constraints > 0) {
    Vec g = game.constraints(profile.x, profile.y);
    std::string violated;
    for (int k = 0; k < g.size(); ++k) {
      if (g[k] < -tol) violated += (violated.empty() ? "" : ", ") + std::to_string(k);
    }
    if (!violated.empty()) {
      throw FeasibilityError("profile violates constraints {" + violated + "}");
    }
  }
  const double value_at_x = oracles.best_response(profile.x).second;
  StackelbergGap gap;
  gap.delta = std::max(value_at_x - game.objective(profile.x, profile.y), -tol);
  gap.epsilon = std::max(value_at_x - oracles.minmax_value(), -tol);
  return gap;
}

double GradientCheckReport::max_error() const {
  return std::max({grad_x_objective, grad_y_objective, grad_x_constraints, grad_y_constraints});
}

namespace {

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

std::pair<Vec, Vec> sample_feasible_pair(const GameDefinition& game, Rng& rng) {
  auto bx = game.outer_set.bounding_box();
  auto by = game.inner_base_set.bounding_box();
  if (!bx || !by) throw DomainError("check_gradients: strategy sets are unbounded");
  Vec x(game.outer_dim), y(game.inner_dim);
  for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(bx->first[i], bx->second[i]);
  for (int j = 0; j < y.size(); ++j) y[j] = rng.uniform(by->first[j], by->second[j]);
  return {project(game.outer_set, x), project(game.inner_base_set, y)};
}

}  // namespace

GradientCheckReport check_gradients(const GameDefinition& game, int num_samples, double step,
                                    std::uint64_t seed) {
  if (step <= 0.0) throw DomainError("check_gradients: step must be positive");
  GradientCheckReport report;
  Rng rng(seed);
  for (int s = 0; s < num_samples; ++s) {
    auto [x, y] = sample_feasible_pair(game, rng);

    Vec gx = game.grad_x_objective(x, y);
    Vec gy = game.grad_y_objective(x, y);
    for (int i = 0; i < game.outer_dim; ++i) {
      Vec xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      double fd = (game.objective(xp, y) - game.objective(xm, y)) / (2.0 * step);
      report.grad_x_objective = std::max(report.grad_x_objective, rel_err(gx[i], fd));
    }
    for (int j = 0; j < game.inner_dim; ++j) {
      Vec yp = y, ym = y;
      yp[j] += step;
      ym[j] -= step;
      double fd = (game.objective(x, yp) - game.objective(x, ym)) / (2.0 * step);
      report.grad_y_objective = std::max(report.grad_y_objective, rel_err(gy[j], fd));
    }
    if (game.num_constraints > 0) {
      Mat jx = game.grad_x_constraints(x, y);
      Mat jy = game.grad_y_constraints(x, y);
      for (int i = 0; i < game.outer_dim; ++i) {
        Vec xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        Vec fd = (game.constraints(xp, y) - game.constraints(xm, y)) / (2.0 * step);
        for (int k = 0; k < game.num_constraints; ++k) {
          report.grad_x_constraints = std::max(report.grad_x_constraints, rel_err(jx(k, i), fd[k]));
        }
      }
      for (int j = 0; j < game.inner_dim; ++j) {
        Vec yp = y, ym = y;
        yp[j] += step;
        ym[j] -= step;
        Vec fd = (game.constraints(x, yp) - game.constraints(x, ym)) / (2.0 * step);
        for (int k = 0; k < game.num_constraints; ++k) {
          report.grad_y_constraints = std::max(report.grad_y_constraints, rel_err(jy(k, j), fd[k]));
        }
      }
    }
  }
  return report;
}

ProjectionSpec inner_slice(const GameDefinition& game, const Vec& x) {
  if (game.num_constraints == 0) return game.inner_base_set;
  // g_k(x, y) = g_k(x, 0) + grad_y g_k . y for constraints affine in y, so the
  // slice { g >= 0 } is the intersection of Y with d halfspaces.
  const Vec origin = Vec::Zero(game.inner_dim);
  const Vec g0 = game.constraints(x, origin);
  const Mat jy = game.grad_y_constraints(x, origin);
  std::vector<ProjectionSpec> members;
  members.reserve(game.num_constraints + 1);
  members.push_back(game.inner_base_set);
  for (int k = 0; k < game.num_constraints; ++k) {
    Vec a = -jy.row(k).transpose();
    if (a.norm() == 0.0) continue;  // constraint does not involve y
    members.push_back(ProjectionSpec::halfspace(std::move(a), g0[k]));
  }
  if (members.size() == 1) return game.inner_base_set;
  return ProjectionSpec::intersect(std::move(members));
}

namespace {

Vec vec1(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

// min_{x in [-1,1]} max_{y in [-1,1] : 1-(x+y) >= 0} f(x, y) with f quadratic.
GameDefinition make_interval_game(std::string id, bool cycle_objective) {
  GameDefinition g;
  g.id = std::move(id);
  g.outer_dim = 1;
  g.inner_dim = 1;
  g.num_constraints = 1;
  if (cycle_objective) {
    g.objective = [](const Vec& x, const Vec& y) { return x[0] * x[0] - y[0] * y[0] + 1.0; };
    g.grad_x_objective = [](const Vec& x, const Vec&) { return vec1(2.0 * x[0]); };
    g.grad_y_objective = [](const Vec&, const Vec& y) { return vec1(-2.0 * y[0]); };
  } else {
    g.objective = [](const Vec& x, const Vec& y) { return x[0] * x[0] + y[0] + 1.0; };
    g.grad_x_objective = [](const Vec& x, const Vec&) { return vec1(2.0 * x[0]); };
    g.grad_y_objective = [](const Vec&, const Vec&) { return vec1(1.0); };
  }
  g.constraints = [](const Vec& x, const Vec& y) { return vec1(1.0 - (x[0] + y[0])); };
  g.grad_x_constraints = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  g.grad_y_constraints = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
  g.outer_set = ProjectionSpec::interval(-1.0, 1.0);
  g.inner_base_set = ProjectionSpec::interval(-1.0, 1.0);
  return g;
}

CatalogGame make_example_1_1(std::string id) {
  CatalogGame cg;
  cg.game = make_interval_game(std::move(id), false);
  cg.equilibrium = {vec1(0.5), vec1(0.5), vec1(1.0), 1.75};
  // y*(x) = min(1, 1-x); V(x) = x^2 + min(1, 1-x) + 1, minimized at x = 1/2.
  auto game = cg.game;
  cg.oracles.best_response = [game](const Vec& x) {
    double y = std::min(1.0, 1.0 - x[0]);
    return std::make_pair(vec1(y), game.objective(x, vec1(y)));
  };
  cg.oracles.minmax_value = [] { return 1.75; };
  return cg;
}

CatalogGame make_lgda_cycle() {
  CatalogGame cg;
  cg.game = make_interval_game("lgda-cycle", true);
  cg.equilibrium = {vec1(0.0), vec1(0.0), vec1(0.0), 1.0};
  // Feasible y nearest to 0 is always 0 on [-1,1], so V(x) = x^2 + 1.
  auto game = cg.game;
  cg.oracles.best_response = [game](const Vec& x) {
    double hi = std::min(1.0, 1.0 - x[0]);
    double y = std::clamp(0.0, -1.0, hi);
    return std::make_pair(vec1(y), game.objective(x, vec1(y)));
  };
  cg.oracles.minmax_value = [] { return 1.0; };
  return cg;
}

const std::map<std::string, CatalogGame, std::less<>>& catalog() {
  static const std::map<std::string, CatalogGame, std::less<>> games = [] {
    std::map<std::string, CatalogGame, std::less<>> m;
    m.emplace("example-1-1", make_example_1_1("example-1-1"));
    m.emplace("lgda-cycle", make_lgda_cycle());
    m.emplace("degenerate", make_example_1_1("degenerate"));
    return m;
  }();
  return games;
}

}  // namespace

const CatalogGame& builtin_game(std::string_view id) {
  auto it = catalog().find(id);
  if (it == catalog().end()) {
    throw DomainError("unknown game id '" + std::string(id) +
                      "' (known: example-1-1, lgda-cycle, degenerate)");
  }
  return it->second;
}

std::vector<std::string> builtin_game_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, _] : catalog()) ids.push_back(id);
  return ids;
}

}  // namespace stackgda
