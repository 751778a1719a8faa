#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stackgda/game.hpp"

using namespace stackgda;

namespace {

Vec vec1(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

}  // namespace

TEST_CASE("lagrangian evaluation on the worked example") {
  const auto& cat = builtin_game("example-1-1");
  // f = x^2 + y + 1, g = 1 - x - y
  CHECK(eval_lagrangian(cat.game, vec1(0.0), vec1(0.0), vec1(1.0)) == doctest::Approx(2.0));
  CHECK(eval_lagrangian(cat.game, vec1(0.5), vec1(0.5), vec1(1.0)) == doctest::Approx(1.75));
  // zero multipliers reduce to the objective
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    Vec x = vec1(rng.uniform(-1.0, 1.0));
    Vec y = vec1(rng.uniform(-1.0, 1.0));
    CHECK(eval_lagrangian(cat.game, x, y, vec1(0.0)) == cat.game.objective(x, y));
  }
  CHECK_THROWS_AS(eval_lagrangian(cat.game, Vec::Zero(2), vec1(0.0), vec1(0.0)), DimensionError);
  CHECK_THROWS_AS(eval_lagrangian(cat.game, vec1(0.0), vec1(0.0), vec1(-1.0)), DomainError);
}

TEST_CASE("lagrangian gradients") {
  const auto& cat = builtin_game("example-1-1");
  auto g = lagrangian_gradients(cat.game, vec1(0.0), vec1(0.0), vec1(0.0));
  CHECK(g.x[0] == doctest::Approx(0.0));
  CHECK(g.y[0] == doctest::Approx(1.0));
  CHECK(g.lambda[0] == doctest::Approx(1.0));

  // lambda* = 1 wipes out the y-dependence: dL/dx = 2x - 1, dL/dy = 0
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Vec x = vec1(rng.uniform(-1.0, 1.0));
    Vec y = vec1(rng.uniform(-1.0, 1.0));
    auto d = lagrangian_gradients(cat.game, x, y, vec1(1.0));
    CHECK(d.x[0] == doctest::Approx(2.0 * x[0] - 1.0));
    CHECK(d.y[0] == doctest::Approx(0.0));
    // zero multipliers give the plain objective gradients
    auto d0 = lagrangian_gradients(cat.game, x, y, vec1(0.0));
    CHECK(d0.x[0] == cat.game.grad_x_objective(x, y)[0]);
    CHECK(d0.y[0] == cat.game.grad_y_objective(x, y)[0]);
  }
}

TEST_CASE("lagrangian gradients agree with finite differences of the value") {
  Rng rng(11);
  for (const auto& id : builtin_game_ids()) {
    const auto& cat = builtin_game(id);
    for (int i = 0; i < 10; ++i) {
      Vec x = vec1(rng.uniform(-0.9, 0.9));
      Vec y = vec1(rng.uniform(-0.9, 0.9));
      Vec lambda = vec1(rng.uniform(0.0, 2.0));
      auto g = lagrangian_gradients(cat.game, x, y, lambda);
      const double h = 1e-6;
      double fdx = (eval_lagrangian(cat.game, vec1(x[0] + h), y, lambda) -
                    eval_lagrangian(cat.game, vec1(x[0] - h), y, lambda)) /
                   (2 * h);
      double fdy = (eval_lagrangian(cat.game, x, vec1(y[0] + h), lambda) -
                    eval_lagrangian(cat.game, x, vec1(y[0] - h), lambda)) /
                   (2 * h);
      CHECK(std::abs(g.x[0] - fdx) / std::max(1.0, std::abs(g.x[0])) <= 1e-5);
      CHECK(std::abs(g.y[0] - fdy) / std::max(1.0, std::abs(g.y[0])) <= 1e-5);
    }
  }
}

TEST_CASE("stackelberg gap on the worked example") {
  const auto& cat = builtin_game("example-1-1");
  StackelbergGap at_star =
      stackelberg_gap(cat.game, {vec1(0.5), vec1(0.5), std::nullopt}, cat.oracles);
  CHECK(std::abs(at_star.epsilon) <= 1e-9);
  CHECK(std::abs(at_star.delta) <= 1e-9);

  StackelbergGap off = stackelberg_gap(cat.game, {vec1(0.0), vec1(1.0), std::nullopt}, cat.oracles);
  CHECK(off.epsilon == doctest::Approx(0.25));
  CHECK(off.delta == doctest::Approx(0.0));

  // profile produced by the oracles themselves
  Vec x_star = cat.equilibrium.x_star;
  auto [y_br, v] = cat.oracles.best_response(x_star);
  StackelbergGap fixed = stackelberg_gap(cat.game, {x_star, y_br, std::nullopt}, cat.oracles);
  CHECK(std::abs(fixed.epsilon) <= 1e-9);
  CHECK(std::abs(fixed.delta) <= 1e-9);

  CHECK_THROWS_AS(stackelberg_gap(cat.game, {vec1(0.9), vec1(0.9), std::nullopt}, cat.oracles),
                  FeasibilityError);
}

TEST_CASE("gap vanishes at every catalog equilibrium") {
  for (const auto& id : builtin_game_ids()) {
    const auto& cat = builtin_game(id);
    StackelbergGap gap = stackelberg_gap(
        cat.game, {cat.equilibrium.x_star, cat.equilibrium.y_star, std::nullopt}, cat.oracles);
    CHECK(std::abs(gap.epsilon) <= 1e-9);
    CHECK(std::abs(gap.delta) <= 1e-9);
  }
}

TEST_CASE("gradient checker on polynomial games") {
  const auto& cat = builtin_game("example-1-1");
  auto report = check_gradients(cat.game, 25, 1e-5, 1);
  CHECK(report.max_error() < 1e-6);

  // corrupt one gradient by +1 and expect a loud flag
  GameDefinition bad = cat.game;
  bad.grad_x_objective = [](const Vec& x, const Vec&) {
    Vec g(1);
    g[0] = 2.0 * x[0] + 1.0;
    return g;
  };
  auto bad_report = check_gradients(bad, 25, 1e-5, 1);
  CHECK(bad_report.grad_x_objective > 0.1);
}

TEST_CASE("catalog tags and bindings") {
  const auto& ex = builtin_game("example-1-1");
  CHECK(ex.equilibrium.x_star[0] == doctest::Approx(0.5));
  CHECK(ex.equilibrium.y_star[0] == doctest::Approx(0.5));
  CHECK(ex.equilibrium.lambda_star[0] == doctest::Approx(1.0));
  CHECK(ex.game.constraints(vec1(0.5), vec1(0.5))[0] == doctest::Approx(0.0));

  const auto& cyc = builtin_game("lgda-cycle");
  CHECK(cyc.equilibrium.x_star[0] == doctest::Approx(0.0));
  CHECK(cyc.equilibrium.y_star[0] == doctest::Approx(0.0));
  CHECK(cyc.equilibrium.lambda_star[0] == doctest::Approx(0.0));

  const auto& deg = builtin_game("degenerate");
  CHECK(deg.equilibrium.x_star[0] == doctest::Approx(0.5));
  CHECK(deg.game.objective(vec1(0.2), vec1(0.3)) ==
        ex.game.objective(vec1(0.2), vec1(0.3)));

  CHECK(builtin_game_ids().size() == 3);
  CHECK_THROWS_AS(builtin_game("nope"), DomainError);
}

TEST_CASE("max-min is below min-max at lambda* on a grid") {
  for (const auto& id : builtin_game_ids()) {
    const auto& cat = builtin_game(id);
    const Vec lambda = cat.equilibrium.lambda_star;
    const int grid = 81;
    auto l_at = [&](double x, double y) {
      return eval_lagrangian(cat.game, vec1(x), vec1(y), lambda);
    };
    double maxmin = -1e300, minmax = 1e300;
    for (int iy = 0; iy < grid; ++iy) {
      double y = -1.0 + 2.0 * iy / (grid - 1);
      double inner_min = 1e300;
      for (int ix = 0; ix < grid; ++ix) {
        inner_min = std::min(inner_min, l_at(-1.0 + 2.0 * ix / (grid - 1), y));
      }
      maxmin = std::max(maxmin, inner_min);
    }
    for (int ix = 0; ix < grid; ++ix) {
      double x = -1.0 + 2.0 * ix / (grid - 1);
      double inner_max = -1e300;
      for (int iy = 0; iy < grid; ++iy) {
        inner_max = std::max(inner_max, l_at(x, -1.0 + 2.0 * iy / (grid - 1)));
      }
      minmax = std::min(minmax, inner_max);
    }
    CHECK(maxmin <= minmax + 1e-12);
  }
}

TEST_CASE("inner slice reproduces the dependent feasible set") {
  const auto& cat = builtin_game("example-1-1");
  // at x = 0.25 the slice is [-1, 0.75]
  ProjectionSpec slice = inner_slice(cat.game, vec1(0.25));
  CHECK(project(slice, vec1(2.0))[0] == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(project(slice, vec1(-3.0))[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(project(slice, vec1(0.3))[0] == doctest::Approx(0.3).epsilon(1e-12));
}
