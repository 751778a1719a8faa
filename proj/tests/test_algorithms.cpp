#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "stackgda/algorithms.hpp"
#include "support/quadratic_games.hpp"

using namespace stackgda;

namespace {

Vec vec1(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

RunConfig unit_config(int horizon, double eta) {
  RunConfig cfg;
  cfg.horizon = horizon;
  cfg.eta_lambda = cfg.eta_x = cfg.eta_y = StepSchedule::constant(eta);
  return cfg;
}

}  // namespace

TEST_CASE("vanilla GDA replays the non-convergence example") {
  const auto& cat = builtin_game("example-1-1");
  RunConfig cfg = unit_config(5, 1.0);
  cfg.init = {vec1(0.0), vec1(0.0), std::nullopt};
  Trajectory traj = run_vanilla_gda(cat.game, cfg);
  REQUIRE(traj.points.size() == 6);
  CHECK(traj.points[0].t == 0);
  for (std::size_t k = 1; k < traj.points.size(); ++k) {
    CHECK(std::abs(traj.points[k].x[0] - 0.0) <= 1e-12);
    CHECK(std::abs(traj.points[k].y[0] - 1.0) <= 1e-12);
  }

  // not even stable at the equilibrium
  cfg.horizon = 1;
  cfg.init = {vec1(0.5), vec1(0.5), std::nullopt};
  Trajectory one = run_vanilla_gda(cat.game, cfg);
  CHECK(std::abs(one.points.back().x[0] - (-0.5)) <= 1e-12);
  CHECK(std::abs(one.points.back().y[0] - 0.5) <= 1e-12);

  // T = 1 records the initial profile plus one step
  CHECK(one.points.size() == 2);
  CHECK(one.points.front().t == 0);
}

TEST_CASE("g2da replays and fixes") {
  const auto& cat = builtin_game("example-1-1");
  RunConfig cfg = unit_config(5, 1.0);
  cfg.init = {vec1(0.0), vec1(0.0), vec1(0.0)};
  Trajectory traj = run_g2da(cat.game, cfg);
  for (std::size_t k = 1; k < traj.points.size(); ++k) {
    CHECK(std::abs((*traj.points[k].lambda)[0]) <= 1e-12);
    CHECK(std::abs(traj.points[k].x[0]) <= 1e-12);
    CHECK(std::abs(traj.points[k].y[0] - 1.0) <= 1e-12);
  }

  // the tagged equilibrium is a fixed point of the iteration
  cfg.horizon = 3;
  cfg.init = {vec1(0.5), vec1(0.5), vec1(1.0)};
  Trajectory fixed = run_g2da(cat.game, cfg);
  for (const auto& pt : fixed.points) {
    CHECK(std::abs(pt.x[0] - 0.5) <= 1e-12);
    CHECK(std::abs(pt.y[0] - 0.5) <= 1e-12);
    CHECK(std::abs((*pt.lambda)[0] - 1.0) <= 1e-12);
  }
}

TEST_CASE("g2da keeps multipliers nonnegative") {
  Rng rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    auto qg = testsupport::make_random_quadratic_game(rng);
    RunConfig cfg = unit_config(40, 0.2);
    cfg.init = {Vec::Zero(qg.game.outer_dim), Vec::Zero(qg.game.inner_dim),
                Vec::Zero(qg.game.num_constraints)};
    Trajectory traj = run_g2da(qg.game, cfg);
    for (const auto& pt : traj.points) {
      REQUIRE(pt.lambda.has_value());
      CHECK(pt.lambda->minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("lgda cycles on the x^2 - y^2 game and its averages vanish") {
  const auto& cat = builtin_game("lgda-cycle");
  RunConfig cfg = unit_config(6, 1.0);
  cfg.init = {vec1(1.0), vec1(1.0), std::nullopt};
  Trajectory traj = run_lgda(cat.game, vec1(0.0), cfg);
  for (const auto& pt : traj.points) {
    if (pt.t == 0) continue;
    const double want = pt.t % 2 == 1 ? -1.0 : 1.0;
    CHECK(std::abs(pt.x[0] - want) <= 1e-12);
    CHECK(std::abs(pt.y[0] - want) <= 1e-12);
  }
  CHECK(std::abs(traj.final_xbar[0]) <= 1e-12);
  CHECK(std::abs(traj.final_ybar[0]) <= 1e-12);
}

TEST_CASE("lgda degenerates: y frozen, x contracts to 1/2") {
  const auto& cat = builtin_game("degenerate");
  RunConfig cfg = unit_config(100, 0.3);
  cfg.init = {vec1(-0.8), vec1(0.25), std::nullopt};
  Trajectory traj = run_lgda(cat.game, vec1(1.0), cfg);
  for (const auto& pt : traj.points) CHECK(pt.y[0] == 0.25);
  CHECK(traj.points.back().x[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("lgda with zero multipliers equals vanilla GDA when no constraints exist") {
  GameDefinition g;
  g.id = "unconstrained-bilinear";
  g.outer_dim = 1;
  g.inner_dim = 1;
  g.num_constraints = 0;
  g.objective = [](const Vec& x, const Vec& y) { return x[0] * x[0] + x[0] * y[0]; };
  g.grad_x_objective = [](const Vec& x, const Vec& y) { return vec1(2.0 * x[0] + y[0]); };
  g.grad_y_objective = [](const Vec& x, const Vec&) { return vec1(x[0]); };
  g.outer_set = ProjectionSpec::interval(-1.0, 1.0);
  g.inner_base_set = ProjectionSpec::interval(-1.0, 1.0);

  RunConfig cfg = unit_config(25, 0.1);
  cfg.init = {vec1(0.7), vec1(-0.4), std::nullopt};
  Trajectory a = run_lgda(g, Vec::Zero(0), cfg);
  Trajectory b = run_vanilla_gda(g, cfg);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    CHECK(a.points[k].x[0] == b.points[k].x[0]);
    CHECK(a.points[k].y[0] == b.points[k].y[0]);
  }
}

TEST_CASE("trajectory averages match the arithmetic mean") {
  const auto& cat = builtin_game("example-1-1");
  RunConfig cfg = unit_config(37, 0.17);
  cfg.init = {vec1(-0.3), vec1(0.2), std::nullopt};
  Trajectory traj = run_vanilla_gda(cat.game, cfg);
  double x_sum = 0.0, y_sum = 0.0;
  for (const auto& pt : traj.points) {
    if (pt.t == 0) continue;
    x_sum += pt.x[0];
    y_sum += pt.y[0];
    CHECK(std::abs(pt.xbar[0] - x_sum / pt.t) <= 1e-12);
    CHECK(std::abs(pt.ybar[0] - y_sum / pt.t) <= 1e-12);
  }

  // thinned storage still averages over every iterate
  RunConfig thin = cfg;
  thin.record_every = 7;
  Trajectory thinned = run_vanilla_gda(cat.game, thin);
  CHECK(thinned.final_xbar[0] == traj.final_xbar[0]);
  CHECK(thinned.final_ybar[0] == traj.final_ybar[0]);
  CHECK(thinned.points.back().t == 37);
  CHECK(thinned.points.size() < traj.points.size());
}

TEST_CASE("gdalo draw is seeded and iterates stay feasible") {
  const auto& cat = builtin_game("example-1-1");
  RunConfig cfg = unit_config(50, 0.1);
  cfg.init = {vec1(0.0), vec1(0.0), std::nullopt};
  cfg.seed = 123;
  GdaloResult a = run_gdalo(cat.game, vec1(1.0), cfg);
  GdaloResult b = run_gdalo(cat.game, vec1(1.0), cfg);
  CHECK(a.selected_t == b.selected_t);
  CHECK(a.selected.x[0] == b.selected.x[0]);
  CHECK(a.selected.y[0] == b.selected.y[0]);
  CHECK(a.selected_t >= 1);
  CHECK(a.selected_t <= cfg.horizon);

  std::set<int> draws;
  for (std::uint64_t s = 0; s < 20; ++s) {
    cfg.seed = s;
    draws.insert(run_gdalo(cat.game, vec1(1.0), cfg).selected_t);
  }
  CHECK(draws.size() > 5);

  // g(x^(t), y^(t+1)) >= -tol by construction of the slice projection
  cfg.seed = 0;
  GdaloResult res = run_gdalo(cat.game, vec1(1.0), cfg);
  const auto& pts = res.trajectory.points;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    CHECK(cat.game.constraints(pts[k].x, pts[k + 1].y).minCoeff() >= -1e-9);
  }
}

TEST_CASE("two runs produce identical csv") {
  const auto& cat = builtin_game("example-1-1");
  RunConfig cfg = unit_config(64, 0.05);
  cfg.init = {vec1(0.1), vec1(-0.2), std::nullopt};
  cfg.seed = 9;
  CHECK(run_gdalo(cat.game, vec1(1.0), cfg).trajectory.to_csv() ==
        run_gdalo(cat.game, vec1(1.0), cfg).trajectory.to_csv());
  CHECK(run_g2da(cat.game, cfg).to_csv() == run_g2da(cat.game, cfg).to_csv());
}

TEST_CASE("lgda average bound formula") {
  Band zero = lgda_average_bound({0.0, 0.0, 0.0, 0.0}, 0.0, 10);
  CHECK(zero.lower == 0.0);
  CHECK(zero.upper == 0.0);

  Band b = lgda_average_bound({1.0, 1.0, 0.0, 0.0}, 1.0, 4);
  CHECK(b.lower == doctest::Approx(-1.0));

  // doubling T shrinks the band by 1/sqrt(2)
  LgdaNorms norms{0.5, 0.25, 0.75, 0.4};
  Band t1 = lgda_average_bound(norms, 2.0, 100);
  Band t2 = lgda_average_bound(norms, 2.0, 200);
  CHECK(t2.upper == doctest::Approx(t1.upper / std::sqrt(2.0)));
  CHECK(t2.lower == doctest::Approx(t1.lower / std::sqrt(2.0)));
}

TEST_CASE("gdalo expected bound formula") {
  Band zero = gdalo_expected_bound(0.0, 0.0, 0.0, 0.0, 7);
  CHECK(zero.lower == 0.0);
  CHECK(zero.upper == 0.0);

  Band b = gdalo_expected_bound(0.0, 1.0, 0.0, 1.0, 1);
  CHECK(b.upper == doctest::Approx(1.0));

  double prev = 1e300;
  for (int t : {10, 100, 1000, 10000}) {
    Band band = gdalo_expected_bound(1.0, 1.0, 2.0, 3.0, t);
    CHECK(band.upper < prev);
    CHECK(band.upper > 0.0);
    prev = band.upper;
  }
}

TEST_CASE("lipschitz estimates") {
  const auto& cat = builtin_game("example-1-1");
  LipschitzEstimate est = estimate_lipschitz(cat.game, vec1(1.0), 1000, 3);
  // sup |2x - 1| on [-1, 1] is 3 and the y-gradient of L vanishes
  CHECK(est.lagrangian > 2.5);
  CHECK(est.lagrangian <= 3.0);
  // sup ||(2x, 1)|| = sqrt(5)
  CHECK(est.objective > 2.0);
  CHECK(est.objective <= std::sqrt(5.0) + 1e-12);

  // running max is monotone in the sample count for a fixed stream
  LipschitzEstimate small = estimate_lipschitz(cat.game, vec1(1.0), 50, 3);
  CHECK(small.lagrangian <= est.lagrangian);
  CHECK(small.objective <= est.objective);

  // constant objective: L_f = 0, L_L driven by the constraint weights
  GameDefinition flat = cat.game;
  flat.objective = [](const Vec&, const Vec&) { return 4.0; };
  flat.grad_x_objective = [](const Vec&, const Vec&) { return Vec::Zero(1); };
  flat.grad_y_objective = [](const Vec&, const Vec&) { return Vec::Zero(1); };
  LipschitzEstimate flat_est = estimate_lipschitz(flat, vec1(1.0), 200, 3);
  CHECK(flat_est.objective == 0.0);
  CHECK(flat_est.lagrangian == doctest::Approx(std::sqrt(2.0)));  // grad of 1*(1-x-y)
}

TEST_CASE("descent lemma slacks on random quadratic games") {
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    auto qg = testsupport::make_random_quadratic_game(rng);
    auto slack = testsupport::check_gdalo_lemmas(qg, 40, 10, 77 + trial);
    CHECK(slack.per_iterate_x >= -1e-8);
    CHECK(slack.per_iterate_y >= -1e-8);
    CHECK(slack.averaged_x >= -1e-8);
    CHECK(slack.lagrangian_dominates_objective >= -1e-12);
  }
}
