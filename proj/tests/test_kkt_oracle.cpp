#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stackgda/kkt_oracle.hpp"
#include "support/toy_kkt.hpp"

using namespace stackgda;

namespace {

Vec make_vec(std::initializer_list<double> vals) {
  Vec v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("closed-form multipliers") {
  Vec lambda = kkt::closed_form_multipliers({make_vec({1, 2}), make_vec({0, 3}), make_vec({1, 5})});
  CHECK(lambda[0] == doctest::Approx(1.0));
  CHECK(lambda[1] == doctest::Approx(1.0));

  Vec zero = kkt::closed_form_multipliers(
      {Vec::Zero(3), Vec::Zero(3), make_vec({1, 2, 3})});
  CHECK(zero.norm() == 0.0);

  // the Fisher specialization: a = budgets, b = 0, c = budgets
  Vec budgets = make_vec({11.5, 17.0, 13.25});
  Vec ones = kkt::closed_form_multipliers({budgets, Vec::Zero(3), budgets});
  for (int i = 0; i < 3; ++i) CHECK(ones[i] == doctest::Approx(1.0));

  CHECK_THROWS_AS(
      kkt::closed_form_multipliers({make_vec({1}), make_vec({1}), make_vec({0})}), DomainError);
  CHECK_THROWS_AS(
      kkt::closed_form_multipliers({make_vec({-1}), make_vec({1}), make_vec({1})}), DomainError);
}

TEST_CASE("multipliers are invariant under joint scaling") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(4));
    kkt::StructuredGameSpec spec{rng.uniform_vec(n, 0.0, 5.0), rng.uniform_vec(n, 0.0, 5.0),
                                 rng.uniform_vec(n, 0.1, 5.0)};
    const double k = rng.uniform(0.1, 10.0);
    Vec base = kkt::closed_form_multipliers(spec);
    Vec scaled = kkt::closed_form_multipliers({k * spec.a, k * spec.b, k * spec.c});
    CHECK((base - scaled).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("homogeneity verification") {
  std::vector<Vec> points;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) points.push_back(rng.uniform_vec(3, 0.2, 2.0));
  const std::vector<double> scales = {0.5, 2.0, 3.7};

  Vec v = make_vec({1.0, 2.0, 0.5});
  auto linear = kkt::verify_homogeneity([&](const Vec& y) { return v.dot(y); }, points, scales);
  CHECK(linear.scaling < 1e-12);
  CHECK(linear.euler < 1e-9);

  Vec alpha = make_vec({0.2, 0.5, 0.3});  // exponents sum to one
  auto cobb = kkt::verify_homogeneity(
      [&](const Vec& y) {
        double log_u = 0.0;
        for (int j = 0; j < 3; ++j) log_u += alpha[j] * std::log(y[j]);
        return std::exp(log_u);
      },
      points, scales);
  CHECK(cobb.max_violation() < 1e-6);

  std::vector<Vec> one = {make_vec({1.0})};
  auto square =
      kkt::verify_homogeneity([](const Vec& y) { return y[0] * y[0]; }, one, {2.0});
  CHECK(square.scaling == doctest::Approx(1.0));
  CHECK(square.euler == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("stationarity of the single-good market") {
  // one buyer, one good, budget 1: max log(v y) s.t. p y <= 1 has y* = 1/p
  kkt::TheoremFormGame game;
  game.spec = {make_vec({1.0}), make_vec({0.0}), make_vec({1.0})};
  game.inner_block_dim = 1;
  const double v = 3.0;
  game.f2 = [v](int, const Vec&, const Vec& y) { return v * y[0]; };
  game.grad_y_f2 = [v](int, const Vec&, const Vec&) { return make_vec({v}); };
  game.f3 = [](int, const Vec&) { return 1.0; };
  game.grad_y_f3 = [](int, const Vec&) { return make_vec({0.0}); };
  game.g = [](int, const Vec& x, const Vec& y) { return x[0] * y[0]; };  // price is the outer var
  game.grad_y_g = [](int, const Vec& x, const Vec&) { return make_vec({x[0]}); };

  kkt::InnerArgmaxOracle oracle = [](int, const Vec& x) { return make_vec({1.0 / x[0]}); };
  std::vector<Vec> prices;
  Rng rng(8);
  for (int i = 0; i < 10; ++i) prices.push_back(rng.uniform_vec(1, 0.5, 4.0));

  Vec lambda = kkt::closed_form_multipliers(game.spec);
  CHECK(lambda[0] == doctest::Approx(1.0));
  auto report = kkt::verify_kkt_stationarity(game, lambda, oracle, prices);
  CHECK(report.max_residual() < 1e-8);

  // slack constraint with a zero multiplier is trivially complementary
  kkt::TheoremFormGame slack = game;
  slack.spec.a = make_vec({0.0});
  auto zero_report = kkt::verify_kkt_stationarity(slack, make_vec({0.0}), oracle, prices);
  CHECK(zero_report.complementarity == 0.0);
}

TEST_CASE("stationarity of the two-good Cobb-Douglas buyer") {
  // alpha = (1/2, 1/2), p = (1,1), budget 2: y* = (1,1)
  kkt::TheoremFormGame game;
  game.spec = {make_vec({1.0}), make_vec({0.0}), make_vec({2.0})};
  game.inner_block_dim = 2;
  game.f2 = [](int, const Vec&, const Vec& y) { return std::sqrt(y[0] * y[1]); };
  game.grad_y_f2 = [](int, const Vec&, const Vec& y) {
    const double u = std::sqrt(y[0] * y[1]);
    return make_vec({0.5 * u / y[0], 0.5 * u / y[1]});
  };
  game.f3 = [](int, const Vec&) { return 1.0; };
  game.grad_y_f3 = [](int, const Vec&) { return make_vec({0.0, 0.0}); };
  game.g = [](int, const Vec&, const Vec& y) { return y[0] + y[1]; };
  game.grad_y_g = [](int, const Vec&, const Vec&) { return make_vec({1.0, 1.0}); };

  kkt::InnerArgmaxOracle oracle = [](int, const Vec&) { return make_vec({1.0, 1.0}); };
  auto report = kkt::verify_kkt_stationarity(game, kkt::closed_form_multipliers(game.spec),
                                             oracle, {make_vec({1.0})});
  CHECK(report.max_residual() < 1e-6);
}

TEST_CASE("closed form matches stationarity on random structured games") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int blocks = 1 + static_cast<int>(rng.uniform_index(4));
    auto toy = testsupport::make_toy_theorem_game(rng, blocks);
    Vec lambda = kkt::closed_form_multipliers(toy.game.spec);
    std::vector<Vec> xs;
    for (int i = 0; i < 5; ++i) xs.push_back(rng.uniform_vec(1, -2.0, 2.0));
    auto report = kkt::verify_kkt_stationarity(toy.game, lambda, toy.oracle, xs);
    CHECK(report.max_residual() < 1e-5);

    // perturbed multipliers break stationarity
    Vec wrong = lambda;
    wrong[0] += 0.5;
    auto bad = kkt::verify_kkt_stationarity(toy.game, wrong, toy.oracle, xs);
    CHECK(bad.max_residual() > 1e-3);
  }
}

TEST_CASE("standard-form constraints flip the inequality") {
  Rng rng(31);
  auto toy = testsupport::make_toy_theorem_game(rng, 3);
  std::vector<Vec> ys;
  for (int i = 0; i < 3; ++i) ys.push_back(toy.oracle(i, make_vec({1.0})));
  Vec g_std = toy.game.standard_form_constraints(make_vec({1.0}), ys);
  for (int i = 0; i < 3; ++i) {
    CHECK(g_std[i] ==
          doctest::Approx(toy.game.spec.c[i] - toy.game.g(i, make_vec({1.0}), ys[i])));
    CHECK(g_std[i] >= -1e-12);  // argmax bundles are feasible
  }
}
