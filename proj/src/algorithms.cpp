#include "stackgda/algorithms.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace stackgda {

StepSchedule StepSchedule::constant(double eta) {
  if (eta <= 0.0) throw DomainError("StepSchedule: eta must be positive");
  return StepSchedule(eta);
}

StepSchedule StepSchedule::inverse_sqrt_horizon(int horizon) {
  if (horizon < 1) throw DomainError("StepSchedule: horizon must be >= 1");
  return StepSchedule(1.0 / std::sqrt(static_cast<double>(horizon)));
}

namespace {

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

// Incremental trajectory builder: keeps running sums for the averages over
// iterates 1..t and thins stored points by record_every.
class Recorder {
 public:
  Recorder(const GameDefinition& game, const RunConfig& config, bool with_lambda)
      : game_(game), config_(config), with_lambda_(with_lambda) {
    if (config.horizon < 1) throw DomainError("RunConfig: horizon must be >= 1");
    if (config.record_every < 1) throw DomainError("RunConfig: record_every must be >= 1");
    traj_.horizon = config.horizon;
    x_sum_ = Vec::Zero(game.outer_dim);
    y_sum_ = Vec::Zero(game.inner_dim);
  }

  void record(int t, const Vec& x, const Vec& y, const Vec* lambda) {
    Vec xbar, ybar;
    if (t == 0) {
      xbar = x;
      ybar = y;
    } else {
      x_sum_ += x;
      y_sum_ += y;
      xbar = x_sum_ / t;
      ybar = y_sum_ / t;
    }
    if (t == 0 || t == traj_.horizon || t % config_.record_every == 0) {
      TrajectoryPoint pt;
      pt.t = t;
      pt.x = x;
      pt.y = y;
      if (with_lambda_ && lambda != nullptr) pt.lambda = *lambda;
      pt.objective = game_.objective(x, y);
      pt.xbar = xbar;
      pt.ybar = ybar;
      traj_.points.push_back(std::move(pt));
    }
    if (t == traj_.horizon) {
      traj_.final_xbar = xbar;
      traj_.final_ybar = ybar;
    }
  }

  Trajectory take() { return std::move(traj_); }

 private:
  const GameDefinition& game_;
  const RunConfig& config_;
  bool with_lambda_;
  Trajectory traj_;
  Vec x_sum_, y_sum_;
};

Vec initial_x(const GameDefinition& game, const RunConfig& config) {
  Vec x = config.init.x.size() > 0 ? config.init.x : Vec::Zero(game.outer_dim);
  require_dim(x, game.outer_dim, "init.x");
  return x;
}

Vec initial_y(const GameDefinition& game, const RunConfig& config) {
  Vec y = config.init.y.size() > 0 ? config.init.y : Vec::Zero(game.inner_dim);
  require_dim(y, game.inner_dim, "init.y");
  return y;
}

Vec initial_lambda(const GameDefinition& game, const RunConfig& config) {
  Vec l = config.init.lambda.has_value() ? *config.init.lambda
                                         : Vec::Zero(game.num_constraints);
  require_dim(l, game.num_constraints, "init.lambda");
  if (l.size() > 0 && l.minCoeff() < 0.0) throw DomainError("init.lambda must be >= 0");
  return l;
}

void check_lambda_star(const GameDefinition& game, const Vec& lambda_star) {
  require_dim(lambda_star, game.num_constraints, "lambda_star");
  if (lambda_star.size() > 0 && lambda_star.minCoeff() < 0.0) {
    throw DomainError("lambda_star must be componentwise >= 0");
  }
}

Vec project_slice(const GameDefinition& game, const Vec& slice_x, const Vec& v,
                  const RunConfig& config) {
  return project(inner_slice(game, slice_x), v, config.projection_tol,
                 config.projection_max_iter, config.projection_mode);
}

}  // namespace

Trajectory run_vanilla_gda(const GameDefinition& game, const RunConfig& config) {
  Recorder rec(game, config, false);
  Vec x = initial_x(game, config);
  Vec y = initial_y(game, config);
  rec.record(0, x, y, nullptr);
  Vec prev_x = x;
  for (int t = 1; t <= config.horizon; ++t) {
    const Vec gx = game.grad_x_objective(x, y);
    const Vec gy = game.grad_y_objective(x, y);
    const Vec& slice_x = config.lagged_constraint ? prev_x : x;
    Vec x_next = project(game.outer_set, x - config.eta_x.at(t) * gx);
    Vec y_next = project_slice(game, slice_x, y + config.eta_y.at(t) * gy, config);
    prev_x = x;
    x = std::move(x_next);
    y = std::move(y_next);
    rec.record(t, x, y, nullptr);
  }
  return rec.take();
}

Trajectory run_g2da(const GameDefinition& game, const RunConfig& config) {
  Recorder rec(game, config, true);
  Vec x = initial_x(game, config);
  Vec y = initial_y(game, config);
  Vec lambda = initial_lambda(game, config);
  rec.record(0, x, y, &lambda);
  const ProjectionSpec lambda_set = ProjectionSpec::orthant(game.num_constraints);
  for (int t = 1; t <= config.horizon; ++t) {
    const LagrangianGradients g = lagrangian_gradients(game, x, y, lambda);
    Vec lambda_next = game.num_constraints > 0
                          ? project(lambda_set, Vec(lambda - config.eta_lambda.at(t) * g.lambda))
                          : lambda;
    Vec x_next = project(game.outer_set, x - config.eta_x.at(t) * g.x);
    Vec y_next = project(game.inner_base_set, y + config.eta_y.at(t) * g.y);
    lambda = std::move(lambda_next);
    x = std::move(x_next);
    y = std::move(y_next);
    rec.record(t, x, y, &lambda);
  }
  return rec.take();
}

Trajectory run_lgda(const GameDefinition& game, const Vec& lambda_star, const RunConfig& config) {
  check_lambda_star(game, lambda_star);
  Recorder rec(game, config, false);
  Vec x = initial_x(game, config);
  Vec y = initial_y(game, config);
  rec.record(0, x, y, nullptr);
  for (int t = 1; t <= config.horizon; ++t) {
    const LagrangianGradients g = lagrangian_gradients(game, x, y, lambda_star);
    Vec x_next = project(game.outer_set, x - config.eta_x.at(t) * g.x);
    Vec y_next = project(game.inner_base_set, y + config.eta_y.at(t) * g.y);
    x = std::move(x_next);
    y = std::move(y_next);
    rec.record(t, x, y, nullptr);
  }
  return rec.take();
}

GdaloResult run_gdalo(const GameDefinition& game, const Vec& lambda_star,
                      const RunConfig& config) {
  check_lambda_star(game, lambda_star);
  Recorder rec(game, config, false);
  Vec x = initial_x(game, config);
  Vec y = initial_y(game, config);
  rec.record(0, x, y, nullptr);

  Rng rng(config.seed);
  GdaloResult result;
  result.selected_t = 1 + static_cast<int>(rng.uniform_index(config.horizon));

  Vec prev_x = x;
  for (int t = 1; t <= config.horizon; ++t) {
    const LagrangianGradients g = lagrangian_gradients(game, x, y, lambda_star);
    const Vec gy_obj = game.grad_y_objective(x, y);
    const Vec& slice_x = config.lagged_constraint ? prev_x : x;
    Vec x_next = project(game.outer_set, x - config.eta_x.at(t) * g.x);
    Vec y_next = project_slice(game, slice_x, y + config.eta_y.at(t) * gy_obj, config);
    prev_x = x;
    x = std::move(x_next);
    y = std::move(y_next);
    if (t == result.selected_t) result.selected = StrategyProfile{x, y, std::nullopt};
    rec.record(t, x, y, nullptr);
  }
  result.trajectory = rec.take();
  return result;
}

Band lgda_average_bound(const LgdaNorms& norms, double lipschitz_lagrangian, int horizon) {
  if (horizon < 1) throw DomainError("lgda_average_bound: horizon must be >= 1");
  if (lipschitz_lagrangian < 0.0) throw DomainError("lgda_average_bound: negative Lipschitz constant");
  const double denom = 2.0 * std::sqrt(static_cast<double>(horizon));
  const double l2 = 2.0 * lipschitz_lagrangian * lipschitz_lagrangian;
  Band band;
  band.lower = -(norms.y0_to_ystar_sq + norms.x0_to_xbar_sq + l2) / denom;
  band.upper = (norms.y0_to_ybar_sq + norms.x0_to_xstar_sq + l2) / denom;
  return band;
}

Band gdalo_expected_bound(double y0_to_ystar_sq, double x0_to_xstar_sq, double lipschitz_objective,
                          double lipschitz_lagrangian, int horizon) {
  if (horizon < 1) throw DomainError("gdalo_expected_bound: horizon must be >= 1");
  if (lipschitz_objective < 0.0 || lipschitz_lagrangian < 0.0) {
    throw DomainError("gdalo_expected_bound: negative Lipschitz constant");
  }
  const double denom = 2.0 * std::sqrt(static_cast<double>(horizon));
  Band band;
  band.lower = -(y0_to_ystar_sq + lipschitz_objective * lipschitz_objective) / denom;
  band.upper = (x0_to_xstar_sq + lipschitz_lagrangian * lipschitz_lagrangian) / denom;
  return band;
}

LipschitzEstimate estimate_lipschitz(const GameDefinition& game, const Vec& lambda_star,
                                     int num_samples, std::uint64_t seed) {
  check_lambda_star(game, lambda_star);
  auto bx = game.outer_set.bounding_box();
  auto by = game.inner_base_set.bounding_box();
  if (!bx || !by) throw DomainError("estimate_lipschitz: strategy sets are unbounded");
  Rng rng(seed);
  LipschitzEstimate est;
  for (int s = 0; s < num_samples; ++s) {
    Vec x(game.outer_dim), y(game.inner_dim);
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(bx->first[i], bx->second[i]);
    for (int j = 0; j < y.size(); ++j) y[j] = rng.uniform(by->first[j], by->second[j]);
    x = project(game.outer_set, x);
    y = project(game.inner_base_set, y);
    const LagrangianGradients g = lagrangian_gradients(game, x, y, lambda_star);
    const double lag_norm = std::sqrt(g.x.squaredNorm() + g.y.squaredNorm());
    const Vec fx = game.grad_x_objective(x, y);
    const Vec fy = game.grad_y_objective(x, y);
    const double obj_norm = std::sqrt(fx.squaredNorm() + fy.squaredNorm());
    est.lagrangian = std::max(est.lagrangian, lag_norm);
    est.objective = std::max(est.objective, obj_norm);
  }
  return est;
}

void Trajectory::write_csv(std::ostream& os) const {
  if (points.empty()) return;
  const auto& first = points.front();
  os << "t";
  for (int i = 0; i < first.x.size(); ++i) os << ",x_" << i;
  for (int j = 0; j < first.y.size(); ++j) os << ",y_" << j;
  if (first.lambda) {
    for (int k = 0; k < first.lambda->size(); ++k) os << ",lambda_" << k;
  }
  os << ",f";
  for (int i = 0; i < first.x.size(); ++i) os << ",xbar_" << i;
  for (int j = 0; j < first.y.size(); ++j) os << ",ybar_" << j;
  os << "\n";
  for (const auto& pt : points) {
    os << pt.t;
    for (int i = 0; i < pt.x.size(); ++i) {
      os << ",";
      write_double(os, pt.x[i]);
    }
    for (int j = 0; j < pt.y.size(); ++j) {
      os << ",";
      write_double(os, pt.y[j]);
    }
    if (pt.lambda) {
      for (int k = 0; k < pt.lambda->size(); ++k) {
        os << ",";
        write_double(os, (*pt.lambda)[k]);
      }
    }
    os << ",";
    write_double(os, pt.objective);
    for (int i = 0; i < pt.xbar.size(); ++i) {
      os << ",";
      write_double(os, pt.xbar[i]);
    }
    for (int j = 0; j < pt.ybar.size(); ++j) {
      os << ",";
      write_double(os, pt.ybar[j]);
    }
    os << "\n";
  }
}

std::string Trajectory::to_csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

}  // namespace stackgda
