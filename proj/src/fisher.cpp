#include "stackgda/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace stackgda::fisher {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

Vec cd_exponents(const Vec& v) { return v / v.sum(); }

// Value and ascent direction of b log(u(x) + delta) with the Cobb-Douglas
// boundary floor applied to both pieces, so dynamics and the game definition
// agree exactly.
struct LogUtilityTerm {
  double utility_value = 0.0;  // floored for Cobb-Douglas
  Vec direction;               // b grad u / (u + delta)
};

LogUtilityTerm log_utility_term(const UtilitySpec& spec, double budget, const Vec& x,
                                double delta) {
  LogUtilityTerm term;
  if (spec.kind == UtilityClass::CobbDouglas) {
    const Vec alpha = cd_exponents(spec.valuations);
    Vec xf = x;
    for (int j = 0; j < xf.size(); ++j) {
      if (alpha[j] > 0.0 && xf[j] < kCobbDouglasFloor) xf[j] = kCobbDouglasFloor;
    }
    term.utility_value = utility(spec, xf);
    term.direction = (budget / (term.utility_value + delta)) * utility_gradient(spec, xf);
  } else {
    term.utility_value = utility(spec, x);
    if (term.utility_value + delta <= 0.0) {
      throw DomainError("log utility undefined: u + delta <= 0 (use delta > 0)");
    }
    term.direction = (budget / (term.utility_value + delta)) * utility_gradient(spec, x);
  }
  return term;
}

}  // namespace

std::string to_string(UtilityClass cls) {
  switch (cls) {
    case UtilityClass::Linear: return "linear";
    case UtilityClass::CobbDouglas: return "cobb-douglas";
    case UtilityClass::Leontief: return "leontief";
  }
  return "linear";
}

UtilityClass utility_class_from_string(const std::string& s) {
  if (s == "linear") return UtilityClass::Linear;
  if (s == "cobb-douglas") return UtilityClass::CobbDouglas;
  if (s == "leontief") return UtilityClass::Leontief;
  throw DomainError("unknown utility class '" + s + "'");
}

double utility(const UtilitySpec& spec, const Vec& x) {
  require_dim(x, static_cast<int>(spec.valuations.size()), "bundle");
  switch (spec.kind) {
    case UtilityClass::Linear:
      return spec.valuations.dot(x);
    case UtilityClass::CobbDouglas: {
      const Vec alpha = cd_exponents(spec.valuations);
      double log_u = 0.0;
      for (int j = 0; j < x.size(); ++j) {
        if (alpha[j] <= 0.0) continue;
        if (x[j] <= 0.0) return 0.0;
        log_u += alpha[j] * std::log(x[j]);
      }
      return std::exp(log_u);
    }
    case UtilityClass::Leontief: {
      double value = kInf;
      for (int j = 0; j < x.size(); ++j) {
        if (spec.valuations[j] > 0.0) value = std::min(value, x[j] / spec.valuations[j]);
      }
      return value;
    }
  }
  return 0.0;
}

Vec utility_gradient(const UtilitySpec& spec, const Vec& x) {
  require_dim(x, static_cast<int>(spec.valuations.size()), "bundle");
  switch (spec.kind) {
    case UtilityClass::Linear:
      return spec.valuations;
    case UtilityClass::CobbDouglas: {
      const Vec alpha = cd_exponents(spec.valuations);
      Vec xf = x;
      for (int j = 0; j < xf.size(); ++j) {
        if (alpha[j] > 0.0 && xf[j] < kCobbDouglasFloor) xf[j] = kCobbDouglasFloor;
      }
      const double u = utility(spec, xf);
      Vec grad = Vec::Zero(x.size());
      for (int j = 0; j < x.size(); ++j) {
        if (alpha[j] > 0.0) grad[j] = alpha[j] * u / xf[j];
      }
      return grad;
    }
    case UtilityClass::Leontief: {
      int arg = -1;
      double best = kInf;
      for (int j = 0; j < x.size(); ++j) {
        if (spec.valuations[j] > 0.0 && x[j] / spec.valuations[j] < best) {
          best = x[j] / spec.valuations[j];
          arg = j;
        }
      }
      Vec grad = Vec::Zero(x.size());
      if (arg >= 0) grad[arg] = 1.0 / spec.valuations[arg];
      return grad;
    }
  }
  return Vec::Zero(x.size());
}

void FisherMarket::validate() const {
  if (num_buyers < 1 || num_goods < 1) throw DomainError("market needs buyers and goods");
  require_dim(budgets, num_buyers, "budgets");
  if (budgets.minCoeff() <= 0.0) throw DomainError("budgets must be strictly positive");
  if (static_cast<int>(utilities.size()) != num_buyers) {
    throw DimensionError("one utility spec per buyer required");
  }
  for (const auto& u : utilities) {
    require_dim(u.valuations, num_goods, "valuations");
    if (u.valuations.minCoeff() < 0.0 || u.valuations.maxCoeff() <= 0.0) {
      throw DomainError("valuations must be >= 0 with at least one positive entry");
    }
  }
}

UtilityClass FisherMarket::utility_class() const {
  UtilityClass cls = utilities.front().kind;
  for (const auto& u : utilities) {
    if (u.kind != cls) throw DomainError("market mixes utility classes");
  }
  return cls;
}

std::string FisherMarket::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = num_buyers;
  j["m"] = num_goods;
  j["budgets"] = std::vector<double>(budgets.data(), budgets.data() + budgets.size());
  j["utility"] = to_string(utility_class());
  std::vector<std::vector<double>> vals;
  for (const auto& u : utilities) {
    vals.emplace_back(u.valuations.data(), u.valuations.data() + u.valuations.size());
  }
  j["valuations"] = vals;
  j["seed"] = seed;
  return j.dump(2);
}

FisherMarket FisherMarket::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FisherMarket market;
  market.num_buyers = j.at("n").get<int>();
  market.num_goods = j.at("m").get<int>();
  const auto budgets = j.at("budgets").get<std::vector<double>>();
  market.budgets = Eigen::Map<const Vec>(budgets.data(), budgets.size());
  const UtilityClass cls = utility_class_from_string(j.at("utility").get<std::string>());
  for (const auto& row : j.at("valuations")) {
    const auto v = row.get<std::vector<double>>();
    UtilitySpec spec;
    spec.kind = cls;
    spec.valuations = Eigen::Map<const Vec>(v.data(), v.size());
    market.utilities.push_back(std::move(spec));
  }
  market.seed = j.value("seed", std::uint64_t{0});
  market.validate();
  return market;
}

Vec demand(const UtilitySpec& spec, double budget, const Vec& prices) {
  require_dim(prices, static_cast<int>(spec.valuations.size()), "prices");
  if (budget <= 0.0) throw DomainError("demand: budget must be positive");
  const int m = static_cast<int>(prices.size());
  switch (spec.kind) {
    case UtilityClass::Linear: {
      int best = -1;
      double best_rate = -kInf;
      for (int j = 0; j < m; ++j) {
        if (spec.valuations[j] <= 0.0) continue;
        if (prices[j] <= 0.0) {
          throw DomainError("demand: unbounded (zero price on valued good " + std::to_string(j) +
                            ")");
        }
        const double rate = spec.valuations[j] / prices[j];
        if (rate > best_rate) {
          best_rate = rate;
          best = j;
        }
      }
      Vec x = Vec::Zero(m);
      x[best] = budget / prices[best];
      return x;
    }
    case UtilityClass::CobbDouglas: {
      const Vec alpha = cd_exponents(spec.valuations);
      Vec x = Vec::Zero(m);
      for (int j = 0; j < m; ++j) {
        if (alpha[j] <= 0.0) continue;
        if (prices[j] <= 0.0) {
          throw DomainError("demand: unbounded (zero price on valued good " + std::to_string(j) +
                            ")");
        }
        x[j] = budget * alpha[j] / prices[j];
      }
      return x;
    }
    case UtilityClass::Leontief: {
      const double cost = spec.valuations.dot(prices);
      if (cost <= 0.0) throw DomainError("demand: unbounded (free Leontief bundle)");
      return spec.valuations * (budget / cost);
    }
  }
  return Vec::Zero(m);
}

double eg_objective(const FisherMarket& market, const Vec& p, const Mat& X, double delta) {
  require_dim(p, market.num_goods, "prices");
  if (X.rows() != market.num_buyers || X.cols() != market.num_goods) {
    throw DimensionError("allocation must be num_buyers x num_goods");
  }
  if (delta < 0.0) throw DomainError("delta must be >= 0");
  double value = p.sum();
  for (int i = 0; i < market.num_buyers; ++i) {
    const double u = utility(market.utilities[i], X.row(i).transpose());
    if (u + delta <= 0.0) {
      throw DomainError("eg_objective: log argument nonpositive for buyer " + std::to_string(i));
    }
    value += market.budgets[i] * std::log(u + delta);
  }
  return value;
}

GameDefinition make_eg_game(const FisherMarket& market, double delta) {
  market.validate();
  const int n = market.num_buyers;
  const int m = market.num_goods;
  GameDefinition game;
  game.id = "fisher-eg-" + to_string(market.utility_class());
  game.outer_dim = m;
  game.inner_dim = n * m;
  game.num_constraints = n;
  game.objective = [market, delta](const Vec& p, const Vec& xflat) {
    return eg_objective(market, p, Eigen::Map<const Mat>(xflat.data(), market.num_goods,
                                                         market.num_buyers)
                                       .transpose(),
                        delta);
  };
  game.grad_x_objective = [m](const Vec&, const Vec&) { return Vec::Ones(m); };
  game.grad_y_objective = [market, delta, n, m](const Vec&, const Vec& xflat) {
    Vec grad(n * m);
    for (int i = 0; i < n; ++i) {
      const Vec xi = xflat.segment(i * m, m);
      grad.segment(i * m, m) =
          log_utility_term(market.utilities[i], market.budgets[i], xi, delta).direction;
    }
    return grad;
  };
  game.constraints = [market, n, m](const Vec& p, const Vec& xflat) {
    Vec g(n);
    for (int i = 0; i < n; ++i) g[i] = market.budgets[i] - xflat.segment(i * m, m).dot(p);
    return g;
  };
  game.grad_x_constraints = [n, m](const Vec&, const Vec& xflat) {
    Mat jac(n, m);
    for (int i = 0; i < n; ++i) jac.row(i) = -xflat.segment(i * m, m).transpose();
    return jac;
  };
  game.grad_y_constraints = [n, m](const Vec& p, const Vec&) {
    Mat jac = Mat::Zero(n, n * m);
    for (int i = 0; i < n; ++i) jac.block(i, i * m, 1, m) = -p.transpose();
    return jac;
  };
  game.outer_set = ProjectionSpec::orthant(m);
  game.inner_base_set = ProjectionSpec::orthant(n * m);
  return game;
}

double eg_value_of_prices(const FisherMarket& market, const Vec& p, double delta) {
  double value = p.sum();
  for (int i = 0; i < market.num_buyers; ++i) {
    Vec x;
    try {
      x = demand(market.utilities[i], market.budgets[i], p);
    } catch (const DomainError&) {
      return kInf;  // a valued good is free, the inner sup is unbounded
    }
    const double u = utility(market.utilities[i], x);
    if (u + delta <= 0.0) return kInf;
    value += market.budgets[i] * std::log(u + delta);
  }
  return value;
}

double exploitability(const FisherMarket& market, const Vec& p, double f_star, double delta,
                      double tol) {
  return std::max(eg_value_of_prices(market, p, delta) - f_star, -tol);
}

MbrdResult run_mbrd(const FisherMarket& market, const MbrdConfig& config) {
  market.validate();
  if (config.horizon < 1) throw DomainError("MbrdConfig: horizon must be >= 1");
  if (config.record_every < 1) throw DomainError("MbrdConfig: record_every must be >= 1");
  const int n = market.num_buyers;
  const int m = market.num_goods;

  Vec p = config.init_prices.value_or(Vec::Ones(m));
  require_dim(p, m, "init_prices");
  Mat X;
  if (config.init_allocation) {
    X = *config.init_allocation;
    if (X.rows() != n || X.cols() != m) throw DimensionError("init_allocation shape");
  } else {
    // start each buyer at their demand for the initial prices; for Cobb-Douglas
    // this makes the allocation step interior and stable from the first iterate
    X = Mat::Zero(n, m);
    for (int i = 0; i < n; ++i) {
      try {
        X.row(i) = demand(market.utilities[i], market.budgets[i], p).transpose();
      } catch (const DomainError&) {
        for (int j = 0; j < m; ++j) {
          if (p[j] > 0.0) X(i, j) = market.budgets[i] / (m * p[j]);
        }
      }
    }
  }

  MbrdResult result;
  result.horizon = config.horizon;
  result.price_avg_series.reserve(config.horizon);

  Rng rng(config.seed);
  result.selected_t = 1 + static_cast<int>(rng.uniform_index(config.horizon));

  Vec p_sum = Vec::Zero(m);
  Mat x_sum = Mat::Zero(n, m);

  auto objective_at = [&](const Vec& prices, const Mat& alloc) {
    double value = prices.sum();
    for (int i = 0; i < n; ++i) {
      const double u =
          log_utility_term(market.utilities[i], market.budgets[i], alloc.row(i).transpose(),
                           config.delta)
              .utility_value;
      value += market.budgets[i] * std::log(u + config.delta);
    }
    return value;
  };

  auto record = [&](int t, const Vec& prices, const Mat& alloc, const Vec& pbar,
                    const Mat& xbar) {
    if (t != 0 && t != config.horizon && t % config.record_every != 0) return;
    MbrdPoint pt;
    pt.t = t;
    pt.prices = prices;
    pt.allocation = alloc;
    pt.objective = objective_at(prices, alloc);
    pt.price_avg = pbar;
    pt.alloc_avg = xbar;
    pt.excess_norm = (alloc.colwise().sum().transpose() - Vec::Ones(m)).norm();
    result.points.push_back(std::move(pt));
  };

  record(0, p, X, p, X);

  Vec prev_p = p;
  for (int t = 1; t <= config.horizon; ++t) {
    const Vec excess = X.colwise().sum().transpose() - Vec::Ones(m);
    const Vec& slice_p = config.lagged_constraint ? prev_p : p;

    Vec p_next = (p + config.eta_price.at(t) * excess).cwiseMax(0.0);

    Mat x_next(n, m);
    for (int i = 0; i < n; ++i) {
      const Vec xi = X.row(i).transpose();
      Vec direction =
          log_utility_term(market.utilities[i], market.budgets[i], xi, config.delta).direction;
      if (config.direction_clip > 0.0) {
        const double limit = config.direction_clip * slice_p.norm();
        const double norm = direction.norm();
        if (limit > 0.0 && norm > limit) direction *= limit / norm;
      }
      x_next.row(i) = project_budget_row(xi + config.eta_alloc.at(t) * direction, slice_p,
                                         market.budgets[i], config.projection_tol,
                                         config.projection_max_iter, config.projection)
                          .transpose();
    }

    prev_p = p;
    p = std::move(p_next);
    X = std::move(x_next);

    p_sum += p;
    x_sum += X;
    const Vec pbar = p_sum / t;
    result.price_avg_series.push_back(pbar);
    if (t == result.selected_t) result.selected = MarketState{p, X};
    record(t, p, X, pbar, x_sum / t);
  }

  result.final_state = MarketState{p, X};
  result.final_price_avg = p_sum / config.horizon;
  result.final_alloc_avg = x_sum / config.horizon;
  return result;
}

void MbrdResult::write_csv(const FisherMarket& market, double f_star, double delta,
                           std::ostream& os) const {
  if (points.empty()) return;
  const int m = static_cast<int>(points.front().prices.size());
  const int n = static_cast<int>(points.front().allocation.rows());
  os << "t";
  for (int j = 0; j < m; ++j) os << ",x_" << j;
  for (int k = 0; k < n * m; ++k) os << ",y_" << k;
  os << ",f";
  for (int j = 0; j < m; ++j) os << ",xbar_" << j;
  for (int k = 0; k < n * m; ++k) os << ",ybar_" << k;
  os << ",excess_demand_norm,exploitability\n";
  for (const auto& pt : points) {
    os << pt.t;
    for (int j = 0; j < m; ++j) {
      os << ",";
      write_double(os, pt.prices[j]);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        os << ",";
        write_double(os, pt.allocation(i, j));
      }
    }
    os << ",";
    write_double(os, pt.objective);
    for (int j = 0; j < m; ++j) {
      os << ",";
      write_double(os, pt.price_avg[j]);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        os << ",";
        write_double(os, pt.alloc_avg(i, j));
      }
    }
    os << ",";
    write_double(os, pt.excess_norm);
    os << ",";
    write_double(os, exploitability(market, pt.price_avg, f_star, delta));
    os << "\n";
  }
}

namespace {

EquilibriumCertificate analytic_cobb_douglas(const FisherMarket& market, double tol,
                                             double delta) {
  for (const auto& u : market.utilities) {
    if (u.kind != UtilityClass::CobbDouglas) {
      throw DomainError("analytic_cd oracle requires an all-Cobb-Douglas market");
    }
  }
  const int n = market.num_buyers;
  const int m = market.num_goods;
  Vec p_star = Vec::Zero(m);
  for (int i = 0; i < n; ++i) {
    p_star += market.budgets[i] * cd_exponents(market.utilities[i].valuations);
  }
  Mat X_star(n, m);
  for (int i = 0; i < n; ++i) {
    X_star.row(i) = demand(market.utilities[i], market.budgets[i], p_star).transpose();
  }
  EquilibriumCertificate cert;
  cert.p_star = p_star;
  cert.X_star = X_star;
  cert.f_star = eg_value_of_prices(market, p_star, delta);
  cert.clearing_residual = 0.0;
  for (int j = 0; j < m; ++j) {
    const double supply_gap = X_star.col(j).sum() - 1.0;
    if (p_star[j] > tol) {
      cert.clearing_residual = std::max(cert.clearing_residual, std::abs(supply_gap));
    } else {
      cert.clearing_residual = std::max(cert.clearing_residual, std::max(0.0, supply_gap));
    }
  }
  cert.budget_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    cert.budget_residual = std::max(
        cert.budget_residual, X_star.row(i).dot(p_star.transpose()) - market.budgets[i]);
  }
  cert.certified = cert.clearing_residual <= tol;
  cert.iterations = 0;
  return cert;
}

double default_step_scale(UtilityClass cls) {
  switch (cls) {
    case UtilityClass::Linear: return 2.0;
    case UtilityClass::CobbDouglas: return 2.0;
    case UtilityClass::Leontief: return 2.0;
  }
  return 2.0;
}

EquilibriumCertificate reference_descent(const FisherMarket& market, double tol,
                                         const ReferenceDescentOptions& opts) {
  const int n = market.num_buyers;
  const int m = market.num_goods;
  const double floor = 1e-6;
  const double step_scale = opts.step_scale > 0.0
                                ? opts.step_scale
                                : default_step_scale(market.utility_class());

  Rng rng(opts.seed);
  Vec p = rng.uniform_vec(m, 5.0, 15.0);

  Vec p_sum = Vec::Zero(m);
  Mat demand_tail_sum = Mat::Zero(n, m);
  long tail_count = 0;
  const long tail_start = opts.iterations / 2;

  double best_value = kInf;
  Vec best_p = p;

  auto consider = [&](const Vec& candidate) {
    const double value = eg_value_of_prices(market, candidate, opts.delta);
    if (value < best_value) {
      best_value = value;
      best_p = candidate;
    }
  };

  Mat X(n, m);
  for (long t = 1; t <= opts.iterations; ++t) {
    const Vec p_eval = p.cwiseMax(floor);
    for (int i = 0; i < n; ++i) {
      X.row(i) = demand(market.utilities[i], market.budgets[i], p_eval).transpose();
    }
    const Vec grad = Vec::Ones(m) - X.colwise().sum().transpose();
    p = (p - (step_scale / std::sqrt(static_cast<double>(t))) * grad).cwiseMax(floor);

    p_sum += p;
    if (t > tail_start) {
      demand_tail_sum += X;
      ++tail_count;
    }
    if (t % opts.check_every == 0 || t == opts.iterations) {
      consider(p);
      consider(p_sum / static_cast<double>(t));
    }
  }

  EquilibriumCertificate cert;
  cert.p_star = best_p;
  cert.f_star = best_value;
  cert.iterations = opts.iterations;
  cert.X_star.resize(n, m);
  const Vec p_eval = best_p.cwiseMax(floor);
  for (int i = 0; i < n; ++i) {
    cert.X_star.row(i) = demand(market.utilities[i], market.budgets[i], p_eval).transpose();
  }
  // one-sided clearing at zero-price goods: excess supply is allowed there
  const Mat avg_demand = demand_tail_sum / static_cast<double>(tail_count);
  const double price_tol = 1e-3;
  cert.clearing_residual = 0.0;
  for (int j = 0; j < m; ++j) {
    const double supply_gap = avg_demand.col(j).sum() - 1.0;
    if (best_p[j] > price_tol) {
      cert.clearing_residual = std::max(cert.clearing_residual, std::abs(supply_gap));
    } else {
      cert.clearing_residual = std::max(cert.clearing_residual, std::max(0.0, supply_gap));
    }
  }
  cert.budget_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    cert.budget_residual = std::max(
        cert.budget_residual, cert.X_star.row(i).dot(best_p.transpose()) - market.budgets[i]);
  }
  cert.certified = cert.clearing_residual <= tol;
  return cert;
}

}  // namespace

EquilibriumCertificate equilibrium_oracle(const FisherMarket& market, EquilibriumMethod method,
                                          double tol, const ReferenceDescentOptions& opts) {
  market.validate();
  if (method == EquilibriumMethod::AnalyticCobbDouglas) {
    return analytic_cobb_douglas(market, tol, opts.delta);
  }
  return reference_descent(market, tol, opts);
}

FisherMarket generate_market(std::uint64_t seed, int n, int m,
                             std::pair<double, double> budget_range,
                             std::pair<double, double> valuation_range, UtilityClass cls) {
  if (budget_range.first <= 0.0 || valuation_range.first <= 0.0) {
    throw DomainError("generate_market: ranges must be positive");
  }
  Rng rng(seed);
  FisherMarket market;
  market.num_buyers = n;
  market.num_goods = m;
  market.seed = seed;
  market.budgets = rng.uniform_vec(n, budget_range.first, budget_range.second);
  for (int i = 0; i < n; ++i) {
    UtilitySpec spec;
    spec.kind = cls;
    spec.valuations = rng.uniform_vec(m, valuation_range.first, valuation_range.second);
    market.utilities.push_back(std::move(spec));
  }
  market.validate();
  return market;
}

}  // namespace stackgda::fisher
