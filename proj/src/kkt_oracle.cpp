#include "stackgda/kkt_oracle.hpp"

#include <cmath>

namespace stackgda::kkt {

Vec closed_form_multipliers(const StructuredGameSpec& spec) {
  const auto n = spec.a.size();
  if (spec.b.size() != n || spec.c.size() != n) {
    throw DimensionError("StructuredGameSpec: a, b, c lengths differ");
  }
  Vec lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (spec.c[i] <= 0.0) {
      throw DomainError("StructuredGameSpec: c[" + std::to_string(i) + "] must be > 0");
    }
    if (spec.a[i] < 0.0 || spec.b[i] < 0.0) {
      throw DomainError("StructuredGameSpec: a and b must be >= 0");
    }
    lambda[i] = (spec.a[i] + spec.b[i]) / spec.c[i];
  }
  return lambda;
}

HomogeneityReport verify_homogeneity(const std::function<double(const Vec&)>& fn,
                                     const std::vector<Vec>& points,
                                     const std::vector<double>& scales, double fd_step) {
  HomogeneityReport report;
  for (const Vec& y : points) {
    const double fy = fn(y);
    for (double k : scales) {
      const double lhs = fn(k * y);
      const double rhs = k * fy;
      report.scaling =
          std::max(report.scaling, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    double euler_sum = 0.0;
    for (int j = 0; j < y.size(); ++j) {
      Vec yp = y, ym = y;
      yp[j] += fd_step;
      ym[j] -= fd_step;
      euler_sum += (fn(yp) - fn(ym)) / (2.0 * fd_step) * y[j];
    }
    report.euler =
        std::max(report.euler, std::abs(euler_sum - fy) / std::max(1.0, std::abs(fy)));
  }
  return report;
}

Vec TheoremFormGame::standard_form_constraints(const Vec& x, const std::vector<Vec>& ys) const {
  if (static_cast<int>(ys.size()) != num_blocks()) {
    throw DimensionError("standard_form_constraints: expected one bundle per block");
  }
  Vec out(num_blocks());
  for (int i = 0; i < num_blocks(); ++i) out[i] = spec.c[i] - g(i, x, ys[i]);
  return out;
}

StationarityReport verify_kkt_stationarity(const TheoremFormGame& game, const Vec& lambda_star,
                                           const InnerArgmaxOracle& oracle,
                                           const std::vector<Vec>& x_samples,
                                           double interior_threshold) {
  require_dim(lambda_star, game.num_blocks(), "lambda_star");
  StationarityReport report;
  for (const Vec& x : x_samples) {
    for (int i = 0; i < game.num_blocks(); ++i) {
      const Vec y_star = oracle(i, x);
      const double slack = game.spec.c[i] - game.g(i, x, y_star);
      report.complementarity =
          std::max(report.complementarity, std::abs(lambda_star[i] * slack));

      Vec grad = Vec::Zero(game.inner_block_dim);
      if (game.spec.a[i] > 0.0) {
        grad += (game.spec.a[i] / game.f2(i, x, y_star)) * game.grad_y_f2(i, x, y_star);
      }
      if (game.spec.b[i] > 0.0) {
        grad += (game.spec.b[i] / game.f3(i, y_star)) * game.grad_y_f3(i, y_star);
      }
      grad -= lambda_star[i] * game.grad_y_g(i, x, y_star);
      for (int j = 0; j < game.inner_block_dim; ++j) {
        if (y_star[j] > interior_threshold) {
          report.stationarity = std::max(report.stationarity, std::abs(grad[j]));
        }
      }
    }
  }
  return report;
}

}  // namespace stackgda::kkt
