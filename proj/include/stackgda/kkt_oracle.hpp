#pragma once

#include <functional>
#include <vector>

#include "stackgda/common.hpp"

namespace stackgda::kkt {

// Structured game class with a closed-form multiplier oracle. The inner
// problem decomposes per index i into
//   max a_i log f2_i(x, y_i) + b_i log f3_i(y_i)   s.t.  g_i(x, y_i) <= c_i,
// with f2, f3, g concave and degree-1 homogeneous in y. Constraints are stored
// here in <=-form; c_i - g_i >= 0 is the standard-form constraint handed to
// game definitions.
struct StructuredGameSpec {
  Vec a;  // log-weights on the f2 terms, >= 0
  Vec b;  // log-weights on the f3 terms, >= 0
  Vec c;  // right-hand sides, > 0
};

// lambda*_i = (a_i + b_i) / c_i.
Vec closed_form_multipliers(const StructuredGameSpec& spec);

struct HomogeneityReport {
  double scaling = 0.0;  // max violation of f(k y) = k f(y)
  double euler = 0.0;    // max violation of grad f(y) . y = f(y)
  double max_violation() const { return scaling > euler ? scaling : euler; }
};

// Degree-1 homogeneity check at the given points and scales; the gradient for
// Euler's identity comes from central finite differences.
HomogeneityReport verify_homogeneity(const std::function<double(const Vec&)>& fn,
                                     const std::vector<Vec>& points,
                                     const std::vector<double>& scales, double fd_step = 1e-6);

// Callable description of one game in the structured class above.
struct TheoremFormGame {
  StructuredGameSpec spec;
  int inner_block_dim = 0;  // each y_i lives in R+^inner_block_dim

  std::function<double(int i, const Vec& x, const Vec& y)> f2;
  std::function<Vec(int i, const Vec& x, const Vec& y)> grad_y_f2;
  std::function<double(int i, const Vec& y)> f3;
  std::function<Vec(int i, const Vec& y)> grad_y_f3;
  std::function<double(int i, const Vec& x, const Vec& y)> g;
  std::function<Vec(int i, const Vec& x, const Vec& y)> grad_y_g;

  int num_blocks() const { return static_cast<int>(spec.a.size()); }
  // Standard-form (>= 0) constraint values c_i - g_i(x, y_i).
  Vec standard_form_constraints(const Vec& x, const std::vector<Vec>& ys) const;
};

// y_i*(x), the inner argmax for block i at outer strategy x.
using InnerArgmaxOracle = std::function<Vec(int i, const Vec& x)>;

struct StationarityReport {
  double complementarity = 0.0;  // max |lambda*_i (c_i - g_i)|
  double stationarity = 0.0;     // max |dL/dy_ij| over interior coordinates
  double max_residual() const {
    return complementarity > stationarity ? complementarity : stationarity;
  }
};

// Checks the first-order KKT conditions of the inner problem at the oracle's
// argmax for each sampled x, with the supplied multipliers plugged in.
// Coordinates with y*_ij <= interior_threshold are treated as boundary and
// skipped in the stationarity check.
StationarityReport verify_kkt_stationarity(const TheoremFormGame& game, const Vec& lambda_star,
                                           const InnerArgmaxOracle& oracle,
                                           const std::vector<Vec>& x_samples,
                                           double interior_threshold = 1e-7);

}  // namespace stackgda::kkt
