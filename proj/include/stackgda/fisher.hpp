#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stackgda/algorithms.hpp"
#include "stackgda/game.hpp"

namespace stackgda::fisher {

enum class UtilityClass { Linear, CobbDouglas, Leontief };

std::string to_string(UtilityClass cls);
UtilityClass utility_class_from_string(const std::string& s);

struct UtilitySpec {
  UtilityClass kind = UtilityClass::Linear;
  Vec valuations;  // >= 0 with at least one positive entry
};

// Linear: v.x; Cobb-Douglas: prod x_j^{alpha_j} with alpha = v / sum(v) so the
// utility is degree-1 homogeneous; Leontief: min_{j : v_j > 0} x_j / v_j.
double utility(const UtilitySpec& spec, const Vec& x);

// Cobb-Douglas coordinates below kCobbDouglasFloor are evaluated at the floor
// before differentiating (the log-utility gradient blows up at the boundary).
// The Leontief subgradient puts 1/v_j on the minimizing coordinate, lowest
// index on ties.
Vec utility_gradient(const UtilitySpec& spec, const Vec& x);

inline constexpr double kCobbDouglasFloor = 1e-9;

struct FisherMarket {
  int num_buyers = 0;
  int num_goods = 0;
  Vec budgets;  // > 0
  std::vector<UtilitySpec> utilities;
  std::uint64_t seed = 0;  // generation provenance, echoed in JSON

  void validate() const;
  UtilityClass utility_class() const;  // shared class of all buyers
  std::string to_json() const;
  static FisherMarket from_json(const std::string& text);
};

struct MarketState {
  Vec prices;      // length m, >= 0
  Mat allocation;  // n x m, >= 0
};

struct EquilibriumCertificate {
  Vec p_star;
  Mat X_star;
  double f_star = 0.0;
  double clearing_residual = 0.0;  // max_j |sum_i X_ij - 1| (averaged demands for the descent oracle)
  double budget_residual = 0.0;    // max_i (x_i . p - b_i)_+
  bool certified = false;
  long iterations = 0;
};

// Budget-constrained utility-maximizing bundle at the given prices. All three
// classes have closed forms; ties in the linear bang-per-buck rule break to the
// lowest index. Throws DomainError when demand is unbounded (a valued good has
// zero price).
Vec demand(const UtilitySpec& spec, double budget, const Vec& prices);

// sum_j p_j + sum_i b_i log(u_i(x_i) + delta). Throws DomainError naming the
// buyer when a log argument is nonpositive.
double eg_objective(const FisherMarket& market, const Vec& p, const Mat& X, double delta);

// The market's min-max program as a GameDefinition: outer variable p in R+^m,
// inner variable X flattened row-major in R+^{n m}, constraints b_i - x_i.p >= 0.
GameDefinition make_eg_game(const FisherMarket& market, double delta);

// V(p) = sum_j p_j + sum_i b_i log(u_i(x_i*(p)) + delta) with closed-form
// demands supplying the inner max; +infinity when demand is unbounded at p.
double eg_value_of_prices(const FisherMarket& market, const Vec& p, double delta);

// V(p) - f_star, clipped below at -tol.
double exploitability(const FisherMarket& market, const Vec& p, double f_star, double delta,
                      double tol = kFeasibilityTol);

struct MbrdConfig {
  int horizon = 500;
  StepSchedule eta_price = StepSchedule::constant(1.0);
  StepSchedule eta_alloc = StepSchedule::constant(3.0);
  double delta = 1e-3;
  IntersectionMode projection = IntersectionMode::Dykstra;
  bool lagged_constraint = false;  // project onto the budget set at the previous prices
  std::uint64_t seed = 0;
  int record_every = 1;
  std::optional<Vec> init_prices;      // default: ones(m)
  std::optional<Mat> init_allocation;  // default: closed-form demands at the initial prices
  // Trust region on the ascent direction: ||direction|| is clipped at
  // direction_clip * ||prices|| before the step scaling. At a buyer's demand
  // point the Cobb-Douglas direction equals the price vector exactly, so any
  // factor > 1 leaves interior dynamics untouched; the clip only tames the
  // boundary blow-up of the floored 1/x gradient. 0 disables.
  double direction_clip = 1.1;
  double projection_tol = kProjectionTol;
  int projection_max_iter = kProjectionMaxIter;
};

struct MbrdPoint {
  int t = 0;
  Vec prices;
  Mat allocation;
  double objective = 0.0;
  Vec price_avg;
  Mat alloc_avg;
  double excess_norm = 0.0;  // ||sum_i x_i - 1||_2
};

struct MbrdResult {
  int horizon = 0;
  std::vector<MbrdPoint> points;     // thinned by record_every
  std::vector<Vec> price_avg_series; // pbar^(t) for t = 1..T
  MarketState selected;
  int selected_t = 0;
  MarketState final_state;
  Vec final_price_avg;
  Mat final_alloc_avg;

  // Columns t, x_* (prices), y_* (allocation), f, xbar_*, ybar_* plus
  // excess_demand_norm and exploitability of the running price average.
  void write_csv(const FisherMarket& market, double f_star, double delta, std::ostream& os) const;
};

// Myopic best-response dynamics: the auctioneer descends the Lagrangian price
// gradient 1_m - sum_i x_i, each buyer ascends b_i grad u_i / (u_i + delta)
// projected onto their budget set. This is GDALO specialized to the market
// program with lambda* = 1.
MbrdResult run_mbrd(const FisherMarket& market, const MbrdConfig& config);

enum class EquilibriumMethod { AnalyticCobbDouglas, ReferenceDescent };

struct ReferenceDescentOptions {
  long iterations = 200000;
  double step_scale = 0.0;  // eta_t = step_scale / sqrt(t); 0 picks a per-class default
  std::uint64_t seed = 1;
  double delta = 0.0;
  int check_every = 500;  // candidate-evaluation cadence
};

// AnalyticCobbDouglas: p*_j = sum_i b_i alpha_ij with the exact demand matrix
// (all-Cobb-Douglas markets only). ReferenceDescent: projected subgradient
// descent on V(p) with decaying steps; returns the best V-value candidate seen
// and clearing residuals from tail-averaged demands. A certificate that misses
// tol is still returned, flagged non-certified.
EquilibriumCertificate equilibrium_oracle(const FisherMarket& market, EquilibriumMethod method,
                                          double tol,
                                          const ReferenceDescentOptions& opts = {});

FisherMarket generate_market(std::uint64_t seed, int n, int m,
                             std::pair<double, double> budget_range,
                             std::pair<double, double> valuation_range, UtilityClass cls);

}  // namespace stackgda::fisher
