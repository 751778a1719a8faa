#include "stackgda/projections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <atomic>
#include <exception>

namespace stackgda {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#ifdef _OPENMP
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      bool expected = false;
      if (failed.compare_exchange_strong(expected, true)) {
        first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
#else
  (void)jobs;
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

ProjectionSpec ProjectionSpec::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw DimensionError("Box: lo and hi lengths differ");
  for (int i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) throw DomainError("Box: lo > hi at coordinate " + std::to_string(i));
  }
  return ProjectionSpec{Box{std::move(lo), std::move(hi)}};
}

ProjectionSpec ProjectionSpec::interval(double lo, double hi) {
  Vec l(1), h(1);
  l[0] = lo;
  h[0] = hi;
  return box(std::move(l), std::move(h));
}

ProjectionSpec ProjectionSpec::orthant(int dim) { return ProjectionSpec{NonnegativeOrthant{dim}}; }

ProjectionSpec ProjectionSpec::halfspace(Vec a, double b) {
  if (a.norm() == 0.0) throw DomainError("Halfspace: zero normal vector");
  return ProjectionSpec{Halfspace{std::move(a), b}};
}

ProjectionSpec ProjectionSpec::intersect(std::vector<ProjectionSpec> members) {
  if (members.empty()) throw DomainError("Intersection: no member sets");
  int d = members.front().dim();
  for (const auto& m : members) {
    if (m.dim() != d) throw DimensionError("Intersection: member dimensions differ");
  }
  return ProjectionSpec{Intersection{std::move(members)}};
}

ProjectionSpec ProjectionSpec::full_space(int dim) { return ProjectionSpec{FullSpace{dim}}; }

int ProjectionSpec::dim() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) return static_cast<int>(s.lo.size());
        if constexpr (std::is_same_v<T, NonnegativeOrthant>) return s.dim;
        if constexpr (std::is_same_v<T, Halfspace>) return static_cast<int>(s.a.size());
        if constexpr (std::is_same_v<T, Intersection>) return s.members.front().dim();
        if constexpr (std::is_same_v<T, FullSpace>) return s.dim;
      },
      set);
}

double ProjectionSpec::max_violation(const Vec& v) const {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          double worst = -std::numeric_limits<double>::infinity();
          for (int i = 0; i < v.size(); ++i) {
            worst = std::max(worst, s.lo[i] - v[i]);
            worst = std::max(worst, v[i] - s.hi[i]);
          }
          return worst;
        }
        if constexpr (std::is_same_v<T, NonnegativeOrthant>) {
          return v.size() == 0 ? 0.0 : -v.minCoeff();
        }
        if constexpr (std::is_same_v<T, Halfspace>) {
          return s.a.dot(v) - s.b;
        }
        if constexpr (std::is_same_v<T, Intersection>) {
          double worst = -std::numeric_limits<double>::infinity();
          for (const auto& m : s.members) worst = std::max(worst, m.max_violation(v));
          return worst;
        }
        if constexpr (std::is_same_v<T, FullSpace>) {
          return -std::numeric_limits<double>::infinity();
        }
      },
      set);
}

std::optional<std::pair<Vec, Vec>> ProjectionSpec::bounding_box() const {
  if (const auto* b = std::get_if<Box>(&set)) return std::make_pair(b->lo, b->hi);
  if (const auto* inter = std::get_if<Intersection>(&set)) {
    std::optional<std::pair<Vec, Vec>> out;
    for (const auto& m : inter->members) {
      auto mb = m.bounding_box();
      if (!mb) continue;
      if (!out) {
        out = mb;
      } else {
        out->first = out->first.cwiseMax(mb->first);
        out->second = out->second.cwiseMin(mb->second);
      }
    }
    return out;
  }
  return std::nullopt;
}

namespace {

Vec project_simple(const ProjectionSpec& spec, const Vec& v) {
  return std::visit(
      [&](const auto& s) -> Vec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          return v.cwiseMax(s.lo).cwiseMin(s.hi);
        }
        if constexpr (std::is_same_v<T, NonnegativeOrthant>) {
          return v.cwiseMax(0.0);
        }
        if constexpr (std::is_same_v<T, Halfspace>) {
          double slack = s.a.dot(v) - s.b;
          if (slack <= 0.0) return v;
          return v - (slack / s.a.squaredNorm()) * s.a;
        }
        if constexpr (std::is_same_v<T, FullSpace>) {
          return v;
        }
        throw Error("project_simple: intersection is not a simple set");
      },
      spec.set);
}

// Final feasibility sweeps: push the converged iterate onto every member until
// the violation is at round-off scale, so that re-projecting it is a no-op.
// The total movement is bounded by the convergence residual.
Vec polish(const Intersection& inter, Vec x, double tol, int max_iter, IntersectionMode mode) {
  const double target = 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>());
  for (int pass = 0; pass < 256; ++pass) {
    double residual = 0.0;
    for (const auto& m : inter.members) residual = std::max(residual, m.max_violation(x));
    if (residual <= target) break;
    for (const auto& m : inter.members) x = project(m, x, tol, max_iter, mode);
  }
  return x;
}

// Dykstra's cyclic scheme with one correction vector per member set. The fixed
// point is the true Euclidean projection onto the intersection.
Vec project_dykstra(const Intersection& inter, const Vec& v, double tol, int max_iter) {
  const std::size_t k = inter.members.size();
  Vec x = v;
  std::vector<Vec> corrections(k, Vec::Zero(v.size()));
  for (int cycle = 0; cycle < max_iter; ++cycle) {
    double moved = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      Vec target = x + corrections[i];
      Vec y = project(inter.members[i], target, tol, max_iter, IntersectionMode::Dykstra);
      corrections[i] = target - y;
      moved = std::max(moved, (y - x).lpNorm<Eigen::Infinity>());
      x = std::move(y);
    }
    double residual = 0.0;
    for (const auto& m : inter.members) residual = std::max(residual, m.max_violation(x));
    if (moved < tol && residual <= tol) {
      return polish(inter, std::move(x), tol, max_iter, IntersectionMode::Dykstra);
    }
  }
  double residual = 0.0;
  for (const auto& m : inter.members) residual = std::max(residual, m.max_violation(x));
  throw ConvergenceError("Dykstra projection did not converge in " + std::to_string(max_iter) +
                             " cycles (residual " + std::to_string(residual) + ")",
                         x, residual);
}

// Plain alternating projections (POCS): converges to a feasible point of the
// intersection, not necessarily the closest one.
Vec project_pocs(const Intersection& inter, const Vec& v, double tol, int max_iter) {
  Vec x = v;
  for (int cycle = 0; cycle < max_iter; ++cycle) {
    double moved = 0.0;
    for (const auto& m : inter.members) {
      Vec y = project(m, x, tol, max_iter, IntersectionMode::Pocs);
      moved = std::max(moved, (y - x).lpNorm<Eigen::Infinity>());
      x = std::move(y);
    }
    double residual = 0.0;
    for (const auto& m : inter.members) residual = std::max(residual, m.max_violation(x));
    if (moved < tol && residual <= tol) {
      return polish(inter, std::move(x), tol, max_iter, IntersectionMode::Pocs);
    }
  }
  double residual = 0.0;
  for (const auto& m : inter.members) residual = std::max(residual, m.max_violation(x));
  throw ConvergenceError("alternating projections did not converge in " +
                             std::to_string(max_iter) + " cycles (residual " +
                             std::to_string(residual) + ")",
                         x, residual);
}

}  // namespace

Vec project(const ProjectionSpec& spec, const Vec& v, double tol, int max_iter,
            IntersectionMode mode) {
  if (v.size() != spec.dim()) {
    throw DimensionError("project: vector length " + std::to_string(v.size()) +
                         " does not match set dimension " + std::to_string(spec.dim()));
  }
  if (const auto* inter = std::get_if<Intersection>(&spec.set)) {
    if (spec.max_violation(v) <= 0.0) return v;
    return mode == IntersectionMode::Dykstra ? project_dykstra(*inter, v, tol, max_iter)
                                             : project_pocs(*inter, v, tol, max_iter);
  }
  return project_simple(spec, v);
}

ProjectionSpec budget_row_spec(const Vec& prices, double budget) {
  const int m = static_cast<int>(prices.size());
  if (prices.norm() == 0.0) return ProjectionSpec::orthant(m);
  return ProjectionSpec::intersect(
      {ProjectionSpec::orthant(m), ProjectionSpec::halfspace(prices, budget)});
}

namespace {

// Exact projection onto { x >= 0, p.x <= b }: x*(mu) = max(0, v - mu p) with
// the smallest mu >= 0 satisfying p.x*(mu) <= b, found by walking the sorted
// breakpoints v_j / p_j where coordinates reach zero. Active sets come from the
// sort order, not from re-evaluating v - mu p (which is FP-ambiguous at the
// breakpoints). Robust to arbitrarily large inputs, which Dykstra's correction
// arithmetic is not.
Vec project_budget_row_exact(const Vec& v, const Vec& p, double budget) {
  Vec x = v.cwiseMax(0.0);
  if (p.dot(x) <= budget) return x;

  const int m = static_cast<int>(v.size());
  struct Item {
    double bp, pv, pp;
  };
  std::vector<Item> items;
  items.reserve(m);
  for (int j = 0; j < m; ++j) {
    if (p[j] > 0.0 && v[j] > 0.0) items.push_back({v[j] / p[j], p[j] * v[j], p[j] * p[j]});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.bp < b.bp; });

  // on the segment (items[k-1].bp, items[k].bp) exactly items[k..] are active
  // and p.x(mu) = s1 - mu s2 is linear and decreasing
  std::vector<double> suffix_pv(items.size() + 1, 0.0), suffix_pp(items.size() + 1, 0.0);
  for (std::size_t k = items.size(); k-- > 0;) {
    suffix_pv[k] = suffix_pv[k + 1] + items[k].pv;
    suffix_pp[k] = suffix_pp[k + 1] + items[k].pp;
  }

  double lo = 0.0;
  double mu = 0.0;
  for (std::size_t k = 0; k <= items.size(); ++k) {
    if (suffix_pp[k] == 0.0) {
      mu = lo;  // everything clamped; spending is 0 <= budget
      break;
    }
    const double hi =
        k < items.size() ? items[k].bp : std::numeric_limits<double>::infinity();
    const double candidate = (suffix_pv[k] - budget) / suffix_pp[k];
    if (candidate <= hi) {
      mu = std::max(candidate, lo);
      break;
    }
    lo = hi;
    mu = hi;
  }
  for (int j = 0; j < m; ++j) x[j] = std::max(0.0, v[j] - mu * p[j]);

  // v - mu p cancels catastrophically for huge v, leaving an input-scale error
  // in a result-scale vector; corrections at result scale restore feasibility
  // and complementarity (mu > 0 here, so the budget line is active) to machine
  // precision.
  for (int pass = 0; pass < 3; ++pass) {
    const double overspend = p.dot(x) - budget;
    if (overspend == 0.0) break;
    double s2 = 0.0;
    for (int j = 0; j < m; ++j) {
      if (x[j] > 0.0) s2 += p[j] * p[j];
    }
    if (s2 == 0.0) break;
    const double step = overspend / s2;
    for (int j = 0; j < m; ++j) {
      if (x[j] > 0.0) x[j] = std::max(0.0, x[j] - step * p[j]);
    }
  }
  return x;
}

}  // namespace

Vec project_budget_row(const Vec& x, const Vec& prices, double budget, double tol, int max_iter,
                       IntersectionMode mode) {
  if (x.size() != prices.size()) {
    throw DimensionError("project_budget_row: bundle and price lengths differ");
  }
  if (budget <= 0.0) throw DomainError("project_budget_row: budget must be positive");
  if (prices.minCoeff() < 0.0) throw DomainError("project_budget_row: negative price");
  if (mode == IntersectionMode::Dykstra) {
    // the Euclidean projection, computed exactly via the KKT breakpoint search
    return project_budget_row_exact(x, prices, budget);
  }
  return project(budget_row_spec(prices, budget), x, tol, max_iter, mode);
}

}  // namespace stackgda
