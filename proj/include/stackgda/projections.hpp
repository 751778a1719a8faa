#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "stackgda/common.hpp"

namespace stackgda {

struct ProjectionSpec;

struct Box {
  Vec lo, hi;
};

struct NonnegativeOrthant {
  int dim = 0;
};

// { x : a.dot(x) <= b }
struct Halfspace {
  Vec a;
  double b = 0.0;
};

struct Intersection {
  std::vector<ProjectionSpec> members;
};

struct FullSpace {
  int dim = 0;
};

struct ProjectionSpec {
  std::variant<Box, NonnegativeOrthant, Halfspace, Intersection, FullSpace> set;

  static ProjectionSpec box(Vec lo, Vec hi);
  static ProjectionSpec interval(double lo, double hi);  // 1-D box
  static ProjectionSpec orthant(int dim);
  static ProjectionSpec halfspace(Vec a, double b);
  static ProjectionSpec intersect(std::vector<ProjectionSpec> members);
  static ProjectionSpec full_space(int dim);

  int dim() const;
  // Largest constraint violation at v; <= 0 means v is in the set.
  double max_violation(const Vec& v) const;
  bool contains(const Vec& v, double tol) const { return max_violation(v) <= tol; }

  // Axis-aligned bounds if the set is bounded through Box members; nullopt otherwise.
  std::optional<std::pair<Vec, Vec>> bounding_box() const;
};

inline constexpr double kProjectionTol = 1e-10;
inline constexpr int kProjectionMaxIter = 10000;

enum class IntersectionMode { Dykstra, Pocs };

// Euclidean projection of v onto the set. Box / orthant / halfspace / full-space
// are closed form; intersections run Dykstra's algorithm (mode Dykstra, the
// default) or plain alternating projections (mode Pocs, which only guarantees a
// feasible point). Throws ConvergenceError with the last iterate and residual if
// max_iter cycles do not reach tol.
Vec project(const ProjectionSpec& spec, const Vec& v, double tol = kProjectionTol,
            int max_iter = kProjectionMaxIter,
            IntersectionMode mode = IntersectionMode::Dykstra);

// Projection onto one buyer's budget set { x >= 0, x.dot(prices) <= budget }.
// prices may contain zeros (those goods are unconstrained by the budget); an
// all-zero price vector reduces to the orthant projection.
Vec project_budget_row(const Vec& x, const Vec& prices, double budget,
                       double tol = kProjectionTol, int max_iter = kProjectionMaxIter,
                       IntersectionMode mode = IntersectionMode::Dykstra);

ProjectionSpec budget_row_spec(const Vec& prices, double budget);

}  // namespace stackgda
