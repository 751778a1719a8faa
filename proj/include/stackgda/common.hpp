#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace stackgda {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class FeasibilityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Vec last_iterate, double residual)
      : Error(what), last_iterate(std::move(last_iterate)), residual(residual) {}
  Vec last_iterate;
  double residual = 0.0;
};

inline void require_dim(const Vec& v, int n, const char* field) {
  if (v.size() != n) {
    throw DimensionError(std::string(field) + ": expected length " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

/// Deterministic RNG. mt19937_64's output sequence is fixed by the standard and
/// the double conversion avoids distribution objects, so streams are identical
/// across platforms and rebuilds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased draw from {0, 1, ..., n-1}.
  std::uint64_t uniform_index(std::uint64_t n) {
    using u128 = unsigned __int128;
    std::uint64_t x = next_u64();
    std::uint64_t r = static_cast<std::uint64_t>((u128(x) * u128(n)) >> 64);
    std::uint64_t threshold = (-n) % n;
    while (static_cast<std::uint64_t>(u128(x) * u128(n)) < threshold) {
      x = next_u64();
      r = static_cast<std::uint64_t>((u128(x) * u128(n)) >> 64);
    }
    return r;
  }

  Vec uniform_vec(int n, double lo, double hi) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

// Splittable per-task seeds: splitmix64 over (master, index) so that serial and
// parallel sweeps see the same per-task streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs body(i) for i in [0, n). jobs == 1 is the serial reference path; jobs == 0
// uses all available threads. Tasks must be independent; results must be written
// to per-index slots so the two paths produce identical output.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace stackgda
