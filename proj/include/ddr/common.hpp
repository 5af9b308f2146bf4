// Shared small utilities: combinatorics, multi-indices, RNG, parallel loops.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ddr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::int64_t binomial(int n, int k)
{
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; i++) {
    r = r * (n - k + i) / i;
  }
  return r;
}

/// Multi-indices over dim variables with total degree <= deg, graded lexicographic order.
/// Row i of the returned matrix is the exponent vector of the i-th monomial.
inline std::vector<std::vector<int>> multi_indices(int dim, int deg)
{
  std::vector<std::vector<int>> out;
  if (deg < 0) return out;
  if (dim == 0) {
    out.push_back({});
    return out;
  }
  // graded: total degree 0,1,...,deg; within a degree, lexicographic descending in first variable
  for (int t = 0; t <= deg; t++) {
    std::vector<int> cur(dim, 0);
    std::function<void(int, int)> rec2 = [&](int pos, int rem) {
      if (pos == dim - 1) {
        cur[pos] = rem;
        out.push_back(cur);
        return;
      }
      for (int e = rem; e >= 0; e--) {
        cur[pos] = e;
        rec2(pos + 1, rem - e);
      }
    };
    rec2(0, t);
  }
  return out;
}

inline int total_degree(const std::vector<int> & alpha)
{
  int t = 0;
  for (int a : alpha) t += a;
  return t;
}

/// Number of scalar monomials of total degree <= deg in dim variables
inline int poly_dim(int dim, int deg)
{
  if (deg < 0) return 0;
  return static_cast<int>(binomial(deg + dim, dim));
}

/// Deterministic RNG used by all randomized tests and generators
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0) : m_gen(seed) {}

  double uniform(double a = -1., double b = 1.)
  {
    return std::uniform_real_distribution<double>(a, b)(m_gen);
  }

  VectorXd vector(int n, double a = -1., double b = 1.)
  {
    VectorXd v(n);
    for (int i = 0; i < n; i++) v[i] = uniform(a, b);
    return v;
  }

  std::uint64_t integer(std::uint64_t lo, std::uint64_t hi)
  {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(m_gen);
  }

private:
  std::mt19937_64 m_gen;
};

/// Run fn(i) for i in [0,n), split over nb_threads (results must be stored per-i by the caller)
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)> & fn, unsigned nb_threads = 0)
{
  if (nb_threads == 0) nb_threads = std::max(1u, std::thread::hardware_concurrency());
  if (nb_threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; i++) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + nb_threads - 1) / nb_threads;
  for (unsigned t = 0; t < nb_threads; t++) {
    std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi]() {
      for (std::size_t i = lo; i < hi; i++) fn(i);
    });
  }
  for (auto & th : pool) th.join();
}

} // namespace ddr
