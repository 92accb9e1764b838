#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fedsim {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sqnorm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(sqnorm(a)); }

inline double sqdist(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] - b[i];
    acc += v * v;
  }
  return acc;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scal(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

inline void fill_zero(Vec& v) { v.assign(v.size(), 0.0); }

namespace detail {

inline void pairwise_sum_into(const std::vector<Vec>& items, std::span<const int> order,
                              std::size_t lo, std::size_t hi, Vec& out) {
  if (hi - lo == 1) {
    out = items[static_cast<std::size_t>(order[lo])];
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  Vec right;
  pairwise_sum_into(items, order, lo, mid, out);
  pairwise_sum_into(items, order, mid, hi, right);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += right[i];
}

}  // namespace detail

// Pairwise (balanced-tree) sum of items[order[0]], items[order[1]], ...
// The result depends only on the index order, never on thread count or
// accumulation batching, so parallel and serial callers agree bitwise.
inline Vec pairwise_sum(const std::vector<Vec>& items, std::span<const int> order) {
  assert(!order.empty());
  Vec out;
  detail::pairwise_sum_into(items, order, 0, order.size(), out);
  return out;
}

inline Vec pairwise_mean(const std::vector<Vec>& items, std::span<const int> order) {
  Vec out = pairwise_sum(items, order);
  scal(1.0 / static_cast<double>(order.size()), out);
  return out;
}

}  // namespace fedsim
