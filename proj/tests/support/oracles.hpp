// Test-only oracles, kept independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "fedsim/vec.hpp"

namespace oracles {

using fedsim::Vec;

// Central finite differences of a scalar function.
inline Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                            double step = 1e-6) {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (std::size_t j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + step;
    xm[j] = x[j] - step;
    g[j] = (f(xp) - f(xm)) / (2.0 * step);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return g;
}

// Largest eigenvalue of a symmetric matrix by the cyclic Jacobi method.
inline double jacobi_max_eigenvalue(std::vector<double> a, int n) {
  auto at = [&a, n](int i, int j) -> double& {
    return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(j)];
  };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-26) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  double best = at(0, 0);
  for (int i = 1; i < n; ++i) best = std::max(best, at(i, i));
  return best;
}

// Visits every size-s subset of {0,...,n-1} in lexicographic order.
inline void for_each_subset(int n, int s, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> comb(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) comb[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(comb);
    int i = s - 1;
    while (i >= 0 && comb[static_cast<std::size_t>(i)] == n - s + i) --i;
    if (i < 0) return;
    ++comb[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < s; ++j)
      comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
  }
}

inline long binomial(int n, int s) {
  long r = 1;
  for (int i = 0; i < s; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace oracles
