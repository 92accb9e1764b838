#include "fedsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

SeededGenerator::SeededGenerator(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed + kGolden * (stream + 1))) {}

std::uint64_t SeededGenerator::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double SeededGenerator::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededGenerator::next_below(std::uint64_t bound) {
  // Multiply-shift mapping; bias is < 2^-53 for the bounds used here.
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

bool bernoulli(SeededGenerator& g, double p) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("bernoulli: p must be in (0,1], got " + std::to_string(p));
  return g.next_unit() < p;
}

std::vector<int> sample_subset(SeededGenerator& g, int n, int s) {
  if (s < 2 || s > n)
    throw std::invalid_argument("sample_subset: s must be in {2,...,n}, got s=" +
                                std::to_string(s) + " n=" + std::to_string(n));
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates: the first s entries are a uniform draw.
  for (int i = 0; i < s; ++i) {
    const int j = i + static_cast<int>(g.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(s));
  std::sort(pool.begin(), pool.end());
  return pool;
}

long sample_geometric(SeededGenerator& g, double p, long cap) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("sample_geometric: p must be in (0,1], got " +
                                std::to_string(p));
  if (p == 1.0) return 1;
  const double tail = 1.0 - g.next_unit();  // in (0, 1]
  const long draw = 1 + static_cast<long>(std::floor(std::log(tail) / std::log1p(-p)));
  if (draw > cap)
    throw std::runtime_error("sample_geometric: draw " + std::to_string(draw) +
                             " exceeds cap " + std::to_string(cap) +
                             "; p=" + std::to_string(p) + " looks implausible");
  return draw < 1 ? 1 : draw;
}

std::vector<Vec> d_estimator(const std::vector<Vec>& xhat, const std::vector<int>& omega,
                             double p, bool theta) {
  const int n = static_cast<int>(xhat.size());
  const int s = static_cast<int>(omega.size());
  if (n < 2) throw std::invalid_argument("d_estimator: need at least 2 clients");
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("d_estimator: p must be in (0,1]");
  const std::size_t d = xhat.front().size();
  for (const Vec& v : xhat)
    if (v.size() != d) throw std::invalid_argument("d_estimator: ragged xhat");

  std::vector<Vec> out(static_cast<std::size_t>(n), Vec(d, 0.0));
  if (!theta) return out;

  if (s < 2 || s > n)
    throw std::invalid_argument("d_estimator: |omega| must be in {2,...,n}");
  for (int i : omega)
    if (i < 0 || i >= n) throw std::invalid_argument("d_estimator: omega index out of range");

  const Vec mean = pairwise_mean(xhat, omega);
  const double a = static_cast<double>(n - 1) / (p * static_cast<double>(s - 1));
  for (int i : omega) {
    Vec& di = out[static_cast<std::size_t>(i)];
    const Vec& xi = xhat[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < d; ++j) di[j] = a * (xi[j] - mean[j]);
  }
  return out;
}

DrawStreams DrawStreams::from_seed(std::uint64_t seed) {
  return DrawStreams{SeededGenerator(seed, 0), SeededGenerator(seed, 1),
                     SeededGenerator(seed, 2)};
}

ParticipationPlan next_plan_geometric(DrawStreams& streams, int n, int s, double p, long cap) {
  ParticipationPlan plan;
  plan.omega = sample_subset(streams.subsets, n, s);
  plan.local_steps = sample_geometric(streams.geometric, p, cap);
  return plan;
}

ParticipationPlan next_plan_fixed(DrawStreams& streams, int n, int s, int local_steps) {
  if (local_steps < 1) throw std::invalid_argument("next_plan_fixed: local_steps must be >= 1");
  ParticipationPlan plan;
  plan.omega = sample_subset(streams.subsets, n, s);
  plan.local_steps = local_steps;
  return plan;
}

}  // namespace fedsim
