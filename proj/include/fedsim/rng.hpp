#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/vec.hpp"

namespace fedsim {

// Deterministic generator with pure 64-bit integer state (splitmix64 core).
// Identical seeds give identical draw sequences on every platform. A master
// seed plus a stream id select independent sub-streams; consuming from one
// stream never perturbs another.
class SeededGenerator {
 public:
  explicit SeededGenerator(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double next_unit();                             // uniform in [0, 1)
  std::uint64_t next_below(std::uint64_t bound);  // uniform in [0, bound)

 private:
  std::uint64_t state_;
};

// One draw with Prob(1) = p. Requires p in (0, 1].
bool bernoulli(SeededGenerator& g, double p);

// Uniform subset of {0, ..., n-1} of size s, returned ascending.
// Requires 2 <= s <= n.
std::vector<int> sample_subset(SeededGenerator& g, int n, int s);

// Geometric draw with support {1, 2, ...} and Prob(L = l) = (1-p)^(l-1) * p,
// mean 1/p, by inverse CDF on a single uniform variate. A draw above `cap`
// signals an implausible p and throws rather than letting a run hang.
long sample_geometric(SeededGenerator& g, double p, long cap = 1000000);

// Sparse participation estimator of the de-meaning operator: for clients in
// omega, d_i = a * (xhat_i - subset mean) with a = (n-1)/(p(s-1)); zero for
// the others and zero whenever theta = 0. Sums to zero on every draw.
std::vector<Vec> d_estimator(const std::vector<Vec>& xhat, const std::vector<int>& omega,
                             double p, bool theta);

struct ParticipationPlan {
  std::vector<int> omega;  // ascending client indices, |omega| = s
  long local_steps = 1;    // >= 1
};

// Sub-streams of one master seed, at fixed stream offsets.
struct DrawStreams {
  SeededGenerator coins;
  SeededGenerator subsets;
  SeededGenerator geometric;

  static DrawStreams from_seed(std::uint64_t seed);
};

ParticipationPlan next_plan_geometric(DrawStreams& streams, int n, int s, double p,
                                      long cap = 1000000);
ParticipationPlan next_plan_fixed(DrawStreams& streams, int n, int s, int local_steps);

}  // namespace fedsim
