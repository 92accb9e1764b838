// Compares the serial reference engine against the OpenMP path on one
// synthetic workload and verifies the two produce identical states.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedsim/analysis.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/engine.hpp"

using namespace fedsim;

namespace {

double time_rounds(const Problem& p, const AlgoParams& a, long rounds, ExecMode mode,
                   FederatedState& out) {
  DrawStreams streams = DrawStreams::from_seed(a.seed);
  FederatedState st = make_state(p, Vec(static_cast<std::size_t>(p.d), 0.0));
  const auto t0 = std::chrono::steady_clock::now();
  for (long r = 0; r < rounds; ++r) {
    const ParticipationPlan plan = next_plan_geometric(streams, p.n(), a.s, a.p);
    tamuna_round(st, p, a, plan, mode);
  }
  const auto t1 = std::chrono::steady_clock::now();
  out = std::move(st);
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

double max_state_diff(const FederatedState& a, const FederatedState& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.xbar.size(); ++j)
    m = std::max(m, std::abs(a.xbar[j] - b.xbar[j]));
  for (std::size_t i = 0; i < a.h.size(); ++i)
    for (std::size_t j = 0; j < a.h[i].size(); ++j)
      m = std::max(m, std::abs(a.h[i][j] - b.h[i][j]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  int n = 64, d = 256, rows_per_client = 400;
  long rounds = 200;
  if (argc > 1) n = std::atoi(argv[1]);
  if (argc > 2) d = std::atoi(argv[2]);
  if (argc > 3) rounds = std::atol(argv[3]);

  const SparseDataset ds = synthesize_logistic_data(n * rows_per_client, d, 99, 32);
  const Problem p = build_logistic_problem(ds, n, MuRule{MuRule::Kind::relative, 1e-4});

  AlgoParams a = recommended_params(p, n, 0.05);
  a.seed = 7;

#ifdef _OPENMP
  const int threads = omp_get_max_threads();
#else
  const int threads = 1;
#endif
  std::printf("workload: n=%d d=%d M=%d rounds=%ld expected local steps/round=%.0f threads=%d\n",
              n, d, ds.M(), rounds, 1.0 / a.p, threads);

  FederatedState serial_state, parallel_state;
  const double serial_ms = time_rounds(p, a, rounds, ExecMode::serial, serial_state);
  const double parallel_ms = time_rounds(p, a, rounds, ExecMode::parallel, parallel_state);
  const double diff = max_state_diff(serial_state, parallel_state);

  std::printf("serial   : %10.1f ms  (%.1f rounds/s)\n", serial_ms, 1000.0 * rounds / serial_ms);
  std::printf("openmp   : %10.1f ms  (%.1f rounds/s)\n", parallel_ms,
              1000.0 * rounds / parallel_ms);
  std::printf("speedup  : %.2fx\n", serial_ms / parallel_ms);
  std::printf("max |serial - openmp| over final state: %g\n", diff);
  return diff == 0.0 ? 0 : 1;
}
