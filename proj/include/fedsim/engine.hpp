#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedsim/objective.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Per-client work runs serially or under OpenMP; both paths produce bitwise
// identical states (randomness is drawn before any parallel region and the
// aggregation is a fixed-order pairwise reduction).
enum class ExecMode { serial, parallel };

enum class LocalStepsMode { geometric, fixed };

struct AlgoParams {
  double gamma = 0.0;  // local stepsize, 0 < gamma < 2/L
  double eta = 0.0;    // control stepsize, p*chi unless overridden
  double chi = 0.0;    // 0 < chi <= n(s-1)/(s(n-1))
  double p = 1.0;      // communication probability, in (0,1]
  int s = 2;           // participating clients per round, in {2,...,n}
  long rounds = 0;     // round budget
  std::uint64_t seed = 0;
  LocalStepsMode local_steps_mode = LocalStepsMode::geometric;
  int fixed_steps = 1;  // K, when mode is fixed

  bool operator==(const AlgoParams&) const = default;
};

// Checks the linear-rate preconditions (gamma, chi, p, s ranges). eta is not
// checked: the GD reduction runs with eta = 0 deliberately. Throws
// std::invalid_argument naming the violated condition.
void validate_params(const AlgoParams& a, const Problem& p);

// gamma = 2/(L+mu), chi = chi_max, p as given (or choose_p when p <= 0),
// eta = p * chi.
AlgoParams recommended_params(const Problem& p, int s, double p_comm = 0.0);

struct FederatedState {
  Vec xbar;                // server model estimate
  std::vector<Vec> x;      // per-client iterates
  std::vector<Vec> h;      // per-client control variates (scaffold: c_i)
  Vec scaffold_server_c;   // server control, scaffold rounds only

  long round = 0;
  long total_local_steps = 0;
  long comm_rounds = 0;

  // Cumulative per-client counters; idle clients must not move them.
  std::vector<long> grad_evals;
  std::vector<long> uplink;
  std::vector<long> downlink;

  std::vector<Vec> work;  // per-client gradient scratch, reused across rounds

  // max|sum_i h_i| relative to the largest control magnitude; 0 when all
  // controls vanish.
  double control_sum_residual() const;
};

FederatedState make_state(const Problem& p, Vec x0);

// Receives each actually-computed local iterate (client, x) once, before the
// local step consuming it. Under the parallel mode it is invoked concurrently
// for distinct clients, never for the same one.
using LocalIterateObserver = std::function<void(int, const Vec&)>;

// One round: participants start from xbar, run plan.local_steps local steps
// with drift correction, the server averages their results, and participants
// fold the disagreement into their control variates. Idle clients do nothing.
void tamuna_round(FederatedState& st, const Problem& p, const AlgoParams& a,
                  const ParticipationPlan& plan, ExecMode mode = ExecMode::parallel,
                  const LocalIterateObserver* on_local_iterate = nullptr);

// One iteration of the flat variant: every client takes one corrected local
// step; on theta = 1 the subset omega is averaged, participants update their
// controls, and every client's iterate is overwritten by the average. omega
// must be present exactly when theta = 1.
void single_loop_step(FederatedState& st, const Problem& p, const AlgoParams& a, bool theta,
                      const std::vector<int>* omega, ExecMode mode = ExecMode::parallel);

// Synchronous full-participation gradient step, one communication round.
void gd_step(FederatedState& st, const Problem& p, double gamma,
             ExecMode mode = ExecMode::parallel);

// Scaffold baseline round (sampled controls): participants run local_steps
// steps x -= lr*(grad - c_i + c), the server averages the resulting iterates,
// and controls update as c_i += -c + (xbar_old - x_i)/(K*lr).
void scaffold_round(FederatedState& st, const Problem& p, double lr, int local_steps,
                    const std::vector<int>& omega, ExecMode mode = ExecMode::parallel);

}  // namespace fedsim
