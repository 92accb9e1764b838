#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedsim/analysis.hpp"
#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"

namespace fedsim {

struct StepTrace {
  long round = 0;
  long total_local_steps = 0;
  long comm_rounds = 0;
  double sq_dist = 0.0;
  double sq_dist_rel = 0.0;
  double lyapunov = 0.0;
  double grad_norm_sq = 0.0;
  double wall_ms = 0.0;  // diagnostic only; not part of the CSV schema
};

inline constexpr const char* kTraceHeader =
    "round,total_local_steps,comm_rounds,sq_dist,sq_dist_rel,lyapunov,grad_norm_sq";

enum ExitCode : int {
  kExitOk = 0,
  kExitUnreadableDataset = 2,
  kExitInvalidConfig = 3,
  kExitDiverged = 4,
};

struct RunResult {
  int exit_code = kExitOk;
  std::string error;
  bool reached_target = false;
  long rounds_to_target = -1;
  std::vector<StepTrace> trace;
};

std::string trace_to_csv(const std::vector<StepTrace>& trace);
void write_trace_csv(const std::string& path, const std::vector<StepTrace>& trace);

// Builds the problem from the config's dataset rules.
Problem build_problem(const RunConfig& c);

// Executes one configured run: trace row at round 0 and at every
// communication round, stop on target or budget, divergence guard at
// 1e12 x initial. The rate report is printed to `log` when given. Failures
// are mapped onto exit codes 2/3/4 instead of escaping.
RunResult run(const RunConfig& c, std::ostream* log = nullptr);

// The four-cohort comparison protocol: for each s in {107, 50, 10, 2} runs
// tamuna, scaffold with floor(1/p) fixed local steps at stepsize 1/(81*L*K),
// and gd; at s = n also the single-loop (scaffnew) trace. dataset_spec is a
// LIBSVM path or "synthetic" for the bundled generator. Writes one CSV per
// (algorithm, s) plus summary.csv into out_dir.
struct Figure1Entry {
  std::string algorithm;
  int s = 0;
  long rounds_to_target = -1;  // -1: target not reached within budget
  long comm_rounds = 0;
  double final_sq_dist_rel = 0.0;
};

// Scaffold settings matched to a skip probability p: floor(1/p) local steps
// (the expected count of the skipping scheme) at the theory stepsize
// 1/(81*L*K).
struct ScaffoldProtocol {
  int local_steps = 1;
  double stepsize = 0.0;
};
ScaffoldProtocol matched_scaffold_protocol(double L, double p);

std::vector<Figure1Entry> figure1_suite(const std::string& dataset_spec,
                                        const std::string& out_dir, std::uint64_t seed,
                                        std::ostream* log = nullptr);

}  // namespace fedsim
