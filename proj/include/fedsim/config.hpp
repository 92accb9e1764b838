#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fedsim/dataset.hpp"
#include "fedsim/engine.hpp"

namespace fedsim {

enum class Algorithm { tamuna, single_loop, gd, scaffold };
enum class DatasetKind { libsvm, synthetic_quadratic, synthetic_logistic };

// Flat key=value experiment configuration; every key can be overridden by a
// command-line flag of the same name prefixed with --.
struct RunConfig {
  Algorithm algorithm = Algorithm::tamuna;

  DatasetKind dataset = DatasetKind::synthetic_quadratic;
  std::string dataset_path;  // libsvm datasets
  int n = 4;                 // clients
  int d = 10;                // synthetic dimension
  double kappa = 100.0;      // synthetic_quadratic condition number
  int M = 0;                 // synthetic_logistic rows (0 => 20 per client)

  int s = 0;  // participating clients per round (0 => n)

  MuRule mu_rule;  // logistic regularization rule

  bool gamma_explicit = false;  // default: gamma = 2/(L+mu)
  double gamma_value = 0.0;
  bool p_explicit = false;  // default: p = min(sqrt(n/(s*kappa)), 1)
  double p_value = 0.0;
  bool chi_explicit = false;  // default: chi = n(s-1)/(s(n-1))
  double chi_value = 0.0;
  bool eta_explicit = false;  // default: eta = p * chi
  double eta_value = 0.0;

  LocalStepsMode local_steps = LocalStepsMode::geometric;
  int fixed_steps = 0;  // fixed mode; 0 => floor(1/p)

  long rounds = 100000;   // budget
  double target = 1e-6;   // relative squared-distance threshold (0 disables)
  std::uint64_t seed = 1;
  std::string output;  // trace CSV path; empty writes no file

  bool seed_from_env = false;  // set when the seed fell back to FEDSIM_SEED

  bool operator==(const RunConfig& o) const;
};

// key=value lines; '#' starts a comment; unknown keys are errors.
RunConfig parse_config(std::string_view text);
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& c);

// Shared by the parser and by CLI overrides. Throws on unknown keys or
// unparsable values.
void set_config_key(RunConfig& c, std::string_view key, std::string_view value);

std::string algorithm_name(Algorithm a);
std::string dataset_kind_name(DatasetKind k);

}  // namespace fedsim
