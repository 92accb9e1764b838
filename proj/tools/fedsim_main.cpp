#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/analysis.hpp"
#include "fedsim/config.hpp"
#include "fedsim/runner.hpp"

namespace {

// Every config key doubles as a --flag override, applied after the file.
const std::vector<std::string> kConfigKeys = {
    "algorithm",  "dataset",    "dataset_path", "n",          "d",
    "kappa",      "M",          "s",            "mu_rule",    "mu_value",
    "gamma_rule", "gamma_value", "p_rule",      "p_value",    "chi_rule",
    "chi_value",  "eta_rule",   "eta_value",    "local_steps", "fixed_steps",
    "rounds",     "target",     "seed",         "output"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated optimization simulator"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "execute one configured experiment");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "key=value config file")->required();
  std::map<std::string, std::string> overrides;
  for (const std::string& key : kConfigKeys)
    run_cmd->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
        "override config key '" + key + "'");

  // figure1
  auto* fig_cmd = app.add_subcommand("figure1", "comparison suite over s in {107,50,10,2}");
  std::string dataset_spec;
  std::string out_dir = "figure1_out";
  std::uint64_t fig_seed = 1;
  bool fig_seed_given = false;
  fig_cmd->add_option("--dataset", dataset_spec,
                      "LIBSVM file path, or 'synthetic' for the bundled generator")
      ->required();
  fig_cmd->add_option("--out", out_dir, "output directory")->required();
  fig_cmd->add_option("--seed", fig_seed, "master seed")->each([&](const std::string&) {
    fig_seed_given = true;
  });

  // rates
  auto* rates_cmd = app.add_subcommand("rates", "print the rate report for a configuration");
  int rn = 0, rs = 0;
  double rkappa = 0.0, rp = 0.0, rchi = 0.0;
  rates_cmd->add_option("--n", rn, "number of clients")->required();
  rates_cmd->add_option("--s", rs, "participating clients")->required();
  rates_cmd->add_option("--kappa", rkappa, "condition number")->required();
  rates_cmd->add_option("--p", rp, "communication probability (default: auto)");
  rates_cmd->add_option("--chi", rchi, "control stepsize (default: max)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      fedsim::RunConfig cfg = fedsim::load_config_file(config_path);
      for (const auto& [key, value] : overrides) fedsim::set_config_key(cfg, key, value);
      const fedsim::RunResult res = fedsim::run(cfg, &std::cout);
      if (res.exit_code != fedsim::kExitOk) {
        std::cerr << "error: " << res.error << '\n';
        return res.exit_code;
      }
      std::cout << "rounds=" << (res.trace.empty() ? 0 : res.trace.back().comm_rounds)
                << " reached_target=" << (res.reached_target ? 1 : 0)
                << " rounds_to_target=" << res.rounds_to_target << '\n';
      return 0;
    }
    if (*fig_cmd) {
      if (!fig_seed_given) {
        if (const char* env = std::getenv("FEDSIM_SEED")) fig_seed = std::strtoull(env, nullptr, 10);
      }
      fedsim::figure1_suite(dataset_spec, out_dir, fig_seed, &std::cout);
      return 0;
    }
    if (*rates_cmd) {
      std::cout << fedsim::format_rate_report(fedsim::make_rate_report(rn, rs, rkappa, rp, rchi))
                << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fedsim::kExitInvalidConfig;
  }
  return 0;
}
