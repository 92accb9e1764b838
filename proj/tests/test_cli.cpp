#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/config.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/runner.hpp"

using namespace fedsim;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config round-trips through serialize/parse") {
  RunConfig c;
  c.algorithm = Algorithm::scaffold;
  c.dataset = DatasetKind::synthetic_logistic;
  c.dataset_path = "some/file.txt";
  c.n = 9;
  c.d = 17;
  c.kappa = 321.5;
  c.M = 333;
  c.s = 4;
  c.mu_rule = MuRule{MuRule::Kind::absolute, 0.75};
  c.gamma_explicit = true;
  c.gamma_value = 0.125;
  c.p_explicit = true;
  c.p_value = 0.3;
  c.chi_explicit = true;
  c.chi_value = 0.6;
  c.eta_explicit = true;
  c.eta_value = 0.05;
  c.local_steps = LocalStepsMode::fixed;
  c.fixed_steps = 12;
  c.rounds = 777;
  c.target = 2.5e-9;
  c.seed = 987654321;
  c.output = "/tmp/out.csv";
  CHECK(parse_config(serialize_config(c)) == c);
}

TEST_CASE("random configs survive the round trip") {
  SeededGenerator g(404);
  const Algorithm algos[] = {Algorithm::tamuna, Algorithm::single_loop, Algorithm::gd,
                             Algorithm::scaffold};
  const DatasetKind kinds[] = {DatasetKind::libsvm, DatasetKind::synthetic_quadratic,
                               DatasetKind::synthetic_logistic};
  for (int rep = 0; rep < 50; ++rep) {
    RunConfig c;
    c.algorithm = algos[g.next_below(4)];
    c.dataset = kinds[g.next_below(3)];
    c.dataset_path = "p" + std::to_string(g.next_below(1000));
    c.n = 2 + static_cast<int>(g.next_below(200));
    c.d = 1 + static_cast<int>(g.next_below(500));
    c.kappa = 1.0 + 1e4 * g.next_unit();
    c.M = static_cast<int>(g.next_below(5000));
    c.s = static_cast<int>(g.next_below(static_cast<std::uint64_t>(c.n)));
    c.mu_rule.kind = g.next_below(2) ? MuRule::Kind::absolute : MuRule::Kind::relative;
    c.mu_rule.value = g.next_unit();
    c.gamma_explicit = g.next_below(2);
    c.gamma_value = g.next_unit() * 1.9;
    c.p_explicit = g.next_below(2);
    c.p_value = g.next_unit();
    c.chi_explicit = g.next_below(2);
    c.chi_value = g.next_unit();
    c.eta_explicit = g.next_below(2);
    c.eta_value = g.next_unit();
    c.local_steps = g.next_below(2) ? LocalStepsMode::fixed : LocalStepsMode::geometric;
    c.fixed_steps = static_cast<int>(g.next_below(100));
    c.rounds = static_cast<long>(g.next_below(1000000));
    c.target = g.next_unit() * 1e-3;
    c.seed = g.next_u64();
    c.output = "out" + std::to_string(g.next_below(100)) + ".csv";
    CHECK(parse_config(serialize_config(c)) == c);
  }
}

TEST_CASE("config parser handles comments and rejects junk") {
  const RunConfig c = parse_config("# comment only\nalgorithm = gd  # trailing\n\nn = 12\n");
  CHECK(c.algorithm == Algorithm::gd);
  CHECK(c.n == 12);
  CHECK_THROWS_AS(parse_config("nonsense_key = 3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("rounds 12"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("algorithm = newton"), std::invalid_argument);
}

TEST_CASE("environment seed applies only when the config omits one") {
  setenv("FEDSIM_SEED", "424242", 1);
  const RunConfig without = parse_config("algorithm = gd\n");
  CHECK(without.seed == 424242);
  CHECK(without.seed_from_env);
  const RunConfig with = parse_config("seed = 7\n");
  CHECK(with.seed == 7);
  CHECK_FALSE(with.seed_from_env);
  unsetenv("FEDSIM_SEED");
}

TEST_CASE("gd on a kappa=1 quadratic reaches the target at round 1") {
  RunConfig c;
  c.algorithm = Algorithm::gd;
  c.dataset = DatasetKind::synthetic_quadratic;
  c.n = 4;
  c.d = 3;
  c.kappa = 1.0;  // gamma = 2/(L+mu) = 1/L, one exact step
  c.rounds = 10;
  c.target = 1e-12;
  const RunResult res = run(c);
  REQUIRE(res.exit_code == kExitOk);
  CHECK(res.reached_target);
  CHECK(res.rounds_to_target == 1);
}

TEST_CASE("trace schema is fixed and rows are finite") {
  RunConfig c;
  c.algorithm = Algorithm::tamuna;
  c.dataset = DatasetKind::synthetic_quadratic;
  c.n = 6;
  c.d = 4;
  c.kappa = 50.0;
  c.s = 3;
  c.rounds = 50;
  c.target = 0.0;  // run the full budget
  c.output = temp_file("fedsim_trace_schema.csv").string();
  const RunResult res = run(c);
  REQUIRE(res.exit_code == kExitOk);
  REQUIRE(res.trace.size() == 51);  // round 0 plus budget

  const std::string csv = slurp(c.output);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == kTraceHeader);
  std::string row;
  std::size_t rows = 0;
  while (std::getline(lines, row)) {
    ++rows;
    CHECK(row.find("nan") == std::string::npos);
    CHECK(row.find("inf") == std::string::npos);
  }
  CHECK(rows == res.trace.size());
  std::filesystem::remove(c.output);

  // Monotone round and step counters.
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].round > res.trace[i - 1].round);
    CHECK(res.trace[i].total_local_steps >= res.trace[i - 1].total_local_steps);
  }
}

TEST_CASE("identical config and seed give byte-identical traces") {
  RunConfig c;
  c.algorithm = Algorithm::tamuna;
  c.dataset = DatasetKind::synthetic_logistic;
  c.n = 6;
  c.d = 10;
  c.M = 90;
  c.s = 3;
  c.rounds = 120;
  c.target = 0.0;
  c.seed = 2718;

  c.output = temp_file("fedsim_det_a.csv").string();
  REQUIRE(run(c).exit_code == kExitOk);
  const std::string first = slurp(c.output);
  std::filesystem::remove(c.output);

  c.output = temp_file("fedsim_det_b.csv").string();
  REQUIRE(run(c).exit_code == kExitOk);
  const std::string second = slurp(c.output);
  std::filesystem::remove(c.output);

  CHECK(first == second);
  CHECK(!first.empty());
}

TEST_CASE("tamuna at s=n writes the same trace as the single loop") {
  RunConfig c;
  c.dataset = DatasetKind::synthetic_logistic;
  c.n = 8;
  c.d = 12;
  c.M = 80;
  c.s = 8;
  c.rounds = 150;
  c.target = 0.0;
  c.seed = 5;

  c.algorithm = Algorithm::tamuna;
  c.output = temp_file("fedsim_eq_tam.csv").string();
  REQUIRE(run(c).exit_code == kExitOk);
  const std::string tam = slurp(c.output);
  std::filesystem::remove(c.output);

  c.algorithm = Algorithm::single_loop;
  c.output = temp_file("fedsim_eq_sl.csv").string();
  REQUIRE(run(c).exit_code == kExitOk);
  const std::string sl = slurp(c.output);
  std::filesystem::remove(c.output);

  CHECK(tam == sl);
}

TEST_CASE("matched scaffold protocol uses floor(1/p) steps at 1/(81*L*K)") {
  const double p = std::sqrt(107.0 / 500000.0);  // the s=50, kappa=1e4 cohort
  const double L = 2.5;
  const ScaffoldProtocol sp = matched_scaffold_protocol(L, p);
  CHECK(sp.local_steps == 68);
  CHECK(sp.stepsize == doctest::Approx(1.0 / (81.0 * L * 68.0)).epsilon(1e-15));
  CHECK(matched_scaffold_protocol(1.0, 1.0).local_steps == 1);
  CHECK_THROWS_AS(matched_scaffold_protocol(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("unreadable dataset maps to exit code 2") {
  RunConfig c;
  c.algorithm = Algorithm::gd;
  c.dataset = DatasetKind::libsvm;
  c.dataset_path = "/nonexistent/file.libsvm";
  CHECK(run(c).exit_code == kExitUnreadableDataset);
}

TEST_CASE("invalid config maps to exit code 3") {
  RunConfig c;
  c.algorithm = Algorithm::tamuna;
  c.dataset = DatasetKind::synthetic_quadratic;
  c.n = 4;
  c.s = 9;  // s > n
  CHECK(run(c).exit_code == kExitInvalidConfig);

  RunConfig bad_gamma = c;
  bad_gamma.s = 2;
  bad_gamma.gamma_explicit = true;
  bad_gamma.gamma_value = 1e9;
  CHECK(run(bad_gamma).exit_code == kExitInvalidConfig);

  // A merely convex problem needs explicit gamma and p.
  RunConfig convex;
  convex.algorithm = Algorithm::single_loop;
  convex.dataset = DatasetKind::synthetic_logistic;
  convex.n = 4;
  convex.d = 5;
  convex.M = 40;
  convex.mu_rule = MuRule{MuRule::Kind::absolute, 0.0};
  const RunResult need_rules = run(convex);
  CHECK(need_rules.exit_code == kExitInvalidConfig);

  convex.gamma_explicit = true;
  convex.p_explicit = true;
  convex.p_value = 0.5;
  convex.rounds = 20;
  convex.target = 0.0;
  RunConfig ok = convex;
  // gamma still zero: rejected; then a valid explicit choice runs.
  CHECK(run(ok).exit_code == kExitInvalidConfig);
  ok.gamma_value = 0.1;  // any value below 2/L for this small problem
  const RunResult fine = run(ok);
  CHECK(fine.exit_code == kExitOk);
}

TEST_CASE("a diverging run maps to exit code 4") {
  RunConfig c;
  c.algorithm = Algorithm::scaffold;  // local stepsize is not range-checked by theory
  c.dataset = DatasetKind::synthetic_quadratic;
  c.n = 4;
  c.d = 3;
  c.kappa = 50.0;
  c.s = 4;
  c.local_steps = LocalStepsMode::fixed;
  c.fixed_steps = 5;
  c.gamma_explicit = true;
  c.gamma_value = 3.0;  // far beyond 2/L for this problem
  c.rounds = 2000;
  const RunResult res = run(c);
  CHECK(res.exit_code == kExitDiverged);
}

TEST_SUITE_END();
