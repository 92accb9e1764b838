#include "fedsim/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedsim {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument("config: bad value '" + std::string(value) + "' for key '" +
                              std::string(key) + "'");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

long to_long(std::string_view key, std::string_view v) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::tamuna: return "tamuna";
    case Algorithm::single_loop: return "single_loop";
    case Algorithm::gd: return "gd";
    case Algorithm::scaffold: return "scaffold";
  }
  return "?";
}

std::string dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::libsvm: return "libsvm";
    case DatasetKind::synthetic_quadratic: return "synthetic_quadratic";
    case DatasetKind::synthetic_logistic: return "synthetic_logistic";
  }
  return "?";
}

bool RunConfig::operator==(const RunConfig& o) const {
  return algorithm == o.algorithm && dataset == o.dataset && dataset_path == o.dataset_path &&
         n == o.n && d == o.d && kappa == o.kappa && M == o.M && s == o.s &&
         mu_rule == o.mu_rule && gamma_explicit == o.gamma_explicit &&
         gamma_value == o.gamma_value && p_explicit == o.p_explicit && p_value == o.p_value &&
         chi_explicit == o.chi_explicit && chi_value == o.chi_value &&
         eta_explicit == o.eta_explicit && eta_value == o.eta_value &&
         local_steps == o.local_steps && fixed_steps == o.fixed_steps && rounds == o.rounds &&
         target == o.target && seed == o.seed && output == o.output;
}

void set_config_key(RunConfig& c, std::string_view key, std::string_view value) {
  if (key == "algorithm") {
    if (value == "tamuna") c.algorithm = Algorithm::tamuna;
    else if (value == "single_loop") c.algorithm = Algorithm::single_loop;
    else if (value == "gd") c.algorithm = Algorithm::gd;
    else if (value == "scaffold") c.algorithm = Algorithm::scaffold;
    else bad_value(key, value);
  } else if (key == "dataset") {
    if (value == "libsvm") c.dataset = DatasetKind::libsvm;
    else if (value == "synthetic_quadratic") c.dataset = DatasetKind::synthetic_quadratic;
    else if (value == "synthetic_logistic") c.dataset = DatasetKind::synthetic_logistic;
    else bad_value(key, value);
  } else if (key == "dataset_path") {
    c.dataset_path = std::string(value);
  } else if (key == "n") {
    c.n = static_cast<int>(to_long(key, value));
  } else if (key == "d") {
    c.d = static_cast<int>(to_long(key, value));
  } else if (key == "kappa") {
    c.kappa = to_double(key, value);
  } else if (key == "M") {
    c.M = static_cast<int>(to_long(key, value));
  } else if (key == "s") {
    c.s = static_cast<int>(to_long(key, value));
  } else if (key == "mu_rule") {
    if (value == "absolute") c.mu_rule.kind = MuRule::Kind::absolute;
    else if (value == "relative") c.mu_rule.kind = MuRule::Kind::relative;
    else bad_value(key, value);
  } else if (key == "mu_value") {
    c.mu_rule.value = to_double(key, value);
  } else if (key == "gamma_rule") {
    if (value == "two_over_LplusMu") c.gamma_explicit = false;
    else if (value == "explicit") c.gamma_explicit = true;
    else bad_value(key, value);
  } else if (key == "gamma_value") {
    c.gamma_value = to_double(key, value);
  } else if (key == "p_rule") {
    if (value == "auto") c.p_explicit = false;
    else if (value == "explicit") c.p_explicit = true;
    else bad_value(key, value);
  } else if (key == "p_value") {
    c.p_value = to_double(key, value);
  } else if (key == "chi_rule") {
    if (value == "max") c.chi_explicit = false;
    else if (value == "explicit") c.chi_explicit = true;
    else bad_value(key, value);
  } else if (key == "chi_value") {
    c.chi_value = to_double(key, value);
  } else if (key == "eta_rule") {
    if (value == "recommended") c.eta_explicit = false;
    else if (value == "explicit") c.eta_explicit = true;
    else bad_value(key, value);
  } else if (key == "eta_value") {
    c.eta_value = to_double(key, value);
  } else if (key == "local_steps") {
    if (value == "geometric") c.local_steps = LocalStepsMode::geometric;
    else if (value == "fixed") c.local_steps = LocalStepsMode::fixed;
    else bad_value(key, value);
  } else if (key == "fixed_steps") {
    c.fixed_steps = static_cast<int>(to_long(key, value));
  } else if (key == "rounds") {
    c.rounds = to_long(key, value);
  } else if (key == "target") {
    c.target = to_double(key, value);
  } else if (key == "seed") {
    c.seed = to_u64(key, value);
  } else if (key == "output") {
    c.output = std::string(value);
  } else {
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  bool seed_seen = false;
  std::size_t pos = 0;
  long line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config: expected key=value at line " +
                                  std::to_string(line_no));
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    set_config_key(c, key, value);
    if (key == "seed") seed_seen = true;
  }
  if (!seed_seen) {
    if (const char* env = std::getenv("FEDSIM_SEED")) {
      c.seed = to_u64("FEDSIM_SEED", env);
      c.seed_from_env = true;
    }
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  auto kv = [&out](std::string_view k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  kv("algorithm", algorithm_name(c.algorithm));
  kv("dataset", dataset_kind_name(c.dataset));
  kv("dataset_path", c.dataset_path);
  kv("n", std::to_string(c.n));
  kv("d", std::to_string(c.d));
  kv("kappa", fmt_double(c.kappa));
  kv("M", std::to_string(c.M));
  kv("s", std::to_string(c.s));
  kv("mu_rule", c.mu_rule.kind == MuRule::Kind::absolute ? "absolute" : "relative");
  kv("mu_value", fmt_double(c.mu_rule.value));
  kv("gamma_rule", c.gamma_explicit ? "explicit" : "two_over_LplusMu");
  kv("gamma_value", fmt_double(c.gamma_value));
  kv("p_rule", c.p_explicit ? "explicit" : "auto");
  kv("p_value", fmt_double(c.p_value));
  kv("chi_rule", c.chi_explicit ? "explicit" : "max");
  kv("chi_value", fmt_double(c.chi_value));
  kv("eta_rule", c.eta_explicit ? "explicit" : "recommended");
  kv("eta_value", fmt_double(c.eta_value));
  kv("local_steps", c.local_steps == LocalStepsMode::fixed ? "fixed" : "geometric");
  kv("fixed_steps", std::to_string(c.fixed_steps));
  kv("rounds", std::to_string(c.rounds));
  kv("target", fmt_double(c.target));
  kv("seed", std::to_string(c.seed));
  kv("output", c.output);
  return out;
}

}  // namespace fedsim
