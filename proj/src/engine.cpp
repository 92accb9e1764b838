#include "fedsim/engine.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedsim/analysis.hpp"

namespace fedsim {

namespace {

// x <- x - gamma*grad f_i(x) + gamma*h. The one expression every algorithm
// shares; keeping it in one place makes the reduction equivalences bitwise.
inline void local_training_step(const ClientObjective& obj, double gamma, const Vec& h,
                                Vec& x, Vec& g) {
  obj.grad(std::span<const double>(x), std::span<double>(g));
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += gamma * (h[j] - g[j]);
}

template <typename Body>
void for_each_client(const std::vector<int>& ids, ExecMode mode, Body&& body) {
  const int count = static_cast<int>(ids.size());
  if (mode == ExecMode::serial) {
    for (int k = 0; k < count; ++k) body(ids[static_cast<std::size_t>(k)]);
  } else {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < count; ++k) body(ids[static_cast<std::size_t>(k)]);
  }
}

std::vector<int> all_indices(int n) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  return ids;
}

void check_omega(const std::vector<int>& omega, int n) {
  if (omega.empty()) throw std::invalid_argument("omega must not be empty");
  int prev = -1;
  for (int i : omega) {
    if (i < 0 || i >= n) throw std::invalid_argument("omega index out of range");
    if (i <= prev) throw std::invalid_argument("omega must be ascending and distinct");
    prev = i;
  }
}

}  // namespace

void validate_params(const AlgoParams& a, const Problem& p) {
  if (!(a.gamma > 0.0 && a.gamma < 2.0 / p.L))
    throw std::invalid_argument("params: gamma must satisfy 0 < gamma < 2/L, got " +
                                std::to_string(a.gamma));
  if (a.s < 2 || a.s > p.n())
    throw std::invalid_argument("params: s must be in {2,...,n}, got " + std::to_string(a.s));
  const double bound = chi_max(p.n(), a.s);
  if (!(a.chi > 0.0 && a.chi <= bound * (1.0 + 1e-12)))
    throw std::invalid_argument("params: chi must satisfy 0 < chi <= n(s-1)/(s(n-1)) = " +
                                std::to_string(bound));
  if (!(a.p > 0.0 && a.p <= 1.0))
    throw std::invalid_argument("params: p must be in (0,1], got " + std::to_string(a.p));
  if (a.local_steps_mode == LocalStepsMode::fixed && a.fixed_steps < 1)
    throw std::invalid_argument("params: fixed_steps must be >= 1");
  if (a.eta < 0.0) throw std::invalid_argument("params: eta must be >= 0");
}

AlgoParams recommended_params(const Problem& p, int s, double p_comm) {
  AlgoParams a;
  a.gamma = 2.0 / (p.L + p.mu);
  a.s = s;
  a.chi = chi_max(p.n(), s);
  a.p = p_comm > 0.0 ? p_comm : choose_p(p.n(), s, p.kappa());
  a.eta = a.p * a.chi;
  return a;
}

double FederatedState::control_sum_residual() const {
  double scale = 0.0;
  Vec sum(xbar.size(), 0.0);
  for (const Vec& hi : h) {
    for (std::size_t j = 0; j < hi.size(); ++j) {
      sum[j] += hi[j];
      scale = std::max(scale, std::abs(hi[j]));
    }
  }
  double worst = 0.0;
  for (double v : sum) worst = std::max(worst, std::abs(v));
  if (scale == 0.0) return worst;
  return worst / scale;
}

FederatedState make_state(const Problem& p, Vec x0) {
  if (static_cast<int>(x0.size()) != p.d)
    throw std::invalid_argument("make_state: x0 dimension mismatch");
  FederatedState st;
  const std::size_t n = p.clients.size();
  st.xbar = std::move(x0);
  st.x.assign(n, st.xbar);
  st.h.assign(n, Vec(st.xbar.size(), 0.0));
  st.grad_evals.assign(n, 0);
  st.uplink.assign(n, 0);
  st.downlink.assign(n, 0);
  st.work.assign(n, Vec(st.xbar.size(), 0.0));
  return st;
}

void tamuna_round(FederatedState& st, const Problem& p, const AlgoParams& a,
                  const ParticipationPlan& plan, ExecMode mode,
                  const LocalIterateObserver* on_local_iterate) {
  check_omega(plan.omega, p.n());
  if (static_cast<int>(plan.omega.size()) != a.s)
    throw std::invalid_argument("tamuna_round: |omega| != s");
  if (plan.local_steps < 1) throw std::invalid_argument("tamuna_round: local_steps must be >= 1");

  const long steps = plan.local_steps;
  for_each_client(plan.omega, mode, [&](int i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    st.x[ui] = st.xbar;  // initialization received from the server
    st.downlink[ui] += 1;
    for (long l = 0; l < steps; ++l) {
      if (on_local_iterate) (*on_local_iterate)(i, st.x[ui]);
      local_training_step(p.clients[ui], a.gamma, st.h[ui], st.x[ui], st.work[ui]);
    }
    st.grad_evals[ui] += steps;
    st.uplink[ui] += 1;
  });

  st.xbar = pairwise_mean(st.x, plan.omega);

  const double factor = a.eta / a.gamma;
  for (int i : plan.omega) {
    const std::size_t ui = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < st.xbar.size(); ++j)
      st.h[ui][j] += factor * (st.xbar[j] - st.x[ui][j]);
    st.downlink[ui] += 1;  // receives the new estimate for the control update
  }

  st.round += 1;
  st.comm_rounds += 1;
  st.total_local_steps += steps;
}

void single_loop_step(FederatedState& st, const Problem& p, const AlgoParams& a, bool theta,
                      const std::vector<int>* omega, ExecMode mode) {
  if (theta && omega == nullptr)
    throw std::invalid_argument("single_loop_step: theta = 1 requires omega");
  if (!theta && omega != nullptr)
    throw std::invalid_argument("single_loop_step: omega provided with theta = 0");

  const std::vector<int> everyone = all_indices(p.n());
  for_each_client(everyone, mode, [&](int i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    local_training_step(p.clients[ui], a.gamma, st.h[ui], st.x[ui], st.work[ui]);
    st.grad_evals[ui] += 1;
  });
  st.total_local_steps += 1;

  if (theta) {
    check_omega(*omega, p.n());
    st.xbar = pairwise_mean(st.x, *omega);  // x currently holds the post-step iterates

    const double factor = a.eta / a.gamma;
    for (int i : *omega) {
      const std::size_t ui = static_cast<std::size_t>(i);
      for (std::size_t j = 0; j < st.xbar.size(); ++j)
        st.h[ui][j] += factor * (st.xbar[j] - st.x[ui][j]);
      st.uplink[ui] += 1;
    }
    for (std::size_t ui = 0; ui < st.x.size(); ++ui) {
      st.x[ui] = st.xbar;  // broadcast overwrites every client, participant or not
      st.downlink[ui] += 1;
    }
    st.round += 1;
    st.comm_rounds += 1;
  }
}

void gd_step(FederatedState& st, const Problem& p, double gamma, ExecMode mode) {
  if (!(gamma > 0.0 && gamma < 2.0 / p.L))
    throw std::invalid_argument("gd_step: gamma must satisfy 0 < gamma < 2/L");

  // Written as the full-participation one-local-step round with zero
  // controls, so the reduction from the round-based algorithm is exact.
  const Vec zero(st.xbar.size(), 0.0);
  const std::vector<int> everyone = all_indices(p.n());
  for_each_client(everyone, mode, [&](int i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    st.x[ui] = st.xbar;
    st.downlink[ui] += 1;
    local_training_step(p.clients[ui], gamma, zero, st.x[ui], st.work[ui]);
    st.grad_evals[ui] += 1;
    st.uplink[ui] += 1;
  });
  st.xbar = pairwise_mean(st.x, everyone);
  st.round += 1;
  st.comm_rounds += 1;
  st.total_local_steps += 1;
}

void scaffold_round(FederatedState& st, const Problem& p, double lr, int local_steps,
                    const std::vector<int>& omega, ExecMode mode) {
  if (local_steps < 1) throw std::invalid_argument("scaffold_round: local_steps must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("scaffold_round: stepsize must be positive");
  check_omega(omega, p.n());

  if (st.scaffold_server_c.empty()) st.scaffold_server_c.assign(st.xbar.size(), 0.0);
  const Vec c = st.scaffold_server_c;  // round-start server control
  const Vec xbar_old = st.xbar;

  for_each_client(omega, mode, [&](int i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    st.x[ui] = xbar_old;
    st.downlink[ui] += 1;
    Vec& g = st.work[ui];
    for (int k = 0; k < local_steps; ++k) {
      p.clients[ui].grad(std::span<const double>(st.x[ui]), std::span<double>(g));
      for (std::size_t j = 0; j < g.size(); ++j)
        st.x[ui][j] -= lr * (g[j] - st.h[ui][j] + c[j]);
    }
    st.grad_evals[ui] += local_steps;
    st.uplink[ui] += 1;
  });

  st.xbar = pairwise_mean(st.x, omega);

  const double inv = 1.0 / (static_cast<double>(local_steps) * lr);
  Vec delta_sum(st.xbar.size(), 0.0);
  for (int i : omega) {
    const std::size_t ui = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < st.xbar.size(); ++j) {
      const double ci_new = st.h[ui][j] - c[j] + (xbar_old[j] - st.x[ui][j]) * inv;
      delta_sum[j] += ci_new - st.h[ui][j];
      st.h[ui][j] = ci_new;
    }
    st.downlink[ui] += 1;
  }
  const double inv_n = 1.0 / static_cast<double>(p.n());
  for (std::size_t j = 0; j < delta_sum.size(); ++j)
    st.scaffold_server_c[j] += inv_n * delta_sum[j];

  st.round += 1;
  st.comm_rounds += 1;
  st.total_local_steps += local_steps;
}

}  // namespace fedsim
