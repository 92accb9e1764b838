#pragma once

#include <string>
#include <vector>

#include "fedsim/objective.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

// Subsampling variance factor of the uniform s-of-n subset mean,
// (n-s)/(s(n-1)) in [0, 1/2). Requires 2 <= s <= n.
double nu(int n, int s);

// Upper bound for the control stepsize chi: n(s-1)/(s(n-1)) = 1 - nu(n,s),
// always in (1/2, 1].
double chi_max(int n, int s);

// Relative-variance bound of the participation estimator:
// (n-1)/(p(s-1)) - 1 >= 0. Requires p in (0,1], s >= 2.
double omega_var(int n, int s, double p);

// Communication-optimal skip probability min(sqrt(n/(s*kappa)), 1).
double choose_p(int n, int s, double kappa);

// Per-local-step contraction factor
//   c = max((1-gamma*mu)^2, (gamma*L-1)^2, 1 - p^2*chi*(s-1)/(n-1)) < 1.
// Throws naming the violated precondition.
double contraction_rate(double gamma, double mu, double L, double p, double chi, int n, int s);

// Every rate-relevant quantity evaluated as a number for one configuration,
// with the stepsize constants pinned to gamma = 2/(L+mu) and chi = chi_max
// unless overridden.
struct RateReport {
  int n = 0;
  int s = 0;
  double kappa = 0;
  double p = 0;
  double chi = 0;
  double nu = 0;
  double omega = 0;
  double chi_max = 0;
  double gd_factor = 0;       // max((1-gamma*mu)^2, (gamma*L-1)^2)
  double control_factor = 0;  // 1 - p^2*chi*(s-1)/(n-1)
  double c = 0;               // max of the two
  double iter_coeff = 0;      // kappa + n/(s p^2)
  double comm_coeff = 0;      // p*kappa + n/(s p)
};

// p <= 0 selects choose_p(n, s, kappa); chi <= 0 selects chi_max(n, s).
RateReport make_rate_report(int n, int s, double kappa, double p = 0.0, double chi = 0.0);
std::string format_rate_report(const RateReport& r);

// High-accuracy minimizer plus per-client gradients there.
struct ReferencePoint {
  Vec x_star;
  std::vector<Vec> h_star;  // h*_i = grad f_i(x*)
  double grad_norm = 0.0;   // ||grad f(x*)|| achieved
};

struct SolveOptions {
  double tol = 0.0;           // 0 => 1e-12 * L * max(1, ||x0||)
  long max_iters = 10000000;  // hard cap; exceeded => error
  const Vec* x0 = nullptr;    // nullptr => zeros
};

// Deterministic first-order solve: closed form for diagonal quadratics,
// otherwise gradient descent with a Nesterov momentum accelerator for mu > 0
// and plain steps for mu = 0, stopping on ||grad f|| <= tol.
ReferencePoint solve_reference(const Problem& p, SolveOptions opts = {});

// (sum_i D_i)^-1 sum_i D_i b_i for all-diagonal-quadratic problems.
Vec quadratic_closed_form_minimizer(const Problem& p);

struct LyapunovParams {
  double gamma = 0;
  double p = 1;
  double chi = 1;
  int n = 0;
  int s = 0;
};

// Round-level function: (n/gamma)||xbar - x*||^2
//                     + (gamma/(p^2 chi)) ((n-1)/(s-1)) sum_i ||h_i - h*_i||^2.
double lyapunov(const Vec& xbar, const std::vector<Vec>& h, const LyapunovParams& lp,
                const ReferencePoint& ref);

// Iterate-level function: (1/gamma) sum_i ||x_i - x*||^2
//                       + (gamma(1+omega)/(p chi)) sum_i ||h_i - h*_i||^2.
double single_loop_lyapunov(const std::vector<Vec>& x, const std::vector<Vec>& h,
                            const LyapunovParams& lp, const ReferencePoint& ref);

// Incremental per-client running means of observed iterates and the ergodic
// gradient metric sum_i ||grad f(xtilde_i)||^2. No history is stored.
class ErgodicTracker {
 public:
  ErgodicTracker(int n, int d);

  void observe(int client, std::span<const double> xi);
  void observe_all(const std::vector<Vec>& x);

  long count(int client) const { return counts_[static_cast<std::size_t>(client)]; }
  const Vec& mean(int client) const { return means_[static_cast<std::size_t>(client)]; }

  double grad_metric(const Problem& p) const;

 private:
  std::vector<Vec> means_;
  std::vector<long> counts_;
};

}  // namespace fedsim
