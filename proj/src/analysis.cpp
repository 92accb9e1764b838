#include "fedsim/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

void check_ns(int n, int s, const char* where) {
  if (s < 2 || s > n)
    throw std::invalid_argument(std::string(where) + ": s must be in {2,...,n}, got s=" +
                                std::to_string(s) + " n=" + std::to_string(n));
}

}  // namespace

double nu(int n, int s) {
  check_ns(n, s, "nu");
  return static_cast<double>(n - s) / (static_cast<double>(s) * static_cast<double>(n - 1));
}

double chi_max(int n, int s) {
  check_ns(n, s, "chi_max");
  return static_cast<double>(n) * static_cast<double>(s - 1) /
         (static_cast<double>(s) * static_cast<double>(n - 1));
}

double omega_var(int n, int s, double p) {
  check_ns(n, s, "omega_var");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("omega_var: p must be in (0,1]");
  return static_cast<double>(n - 1) / (p * static_cast<double>(s - 1)) - 1.0;
}

double choose_p(int n, int s, double kappa) {
  if (kappa < 1.0) throw std::invalid_argument("choose_p: kappa must be >= 1");
  check_ns(n, s, "choose_p");
  return std::min(std::sqrt(static_cast<double>(n) / (static_cast<double>(s) * kappa)), 1.0);
}

double contraction_rate(double gamma, double mu, double L, double p, double chi, int n, int s) {
  check_ns(n, s, "contraction_rate");
  if (!(gamma > 0.0 && gamma < 2.0 / L))
    throw std::invalid_argument("contraction_rate: gamma must satisfy 0 < gamma < 2/L");
  if (!(chi > 0.0 && chi <= chi_max(n, s) * (1.0 + 1e-12)))
    throw std::invalid_argument("contraction_rate: chi must satisfy 0 < chi <= n(s-1)/(s(n-1))");
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("contraction_rate: p must be in (0,1]");
  if (!(mu >= 0.0 && mu <= L))
    throw std::invalid_argument("contraction_rate: need 0 <= mu <= L");
  const double a = 1.0 - gamma * mu;
  const double b = gamma * L - 1.0;
  const double control =
      1.0 - p * p * chi * static_cast<double>(s - 1) / static_cast<double>(n - 1);
  return std::max(std::max(a * a, b * b), control);
}

RateReport make_rate_report(int n, int s, double kappa, double p, double chi) {
  RateReport r;
  r.n = n;
  r.s = s;
  r.kappa = kappa;
  r.chi_max = chi_max(n, s);
  r.p = p > 0.0 ? p : choose_p(n, s, kappa);
  r.chi = chi > 0.0 ? chi : r.chi_max;
  r.nu = nu(n, s);
  r.omega = omega_var(n, s, r.p);
  // gamma = 2/(L+mu) makes both gradient-descent terms ((kappa-1)/(kappa+1))^2.
  const double ratio = (kappa - 1.0) / (kappa + 1.0);
  r.gd_factor = ratio * ratio;
  r.control_factor =
      1.0 - r.p * r.p * r.chi * static_cast<double>(s - 1) / static_cast<double>(n - 1);
  r.c = std::max(r.gd_factor, r.control_factor);
  r.iter_coeff = kappa + static_cast<double>(n) / (static_cast<double>(s) * r.p * r.p);
  r.comm_coeff = r.p * kappa + static_cast<double>(n) / (static_cast<double>(s) * r.p);
  return r;
}

std::string format_rate_report(const RateReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "# rates: n=%d s=%d kappa=%.10g p=%.10g chi=%.10g nu=%.10g omega=%.10g "
                "chi_max=%.10g\n"
                "# factors: gd=%.10g control=%.10g c=%.10g\n"
                "# complexity: iterations=%.10g communication=%.10g (x log(1/eps))",
                r.n, r.s, r.kappa, r.p, r.chi, r.nu, r.omega, r.chi_max, r.gd_factor,
                r.control_factor, r.c, r.iter_coeff, r.comm_coeff);
  return buf;
}

Vec quadratic_closed_form_minimizer(const Problem& p) {
  for (const ClientObjective& c : p.clients)
    if (!c.is_quadratic_diag())
      throw std::invalid_argument("closed-form minimizer needs all-diagonal quadratics");
  Vec num(static_cast<std::size_t>(p.d), 0.0);
  Vec den(static_cast<std::size_t>(p.d), 0.0);
  for (const ClientObjective& c : p.clients) {
    const Vec& d = c.curvature_diag();
    const Vec& b = c.offset();
    for (std::size_t j = 0; j < num.size(); ++j) {
      num[j] += d[j] * b[j];
      den[j] += d[j];
    }
  }
  for (std::size_t j = 0; j < num.size(); ++j) {
    if (den[j] == 0.0)
      throw std::runtime_error("closed-form minimizer: zero total curvature in coordinate " +
                               std::to_string(j));
    num[j] /= den[j];
  }
  return num;
}

namespace {

ReferencePoint finish_reference(const Problem& p, Vec x) {
  ReferencePoint ref;
  ref.h_star.resize(p.clients.size());
  for (std::size_t i = 0; i < p.clients.size(); ++i) ref.h_star[i] = p.clients[i].grad(x);
  std::vector<int> order(p.clients.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  ref.grad_norm = norm(pairwise_mean(ref.h_star, order));
  ref.x_star = std::move(x);
  return ref;
}

}  // namespace

ReferencePoint solve_reference(const Problem& p, SolveOptions opts) {
  bool all_diag = true;
  for (const ClientObjective& c : p.clients) all_diag = all_diag && c.is_quadratic_diag();
  if (all_diag) return finish_reference(p, quadratic_closed_form_minimizer(p));

  Vec x = opts.x0 ? *opts.x0 : Vec(static_cast<std::size_t>(p.d), 0.0);
  const double tol = opts.tol > 0.0 ? opts.tol : 1e-12 * p.L * std::max(1.0, norm(x));

  Vec g;
  std::vector<Vec> work;
  if (p.mu > 0.0) {
    // Nesterov momentum for the strongly convex case; the gradient is always
    // evaluated at the extrapolated point, which is also the returned iterate.
    const double kappa = p.kappa();
    const double beta = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
    const double step = 1.0 / p.L;
    Vec y = x;
    Vec x_prev = x;
    for (long it = 0; it < opts.max_iters; ++it) {
      p.grad(std::span<const double>(y), g, work);
      if (norm(g) <= tol) return finish_reference(p, std::move(y));
      x_prev = x;
      x = y;
      axpy(-step, g, x);
      for (std::size_t j = 0; j < y.size(); ++j) y[j] = x[j] + beta * (x[j] - x_prev[j]);
    }
  } else {
    const double step = 1.0 / p.L;
    for (long it = 0; it < opts.max_iters; ++it) {
      p.grad(std::span<const double>(x), g, work);
      if (norm(g) <= tol) return finish_reference(p, std::move(x));
      axpy(-step, g, x);
    }
  }
  throw std::runtime_error("solve_reference: iteration cap " + std::to_string(opts.max_iters) +
                           " exceeded before reaching tolerance " + std::to_string(tol));
}

namespace {

double control_error_sq(const std::vector<Vec>& h, const ReferencePoint& ref) {
  double acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) acc += sqdist(h[i], ref.h_star[i]);
  return acc;
}

void check_lp(const LyapunovParams& lp, std::size_t n_have) {
  if (lp.n != static_cast<int>(n_have))
    throw std::invalid_argument("lyapunov: n does not match state size");
  if (!(lp.gamma > 0.0) || !(lp.p > 0.0) || !(lp.chi > 0.0) || lp.s < 2)
    throw std::invalid_argument("lyapunov: need gamma, p, chi > 0 and s >= 2");
}

}  // namespace

double lyapunov(const Vec& xbar, const std::vector<Vec>& h, const LyapunovParams& lp,
                const ReferencePoint& ref) {
  check_lp(lp, h.size());
  const double x_term = static_cast<double>(lp.n) / lp.gamma * sqdist(xbar, ref.x_star);
  const double h_coeff = lp.gamma / (lp.p * lp.p * lp.chi) * static_cast<double>(lp.n - 1) /
                         static_cast<double>(lp.s - 1);
  return x_term + h_coeff * control_error_sq(h, ref);
}

double single_loop_lyapunov(const std::vector<Vec>& x, const std::vector<Vec>& h,
                            const LyapunovParams& lp, const ReferencePoint& ref) {
  check_lp(lp, h.size());
  double x_term = 0.0;
  for (const Vec& xi : x) x_term += sqdist(xi, ref.x_star);
  x_term /= lp.gamma;
  const double omega = omega_var(lp.n, lp.s, lp.p);
  const double h_coeff = lp.gamma * (1.0 + omega) / (lp.p * lp.chi);
  return x_term + h_coeff * control_error_sq(h, ref);
}

ErgodicTracker::ErgodicTracker(int n, int d)
    : means_(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(d), 0.0)),
      counts_(static_cast<std::size_t>(n), 0) {}

void ErgodicTracker::observe(int client, std::span<const double> xi) {
  Vec& m = means_[static_cast<std::size_t>(client)];
  long& k = counts_[static_cast<std::size_t>(client)];
  ++k;
  const double w = 1.0 / static_cast<double>(k);
  for (std::size_t j = 0; j < m.size(); ++j) m[j] += w * (xi[j] - m[j]);
}

void ErgodicTracker::observe_all(const std::vector<Vec>& x) {
  for (std::size_t i = 0; i < x.size(); ++i) observe(static_cast<int>(i), x[i]);
}

double ErgodicTracker::grad_metric(const Problem& p) const {
  double acc = 0.0;
  Vec g;
  std::vector<Vec> work;
  for (const Vec& m : means_) {
    p.grad(std::span<const double>(m), g, work);
    acc += sqnorm(g);
  }
  return acc;
}

}  // namespace fedsim
