#include "fedsim/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

[[noreturn]] void dim_error(const char* where, std::size_t got, int want) {
  throw std::invalid_argument(std::string(where) + ": dimension mismatch, got " +
                              std::to_string(got) + ", expected " + std::to_string(want));
}

// Power iteration driver over an abstract symmetric PSD operator.
template <typename ApplyOp>
double power_iteration(int d, ApplyOp&& apply, const PowerIterOptions& opts) {
  Vec v(static_cast<std::size_t>(d), 1.0);  // deterministic start
  Vec w(static_cast<std::size_t>(d), 0.0);
  double lambda = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    apply(v, w);
    const double vv = sqnorm(v);
    const double rayleigh = dot(v, w) / vv;
    const double wn = norm(w);
    if (wn == 0.0) return 0.0;  // operator annihilates the iterate
    const double inv = 1.0 / wn;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] * inv;
    if (it > 0 && std::abs(rayleigh - lambda) <= opts.tol * std::max(1.0, std::abs(rayleigh)))
      return rayleigh;
    lambda = rayleigh;
  }
  throw std::runtime_error("power iteration did not converge within " +
                           std::to_string(opts.max_iters) +
                           " iterations; last estimate " + std::to_string(lambda));
}

}  // namespace

double top_gram_eigenvalue(const std::vector<SparseVec>& rows, int d,
                           const PowerIterOptions& opts) {
  bool any = false;
  for (const SparseVec& r : rows)
    if (!r.idx.empty()) any = true;
  if (!any || d == 0) return 0.0;
  return power_iteration(d, [&](const Vec& v, Vec& w) {
    fill_zero(w);
    for (const SparseVec& r : rows) {
      double t = 0.0;
      for (std::size_t k = 0; k < r.idx.size(); ++k)
        t += r.val[k] * v[static_cast<std::size_t>(r.idx[k])];
      for (std::size_t k = 0; k < r.idx.size(); ++k)
        w[static_cast<std::size_t>(r.idx[k])] += r.val[k] * t;
    }
  }, opts);
}

double top_eigenvalue(const std::vector<double>& sym, int d, const PowerIterOptions& opts) {
  if (sym.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d))
    throw std::invalid_argument("top_eigenvalue: matrix size does not match dimension");
  return power_iteration(d, [&](const Vec& v, Vec& w) {
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      const double* row = sym.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(d);
      for (int j = 0; j < d; ++j) acc += row[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j)];
      w[static_cast<std::size_t>(i)] = acc;
    }
  }, opts);
}

ClientObjective ClientObjective::quadratic_diag(Vec curvature, Vec offset) {
  if (curvature.size() != offset.size() || curvature.empty())
    throw std::invalid_argument("quadratic_diag: curvature/offset sizes disagree or empty");
  ClientObjective o;
  o.dim_ = static_cast<int>(curvature.size());
  o.smoothness_ = *std::max_element(curvature.begin(), curvature.end());
  o.strong_convexity_ = *std::min_element(curvature.begin(), curvature.end());
  if (o.strong_convexity_ < 0.0)
    throw std::invalid_argument("quadratic_diag: negative curvature entry");
  o.impl_ = QuadDiag{std::move(curvature), std::move(offset)};
  return o;
}

ClientObjective ClientObjective::quadratic_dense(std::vector<double> matrix, Vec offset) {
  const int d = static_cast<int>(offset.size());
  if (d == 0 || matrix.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d))
    throw std::invalid_argument("quadratic_dense: matrix must be d*d with d >= 1");
  ClientObjective o;
  o.dim_ = d;
  const double lmax = top_eigenvalue(matrix, d);
  // Smallest eigenvalue via a shifted power iteration on (lmax*I - A).
  std::vector<double> shifted = matrix;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      std::size_t k = static_cast<std::size_t>(i) * static_cast<std::size_t>(d) +
                      static_cast<std::size_t>(j);
      shifted[k] = (i == j ? lmax : 0.0) - matrix[k];
    }
  }
  o.smoothness_ = lmax;
  o.strong_convexity_ = lmax - top_eigenvalue(shifted, d);
  o.impl_ = QuadDense{std::move(matrix), std::move(offset)};
  return o;
}

ClientObjective ClientObjective::logistic(std::vector<LabeledRow> rows, int dim, double mu) {
  std::vector<SparseVec> feats;
  feats.reserve(rows.size());
  for (const LabeledRow& r : rows) feats.push_back(r.features);
  const double data_lip =
      rows.empty() ? 0.0
                   : top_gram_eigenvalue(feats, dim) / (4.0 * static_cast<double>(rows.size()));
  return logistic(std::move(rows), dim, mu, data_lip);
}

ClientObjective ClientObjective::logistic(std::vector<LabeledRow> rows, int dim, double mu,
                                          double data_lipschitz) {
  if (dim < 1) throw std::invalid_argument("logistic: dimension must be >= 1");
  if (mu < 0.0) throw std::invalid_argument("logistic: mu must be >= 0");
  for (const LabeledRow& r : rows) {
    if (r.label != 1.0 && r.label != -1.0)
      throw std::invalid_argument("logistic: labels must be -1 or +1");
    for (int k : r.features.idx)
      if (k < 0 || k >= dim) throw std::invalid_argument("logistic: feature index out of range");
  }
  ClientObjective o;
  o.dim_ = dim;
  o.smoothness_ = data_lipschitz + mu;
  o.strong_convexity_ = mu;
  o.impl_ = Logistic{std::move(rows), mu};
  return o;
}

bool ClientObjective::is_quadratic_diag() const {
  return std::holds_alternative<QuadDiag>(impl_);
}

bool ClientObjective::is_logistic() const { return std::holds_alternative<Logistic>(impl_); }

const Vec& ClientObjective::curvature_diag() const {
  return std::get<QuadDiag>(impl_).curvature;
}

const Vec& ClientObjective::offset() const {
  if (const auto* q = std::get_if<QuadDiag>(&impl_)) return q->offset;
  return std::get<QuadDense>(impl_).offset;
}

double ClientObjective::value(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) dim_error("value", x.size(), dim_);
  if (const auto* q = std::get_if<QuadDiag>(&impl_)) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double v = x[j] - q->offset[j];
      acc += q->curvature[j] * v * v;
    }
    return 0.5 * acc;
  }
  if (const auto* q = std::get_if<QuadDense>(&impl_)) {
    const std::size_t d = x.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        row += q->matrix[i * d + j] * (x[j] - q->offset[j]);
      acc += (x[i] - q->offset[i]) * row;
    }
    return 0.5 * acc;
  }
  const auto& lg = std::get<Logistic>(impl_);
  double acc = 0.0;
  for (const LabeledRow& r : lg.rows) {
    double t = 0.0;
    for (std::size_t k = 0; k < r.features.idx.size(); ++k)
      t += r.features.val[k] * x[static_cast<std::size_t>(r.features.idx[k])];
    acc += log1pexp(-r.label * t);
  }
  if (!lg.rows.empty()) acc /= static_cast<double>(lg.rows.size());
  return acc + 0.5 * lg.mu * sqnorm(x);
}

void ClientObjective::grad(std::span<const double> x, std::span<double> out) const {
  if (x.size() != static_cast<std::size_t>(dim_)) dim_error("grad", x.size(), dim_);
  if (out.size() != static_cast<std::size_t>(dim_)) dim_error("grad(out)", out.size(), dim_);
  if (const auto* q = std::get_if<QuadDiag>(&impl_)) {
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = q->curvature[j] * (x[j] - q->offset[j]);
    return;
  }
  if (const auto* q = std::get_if<QuadDense>(&impl_)) {
    const std::size_t d = x.size();
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += q->matrix[i * d + j] * (x[j] - q->offset[j]);
      out[i] = acc;
    }
    return;
  }
  const auto& lg = std::get<Logistic>(impl_);
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = lg.mu * x[j];
  if (lg.rows.empty()) return;
  const double inv_m = 1.0 / static_cast<double>(lg.rows.size());
  for (const LabeledRow& r : lg.rows) {
    double t = 0.0;
    for (std::size_t k = 0; k < r.features.idx.size(); ++k)
      t += r.features.val[k] * x[static_cast<std::size_t>(r.features.idx[k])];
    const double coef = -r.label * sigmoid_neg(r.label * t) * inv_m;
    for (std::size_t k = 0; k < r.features.idx.size(); ++k)
      out[static_cast<std::size_t>(r.features.idx[k])] += coef * r.features.val[k];
  }
}

Vec ClientObjective::grad(const Vec& x) const {
  Vec out(x.size(), 0.0);
  grad(std::span<const double>(x), std::span<double>(out));
  return out;
}

double Problem::kappa() const {
  if (!(mu > 0.0)) throw std::logic_error("kappa: undefined for mu = 0");
  return L / mu;
}

double Problem::value(std::span<const double> x) const {
  double acc = 0.0;
  for (const ClientObjective& c : clients) acc += c.value(x);
  return acc / static_cast<double>(clients.size());
}

void Problem::grad(std::span<const double> x, Vec& out, std::vector<Vec>& work) const {
  const std::size_t nn = clients.size();
  work.resize(nn);
  std::vector<int> order(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    work[i].resize(x.size());
    clients[i].grad(x, std::span<double>(work[i]));
    order[i] = static_cast<int>(i);
  }
  out = pairwise_mean(work, order);
}

Vec Problem::grad(const Vec& x) const {
  Vec out;
  std::vector<Vec> work;
  grad(std::span<const double>(x), out, work);
  return out;
}

Problem make_problem(std::vector<ClientObjective> clients) {
  if (clients.size() < 2) throw std::invalid_argument("make_problem: need n >= 2 clients");
  const int d = clients.front().dim();
  for (const ClientObjective& c : clients)
    if (c.dim() != d) throw std::invalid_argument("make_problem: clients disagree on dimension");
  Problem p;
  p.d = d;
  p.L = 0.0;
  p.mu = clients.front().strong_convexity();
  for (const ClientObjective& c : clients) {
    p.L = std::max(p.L, c.smoothness());
    p.mu = std::min(p.mu, c.strong_convexity());
  }
  p.clients = std::move(clients);
  return p;
}

double smoothness_constant(const Problem& p) { return p.L; }

}  // namespace fedsim
