#pragma once

#include <span>
#include <variant>
#include <vector>

#include "fedsim/vec.hpp"

namespace fedsim {

// Sparse vector with strictly increasing 0-based indices.
struct SparseVec {
  std::vector<int> idx;
  std::vector<double> val;
};

struct LabeledRow {
  double label = 1.0;  // -1 or +1
  SparseVec features;
};

struct PowerIterOptions {
  double tol = 1e-9;      // relative change of the Rayleigh quotient
  int max_iters = 10000;  // deterministic all-ones start vector
};

// lambda_max(A^T A) for the sparse row matrix A (rows x d), by power iteration.
double top_gram_eigenvalue(const std::vector<SparseVec>& rows, int d,
                           const PowerIterOptions& opts = {});

// lambda_max of a dense symmetric d x d matrix (row-major), by power iteration.
double top_eigenvalue(const std::vector<double>& sym, int d, const PowerIterOptions& opts = {});

// Differentiable client cost: either a quadratic form around an offset or an
// L2-regularized logistic loss over labeled samples. Immutable after
// construction; concurrent read-only evaluation is safe.
class ClientObjective {
 public:
  // f(x) = 1/2 (x-b)^T diag(curvature) (x-b)
  static ClientObjective quadratic_diag(Vec curvature, Vec offset);
  // f(x) = 1/2 (x-b)^T A (x-b), A symmetric PSD, row-major d*d
  static ClientObjective quadratic_dense(std::vector<double> matrix, Vec offset);
  // f(x) = (1/M) sum_m log(1 + exp(-b_m a_m^T x)) + (mu/2) ||x||^2
  static ClientObjective logistic(std::vector<LabeledRow> rows, int dim, double mu);
  // Same, with the data term's gradient Lipschitz constant already known
  // (lambda_max(A^T A) / (4 M)); skips the power iteration.
  static ClientObjective logistic(std::vector<LabeledRow> rows, int dim, double mu,
                                  double data_lipschitz);

  int dim() const { return dim_; }
  double smoothness() const { return smoothness_; }         // Lipschitz constant of grad
  double strong_convexity() const { return strong_convexity_; }
  bool is_quadratic_diag() const;
  bool is_logistic() const;

  double value(std::span<const double> x) const;
  void grad(std::span<const double> x, std::span<double> out) const;
  Vec grad(const Vec& x) const;

  // Quadratic-diag accessors (used by closed-form solves).
  const Vec& curvature_diag() const;
  const Vec& offset() const;

 private:
  struct QuadDiag {
    Vec curvature;
    Vec offset;
  };
  struct QuadDense {
    std::vector<double> matrix;  // row-major d*d
    Vec offset;
  };
  struct Logistic {
    std::vector<LabeledRow> rows;
    double mu = 0.0;
  };

  ClientObjective() = default;

  std::variant<QuadDiag, QuadDense, Logistic> impl_;
  int dim_ = 0;
  double smoothness_ = 0.0;
  double strong_convexity_ = 0.0;
};

// n >= 2 client objectives over a common dimension, with the global constants
// the stepsize rules need: L = max_i L_i and mu = min_i mu_i.
struct Problem {
  std::vector<ClientObjective> clients;
  int d = 0;
  double L = 0.0;
  double mu = 0.0;

  int n() const { return static_cast<int>(clients.size()); }
  double kappa() const;  // L/mu, defined only for mu > 0

  double value(std::span<const double> x) const;  // f(x) = (1/n) sum_i f_i(x)
  // grad f(x) into out, deterministic pairwise reduction over clients; work
  // must have n slots (resized as needed).
  void grad(std::span<const double> x, Vec& out, std::vector<Vec>& work) const;
  Vec grad(const Vec& x) const;
};

Problem make_problem(std::vector<ClientObjective> clients);

// Global smoothness bound: max over clients of the per-client constant.
double smoothness_constant(const Problem& p);

// Numerically stable sigma(-t) = 1/(1+exp(t)).
inline double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

// log(1 + exp(u)) without overflow.
inline double log1pexp(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

}  // namespace fedsim
