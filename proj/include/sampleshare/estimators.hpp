#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/QR>

#include "sampleshare/linalg.hpp"
#include "sampleshare/model.hpp"

namespace sampleshare {

// Sufficient statistics of one ridge task. Reused for the source prefix fit.
struct TaskState {
  Matrix G;      // X^T X
  Matrix A_inv;  // (G + lambda I)^{-1}
  Vector b;      // X^T y
  double lambda = 0.0;
  Vector theta_hat;
  Index n = 0;

  Index dim() const noexcept { return G.rows(); }
};

// Pooled target + source-prefix ridge problem.
struct CollabState {
  Matrix A_c_inv;
  double lambda_c = 0.0;
  Vector b_total;
  Index n = 0;  // source samples pooled
  Vector theta_hat;
};

inline Matrix regularized(const Matrix& g, double lambda) {
  Matrix a = g;
  a.diagonal().array() += lambda;
  return a;
}

inline TaskState task_state_from_stats(Matrix G, Vector b, double lambda, Index n) {
  if (lambda < 0.0) throw InvalidInputError("ridge parameter must be >= 0");
  if (G.rows() != G.cols() || G.rows() != b.size())
    throw InvalidInputError("task state: Gram/cross-term dimension mismatch");
  TaskState s;
  s.A_inv = spd_inverse(regularized(G, lambda), "regularized Gram");
  s.theta_hat = s.A_inv * b;
  s.G = std::move(G);
  s.b = std::move(b);
  s.lambda = lambda;
  s.n = n;
  return s;
}

inline TaskState fit_ridge(const Dataset& data, double lambda) {
  data.validate("ridge training data");
  return task_state_from_stats(gram(data.X), data.X.transpose() * data.y, lambda, data.rows());
}

inline CollabState fit_collaborative(const TaskState& target, const Dataset& source_prefix,
                                     double lambda_c) {
  if (lambda_c < 0.0) throw InvalidInputError("lambda_c must be >= 0");
  if (source_prefix.rows() > 0) {
    source_prefix.validate("source prefix");
    if (source_prefix.dim() != target.dim())
      throw InvalidInputError("source prefix dimension differs from target");
  }
  Matrix pooled = target.G;
  Vector b_total = target.b;
  if (source_prefix.rows() > 0) {
    pooled += gram(source_prefix.X);
    b_total += source_prefix.X.transpose() * source_prefix.y;
  }
  CollabState c;
  c.A_c_inv = spd_inverse(regularized(pooled, lambda_c), "collaborative Gram");
  c.lambda_c = lambda_c;
  c.b_total = std::move(b_total);
  c.n = source_prefix.rows();
  c.theta_hat = c.A_c_inv * c.b_total;
  return c;
}

// Exact conditional risk E||X_val (theta_T_hat - theta_T*)||^2 over the target noise.
inline double xi_single(const TaskState& target, const Matrix& val_X, const GroundTruth& truth) {
  const Matrix U = val_X * target.A_inv;
  const double shrink = target.lambda * target.lambda * (U * truth.theta_T).squaredNorm();
  const double noise = truth.sigma_T * truth.sigma_T * trace_of_product(U * target.G, U.transpose());
  return shrink + noise;
}

inline double xi_collab(const CollabState& collab, const TaskState& target, const Matrix& source_gram,
                        const Matrix& val_X, const GroundTruth& truth) {
  const Matrix V = val_X * collab.A_c_inv;
  const Vector shift = source_gram * (truth.theta_S - truth.theta_T) - collab.lambda_c * truth.theta_T;
  const Matrix noise_cov = truth.sigma_S * truth.sigma_S * source_gram +
                           truth.sigma_T * truth.sigma_T * target.G;
  return (V * shift).squaredNorm() + trace_of_product(V * noise_cov, V.transpose());
}

// Transfer gain: positive means pooling reduces the target validation risk.
inline double oracle_gain(const CollabState& collab, const TaskState& target, const Matrix& source_gram,
                          const Matrix& val_X, const GroundTruth& truth) {
  return xi_single(target, val_X, truth) - xi_collab(collab, target, source_gram, val_X, truth);
}

inline std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InvalidInputError("log_grid: bad range");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  g.back() = hi;
  return g;
}

inline std::vector<double> default_lambda_grid() { return log_grid(1e-3, 1e3, 25); }

// ||X_val (theta - theta_T*)||^2: the oracle selection score for synthetic tasks.
inline double oracle_validation_risk(const Vector& theta, const Matrix& val_X, const Vector& theta_ref) {
  return (val_X * (theta - theta_ref)).squaredNorm();
}

inline double validation_mse(const Vector& theta, const Dataset& val) {
  return (val.X * theta - val.y).squaredNorm() / static_cast<double>(val.rows());
}

struct LambdaChoice {
  double lambda = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

// Grid search over ridge parameters; ties keep the first (smallest) lambda.
inline LambdaChoice select_ridge_lambda(const Dataset& train, const std::vector<double>& grid,
                                        const std::function<double(const Vector&)>& score) {
  if (grid.empty()) throw InvalidInputError("select_ridge_lambda: empty grid");
  const Matrix G = gram(train.X);
  const Vector b = train.X.transpose() * train.y;
  LambdaChoice best;
  for (double lambda : grid) {
    const Vector theta = spd_inverse(regularized(G, lambda)) * b;
    const double s = score(theta);
    if (s < best.score) best = {lambda, s};
  }
  return best;
}

// Residual mean square ||y - X theta_ls||^2 / (n - rank X) of the minimum-norm least-squares fit.
inline double residual_noise_variance(const Dataset& data) {
  const Index n = data.rows();
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(data.X);
  const Index r = cod.rank();
  if (n <= r) throw InvalidInputError("residual_noise_variance: need more rows than the design rank");
  const Vector theta = cod.solve(data.y);
  return (data.y - data.X * theta).squaredNorm() / static_cast<double>(n - r);
}

}  // namespace sampleshare
