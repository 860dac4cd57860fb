#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "sampleshare/estimators.hpp"
#include "sampleshare/gain.hpp"

namespace sampleshare {

struct SelectorParams {
  double alpha = 0.1;
  Index n_max = 1000;
  double lambda_S = 1.0;
  double lambda_c = 1.0;
  double sigma_T = 1.0;
  double sigma_S = 0.5;
  Index stride = 1;  // evaluate the gain every `stride` samples (and at n_max)
  CorrectionForm form = kDefaultCorrection;
  // When set, every report also carries the exact gain, bias and variance.
  std::optional<GroundTruth> oracle_truth;
  bool record_path = false;  // keep the pooled fit at every evaluated n

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(alpha >= 0.0)) out.emplace_back("alpha must be >= 0");
    if (n_max < 1) out.emplace_back("n_max must be >= 1");
    if (!(lambda_S >= 0.0)) out.emplace_back("lambda_S must be >= 0");
    if (!(lambda_c >= 0.0)) out.emplace_back("lambda_c must be >= 0");
    if (!(sigma_T >= 0.0)) out.emplace_back("sigma_T must be >= 0");
    if (!(sigma_S >= 0.0)) out.emplace_back("sigma_S must be >= 0");
    if (stride < 1) out.emplace_back("stride must be >= 1");
    return out;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ConfigError(std::move(p));
  }
};

struct SelectorTrace {
  std::vector<GainReport> reports;  // one per evaluated n, increasing
  Index n_star = 0;
  double kappa_star = 0.0;
  Vector theta_selected;
  std::vector<Vector> collab_path;  // parallel to reports when record_path is set
};

struct SourceSample {
  Vector x;
  double y = 0.0;
};

// (G_T + lambda_c I)^{-1}: the pooled inverse before any source sample is added.
inline Matrix init_collab_inverse(const TaskState& target, double lambda_c) {
  if (lambda_c < 0.0) throw InvalidInputError("lambda_c must be >= 0");
  return spd_inverse(regularized(target.G, lambda_c), "initial collaborative Gram");
}

// (lambda_S I)^{-1}; empty when lambda_S = 0 because the source fit is not yet defined.
inline std::optional<Matrix> init_source_inverse(Index d, double lambda_S) {
  if (lambda_S < 0.0) throw InvalidInputError("lambda_S must be >= 0");
  if (lambda_S == 0.0) return std::nullopt;
  return Matrix(identity(d) / lambda_S);
}

// W with theta_collab = W theta_S + (I - W) theta_T, valid when lambda_c = lambda_S + lambda_T.
inline Matrix collaborative_mixing(const Matrix& A_c_inv, const Matrix& G_S, double lambda_S) {
  return A_c_inv * regularized(G_S, lambda_S);
}

namespace detail {

inline OracleQuantities selector_oracle(const TaskState& target, const Matrix& G_S, const Matrix& A_S_inv,
                                        double lambda_S, const Vector& theta_S, const Matrix& A_c_inv,
                                        double lambda_c, Index n, const Matrix& val_X,
                                        const GroundTruth& truth, CorrectionForm form) {
  TaskState source;
  source.G = G_S;
  source.A_inv = A_S_inv;
  source.lambda = lambda_S;
  source.theta_hat = theta_S;
  source.n = n;
  CollabState collab;
  collab.A_c_inv = A_c_inv;
  collab.lambda_c = lambda_c;
  collab.n = n;
  const GainInputs in = gain_inputs(target, source, collab, val_X);
  OracleQuantities q;
  q.delta_star = oracle_gain(collab, target, G_S, val_X, truth);
  const GainMoments m = oracle_variance(in, truth, form);
  q.bias = m.bias;
  q.variance_exact = m.variance;
  return q;
}

}  // namespace detail

// One pass over the source stream. `next` returns the next sample or nullopt when
// the stream ends. The selected prefix length maximizes the decision statistic,
// with n = 0 scoring exactly 0 and ties going to the smaller n.
template <typename Stream>
  requires std::is_invocable_r_v<std::optional<SourceSample>, Stream&>
SelectorTrace run_triple_s(const TaskState& target, Stream&& next, const Matrix& val_X,
                           const SelectorParams& params) {
  params.validate();
  const Index d = target.dim();
  if (val_X.cols() != d) throw InvalidInputError("validation design dimension differs from target");
  require_finite(val_X, "validation design");

  Matrix A_c_inv = init_collab_inverse(target, params.lambda_c);
  std::optional<Matrix> A_S_inv = init_source_inverse(d, params.lambda_S);
  Matrix G_S = Matrix::Zero(d, d);
  Vector b_S = Vector::Zero(d);
  const GainEvaluator evaluate(target, val_X, params.lambda_c, params.sigma_T, params.sigma_S, params.form);

  SelectorTrace trace;
  trace.theta_selected = target.theta_hat;
  trace.reports.reserve(static_cast<std::size_t>(params.n_max / params.stride + 1));

  for (Index n = 1; n <= params.n_max; ++n) {
    std::optional<SourceSample> sample = next();
    if (!sample)
      throw TruncatedStreamError(static_cast<std::size_t>(n - 1), static_cast<std::size_t>(params.n_max));
    if (sample->x.size() != d)
      throw InvalidInputError("source sample " + std::to_string(n - 1) + " has wrong dimension");
    if (!sample->x.allFinite() || !std::isfinite(sample->y))
      throw InvalidInputError("source sample " + std::to_string(n - 1) + " contains NaN or Inf");
    const Vector& x = sample->x;

    G_S.noalias() += x * x.transpose();
    b_S.noalias() += sample->y * x;
    sherman_morrison_inplace(A_c_inv, x);
    if (A_S_inv) {
      sherman_morrison_inplace(*A_S_inv, x);
    } else if (n >= d) {
      try {
        A_S_inv = spd_inverse(G_S, "source Gram");
      } catch (const SingularMatrixError&) {
        // still rank deficient; keep deferring
      }
    }

    if (n % params.stride != 0 && n != params.n_max) continue;
    GainReport report;
    report.n = n;
    if (params.record_path) trace.collab_path.push_back(A_c_inv * (target.b + b_S));
    if (!A_S_inv) {
      report.available = false;
      trace.reports.push_back(report);
      continue;
    }
    const Vector theta_S = *A_S_inv * b_S;
    const GainEstimate est = evaluate(G_S, *A_S_inv, params.lambda_S, theta_S, A_c_inv);
    report.delta_hat = est.delta_hat;
    report.var_hat = est.var_hat;
    report.kappa = decision_statistic(est.delta_hat, est.var_hat, params.alpha);
    if (params.oracle_truth)
      report.oracle = detail::selector_oracle(target, G_S, *A_S_inv, params.lambda_S, theta_S, A_c_inv,
                                              params.lambda_c, n, val_X, *params.oracle_truth, params.form);
    if (report.kappa > trace.kappa_star) {
      trace.kappa_star = report.kappa;
      trace.n_star = n;
      trace.theta_selected = A_c_inv * (target.b + b_S);
    }
    trace.reports.push_back(std::move(report));
  }
  return trace;
}

// Streams the rows of `source` in order.
inline SelectorTrace run_triple_s(const TaskState& target, const Dataset& source, const Matrix& val_X,
                                  const SelectorParams& params) {
  if (source.X.rows() != source.y.size()) throw InvalidInputError("source: rows/responses mismatch");
  if (source.rows() > 0 && source.dim() != target.dim())
    throw InvalidInputError("source dimension differs from target");
  Index i = 0;
  auto next = [&]() -> std::optional<SourceSample> {
    if (i >= source.rows()) return std::nullopt;
    SourceSample s{source.X.row(i).transpose(), source.y(i)};
    ++i;
    return s;
  };
  return run_triple_s(target, next, val_X, params);
}

}  // namespace sampleshare
