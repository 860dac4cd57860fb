#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "sampleshare/estimators.hpp"

namespace sampleshare {

// Every method here returns theta = W theta_S + (I - W) theta_T for some W.
struct BlendResult {
  Vector theta;
  Matrix W;
  double val_mse = std::numeric_limits<double>::infinity();
  double lambda = 0.0;  // data-enriched choice
  double alpha = 0.0;   // spectral step
  long k = -1;          // spectral step count; -1 when reverted
  bool reverted = false;
  bool source_regularized = false;  // source Gram was singular and lambda_S was added
  bool gamma_pseudo_inverse = false;  // chosen weight is the minimum-norm one (singular Gamma)
};

inline Vector blend(const Matrix& W, const Vector& theta_S, const Vector& theta_T) {
  return theta_T + W * (theta_S - theta_T);
}

// Least squares when the source Gram is invertible, lambda_S-ridge otherwise.
inline TaskState baseline_source_fit(const Dataset& source, double lambda_S) {
  if (source.rows() >= source.dim()) {
    try {
      return fit_ridge(source, 0.0);
    } catch (const SingularMatrixError&) {
    }
  }
  if (!(lambda_S > 0.0)) throw InvalidInputError("source Gram is singular and lambda_S is 0");
  return fit_ridge(source, lambda_S);
}

struct EnrichedParams {
  std::vector<double> lambda_grid;
  Matrix G_T_val;

  void validate() const {
    if (lambda_grid.empty()) throw InvalidInputError("data_enriched: empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!(lambda_grid[i] >= 0.0) || !std::isfinite(lambda_grid[i]))
        throw InvalidInputError("data_enriched: grid values must be finite and >= 0");
      if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))
        throw InvalidInputError("data_enriched: grid must be strictly increasing");
    }
  }
};

inline EnrichedParams default_enriched_params(const Matrix& val_X) {
  return {default_lambda_grid(), gram(val_X)};
}

// W(lambda) = Gamma^{-1} Psi with Psi = G_T + lambda G_val G_S^{-1} G_T, Gamma = Psi + lambda G_val.
inline Matrix enriched_weight(const Matrix& G_T, const Matrix& G_S_inv, const Matrix& G_val, double lambda) {
  const Index d = G_T.rows();
  if (lambda == 0.0) return identity(d);
  const Matrix psi = G_T + lambda * G_val * G_S_inv * G_T;
  const Matrix gamma = psi + lambda * G_val;
  Eigen::FullPivLU<Matrix> lu(gamma);
  if (!lu.isInvertible())
    throw SingularMatrixError(static_cast<std::size_t>(lu.rank()), "Gamma at lambda=" + std::to_string(lambda));
  return lu.solve(psi);
}

// Minimum-norm W = Gamma^+ Psi, for directions the target and validation rows never see.
inline Matrix enriched_weight_pinv(const Matrix& G_T, const Matrix& G_S_inv, const Matrix& G_val, double lambda) {
  const Matrix psi = G_T + lambda * G_val * G_S_inv * G_T;
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(psi + lambda * G_val).solve(psi);
}

inline BlendResult data_enriched(const TaskState& target, const TaskState& source, const EnrichedParams& params,
                                 const Dataset& val) {
  params.validate();
  const Index d = target.dim();
  if (source.dim() != d || params.G_T_val.rows() != d || val.dim() != d)
    throw InvalidInputError("data_enriched: dimension mismatch");
  BlendResult best;
  Matrix G_S_inv;
  try {
    G_S_inv = spd_inverse(source.G, "source Gram");
  } catch (const SingularMatrixError&) {
    if (!(source.lambda > 0.0)) throw;
    G_S_inv = source.A_inv;
    best.source_regularized = true;
  }
  for (double lambda : params.lambda_grid) {
    Matrix W;
    bool pinv = false;
    try {
      W = enriched_weight(target.G, G_S_inv, params.G_T_val, lambda);
    } catch (const SingularMatrixError&) {
      W = enriched_weight_pinv(target.G, G_S_inv, params.G_T_val, lambda);
      pinv = true;
    }
    const Vector theta = lambda == 0.0 ? source.theta_hat : blend(W, source.theta_hat, target.theta_hat);
    const double mse = validation_mse(theta, val);
    if (mse < best.val_mse) {
      best.theta = theta;
      best.W = W;
      best.val_mse = mse;
      best.lambda = lambda;
      best.gamma_pseudo_inverse = pinv;
    }
  }
  if (!best.theta.size()) throw InternalStateError("data_enriched: no finite candidate");
  return best;
}

struct SpectralParams {
  double alpha_step = 0.0;
  std::vector<long> k_grid;
  Vector Lambda;  // eigenvalues of the target curvature, ascending
  Matrix basis;   // orthonormal eigenvectors as columns
};

inline std::vector<long> default_k_grid() {
  std::vector<long> k{0};
  for (long p = 1; p <= 1024; p *= 2) k.push_back(p);
  return k;
}

// Eigendecomposition of the target ridge curvature G_T + lambda_T I (G_T itself for
// least squares); gradient steps are taken on the matching objective.
inline SpectralParams default_spectral_params(const TaskState& target) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(regularized(target.G, target.lambda));
  if (eig.info() != Eigen::Success) throw InternalStateError("spectral_finetune: eigensolver failed");
  SpectralParams p;
  p.Lambda = eig.eigenvalues();
  p.basis = eig.eigenvectors();
  const double top = p.Lambda.maxCoeff();
  if (!(top > 0.0)) throw InvalidInputError("spectral_finetune: target curvature is zero");
  p.alpha_step = 0.5 / top;
  p.k_grid = default_k_grid();
  return p;
}

inline Matrix spectral_weight(const SpectralParams& p, long k) {
  const Vector shrink = (1.0 - p.alpha_step * p.Lambda.array()).pow(static_cast<double>(k)).matrix();
  return p.basis * shrink.asDiagonal() * p.basis.transpose();
}

inline BlendResult spectral_finetune(const TaskState& target, const TaskState& source, const SpectralParams& params,
                                     const Dataset& val) {
  const Index d = target.dim();
  if (source.dim() != d || params.Lambda.size() != d || params.basis.rows() != d || val.dim() != d)
    throw InvalidInputError("spectral_finetune: dimension mismatch");
  if (!(params.alpha_step > 0.0)) throw InvalidInputError("spectral_finetune: step must be > 0");
  if (params.k_grid.empty()) throw InvalidInputError("spectral_finetune: empty step grid");
  const bool stable = ((1.0 - params.alpha_step * params.Lambda.array()).abs() <= 1.0).all();

  BlendResult best;
  best.theta = target.theta_hat;
  best.W = Matrix::Zero(d, d);
  best.val_mse = validation_mse(target.theta_hat, val);
  best.reverted = true;
  best.alpha = params.alpha_step;
  if (!stable) return best;
  for (long k : params.k_grid) {
    if (k < 0) throw InvalidInputError("spectral_finetune: negative step count");
    const Matrix W = spectral_weight(params, k);
    const Vector theta = blend(W, source.theta_hat, target.theta_hat);
    const double mse = validation_mse(theta, val);
    if (mse < best.val_mse) {
      best.theta = theta;
      best.W = W;
      best.val_mse = mse;
      best.k = k;
      best.reverted = false;
    }
  }
  return best;
}

// Target-only ridge written as the W = 0 blend.
inline BlendResult target_only(const TaskState& target, const Dataset& val) {
  BlendResult r;
  r.theta = target.theta_hat;
  r.W = Matrix::Zero(target.dim(), target.dim());
  r.val_mse = validation_mse(target.theta_hat, val);
  r.lambda = target.lambda;
  return r;
}

}  // namespace sampleshare
