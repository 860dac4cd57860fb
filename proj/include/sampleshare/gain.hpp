#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "sampleshare/estimators.hpp"
#include "sampleshare/linalg.hpp"
#include "sampleshare/model.hpp"

namespace sampleshare {

// How the noise corrections of the plug-in gain treat the target-coefficient term.
//
// The collaborative residual is G_S theta_S - (G_S + lambda_c I) theta_T, so the
// target noise enters through (G_S + lambda_c I). `pooled_shift` uses exactly that
// matrix (and the full G_S A_S^-1 G_S A_S^-1 G_S source correction), which makes the
// estimator unbiased when every ridge parameter is zero. `source_ridge` substitutes
// A_S(n) = G_S + lambda_S I and the shorter source correction; it is kept for
// comparison and is biased even without regularization.
enum class CorrectionForm { pooled_shift, source_ridge };

inline constexpr CorrectionForm kDefaultCorrection = CorrectionForm::pooled_shift;

// Everything the gain formulas need at one source-prefix length n.
struct GainInputs {
  const TaskState& target;   // G_T, A_T^-1, theta_T_hat, lambda_T
  const TaskState& source;   // G_S(n), A_S(n)^-1, theta_S_hat(n), lambda_S
  const Matrix& A_c_inv;     // A_c(n)^-1
  double lambda_c;
  const Matrix& val_X;

  void check() const {
    const Index d = target.dim();
    if (source.dim() != d || A_c_inv.rows() != d || A_c_inv.cols() != d || val_X.cols() != d)
      throw InvalidInputError("gain inputs: dimension mismatch");
  }
};

inline GainInputs gain_inputs(const TaskState& target, const TaskState& source, const CollabState& collab,
                              const Matrix& val_X) {
  return {target, source, collab.A_c_inv, collab.lambda_c, val_X};
}

struct GainComponents {
  Matrix U_T, V_n;
  Matrix M_T, N_n;
  Matrix K1, K2, K3;
  Matrix L1T, L2T;
};

// G_S + lambda_c I or A_S(n), depending on the correction form.
inline Matrix target_noise_carrier(const GainInputs& in, CorrectionForm form) {
  return regularized(in.source.G, form == CorrectionForm::pooled_shift ? in.lambda_c : in.source.lambda);
}

inline GainComponents gain_components(const GainInputs& in, double sigma_T, double sigma_S,
                                      CorrectionForm form = kDefaultCorrection) {
  in.check();
  const double sT2 = sigma_T * sigma_T;
  const double sS2 = sigma_S * sigma_S;
  const double lT = in.target.lambda;
  const Matrix& GT = in.target.G;
  const Matrix& GS = in.source.G;
  const Matrix& AT_inv = in.target.A_inv;
  const Matrix& AS_inv = in.source.A_inv;
  const Matrix target_cov = AT_inv * GT * AT_inv;

  GainComponents c;
  c.U_T = in.val_X * AT_inv;
  c.V_n = in.val_X * in.A_c_inv;
  c.L1T = sT2 * GT;
  c.L2T = -lT * lT * sT2 * target_cov;
  c.M_T = c.L1T + c.L2T;
  const Matrix src = GS * AS_inv * GS * AS_inv;
  c.K1 = form == CorrectionForm::pooled_shift ? Matrix(-sS2 * src * GS) : Matrix(-sS2 * src);
  const Matrix carrier = target_noise_carrier(in, form);
  c.K2 = -sT2 * carrier * target_cov * carrier;
  c.K3 = sS2 * GS + sT2 * GT;
  c.N_n = c.K1 + c.K2 + c.K3;
  return c;
}

// Plug-in estimate of the transfer gain at the prefix length held by `in`.
inline double estimate_gain(const GainInputs& in, double sigma_T, double sigma_S,
                            CorrectionForm form = kDefaultCorrection) {
  if (sigma_T < 0.0 || sigma_S < 0.0) throw InvalidInputError("noise levels must be >= 0");
  const GainComponents c = gain_components(in, sigma_T, sigma_S, form);
  const Vector& tT = in.target.theta_hat;
  const Vector& tS = in.source.theta_hat;
  const double lT = in.target.lambda;
  const Vector shift = in.source.G * (tS - tT) - in.lambda_c * tT;
  return lT * lT * (c.U_T * tT).squaredNorm() - (c.V_n * shift).squaredNorm() +
         trace_of_product(c.U_T * c.M_T, c.U_T.transpose()) -
         trace_of_product(c.V_n * c.N_n, c.V_n.transpose());
}

inline double estimate_gain(const TaskState& target, const TaskState& source, const CollabState& collab,
                            const Matrix& val_X, double sigma_T, double sigma_S,
                            CorrectionForm form = kDefaultCorrection) {
  return estimate_gain(gain_inputs(target, source, collab, val_X), sigma_T, sigma_S, form);
}

// Mean/covariance structure of z = [theta_S_hat; theta_T_hat] and the quadratic
// form D with  gain_hat = z^T D z + const.
struct GainMoments {
  double bias = 0.0;
  Matrix D;
  Vector mu;
  Matrix Sigma;
  double variance = 0.0;
  Vector delta_theta;
  Vector delta_theta_b;
};

// Var(z^T D z) for z ~ N(mu, Sigma) and symmetric D.
inline double gaussian_quadratic_variance(const Matrix& D, const Vector& mu, const Matrix& Sigma) {
  const Matrix DS = D * Sigma;
  return 2.0 * trace_of_product(DS, DS) + 4.0 * mu.dot(DS * (D * mu));
}

inline Matrix quadratic_form_matrix(const GainInputs& in, CorrectionForm form) {
  const Index d = in.target.dim();
  const Matrix U = in.val_X * in.target.A_inv;
  const Matrix V = in.val_X * in.A_c_inv;
  const Matrix VtV = V.transpose() * V;
  const Matrix& GS = in.source.G;
  const Matrix carrier = target_noise_carrier(in, form);
  const double lT = in.target.lambda;
  Matrix D(2 * d, 2 * d);
  D.topLeftCorner(d, d) = -GS * VtV * GS;
  D.topRightCorner(d, d) = GS * VtV * carrier;
  D.bottomLeftCorner(d, d) = carrier * VtV * GS;
  D.bottomRightCorner(d, d) = lT * lT * U.transpose() * U - carrier * VtV * carrier;
  return D;
}

inline Matrix coefficient_covariance(const GainInputs& in, double sigma_T, double sigma_S) {
  const Index d = in.target.dim();
  const Matrix& AS_inv = in.source.A_inv;
  const Matrix& AT_inv = in.target.A_inv;
  Matrix Sigma = Matrix::Zero(2 * d, 2 * d);
  Sigma.topLeftCorner(d, d) = sigma_S * sigma_S * AS_inv * in.source.G * AS_inv;
  Sigma.bottomRightCorner(d, d) = sigma_T * sigma_T * AT_inv * in.target.G * AT_inv;
  return Sigma;
}

inline Vector coefficient_mean(const GainInputs& in, const Vector& theta_S, const Vector& theta_T) {
  const Index d = in.target.dim();
  Vector mu(2 * d);
  mu.head(d) = in.source.A_inv * (in.source.G * theta_S);
  mu.tail(d) = in.target.A_inv * (in.target.G * theta_T);
  return mu;
}

// E[gain_hat] - gain*. For `pooled_shift` this is the exact expectation gap; for
// `source_ridge` it is the printed expansion that accompanies that form.
inline double oracle_bias(const GainInputs& in, const GroundTruth& truth,
                          CorrectionForm form = kDefaultCorrection) {
  in.check();
  const Matrix U = in.val_X * in.target.A_inv;
  const Matrix V = in.val_X * in.A_c_inv;
  const Matrix& GS = in.source.G;
  const double lT = in.target.lambda;
  const double lS = in.source.lambda;
  const double lc = in.lambda_c;
  const Vector& thT = truth.theta_T;
  const Vector& thS = truth.theta_S;
  const Vector shrunk_T = in.target.A_inv * thT;
  const Vector delta_theta = thS - thT;
  const Vector delta_theta_b = lT * shrunk_T - lS * (in.source.A_inv * thS);

  const double target_part = std::pow(lT, 4) * (U * shrunk_T).squaredNorm() -
                             2.0 * lT * lT * (U * thT).dot(lT * (U * shrunk_T));
  const Vector mismatch = V * (GS * delta_theta - lc * thT);
  if (form == CorrectionForm::pooled_shift) {
    const Vector extra = V * (GS * delta_theta_b + lc * lT * shrunk_T);
    return target_part - extra.squaredNorm() - 2.0 * mismatch.dot(extra);
  }
  const Vector printed_a = V * (GS * delta_theta_b - lc * lT * shrunk_T);
  const Vector printed_b = V * (GS * delta_theta_b + lc * lT * shrunk_T);
  return target_part - printed_a.squaredNorm() - mismatch.dot(printed_b);
}

inline GainMoments oracle_variance(const GainInputs& in, const GroundTruth& truth,
                                   CorrectionForm form = kDefaultCorrection) {
  in.check();
  GainMoments m;
  m.D = quadratic_form_matrix(in, form);
  m.mu = coefficient_mean(in, truth.theta_S, truth.theta_T);
  m.Sigma = coefficient_covariance(in, truth.sigma_T, truth.sigma_S);
  m.variance = gaussian_quadratic_variance(m.D, m.mu, m.Sigma);
  m.bias = oracle_bias(in, truth, form);
  m.delta_theta = truth.theta_S - truth.theta_T;
  m.delta_theta_b = in.target.lambda * (in.target.A_inv * truth.theta_T) -
                    in.source.lambda * (in.source.A_inv * truth.theta_S);
  return m;
}

// Variance formula with the fitted coefficients standing in for the truth in mu.
inline double plugin_variance(const GainInputs& in, double sigma_T, double sigma_S,
                              CorrectionForm form = kDefaultCorrection) {
  in.check();
  const Matrix D = quadratic_form_matrix(in, form);
  const Vector mu = coefficient_mean(in, in.source.theta_hat, in.target.theta_hat);
  const Matrix Sigma = coefficient_covariance(in, sigma_T, sigma_S);
  return std::max(0.0, gaussian_quadratic_variance(D, mu, Sigma));
}

// One-sided Chebyshev (Cantelli) lower confidence bound on the true gain,
// holding with probability at least 1 - delta_conf.
inline double lower_bound(double delta_hat, double variance, double bias, double delta_conf) {
  if (!(delta_conf > 0.0 && delta_conf < 1.0))
    throw InvalidInputError("lower_bound: confidence level must lie in (0, 1)");
  if (variance < 0.0) throw InvalidInputError("lower_bound: negative variance");
  return delta_hat - std::sqrt(variance * (1.0 - delta_conf) / delta_conf) - bias;
}

inline double decision_statistic(double delta_hat, double var_hat, double alpha) {
  return delta_hat - alpha * std::sqrt(std::max(0.0, var_hat));
}

struct OracleQuantities {
  double delta_star = 0.0;
  double bias = 0.0;
  double variance_exact = 0.0;
};

struct GainReport {
  Index n = 0;
  double delta_hat = 0.0;
  double var_hat = 0.0;
  double kappa = 0.0;
  bool available = true;  // false while the source fit is not yet defined
  std::optional<OracleQuantities> oracle;
};

struct GainEstimate {
  double delta_hat = 0.0;
  double var_hat = 0.0;
};

// Streaming evaluation of (gain_hat, var_hat) for a fixed target task. Target-side
// products are computed once; each call costs a fixed number of d x d products.
class GainEvaluator {
 public:
  GainEvaluator(const TaskState& target, const Matrix& val_X, double lambda_c, double sigma_T,
                double sigma_S, CorrectionForm form = kDefaultCorrection)
      : lambda_c_(lambda_c), sigma_T2_(sigma_T * sigma_T), sigma_S2_(sigma_S * sigma_S), form_(form) {
    if (val_X.cols() != target.dim()) throw InvalidInputError("GainEvaluator: dimension mismatch");
    if (sigma_T < 0.0 || sigma_S < 0.0) throw InvalidInputError("noise levels must be >= 0");
    const double lT = target.lambda;
    G_T_ = target.G;
    theta_T_ = target.theta_hat;
    G_val_ = gram(val_X);
    target_cov_ = target.A_inv * target.G * target.A_inv;
    const Matrix& target_cov = target_cov_;
    const Matrix UtU = target.A_inv * G_val_ * target.A_inv;
    target_quad_ = lT * lT * theta_T_.dot(UtU * theta_T_);
    const Matrix M_T = sigma_T2_ * target.G - lT * lT * sigma_T2_ * target_cov;
    target_trace_ = trace_of_product(M_T, UtU);
    lT2_UtU_ = lT * lT * UtU;
    Sigma_T_ = sigma_T2_ * target_cov;
    mu_T_ = target.A_inv * (target.G * theta_T_);
  }

  GainEstimate operator()(const Matrix& G_S, const Matrix& A_S_inv, double lambda_S, const Vector& theta_S,
                          const Matrix& A_c_inv) const {
    const double beta = form_ == CorrectionForm::pooled_shift ? lambda_c_ : lambda_S;
    const Matrix W = A_c_inv * G_val_ * A_c_inv;  // V^T V
    const Vector shift = G_S * (theta_S - theta_T_) - lambda_c_ * theta_T_;
    const double quad = shift.dot(W * shift);

    const Matrix P = G_S * A_S_inv;
    const Matrix PP = P * P;
    const Matrix GW = G_S * W;
    const Matrix GWG = GW * G_S;
    // carrier * W * carrier with carrier = G_S + beta I
    const Matrix CWC = GWG + beta * (GW + GW.transpose()) + beta * beta * W;

    const double k1 = form_ == CorrectionForm::pooled_shift ? -sigma_S2_ * trace_of_product(PP, GW)
                                                            : -sigma_S2_ * trace_of_product(PP, W);
    const double k2 = -sigma_T2_ * trace_of_product(target_cov_, CWC);
    const double k3 = sigma_S2_ * trace_of_product(G_S, W) + sigma_T2_ * trace_of_product(G_T_, W);

    GainEstimate out;
    out.delta_hat = target_quad_ - quad + target_trace_ - (k1 + k2 + k3);

    const Matrix D11 = -GWG;
    const Matrix D12 = GWG + beta * GW;  // G_S W carrier
    const Matrix D22 = lT2_UtU_ - CWC;
    const Matrix Sigma_S = sigma_S2_ * (A_S_inv * P.transpose());
    const Matrix X11 = D11 * Sigma_S;
    const Matrix X12 = D12 * Sigma_T_;
    const Matrix X21 = D12.transpose() * Sigma_S;
    const Matrix X22 = D22 * Sigma_T_;
    const double tr = trace_of_product(X11, X11) + 2.0 * trace_of_product(X12, X21) +
                      trace_of_product(X22, X22);
    const Vector mu_S = A_S_inv * (G_S * theta_S);
    const Vector top = D11 * mu_S + D12 * mu_T_;
    const Vector bottom = D12.transpose() * mu_S + D22 * mu_T_;
    const double mean_part = top.dot(Sigma_S * top) + bottom.dot(Sigma_T_ * bottom);
    out.var_hat = std::max(0.0, 2.0 * tr + 4.0 * mean_part);
    return out;
  }

  GainEstimate operator()(const GainInputs& in) const {
    if (in.lambda_c != lambda_c_) throw InvalidInputError("GainEvaluator: lambda_c differs");
    return (*this)(in.source.G, in.source.A_inv, in.source.lambda, in.source.theta_hat, in.A_c_inv);
  }

 private:
  double lambda_c_;
  double sigma_T2_;
  double sigma_S2_;
  CorrectionForm form_;
  Matrix G_T_;
  Vector theta_T_;
  Matrix G_val_;
  double target_quad_ = 0.0;
  double target_trace_ = 0.0;
  Matrix lT2_UtU_;
  Matrix target_cov_;
  Matrix Sigma_T_;
  Vector mu_T_;
};

}  // namespace sampleshare
