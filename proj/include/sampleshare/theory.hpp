#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "sampleshare/linalg.hpp"

namespace sampleshare {

// Large-source isotropic-design regime: n >> d, fixed n_T, n_val, O(1) ridge terms.
struct AsymptoticInputs {
  double d = 20;
  double n_T = 500;
  double n = 10000;
  double n_val = 50;
  double lambda_T = 1.0;
  double lambda_c = 1.0;
  Vector theta_T;
  Vector delta_theta;
  double sigma_T = 1.0;
  double sigma_S = 0.5;

  void validate() const {
    if (!(d >= 1.0) || !(n >= 1.0)) throw InvalidInputError("asymptotic inputs: need d >= 1 and n >= 1");
    if (theta_T.size() != delta_theta.size())
      throw InvalidInputError("asymptotic inputs: theta_T and delta_theta sizes differ");
    if (!theta_T.allFinite() || !delta_theta.allFinite())
      throw InvalidInputError("asymptotic inputs: non-finite parameters");
  }

  double pooled() const { return n_T + n + lambda_c; }
};

struct AsymptoticTerms {
  double target_shrinkage = 0.0;  // n_val lambda_T^2 ||theta_T||^2 / (n_T + lambda_T)^2
  double target_noise = 0.0;      // sigma_T^2 n_val d n_T / (n_T + lambda_T)^2
  double mismatch = 0.0;          // -n_val ||n dtheta - lambda_c theta_T||^2 / N^2
  double pooled_noise = 0.0;      // -n_val d (sigma_S^2 n + sigma_T^2 n_T) / N^2

  double total() const { return target_shrinkage + target_noise + mismatch + pooled_noise; }
};

inline AsymptoticTerms asymptotic_terms(const AsymptoticInputs& in) {
  in.validate();
  const double t = in.n_T + in.lambda_T;
  const double N = in.pooled();
  AsymptoticTerms out;
  out.target_shrinkage = in.n_val * in.lambda_T * in.lambda_T * in.theta_T.squaredNorm() / (t * t);
  out.target_noise = in.sigma_T * in.sigma_T * in.n_val * in.d * in.n_T / (t * t);
  out.mismatch = -in.n_val * (in.n * in.delta_theta - in.lambda_c * in.theta_T).squaredNorm() / (N * N);
  out.pooled_noise =
      -in.n_val * in.d * (in.sigma_S * in.sigma_S * in.n + in.sigma_T * in.sigma_T * in.n_T) / (N * N);
  return out;
}

inline double asymptotic_gain(const AsymptoticInputs& in) { return asymptotic_terms(in).total(); }

enum class Sensitivity { lambda_c, delta_theta, sigma_T_sq, sigma_S_sq };

inline Sensitivity parse_sensitivity(std::string_view name) {
  if (name == "lambda_c") return Sensitivity::lambda_c;
  if (name == "delta_theta") return Sensitivity::delta_theta;
  if (name == "sigma_T_sq") return Sensitivity::sigma_T_sq;
  if (name == "sigma_S_sq") return Sensitivity::sigma_S_sq;
  throw InvalidInputError("unknown sensitivity '" + std::string(name) + "'");
}

inline std::string_view to_string(Sensitivity s) {
  switch (s) {
    case Sensitivity::lambda_c: return "lambda_c";
    case Sensitivity::delta_theta: return "delta_theta";
    case Sensitivity::sigma_T_sq: return "sigma_T_sq";
    case Sensitivity::sigma_S_sq: return "sigma_S_sq";
  }
  return "unknown";
}

using SensitivityValue = std::variant<double, Vector>;

// Leading-order derivatives of the asymptotic gain.
//   sigma_T_sq:  derivative of the target-noise term (the pooled term adds O(1/n)).
//   sigma_S_sq:  derivative of the pooled-noise term.
//   delta_theta: gradient of the mismatch term, exact.
//   lambda_c:    (2 n_val / n) (eps^2 + <dtheta, theta_T>), dropping O(1/n^2).
inline SensitivityValue sensitivity(const AsymptoticInputs& in, Sensitivity which) {
  in.validate();
  const double N = in.pooled();
  switch (which) {
    case Sensitivity::sigma_T_sq: {
      const double t = in.n_T + in.lambda_T;
      return in.n_val * in.d * in.n_T / (t * t);
    }
    case Sensitivity::sigma_S_sq:
      return -in.n_val * in.d * in.n / (N * N);
    case Sensitivity::delta_theta:
      return Vector(-2.0 * in.n_val * in.n / (N * N) * (in.n * in.delta_theta - in.lambda_c * in.theta_T));
    case Sensitivity::lambda_c:
      return 2.0 * in.n_val / in.n * (in.delta_theta.squaredNorm() + in.delta_theta.dot(in.theta_T));
  }
  throw InvalidInputError("unknown sensitivity selector");
}

inline SensitivityValue sensitivity(const AsymptoticInputs& in, std::string_view which) {
  return sensitivity(in, parse_sensitivity(which));
}

// The alternative closed forms sometimes quoted for two of the derivatives: the
// gradient without the factor 2, and the lambda_c slope with the alignment term
// entering as ||theta_T||^2 - <theta_S, theta_T>. Kept for comparison only.
inline SensitivityValue sensitivity_alternative(const AsymptoticInputs& in, Sensitivity which) {
  in.validate();
  const double N = in.pooled();
  switch (which) {
    case Sensitivity::delta_theta:
      return Vector(-in.n_val * in.n / (N * N) * (in.n * in.delta_theta - in.lambda_c * in.theta_T));
    case Sensitivity::lambda_c: {
      const Vector theta_S = in.theta_T + in.delta_theta;
      return 2.0 * in.n_val / in.n *
             (in.delta_theta.squaredNorm() + in.theta_T.squaredNorm() - theta_S.dot(in.theta_T));
    }
    default:
      return sensitivity(in, which);
  }
}

}  // namespace sampleshare
