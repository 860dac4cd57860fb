#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "sampleshare/errors.hpp"

namespace sampleshare {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace tolerance {
// Max-abs residual accepted for A * inverse(A) against the identity.
inline constexpr double kInverseResidual = 1e-8;
// Relative slack (times the matrix norm) below zero tolerated for PSD quantities.
inline constexpr double kPsdSlack = 1e-10;
}  // namespace tolerance

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) throw InvalidInputError(std::string(what) + " contains NaN or Inf");
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInputError("max_abs_diff: shape mismatch");
  return (a - b).cwiseAbs().maxCoeff();
}

inline void symmetrize(Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
}

// X^T X, upper triangle accumulated and mirrored so the result is exactly symmetric.
inline Matrix gram(const Matrix& X) {
  if (X.cols() == 0) throw InvalidInputError("gram: design has zero columns");
  const Index d = X.cols();
  Matrix g = Matrix::Zero(d, d);
  g.selfadjointView<Eigen::Upper>().rankUpdate(X.transpose());
  g.triangularView<Eigen::StrictlyLower>() = g.transpose();
  return g;
}

// In-place lower Cholesky factor. Only the lower triangle of the result is meaningful.
inline Matrix cholesky_lower(const Matrix& a, std::string_view context = {}) {
  if (a.rows() != a.cols()) throw InvalidInputError("cholesky: matrix is not square");
  const Index d = a.rows();
  Matrix l = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) throw SingularMatrixError(static_cast<std::size_t>(j), std::string(context));
    const double root = std::sqrt(pivot);
    l(j, j) = root;
    for (Index i = j + 1; i < d; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / root;
    }
  }
  return l;
}

// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
inline Matrix spd_inverse(const Matrix& a, std::string_view context = {}) {
  require_finite(a, "spd_inverse input");
  const Matrix l = cholesky_lower(a, context);
  const Index d = a.rows();
  const Matrix l_inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  Matrix inv = l_inv.transpose() * l_inv;
  symmetrize(inv);
  return inv;
}

namespace detail {

[[noreturn, gnu::cold, gnu::noinline]] inline void bad_sherman_morrison_denominator(double denom) {
  throw InternalStateError("sherman_morrison: denominator " + std::to_string(denom) +
                           " is not positive; inverse is not SPD");
}

}  // namespace detail

// (A + x x^T)^{-1} from A^{-1}, overwriting `a_inv`. Cost O(d^2).
inline void sherman_morrison_inplace(Matrix& a_inv, const Vector& x) {
  if (a_inv.rows() != x.size() || a_inv.cols() != x.size())
    throw InvalidInputError("sherman_morrison: dimension mismatch");
  // Reused scratch keeps the update allocation-free after the first call.
  thread_local Vector k;
  k.noalias() = a_inv * x;
  const double denom = 1.0 + x.dot(k);
  if (!(denom > 0.0)) detail::bad_sherman_morrison_denominator(denom);
  // Subtract k k^T / denom and symmetrize in one pass over the upper triangle.
  const Index d = a_inv.rows();
  const double scale = 1.0 / denom;
  for (Index j = 0; j < d; ++j) {
    const double kj = k(j) * scale;
    for (Index i = 0; i < j; ++i) {
      const double v = 0.5 * (a_inv(i, j) + a_inv(j, i)) - k(i) * kj;
      a_inv(i, j) = v;
      a_inv(j, i) = v;
    }
    a_inv(j, j) -= k(j) * kj;
  }
}

inline Matrix sherman_morrison_update(const Matrix& a_inv, const Vector& x) {
  Matrix out = a_inv;
  sherman_morrison_inplace(out, x);
  return out;
}

// tr(A B) for square matrices of equal size without forming the product.
inline double trace_of_product(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

inline Matrix identity(Index d) { return Matrix::Identity(d, d); }

}  // namespace sampleshare
