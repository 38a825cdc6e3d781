#pragma once

#include <Eigen/Dense>

#include "ipca/errors.hpp"

namespace ipca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Relative eigenvalue cutoff below which a symmetric matrix is treated as not
/// positive definite: lambda_min <= kPdThreshold * lambda_max fails the check.
inline constexpr double kPdThreshold = 1e-12;

/// Dense symmetric matrix of doubles. Exact symmetry is enforced on
/// construction by replacing the input with (A + A^T) / 2.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& a);
  static SymMatrix identity(Index dim);

  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// Eigenvalues sorted non-increasing with matching orthonormal eigenvector
/// columns. Each eigenvector is oriented so its entry of largest absolute
/// value is non-negative (ties broken by lowest index).
struct EigenPairs {
  Vector values;
  Matrix vectors;
};

/// Full eigendecomposition of a symmetric matrix. Deterministic: identical
/// inputs give bit-identical outputs.
EigenPairs sym_eigendecompose(const SymMatrix& a);

/// Inverse of a symmetric positive definite matrix.
SymMatrix spd_inverse(const SymMatrix& a);

/// Principal square root of a symmetric positive definite matrix.
SymMatrix spd_sqrt(const SymMatrix& a);

/// Sum of squared entries.
double frobenius_norm_sq(const SymMatrix& a);

/// Lower-triangular Cholesky factor L with L * L^T = A.
Matrix cholesky_lower(const SymMatrix& a);

}  // namespace ipca
