#include "ipca/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ipca {

namespace {

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) {
    throw InvalidInput(std::string(who) + ": input has non-finite entries");
  }
}

// Orients one eigenvector in place: the entry of largest absolute value is
// made non-negative, lowest index winning ties.
void fix_sign(Eigen::Ref<Vector> v) {
  Index pivot = 0;
  double best = std::abs(v(0));
  for (Index i = 1; i < v.size(); ++i) {
    const double m = std::abs(v(i));
    if (m > best) {
      best = m;
      pivot = i;
    }
  }
  if (v(pivot) < 0.0) {
    v = -v;
  }
}

struct SpdEigen {
  Vector values;  // descending, all positive
  Matrix vectors;
};

SpdEigen spd_eigendecompose(const SymMatrix& a, const char* who) {
  EigenPairs e = sym_eigendecompose(a);
  const double top = e.values(0);
  const double bottom = e.values(e.values.size() - 1);
  if (!(bottom > kPdThreshold * std::max(top, 0.0))) {
    throw NotPositiveDefinite(std::string(who) + ": smallest eigenvalue " +
                              std::to_string(bottom) + " fails the positive definite cutoff");
  }
  return {e.values, e.vectors};
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw ShapeError("SymMatrix: expected a square matrix with dim >= 1, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

EigenPairs sym_eigendecompose(const SymMatrix& a) {
  require_finite(a.mat(), "sym_eigendecompose");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.mat());
  if (solver.info() != Eigen::Success) {
    throw InvalidInput("sym_eigendecompose: eigensolver failed to converge");
  }
  const Index n = a.dim();
  // Reorder descending; a stable sort keeps the solver's order among exact
  // ties so degenerate inputs stay deterministic.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index lhs, Index rhs) {
    return solver.eigenvalues()(lhs) > solver.eigenvalues()(rhs);
  });
  EigenPairs out;
  out.values = Vector(n);
  out.vectors = Matrix(n, n);
  for (Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(order[i]);
    out.vectors.col(i) = solver.eigenvectors().col(order[i]);
    fix_sign(out.vectors.col(i));
  }
  return out;
}

SymMatrix spd_inverse(const SymMatrix& a) {
  SpdEigen e = spd_eigendecompose(a, "spd_inverse");
  return SymMatrix(e.vectors * e.values.cwiseInverse().asDiagonal() * e.vectors.transpose());
}

SymMatrix spd_sqrt(const SymMatrix& a) {
  SpdEigen e = spd_eigendecompose(a, "spd_sqrt");
  return SymMatrix(e.vectors * e.values.cwiseSqrt().asDiagonal() * e.vectors.transpose());
}

double frobenius_norm_sq(const SymMatrix& a) {
  require_finite(a.mat(), "frobenius_norm_sq");
  return a.mat().squaredNorm();
}

Matrix cholesky_lower(const SymMatrix& a) {
  spd_eigendecompose(a, "cholesky_lower");  // uniform positive definite cutoff
  Eigen::LLT<Matrix> llt(a.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky_lower: factorization failed");
  }
  return llt.matrixL();
}

}  // namespace ipca
