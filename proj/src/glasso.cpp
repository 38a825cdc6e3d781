#include "ipca/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipca {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Inner lasso for one column:
//   minimize  0.5 b' W11 b - s12' b + lambda ||b||_1
// where W11 is W with row/column j dropped and s12 is column j of S without
// entry j. Works on full-size vectors, skipping index j. beta is warm-started
// and updated in place; v tracks W * beta (with beta_j fixed at 0).
void lasso_column(const Matrix& w, const Matrix& s, Index j, double lambda, Vector& beta,
                  double inner_tol, int max_inner) {
  const Index p = w.rows();
  Vector v = w * beta;
  for (int it = 0; it < max_inner; ++it) {
    double max_change = 0.0;
    for (Index m = 0; m < p; ++m) {
      if (m == j) continue;
      const double old = beta(m);
      const double grad = v(m) - w(m, m) * old;  // sum_{l != m} W_ml beta_l
      const double next = soft_threshold(s(m, j) - grad, lambda) / w(m, m);
      if (next != old) {
        beta(m) = next;
        v += w.col(m) * (next - old);
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    if (max_change <= inner_tol) break;
  }
}

// Assembles the precision matrix from the covariance iterate W and the
// per-column lasso coefficients B, then snaps tiny entries to exact zero.
Matrix recover_precision(const Matrix& w, const Matrix& b) {
  const Index p = w.rows();
  Matrix theta(p, p);
  for (Index j = 0; j < p; ++j) {
    double cross = 0.0;
    for (Index m = 0; m < p; ++m) {
      if (m != j) cross += w(m, j) * b(m, j);
    }
    const double tjj = 1.0 / (w(j, j) - cross);
    theta(j, j) = tjj;
    for (Index m = 0; m < p; ++m) {
      if (m != j) theta(m, j) = -b(m, j) * tjj;
    }
  }
  theta = 0.5 * (theta + theta.transpose()).eval();
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (i != j && std::abs(theta(i, j)) < kGlassoZeroThreshold) theta(i, j) = 0.0;
    }
  }
  return theta;
}

}  // namespace

double glasso_kkt_residual(const SymMatrix& s, const SymMatrix& theta, double lambda,
                           bool penalize_diagonal) {
  const Index p = s.dim();
  if (theta.dim() != p) {
    throw ShapeError("glasso_kkt_residual: dimension mismatch");
  }
  Matrix inv = spd_inverse(theta).mat();
  double worst = 0.0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      const double g = s(i, j) - inv(i, j);  // gradient of the smooth part
      const bool penalized = penalize_diagonal || i != j;
      double viol;
      if (!penalized) {
        viol = std::abs(g);
      } else if (theta(i, j) == 0.0) {
        viol = std::max(0.0, std::abs(g) - lambda);
      } else {
        viol = std::abs(g + lambda * (theta(i, j) > 0.0 ? 1.0 : -1.0));
      }
      worst = std::max(worst, viol);
    }
  }
  return worst;
}

double glasso_objective(const SymMatrix& s, const SymMatrix& theta, double lambda,
                        bool penalize_diagonal) {
  Eigen::LLT<Matrix> llt(theta.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("glasso_objective: theta is not positive definite");
  }
  double logdet = 0.0;
  for (Index i = 0; i < theta.dim(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  double l1 = 0.0;
  for (Index i = 0; i < theta.dim(); ++i) {
    for (Index j = 0; j < theta.dim(); ++j) {
      if (penalize_diagonal || i != j) l1 += std::abs(theta(i, j));
    }
  }
  return -logdet + (s.mat() * theta.mat()).trace() + lambda * l1;
}

SymMatrix graphical_lasso(const GlassoProblem& problem) {
  const Matrix& s = problem.s.mat();
  const Index p = problem.s.dim();
  const double lambda = problem.lambda;
  if (lambda < 0.0) {
    throw InvalidPenalty("graphical_lasso: lambda must be non-negative");
  }
  for (Index i = 0; i < p; ++i) {
    if (!(s(i, i) > 0.0)) {
      throw InvalidInput("graphical_lasso: diagonal entry " + std::to_string(i) +
                         " is not positive");
    }
  }
  if (lambda == 0.0) {
    spd_inverse(problem.s);  // unpenalized minimizer exists only for PD input
  }

  Matrix w = s;
  if (problem.penalize_diagonal) {
    w.diagonal().array() += lambda;
  }
  Matrix b = Matrix::Zero(p, p);

  // Inner tolerance well under the certificate tolerance; the outer loop is
  // driven by the KKT residual itself.
  const double inner_tol = std::max(1e-12, 1e-3 * problem.tol);

  double residual = std::numeric_limits<double>::infinity();
  Matrix theta;
  for (int sweep = 0; sweep < problem.max_sweeps; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      Vector beta = b.col(j);
      beta(j) = 0.0;
      lasso_column(w, s, j, lambda, beta, inner_tol, 200);
      b.col(j) = beta;
      Vector w12 = w * beta;  // beta_j == 0, so this is W11 * beta
      for (Index m = 0; m < p; ++m) {
        if (m != j) {
          w(m, j) = w12(m);
          w(j, m) = w12(m);
        }
      }
    }
    theta = recover_precision(w, b);
    try {
      residual = glasso_kkt_residual(problem.s, SymMatrix(theta), lambda,
                                     problem.penalize_diagonal);
    } catch (const NotPositiveDefinite&) {
      residual = std::numeric_limits<double>::infinity();
      continue;  // iterate not yet invertible; keep sweeping
    }
    if (residual <= problem.tol) {
      return SymMatrix(theta);
    }
  }
  throw NoConvergence("graphical_lasso: sweep limit reached", residual,
                      theta.size() > 0 ? std::optional<Matrix>(theta) : std::nullopt);
}

}  // namespace ipca
