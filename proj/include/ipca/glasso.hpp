#pragma once

#include "ipca/numerics.hpp"

namespace ipca {

/// L1-penalized inverse covariance problem:
///   minimize  -log|Theta| + tr(S Theta) + lambda * ||Theta||_1(,off)
/// over symmetric positive definite Theta. The diagonal is penalized only
/// when penalize_diagonal is set.
struct GlassoProblem {
  SymMatrix s;
  double lambda = 0.0;
  bool penalize_diagonal = false;
  double tol = 1e-6;
  int max_sweeps = 500;
};

/// Entries of the solution below this magnitude are reported as exact zeros.
inline constexpr double kGlassoZeroThreshold = 1e-10;

/// Solves the problem by block coordinate descent over columns with an inner
/// lasso solve, iterating until the stationarity certificate passes:
///   |(S - Theta^-1)_ij| <= lambda + tol            (penalized, Theta_ij == 0)
///   |(S - Theta^-1)_ij + lambda sign(Theta_ij)| <= tol   (penalized, nonzero)
///   |(S - Theta^-1)_ii| <= tol                     (unpenalized diagonal)
/// Returns the precision matrix. lambda == 0 requires S positive definite.
SymMatrix graphical_lasso(const GlassoProblem& problem);

/// Largest violation of the stationarity conditions above; <= tol certifies
/// the solution independently of how it was produced.
double glasso_kkt_residual(const SymMatrix& s, const SymMatrix& theta, double lambda,
                           bool penalize_diagonal = false);

/// Objective value -log|Theta| + tr(S Theta) + lambda * ||Theta||_1(,off).
double glasso_objective(const SymMatrix& s, const SymMatrix& theta, double lambda,
                        bool penalize_diagonal = false);

}  // namespace ipca
