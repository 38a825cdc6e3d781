#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ipca/dataset.hpp"
#include "ipca/numerics.hpp"

namespace ipca {

enum class PenaltyFamily {
  None,
  AdditiveFrobenius,
  MultiplicativeFrobenius,
  AdditiveL1Cov,
  AdditiveL1Corr,
};

std::string penalty_family_name(PenaltyFamily family);

/// Penalty family plus its parameters. Additive families carry lambda_sigma
/// and one lambda per view; the multiplicative family carries only the
/// per-view lambdas; None carries nothing.
struct PenaltySpec {
  PenaltyFamily family = PenaltyFamily::None;
  std::optional<double> lambda_sigma;
  std::vector<double> lambda_k;

  static PenaltySpec none();
  static PenaltySpec additive_frobenius(double lambda_sigma, std::vector<double> lambda_k);
  static PenaltySpec multiplicative_frobenius(std::vector<double> lambda_k);
  static PenaltySpec additive_l1_cov(double lambda_sigma, std::vector<double> lambda_k);
  static PenaltySpec additive_l1_corr(double lambda_sigma, std::vector<double> lambda_k);

  /// Checks the family/parameter shape rules and non-negativity against a
  /// view count. Throws InvalidPenalty.
  void validate(int view_count) const;

  /// Copy with every parameter multiplied by `factor`.
  PenaltySpec scaled(double factor) const;
};

struct FitInit {
  std::optional<SymMatrix> sigma0;       // defaults to the identity
  std::vector<SymMatrix> delta0;         // defaults to identities
};

struct FitOptions {
  int max_iter = 100;
  double rel_tol = 1e-6;
  FitInit init;
  /// One pass of the correlation-path sweep (the default for that family).
  std::optional<bool> l1_onestep;
  /// Sigma-init / Delta / Sigma-final ordering for the correlation path.
  /// Defaults to automatic: enabled iff sqrt(n) < p / sqrt(p_k) for every k.
  std::optional<bool> large_p_order;
};

/// Result of any covariance fit. sigma_hat is normalized to trace(sigma) = n
/// and every delta_hat carries the compensating inverse factor, so the
/// products sigma (x) delta_k are untouched; sigma_scale records the factor
/// applied (raw sigma = sigma_hat / sigma_scale, raw delta = delta * scale).
struct CovarianceFit {
  SymMatrix sigma_hat;
  std::vector<SymMatrix> delta_hat;
  std::vector<Vector> mu_hat;
  std::vector<double> objective_trace;  // one entry per block update, plus the start
  bool converged = false;
  int iterations = 0;
  PenaltySpec penalty;
  double sigma_scale = 1.0;

  CovarianceFit() : sigma_hat(SymMatrix::identity(1)) {}
};

/// One "regularize eigenvalues" step of the Frobenius flip-flop updates:
///   (gamma + sqrt(gamma^2 + 8 * dim * weight)) / (2 * dim).
/// For the shared-covariance update dim = p and weight is lambda_sigma
/// (additive) or sum_k lambda_k ||Delta_k^-1||_F^2 (multiplicative); the view
/// updates use dim = n with the symmetric weights.
double eigenvalue_shrinkage(double gamma, double dim, double weight);

/// Penalized log-likelihood of centered views at the given precisions:
///   p log|Sigma^-1| + n sum_k log|Delta_k^-1|
///     - sum_k tr(Sigma^-1 X_k Delta_k^-1 X_k')  -  P(...)
double penalized_loglik(const MultiViewDataset& data, const SymMatrix& sigma_inv,
                        const std::vector<SymMatrix>& delta_inv, const PenaltySpec& penalty);

/// Unpenalized maximum likelihood via the alternating fixed point
///   Sigma = (1/p) sum_k X_k Delta_k^-1 X_k',  Delta_k = (1/n) X_k' Sigma^-1 X_k.
/// Exists only when the column means are known a priori and the stacked data
/// has full row rank with every view of full column rank; otherwise throws
/// NonexistentMLE. Iterates until the fixed-point residuals drop below
/// rel_tol relative to the iterate norms.
CovarianceFit fit_unpenalized(const MultiViewDataset& data, bool means_known,
                              const FitOptions& options = {});

/// Flip-flop solver for the multiplicative Frobenius penalty
///   ||Sigma^-1||_F^2 * sum_k lambda_k ||Delta_k^-1||_F^2.
/// Each block update is an eigendecomposition followed by the shrinkage map
///   phi_i = (gamma_i + sqrt(gamma_i^2 + 8 p sum_k lambda_k ||Delta_k^-1||_F^2)) / (2p)
/// (and symmetrically for each Delta_k). Geodesic convexity makes the
/// reached solution global and independent of initialization.
CovarianceFit fit_multiplicative_frobenius(const MultiViewDataset& data,
                                           const PenaltySpec& penalty,
                                           const FitOptions& options = {});

/// Flip-flop solver for the additive Frobenius penalty
///   lambda_sigma ||Sigma^-1||_F^2 + sum_k lambda_k ||Delta_k^-1||_F^2,
/// with shrinkage maps phi_i = (gamma_i + sqrt(gamma_i^2 + 8 lambda_sigma p)) / (2p).
CovarianceFit fit_additive_frobenius(const MultiViewDataset& data, const PenaltySpec& penalty,
                                     const FitOptions& options = {});

/// Flip-flop solver for the additive L1 penalty on the precision matrices;
/// each block update is a graphical lasso with penalty lambda_sigma / p
/// (resp. lambda_k / n).
CovarianceFit fit_additive_l1_cov(const MultiViewDataset& data, const PenaltySpec& penalty,
                                  const FitOptions& options = {});

/// Correlation-path L1 estimator: each block converts its Gram matrix to a
/// correlation matrix, runs the graphical lasso there, and converts back via
/// the standard-deviation diagonal. One sweep (Delta blocks then Sigma, or
/// Sigma-init/Delta/Sigma-final under large_p_order) unless l1_onestep is
/// cleared.
CovarianceFit fit_additive_l1_corr(const MultiViewDataset& data, const PenaltySpec& penalty,
                                   const FitOptions& options = {});

/// Dispatch on penalty.family (None -> fit_unpenalized with unknown means,
/// which throws; callers wanting the unpenalized MLE call it directly).
CovarianceFit fit(const MultiViewDataset& data, const PenaltySpec& penalty,
                  const FitOptions& options = {});

/// Rate-matched defaults for the correlation-path estimator:
///   lambda_k     = c * sqrt(log(max(n, p_k)) / n)
///   lambda_sigma = c * sum_k (p_k / p) * sqrt(log(max(n, p_k)) / p_k)
PenaltySpec theory_lambdas(const MultiViewDataset& data, double scale_c);

/// (1/p) X~ X~' on centered data: the shared covariance when every view
/// covariance is pinned to the identity. Centers internally when needed.
SymMatrix concatenated_pca_sigma(const MultiViewDataset& data);

/// (1/n) X_k' X_k on centered data: view k's covariance when the shared
/// covariance is pinned to the identity.
SymMatrix delta_given_identity_sigma(const MultiViewDataset& data, int k);

/// True when consecutive entries never drop by more than
/// slack * max(1, |previous|). Used to certify the ascent property of the
/// flip-flop traces.
bool trace_is_nondecreasing(const std::vector<double>& trace, double slack = 1e-9);

}  // namespace ipca
