#include "ipca/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipca/glasso.hpp"

namespace ipca {

namespace {

MultiViewDataset ensure_centered(const MultiViewDataset& data) {
  return data.centered() ? data : center_columns(data);
}

double off_diagonal_l1(const Matrix& a) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (i != j) s += std::abs(a(i, j));
    }
  }
  return s;
}

// ||rho(A)^-1||_{1,off} where A is the covariance whose precision is given:
// rho(A)^-1 = D A^-1 D with D = diag(A)^{1/2}.
double inverse_correlation_l1_off(const SymMatrix& precision) {
  Matrix cov = spd_inverse(precision).mat();
  Vector d = cov.diagonal().cwiseSqrt();
  Matrix scaled = d.asDiagonal() * precision.mat() * d.asDiagonal();
  return off_diagonal_l1(scaled);
}

double penalty_value(const PenaltySpec& penalty, const SymMatrix& sigma_inv,
                     const std::vector<SymMatrix>& delta_inv) {
  switch (penalty.family) {
    case PenaltyFamily::None:
      return 0.0;
    case PenaltyFamily::AdditiveFrobenius: {
      double v = *penalty.lambda_sigma * frobenius_norm_sq(sigma_inv);
      for (size_t k = 0; k < delta_inv.size(); ++k) {
        v += penalty.lambda_k[k] * frobenius_norm_sq(delta_inv[k]);
      }
      return v;
    }
    case PenaltyFamily::MultiplicativeFrobenius: {
      double sum = 0.0;
      for (size_t k = 0; k < delta_inv.size(); ++k) {
        sum += penalty.lambda_k[k] * frobenius_norm_sq(delta_inv[k]);
      }
      return frobenius_norm_sq(sigma_inv) * sum;
    }
    case PenaltyFamily::AdditiveL1Cov: {
      double v = *penalty.lambda_sigma * off_diagonal_l1(sigma_inv.mat());
      for (size_t k = 0; k < delta_inv.size(); ++k) {
        v += penalty.lambda_k[k] * off_diagonal_l1(delta_inv[k].mat());
      }
      return v;
    }
    case PenaltyFamily::AdditiveL1Corr: {
      double v = *penalty.lambda_sigma * inverse_correlation_l1_off(sigma_inv);
      for (size_t k = 0; k < delta_inv.size(); ++k) {
        v += penalty.lambda_k[k] * inverse_correlation_l1_off(delta_inv[k]);
      }
      return v;
    }
  }
  return 0.0;
}

double spd_logdet(const SymMatrix& a, const char* who) {
  Eigen::LLT<Matrix> llt(a.mat());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(std::string(who) + ": matrix is not positive definite");
  }
  double logdet = 0.0;
  for (Index i = 0; i < a.dim(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return logdet;
}

// Covariance block kept in spectral form so inverses, log-determinants and
// Frobenius norms of the inverse are O(dim) updates.
struct SpectralBlock {
  Matrix evecs;
  Vector evals;  // covariance eigenvalues
  Matrix cov;
  Matrix inv;
  double inv_fro2 = 0.0;
  double logdet_inv = 0.0;

  void set(const Matrix& u, const Vector& vals) {
    evecs = u;
    evals = vals;
    cov = u * vals.asDiagonal() * u.transpose();
    inv = u * vals.cwiseInverse().asDiagonal() * u.transpose();
    inv_fro2 = vals.cwiseInverse().squaredNorm();
    logdet_inv = -vals.array().log().sum();
  }

  void set_from_cov(const SymMatrix& a, const char* who) {
    EigenPairs e = sym_eigendecompose(a);
    const double top = e.values(0);
    if (!(e.values(e.values.size() - 1) > kPdThreshold * std::max(top, 0.0))) {
      throw NotPositiveDefinite(std::string(who) + ": initialization is not positive definite");
    }
    set(e.vectors, e.values);
  }

  // For blocks produced outside the eigenvalue path (graphical lasso), where
  // the exact precision matters (it carries exact zeros).
  void set_pair(const Matrix& cov_m, const Matrix& prec_m, const char* who) {
    cov = cov_m;
    inv = prec_m;
    inv_fro2 = prec_m.squaredNorm();
    Eigen::LLT<Matrix> llt(prec_m);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite(std::string(who) + ": block precision lost definiteness");
    }
    logdet_inv = 0.0;
    for (Index i = 0; i < prec_m.rows(); ++i) logdet_inv += 2.0 * std::log(llt.matrixL()(i, i));
  }
};

enum class FrobeniusKind { Unpenalized, Additive, Multiplicative };

struct SolverState {
  std::vector<Matrix> x;        // centered views
  Index n = 0;
  Index p = 0;
  SpectralBlock sigma;
  std::vector<SpectralBlock> delta;
  std::vector<double> trace_terms;  // tr(sigma_inv X_k delta_inv_k X_k')
  std::vector<double> objective_trace;
};

void init_blocks(SolverState& st, const FitOptions& options, const char* who) {
  const int K = static_cast<int>(st.x.size());
  if (options.init.sigma0) {
    if (options.init.sigma0->dim() != st.n) {
      throw ShapeError(std::string(who) + ": sigma initialization has wrong dimension");
    }
    st.sigma.set_from_cov(*options.init.sigma0, who);
  } else {
    st.sigma.set(Matrix::Identity(st.n, st.n), Vector::Ones(st.n));
  }
  st.delta.resize(K);
  if (!options.init.delta0.empty() && static_cast<int>(options.init.delta0.size()) != K) {
    throw ShapeError(std::string(who) + ": need one delta initialization per view");
  }
  for (int k = 0; k < K; ++k) {
    const Index pk = st.x[k].cols();
    if (!options.init.delta0.empty()) {
      if (options.init.delta0[k].dim() != pk) {
        throw ShapeError(std::string(who) + ": delta initialization " + std::to_string(k) +
                         " has wrong dimension");
      }
      st.delta[k].set_from_cov(options.init.delta0[k], who);
    } else {
      st.delta[k].set(Matrix::Identity(pk, pk), Vector::Ones(pk));
    }
  }
  st.trace_terms.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    st.trace_terms[k] = (st.sigma.inv * st.x[k] * st.delta[k].inv).cwiseProduct(st.x[k]).sum();
  }
}

// ||rho^-1||_{1,off} read off a block's covariance/precision pair.
double block_inverse_correlation_l1_off(const SpectralBlock& block) {
  Vector d = block.cov.diagonal().cwiseSqrt();
  Matrix scaled = d.asDiagonal() * block.inv * d.asDiagonal();
  return off_diagonal_l1(scaled);
}

double state_penalty(const SolverState& st, const PenaltySpec& penalty) {
  switch (penalty.family) {
    case PenaltyFamily::None:
      return 0.0;
    case PenaltyFamily::AdditiveFrobenius: {
      double v = *penalty.lambda_sigma * st.sigma.inv_fro2;
      for (size_t k = 0; k < st.delta.size(); ++k) v += penalty.lambda_k[k] * st.delta[k].inv_fro2;
      return v;
    }
    case PenaltyFamily::MultiplicativeFrobenius: {
      double sum = 0.0;
      for (size_t k = 0; k < st.delta.size(); ++k) sum += penalty.lambda_k[k] * st.delta[k].inv_fro2;
      return st.sigma.inv_fro2 * sum;
    }
    case PenaltyFamily::AdditiveL1Cov: {
      double v = *penalty.lambda_sigma * off_diagonal_l1(st.sigma.inv);
      for (size_t k = 0; k < st.delta.size(); ++k) {
        v += penalty.lambda_k[k] * off_diagonal_l1(st.delta[k].inv);
      }
      return v;
    }
    case PenaltyFamily::AdditiveL1Corr: {
      double v = *penalty.lambda_sigma * block_inverse_correlation_l1_off(st.sigma);
      for (size_t k = 0; k < st.delta.size(); ++k) {
        v += penalty.lambda_k[k] * block_inverse_correlation_l1_off(st.delta[k]);
      }
      return v;
    }
  }
  return 0.0;
}

double current_objective(const SolverState& st, const PenaltySpec& penalty) {
  double obj = static_cast<double>(st.p) * st.sigma.logdet_inv;
  for (size_t k = 0; k < st.delta.size(); ++k) {
    obj += static_cast<double>(st.n) * st.delta[k].logdet_inv - st.trace_terms[k];
  }
  return obj - state_penalty(st, penalty);
}

// Normalizes trace(sigma) = n, rescales every delta by the inverse factor and
// assembles the result record.
CovarianceFit finalize_fit(SolverState& st, const PenaltySpec& penalty,
                           std::vector<Vector> mu_hat, bool converged, int iterations) {
  const double c = static_cast<double>(st.n) / st.sigma.cov.trace();
  CovarianceFit fit;
  fit.sigma_hat = SymMatrix(st.sigma.cov * c);
  fit.delta_hat.clear();
  for (auto& d : st.delta) fit.delta_hat.emplace_back(d.cov / c);
  fit.mu_hat = std::move(mu_hat);
  fit.objective_trace = std::move(st.objective_trace);
  fit.converged = converged;
  fit.iterations = iterations;
  fit.penalty = penalty;
  fit.sigma_scale = c;
  return fit;
}

bool relative_change_small(double prev, double next, double rel_tol) {
  return std::abs(next - prev) <= rel_tol * std::max(1.0, std::abs(prev));
}

// Shared flip-flop loop for the unpenalized MLE and both Frobenius paths.
// The only difference between the three is the eigenvalue map applied after
// each block eigendecomposition.
CovarianceFit run_frobenius_flipflop(const MultiViewDataset& raw, const PenaltySpec& penalty,
                                     const FitOptions& options, FrobeniusKind kind,
                                     const char* who) {
  MultiViewDataset data = ensure_centered(raw);
  const int K = data.view_count();
  penalty.validate(K);
  if (options.max_iter < 1 || !(options.rel_tol > 0.0)) {
    throw InvalidInput(std::string(who) + ": max_iter must be >= 1 and rel_tol > 0");
  }

  SolverState st;
  st.n = data.n();
  st.p = data.total_dim();
  for (int k = 0; k < K; ++k) st.x.push_back(data.view(k));
  init_blocks(st, options, who);
  st.objective_trace.push_back(current_objective(st, penalty));

  const double n_d = static_cast<double>(st.n);
  const double p_d = static_cast<double>(st.p);

  bool converged = false;
  int iterations = 0;
  double prev_obj = st.objective_trace.front();
  std::vector<Matrix> m_k(K);

  for (int iter = 0; iter < options.max_iter && !converged; ++iter) {
    iterations = iter + 1;

    // Sigma block: eigendecompose sum_k X_k Delta_k^-1 X_k', map eigenvalues.
    Matrix m = Matrix::Zero(st.n, st.n);
    for (int k = 0; k < K; ++k) {
      m_k[k] = st.x[k] * st.delta[k].inv * st.x[k].transpose();
      m += m_k[k];
    }
    EigenPairs em = sym_eigendecompose(SymMatrix(m));
    Vector phi(st.n);
    if (kind == FrobeniusKind::Unpenalized) {
      phi = em.values / p_d;
      if (!(phi(st.n - 1) > kPdThreshold * std::max(phi(0), 0.0))) {
        throw NonexistentMLE(std::string(who) +
                             ": shared covariance update lost positive definiteness");
      }
    } else {
      double shrink = 0.0;
      if (kind == FrobeniusKind::Additive) {
        shrink = *penalty.lambda_sigma;
      } else {
        for (int k = 0; k < K; ++k) shrink += penalty.lambda_k[k] * st.delta[k].inv_fro2;
      }
      for (Index i = 0; i < st.n; ++i) {
        phi(i) = eigenvalue_shrinkage(em.values(i), p_d, shrink);
      }
    }
    st.sigma.set(em.vectors, phi);
    for (int k = 0; k < K; ++k) {
      st.trace_terms[k] = st.sigma.inv.cwiseProduct(m_k[k]).sum();
    }
    st.objective_trace.push_back(current_objective(st, penalty));

    // Delta blocks in view order.
    for (int k = 0; k < K; ++k) {
      Matrix nk = st.x[k].transpose() * st.sigma.inv * st.x[k];
      EigenPairs en = sym_eigendecompose(SymMatrix(nk));
      const Index pk = st.x[k].cols();
      Vector gam(pk);
      if (kind == FrobeniusKind::Unpenalized) {
        gam = en.values / n_d;
        if (!(gam(pk - 1) > kPdThreshold * std::max(gam(0), 0.0))) {
          throw NonexistentMLE(std::string(who) + ": view " + std::to_string(k) +
                               " covariance update lost positive definiteness");
        }
      } else {
        const double shrink = (kind == FrobeniusKind::Additive)
                                  ? penalty.lambda_k[k]
                                  : penalty.lambda_k[k] * st.sigma.inv_fro2;
        for (Index i = 0; i < pk; ++i) {
          gam(i) = eigenvalue_shrinkage(en.values(i), n_d, shrink);
        }
      }
      st.delta[k].set(en.vectors, gam);
      st.trace_terms[k] = st.delta[k].inv.cwiseProduct(nk).sum();
      st.objective_trace.push_back(current_objective(st, penalty));
    }

    const double obj = st.objective_trace.back();
    if (kind == FrobeniusKind::Unpenalized) {
      // Fixed-point residuals of both stationarity equations at the current
      // iterate decide convergence.
      Matrix msum = Matrix::Zero(st.n, st.n);
      for (int k = 0; k < K; ++k) {
        msum += st.x[k] * st.delta[k].inv * st.x[k].transpose();
      }
      double worst = (st.sigma.cov - msum / p_d).norm() / st.sigma.cov.norm();
      for (int k = 0; k < K; ++k) {
        Matrix nk = st.x[k].transpose() * st.sigma.inv * st.x[k];
        worst = std::max(worst, (st.delta[k].cov - nk / n_d).norm() / st.delta[k].cov.norm());
      }
      converged = worst <= options.rel_tol;
    } else {
      converged = iter > 0 && relative_change_small(prev_obj, obj, options.rel_tol);
    }
    prev_obj = obj;
  }

  return finalize_fit(st, penalty, data.column_means(), converged, iterations);
}

SymMatrix annotated_glasso(const GlassoProblem& problem, const std::string& block) {
  try {
    return graphical_lasso(problem);
  } catch (NoConvergence& e) {
    throw NoConvergence(block + " block: glasso sweep limit reached", e.residual,
                        e.last_iterate);
  } catch (NotPositiveDefinite& e) {
    throw NotPositiveDefinite(block + " block: " + e.what());
  } catch (InvalidInput& e) {
    throw InvalidInput(block + " block: " + e.what());
  }
}

}  // namespace

std::string penalty_family_name(PenaltyFamily family) {
  switch (family) {
    case PenaltyFamily::None: return "none";
    case PenaltyFamily::AdditiveFrobenius: return "add-frob";
    case PenaltyFamily::MultiplicativeFrobenius: return "mult-frob";
    case PenaltyFamily::AdditiveL1Cov: return "l1-cov";
    case PenaltyFamily::AdditiveL1Corr: return "l1-corr";
  }
  return "unknown";
}

PenaltySpec PenaltySpec::none() { return PenaltySpec{}; }

PenaltySpec PenaltySpec::additive_frobenius(double lambda_sigma, std::vector<double> lambda_k) {
  return PenaltySpec{PenaltyFamily::AdditiveFrobenius, lambda_sigma, std::move(lambda_k)};
}

PenaltySpec PenaltySpec::multiplicative_frobenius(std::vector<double> lambda_k) {
  return PenaltySpec{PenaltyFamily::MultiplicativeFrobenius, std::nullopt, std::move(lambda_k)};
}

PenaltySpec PenaltySpec::additive_l1_cov(double lambda_sigma, std::vector<double> lambda_k) {
  return PenaltySpec{PenaltyFamily::AdditiveL1Cov, lambda_sigma, std::move(lambda_k)};
}

PenaltySpec PenaltySpec::additive_l1_corr(double lambda_sigma, std::vector<double> lambda_k) {
  return PenaltySpec{PenaltyFamily::AdditiveL1Corr, lambda_sigma, std::move(lambda_k)};
}

void PenaltySpec::validate(int view_count) const {
  const auto fail = [&](const std::string& msg) {
    throw InvalidPenalty(penalty_family_name(family) + ": " + msg);
  };
  switch (family) {
    case PenaltyFamily::None:
      if (lambda_sigma || !lambda_k.empty()) fail("carries no parameters");
      return;
    case PenaltyFamily::MultiplicativeFrobenius:
      if (lambda_sigma) fail("has no shared-covariance parameter");
      break;
    default:
      if (!lambda_sigma) fail("needs a shared-covariance parameter");
      break;
  }
  if (static_cast<int>(lambda_k.size()) != view_count) {
    fail("needs exactly one per-view parameter for each of the " + std::to_string(view_count) +
         " views, got " + std::to_string(lambda_k.size()));
  }
  const bool strict = family == PenaltyFamily::AdditiveFrobenius ||
                      family == PenaltyFamily::MultiplicativeFrobenius;
  if (lambda_sigma && (strict ? !(*lambda_sigma > 0.0) : *lambda_sigma < 0.0)) {
    fail(strict ? "shared parameter must be positive" : "shared parameter must be non-negative");
  }
  for (double l : lambda_k) {
    if (strict ? !(l > 0.0) : l < 0.0) {
      fail(strict ? "per-view parameters must be positive"
                  : "per-view parameters must be non-negative");
    }
  }
}

PenaltySpec PenaltySpec::scaled(double factor) const {
  PenaltySpec out = *this;
  if (out.lambda_sigma) *out.lambda_sigma *= factor;
  for (double& l : out.lambda_k) l *= factor;
  return out;
}

double eigenvalue_shrinkage(double gamma, double dim, double weight) {
  return (gamma + std::sqrt(gamma * gamma + 8.0 * dim * weight)) / (2.0 * dim);
}

double penalized_loglik(const MultiViewDataset& data, const SymMatrix& sigma_inv,
                        const std::vector<SymMatrix>& delta_inv, const PenaltySpec& penalty) {
  if (!data.centered()) {
    throw InvalidInput("penalized_loglik: expects centered data");
  }
  const int K = data.view_count();
  penalty.validate(K);
  if (sigma_inv.dim() != data.n() || static_cast<int>(delta_inv.size()) != K) {
    throw ShapeError("penalized_loglik: precision dimensions do not match the data");
  }
  for (int k = 0; k < K; ++k) {
    if (delta_inv[k].dim() != data.view_dim(k)) {
      throw ShapeError("penalized_loglik: view " + std::to_string(k) +
                       " precision has wrong dimension");
    }
  }
  double obj = static_cast<double>(data.total_dim()) * spd_logdet(sigma_inv, "penalized_loglik");
  for (int k = 0; k < K; ++k) {
    obj += static_cast<double>(data.n()) * spd_logdet(delta_inv[k], "penalized_loglik");
    obj -= (sigma_inv.mat() * data.view(k) * delta_inv[k].mat())
               .cwiseProduct(data.view(k))
               .sum();
  }
  return obj - penalty_value(penalty, sigma_inv, delta_inv);
}

CovarianceFit fit_unpenalized(const MultiViewDataset& data, bool means_known,
                              const FitOptions& options) {
  if (!means_known) {
    throw NonexistentMLE(
        "column means estimated from the data leave the centered rows linearly dependent, so "
        "the maximum likelihood problem has no solution");
  }
  if (!data.centered()) {
    throw InvalidInput("fit_unpenalized: known means require data that is already centered");
  }
  // Existence needs rank(X~) = n and rank(X_k) = p_k.
  const auto rank_of = [](const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-10 * sv(0)) ++r;
    }
    return r;
  };
  if (rank_of(concatenate(data)) != data.n()) {
    throw NonexistentMLE("stacked data is row rank deficient");
  }
  for (int k = 0; k < data.view_count(); ++k) {
    if (rank_of(data.view(k)) != data.view_dim(k)) {
      throw NonexistentMLE("view " + std::to_string(k) + " is column rank deficient");
    }
  }
  return run_frobenius_flipflop(data, PenaltySpec::none(), options, FrobeniusKind::Unpenalized,
                                "fit_unpenalized");
}

CovarianceFit fit_multiplicative_frobenius(const MultiViewDataset& data,
                                           const PenaltySpec& penalty,
                                           const FitOptions& options) {
  if (penalty.family != PenaltyFamily::MultiplicativeFrobenius) {
    throw InvalidPenalty("fit_multiplicative_frobenius: wrong penalty family");
  }
  return run_frobenius_flipflop(data, penalty, options, FrobeniusKind::Multiplicative,
                                "fit_multiplicative_frobenius");
}

CovarianceFit fit_additive_frobenius(const MultiViewDataset& data, const PenaltySpec& penalty,
                                     const FitOptions& options) {
  if (penalty.family != PenaltyFamily::AdditiveFrobenius) {
    throw InvalidPenalty("fit_additive_frobenius: wrong penalty family");
  }
  return run_frobenius_flipflop(data, penalty, options, FrobeniusKind::Additive,
                                "fit_additive_frobenius");
}

CovarianceFit fit_additive_l1_cov(const MultiViewDataset& raw, const PenaltySpec& penalty,
                                  const FitOptions& options) {
  if (penalty.family != PenaltyFamily::AdditiveL1Cov) {
    throw InvalidPenalty("fit_additive_l1_cov: wrong penalty family");
  }
  MultiViewDataset data = ensure_centered(raw);
  const int K = data.view_count();
  penalty.validate(K);
  const double n_d = static_cast<double>(data.n());
  const double p_d = static_cast<double>(data.total_dim());

  SolverState st;
  st.n = data.n();
  st.p = data.total_dim();
  for (int k = 0; k < K; ++k) st.x.push_back(data.view(k));
  init_blocks(st, options, "fit_additive_l1_cov");
  st.objective_trace.push_back(current_objective(st, penalty));

  bool converged = false;
  int iterations = 0;
  double prev_obj = st.objective_trace.front();
  for (int iter = 0; iter < options.max_iter && !converged; ++iter) {
    iterations = iter + 1;

    Matrix a = Matrix::Zero(st.n, st.n);
    std::vector<Matrix> m_k(K);
    for (int k = 0; k < K; ++k) {
      m_k[k] = st.x[k] * st.delta[k].inv * st.x[k].transpose();
      a += m_k[k];
    }
    a /= p_d;
    SymMatrix theta = annotated_glasso(
        GlassoProblem{SymMatrix(a), *penalty.lambda_sigma / p_d, false, 1e-6, 500}, "sigma");
    st.sigma.set_pair(spd_inverse(theta).mat(), theta.mat(), "fit_additive_l1_cov");
    for (int k = 0; k < K; ++k) st.trace_terms[k] = st.sigma.inv.cwiseProduct(m_k[k]).sum();
    st.objective_trace.push_back(current_objective(st, penalty));

    for (int k = 0; k < K; ++k) {
      Matrix ak = st.x[k].transpose() * st.sigma.inv * st.x[k] / n_d;
      SymMatrix theta_k = annotated_glasso(
          GlassoProblem{SymMatrix(ak), penalty.lambda_k[k] / n_d, false, 1e-6, 500},
          "delta " + std::to_string(k));
      st.delta[k].set_pair(spd_inverse(theta_k).mat(), theta_k.mat(), "fit_additive_l1_cov");
      st.trace_terms[k] = st.delta[k].inv.cwiseProduct(ak).sum() * n_d;
      st.objective_trace.push_back(current_objective(st, penalty));
    }

    const double obj = st.objective_trace.back();
    converged = iter > 0 && relative_change_small(prev_obj, obj, options.rel_tol);
    prev_obj = obj;
  }

  return finalize_fit(st, penalty, data.column_means(), converged, iterations);
}

CovarianceFit fit_additive_l1_corr(const MultiViewDataset& raw, const PenaltySpec& penalty,
                                   const FitOptions& options) {
  if (penalty.family != PenaltyFamily::AdditiveL1Corr) {
    throw InvalidPenalty("fit_additive_l1_corr: wrong penalty family");
  }
  MultiViewDataset data = ensure_centered(raw);
  const int K = data.view_count();
  penalty.validate(K);
  const Index n = data.n();
  const double n_d = static_cast<double>(n);
  const double p_d = static_cast<double>(data.total_dim());

  bool large_p = false;
  if (options.large_p_order) {
    large_p = *options.large_p_order;
  } else {
    large_p = true;
    for (int k = 0; k < K; ++k) {
      if (std::sqrt(n_d) >= p_d / std::sqrt(static_cast<double>(data.view_dim(k)))) {
        large_p = false;
        break;
      }
    }
  }
  const bool onestep = options.l1_onestep.value_or(true);

  SolverState st;
  st.n = n;
  st.p = data.total_dim();
  for (int k = 0; k < K; ++k) st.x.push_back(data.view(k));
  init_blocks(st, options, "fit_additive_l1_corr");
  st.objective_trace.push_back(current_objective(st, penalty));

  // One correlation-path block update: Gram -> correlation -> glasso ->
  // rescale back by the standard-deviation diagonal.
  const auto correlation_block = [&](const Matrix& gram, double lambda, const std::string& name,
                                     SpectralBlock& block) {
    Vector d = gram.diagonal();
    for (Index i = 0; i < d.size(); ++i) {
      if (!(d(i) > 0.0)) {
        throw DegenerateScale(name + ": coordinate " + std::to_string(i) +
                              " has non-positive scale");
      }
    }
    Vector w = d.cwiseSqrt();
    Matrix corr = w.cwiseInverse().asDiagonal() * gram * w.cwiseInverse().asDiagonal();
    corr.diagonal().setOnes();
    SymMatrix theta_rho = annotated_glasso(GlassoProblem{SymMatrix(corr), lambda, false, 1e-6, 500},
                                           name);
    // covariance = W rho W with rho = theta_rho^-1; precision = W^-1 theta_rho W^-1
    Matrix rho = spd_inverse(theta_rho).mat();
    Matrix cov = w.asDiagonal() * rho * w.asDiagonal();
    Matrix prec = w.cwiseInverse().asDiagonal() * theta_rho.mat() * w.cwiseInverse().asDiagonal();
    block.set_pair(cov, prec, "fit_additive_l1_corr");
  };

  const auto sigma_block = [&] {
    Matrix s_sigma = Matrix::Zero(n, n);
    std::vector<Matrix> m_k(K);
    for (int k = 0; k < K; ++k) {
      m_k[k] = st.x[k] * st.delta[k].inv * st.x[k].transpose();
      s_sigma += m_k[k];
    }
    s_sigma /= p_d;
    correlation_block(s_sigma, *penalty.lambda_sigma, "sigma", st.sigma);
    for (int k = 0; k < K; ++k) st.trace_terms[k] = st.sigma.inv.cwiseProduct(m_k[k]).sum();
    st.objective_trace.push_back(current_objective(st, penalty));
  };

  const auto delta_block = [&](int k) {
    Matrix s_k = st.x[k].transpose() * st.sigma.inv * st.x[k] / n_d;
    correlation_block(s_k, penalty.lambda_k[k], "delta " + std::to_string(k), st.delta[k]);
    st.trace_terms[k] = st.delta[k].inv.cwiseProduct(s_k).sum() * n_d;
    st.objective_trace.push_back(current_objective(st, penalty));
  };

  if (large_p) {
    sigma_block();  // initial shared estimate with identity view covariances
  }

  bool converged = false;
  int iterations = 0;
  double prev_obj = st.objective_trace.back();
  const int max_iter = onestep ? 1 : options.max_iter;
  for (int iter = 0; iter < max_iter && !converged; ++iter) {
    iterations = iter + 1;
    for (int k = 0; k < K; ++k) delta_block(k);
    sigma_block();
    const double obj = st.objective_trace.back();
    if (onestep) {
      converged = true;  // the one-pass estimator is the target by definition
    } else {
      converged = iter > 0 && relative_change_small(prev_obj, obj, options.rel_tol);
    }
    prev_obj = obj;
  }

  return finalize_fit(st, penalty, data.column_means(), converged, iterations);
}

CovarianceFit fit(const MultiViewDataset& data, const PenaltySpec& penalty,
                  const FitOptions& options) {
  switch (penalty.family) {
    case PenaltyFamily::None:
      return fit_unpenalized(data, data.centered(), options);
    case PenaltyFamily::AdditiveFrobenius:
      return fit_additive_frobenius(data, penalty, options);
    case PenaltyFamily::MultiplicativeFrobenius:
      return fit_multiplicative_frobenius(data, penalty, options);
    case PenaltyFamily::AdditiveL1Cov:
      return fit_additive_l1_cov(data, penalty, options);
    case PenaltyFamily::AdditiveL1Corr:
      return fit_additive_l1_corr(data, penalty, options);
  }
  throw InvalidPenalty("fit: unknown penalty family");
}

PenaltySpec theory_lambdas(const MultiViewDataset& data, double scale_c) {
  if (!(scale_c > 0.0)) {
    throw InvalidPenalty("theory_lambdas: scale must be positive");
  }
  const double n = static_cast<double>(data.n());
  const double p = static_cast<double>(data.total_dim());
  std::vector<double> lambda_k;
  double lambda_sigma = 0.0;
  for (int k = 0; k < data.view_count(); ++k) {
    const double pk = static_cast<double>(data.view_dim(k));
    const double log_term = std::log(std::max(n, pk));
    lambda_k.push_back(scale_c * std::sqrt(log_term / n));
    lambda_sigma += scale_c * (pk / p) * std::sqrt(log_term / pk);
  }
  return PenaltySpec::additive_l1_corr(lambda_sigma, std::move(lambda_k));
}

SymMatrix concatenated_pca_sigma(const MultiViewDataset& data) {
  MultiViewDataset centered = ensure_centered(data);
  Matrix x = concatenate(centered);
  return SymMatrix(x * x.transpose() / static_cast<double>(centered.total_dim()));
}

SymMatrix delta_given_identity_sigma(const MultiViewDataset& data, int k) {
  MultiViewDataset centered = ensure_centered(data);
  const Matrix& x = centered.view(k);
  return SymMatrix(x.transpose() * x / static_cast<double>(centered.n()));
}

bool trace_is_nondecreasing(const std::vector<double>& trace, double slack) {
  for (size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] < trace[i - 1] - slack * std::max(1.0, std::abs(trace[i - 1]))) {
      return false;
    }
  }
  return true;
}

}  // namespace ipca
