#pragma once

#include <vector>

#include "ipca/estimators.hpp"

namespace ipca {

/// Eigenvectors and eigenvalues of a covariance fit: scores span sample
/// space (columns of the shared covariance's eigenbasis, descending
/// eigenvalues), loadings span each view's feature space.
struct IpcaModel {
  Matrix scores;                       // n x n
  Vector sigma_eigenvalues;            // descending
  std::vector<Matrix> loadings;        // p_k x p_k per view
  std::vector<Vector> delta_eigenvalues;
};

IpcaModel extract(const CovarianceFit& fit);

/// Cumulative proportion of variance explained in view k by the top m
/// components: ||scores(:,1:m)' X_k loadings_k(:,1:m)||_F^2 / ||X_k||_F^2.
/// Requires centered data; monotone non-decreasing in m and within [0, 1].
double pve(const MultiViewDataset& data, const IpcaModel& model, int k, int m);

/// Marginal proportion explained by component m alone: pve(m) - pve(m-1).
double mpve(const MultiViewDataset& data, const IpcaModel& model, int k, int m);

/// First m score columns.
Matrix top_scores(const IpcaModel& model, int m);

}  // namespace ipca
