#include "ipca/ipca.hpp"

#include <algorithm>
#include <cmath>

namespace ipca {

IpcaModel extract(const CovarianceFit& fit) {
  IpcaModel model;
  EigenPairs sig = sym_eigendecompose(fit.sigma_hat);
  model.scores = std::move(sig.vectors);
  model.sigma_eigenvalues = std::move(sig.values);
  for (const SymMatrix& delta : fit.delta_hat) {
    EigenPairs d = sym_eigendecompose(delta);
    model.loadings.push_back(std::move(d.vectors));
    model.delta_eigenvalues.push_back(std::move(d.values));
  }
  return model;
}

double pve(const MultiViewDataset& data, const IpcaModel& model, int k, int m) {
  if (!data.centered()) {
    throw InvalidInput("pve: expects column-centered data");
  }
  const Matrix& x = data.view(k);  // range-checks k
  if (static_cast<int>(model.loadings.size()) <= k) {
    throw ShapeError("pve: model has no loadings for view " + std::to_string(k));
  }
  const Index limit = std::min(data.n(), data.view_dim(k));
  if (m < 0 || m > limit) {
    throw ShapeError("pve: m = " + std::to_string(m) + " outside [0, " + std::to_string(limit) +
                     "]");
  }
  const double total = x.squaredNorm();
  if (!(total > 0.0)) {
    throw DegenerateScale("pve: view " + std::to_string(k) + " has zero norm");
  }
  if (m == 0) return 0.0;
  const Matrix core =
      model.scores.leftCols(m).transpose() * x * model.loadings[k].leftCols(m);
  return core.squaredNorm() / total;
}

double mpve(const MultiViewDataset& data, const IpcaModel& model, int k, int m) {
  if (m < 1) {
    throw ShapeError("mpve: m must be at least 1");
  }
  return pve(data, model, k, m) - pve(data, model, k, m - 1);
}

Matrix top_scores(const IpcaModel& model, int m) {
  if (m < 1 || m > model.scores.cols()) {
    throw ShapeError("top_scores: m = " + std::to_string(m) + " outside [1, " +
                     std::to_string(model.scores.cols()) + "]");
  }
  return model.scores.leftCols(m);
}

}  // namespace ipca
