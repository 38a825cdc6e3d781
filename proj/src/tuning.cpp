#include "ipca/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <thread>

#include "ipca/simulation.hpp"

namespace ipca {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Vector> observed_column_means(const MultiViewDataset& data, const MissingMask& mask) {
  std::vector<Vector> means;
  for (int k = 0; k < data.view_count(); ++k) {
    const Matrix& x = data.view(k);
    Vector sum = Vector::Zero(x.cols());
    Vector count = Vector::Constant(x.cols(), static_cast<double>(x.rows()));
    Matrix masked = Matrix::Zero(x.rows(), x.cols());
    if (k < static_cast<int>(mask.entries.size())) {
      for (const auto& [i, j] : mask.entries[k]) {
        masked(i, j) = 1.0;
        count(j) -= 1.0;
      }
    }
    for (Index j = 0; j < x.cols(); ++j) {
      double s = 0.0;
      for (Index i = 0; i < x.rows(); ++i) {
        if (masked(i, j) == 0.0) s += x(i, j);
      }
      sum(j) = s;
    }
    means.push_back(sum.cwiseQuotient(count));
  }
  return means;
}

void validate_mask(const MultiViewDataset& data, const MissingMask& mask) {
  if (static_cast<int>(mask.entries.size()) != data.view_count()) {
    throw InvalidMask("mask must carry one entry list per view");
  }
  for (int k = 0; k < data.view_count(); ++k) {
    for (const auto& [i, j] : mask.entries[k]) {
      if (i < 0 || i >= data.n() || j < 0 || j >= data.view_dim(k)) {
        throw InvalidMask("mask index out of range in view " + std::to_string(k));
      }
    }
  }
}

// Runs `worker(i)` for i in [0, count) on up to `jobs` threads.
void parallel_for(int count, int jobs, const std::function<void(int)>& worker) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) worker(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) worker(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

bool MissingMask::empty() const {
  for (const auto& view_entries : entries) {
    if (!view_entries.empty()) return false;
  }
  return true;
}

MaskSample mask_random(const MultiViewDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 0.5)) {
    throw InvalidMask("fraction must lie in [0, 0.5)");
  }
  MaskSample out;
  out.mask.seed = seed;
  out.mask.fraction = fraction;
  const Index n = data.n();
  for (int k = 0; k < data.view_count(); ++k) {
    const Index pk = data.view_dim(k);
    const Index total = n * pk;
    const auto target = static_cast<Index>(std::llround(fraction * static_cast<double>(total)));
    // Keeping one observed anchor per row and column needs max(n, p_k) cells.
    if (target > total - std::max(n, pk)) {
      throw InvalidMask("view " + std::to_string(k) +
                        ": fraction leaves no observed anchor in some row or column");
    }
    std::mt19937_64 rng(substream_seed(seed, "mask", k));
    std::vector<Index> cells(total);
    for (Index c = 0; c < total; ++c) cells[c] = c;
    // Partial Fisher-Yates: the first `target` positions become the sample.
    for (Index i = 0; i < target; ++i) {
      std::uniform_int_distribution<Index> pick(i, total - 1);
      std::swap(cells[i], cells[pick(rng)]);
    }
    std::vector<bool> is_masked(total, false);
    for (Index i = 0; i < target; ++i) is_masked[cells[i]] = true;

    // Repair: move offending cells elsewhere until no row or column of the
    // view is fully masked.
    std::vector<Index> row_count(n, 0), col_count(pk, 0);
    const auto row_of = [pk](Index c) { return c / pk; };
    const auto col_of = [pk](Index c) { return c % pk; };
    for (Index i = 0; i < target; ++i) {
      ++row_count[row_of(cells[i])];
      ++col_count[col_of(cells[i])];
    }
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      Index victim = -1;
      for (Index i = 0; i < target && victim < 0; ++i) {
        const Index c = cells[i];
        if (row_count[row_of(c)] == pk || col_count[col_of(c)] == n) victim = i;
      }
      if (victim < 0) {
        ok = true;
        break;
      }
      std::uniform_int_distribution<Index> pick(0, total - 1);
      Index replacement = pick(rng);
      while (is_masked[replacement]) replacement = pick(rng);
      const Index old = cells[victim];
      is_masked[old] = false;
      --row_count[row_of(old)];
      --col_count[col_of(old)];
      cells[victim] = replacement;
      is_masked[replacement] = true;
      ++row_count[row_of(replacement)];
      ++col_count[col_of(replacement)];
    }
    if (!ok) {
      throw InvalidMask("view " + std::to_string(k) + ": could not repair the mask");
    }

    std::vector<std::pair<Index, Index>> entries;
    entries.reserve(target);
    for (Index i = 0; i < target; ++i) entries.emplace_back(row_of(cells[i]), col_of(cells[i]));
    std::sort(entries.begin(), entries.end());
    std::vector<double> values;
    values.reserve(target);
    for (const auto& [r, c] : entries) values.push_back(data.view(k)(r, c));
    out.mask.entries.push_back(std::move(entries));
    out.held_out.push_back(std::move(values));
  }
  return out;
}

Matrix conditional_expectation(const Matrix& x,
                               const std::vector<std::pair<Index, Index>>& missing,
                               const Vector& mu, const SymMatrix& sigma, const SymMatrix& delta,
                               double tol, int max_passes) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (sigma.dim() != n || delta.dim() != p || mu.size() != p) {
    throw ShapeError("conditional_expectation: dimension mismatch");
  }
  if (missing.empty()) return x;
  if (!(tol > 0.0) || max_passes < 1) {
    throw InvalidInput("conditional_expectation: need tol > 0 and max_passes >= 1");
  }
  std::vector<std::vector<Index>> by_row(n), by_col(p);
  for (const auto& [i, j] : missing) {
    if (i < 0 || i >= n || j < 0 || j >= p) {
      throw ShapeError("conditional_expectation: missing index out of range");
    }
    by_row[i].push_back(j);
    by_col[j].push_back(i);
  }

  const Matrix sigma_inv = spd_inverse(sigma).mat();
  const Matrix delta_inv = spd_inverse(delta).mat();

  Matrix filled = x;  // current estimates stand in at the missing positions
  // Scaled gradient of the quadratic form tr(Sinv (X - M) Dinv (X - M)');
  // every block update below is the exact conditional mean given the rest.
  Matrix grad = sigma_inv * (filled.rowwise() - mu.transpose()) * delta_inv;

  const auto solve_small = [](const Matrix& full_inv, const std::vector<Index>& idx,
                              const Vector& rhs) {
    const auto m = static_cast<Index>(idx.size());
    Matrix block(m, m);
    for (Index a = 0; a < m; ++a) {
      for (Index b = 0; b < m; ++b) block(a, b) = full_inv(idx[a], idx[b]);
    }
    return Eigen::LLT<Matrix>(block).solve(rhs).eval();
  };

  for (int pass = 0; pass < max_passes; ++pass) {
    double max_change = 0.0;

    for (Index i = 0; i < n; ++i) {
      const auto& cols = by_row[i];
      if (cols.empty()) continue;
      Vector rhs(static_cast<Index>(cols.size()));
      for (size_t a = 0; a < cols.size(); ++a) rhs(a) = grad(i, cols[a]);
      Vector step = -solve_small(delta_inv, cols, rhs) / sigma_inv(i, i);
      Vector dv = Vector::Zero(p);
      for (size_t a = 0; a < cols.size(); ++a) {
        filled(i, cols[a]) += step(a);
        dv += delta_inv.col(cols[a]) * step(a);
        max_change = std::max(max_change, std::abs(step(a)));
      }
      grad += sigma_inv.col(i) * dv.transpose();
    }

    for (Index j = 0; j < p; ++j) {
      const auto& rows = by_col[j];
      if (rows.empty()) continue;
      Vector rhs(static_cast<Index>(rows.size()));
      for (size_t a = 0; a < rows.size(); ++a) rhs(a) = grad(rows[a], j);
      Vector step = -solve_small(sigma_inv, rows, rhs) / delta_inv(j, j);
      Vector dv = Vector::Zero(n);
      for (size_t a = 0; a < rows.size(); ++a) {
        filled(rows[a], j) += step(a);
        dv += sigma_inv.col(rows[a]) * step(a);
        max_change = std::max(max_change, std::abs(step(a)));
      }
      grad += dv * delta_inv.row(j);
    }

    if (max_change < tol) return filled;
  }
  throw NoConvergence("conditional_expectation: pass limit reached", tol, filled);
}

MultiViewDataset impute_onestep(const MultiViewDataset& data, const MissingMask& mask,
                                const PenaltySpec& penalty, const FitOptions& options) {
  validate_mask(data, mask);
  const std::vector<Vector> means = observed_column_means(data, mask);

  // Initial fill: observed column means, then a per-view regularized
  // conditional expectation pretending the rows are independent.
  std::vector<Matrix> filled;
  for (int k = 0; k < data.view_count(); ++k) {
    Matrix x = data.view(k);
    for (const auto& [i, j] : mask.entries[k]) x(i, j) = means[k](j);
    filled.push_back(std::move(x));
  }
  MultiViewDataset mean_filled = MultiViewDataset::from_views(filled, data.sample_ids());
  const SymMatrix identity_sigma = SymMatrix::identity(data.n());
  for (int k = 0; k < data.view_count(); ++k) {
    if (mask.entries[k].empty()) continue;
    Matrix delta = delta_given_identity_sigma(mean_filled, k).mat();
    const double ridge = 1e-3 * delta.diagonal().mean();
    delta.diagonal().array() += ridge;
    filled[k] = conditional_expectation(filled[k], mask.entries[k], means[k], identity_sigma,
                                        SymMatrix(delta));
  }

  // One fit on the filled data, then one conditional-expectation pass per
  // view under the fitted model.
  MultiViewDataset filled_data = MultiViewDataset::from_views(filled, data.sample_ids());
  CovarianceFit model = fit(filled_data, penalty, options);
  for (int k = 0; k < data.view_count(); ++k) {
    if (mask.entries[k].empty()) continue;
    filled[k] = conditional_expectation(filled[k], mask.entries[k], model.mu_hat[k],
                                        model.sigma_hat, model.delta_hat[k]);
  }

  // Copy masked entries into the original data so observed cells stay
  // bit-exact.
  std::vector<Matrix> out_views;
  for (int k = 0; k < data.view_count(); ++k) {
    Matrix x = data.view(k);
    for (const auto& [i, j] : mask.entries[k]) x(i, j) = filled[k](i, j);
    out_views.push_back(std::move(x));
  }
  std::vector<std::vector<std::string>> names;
  for (int k = 0; k < data.view_count(); ++k) names.push_back(data.feature_names(k));
  return MultiViewDataset::from_views(std::move(out_views), data.sample_ids(), std::move(names));
}

double imputation_error(const MultiViewDataset& imputed, const MissingMask& mask,
                        const std::vector<std::vector<double>>& truth,
                        const std::vector<Vector>& column_means) {
  validate_mask(imputed, mask);
  if (mask.empty()) {
    throw InvalidMask("imputation_error: mask is empty");
  }
  if (truth.size() != mask.entries.size() ||
      column_means.size() != mask.entries.size()) {
    throw InvalidMask("imputation_error: truth/means do not align with the mask");
  }
  double sum_ratio = 0.0;
  int counted = 0;
  for (size_t k = 0; k < mask.entries.size(); ++k) {
    if (mask.entries[k].empty()) continue;
    if (truth[k].size() != mask.entries[k].size()) {
      throw InvalidMask("imputation_error: truth values do not align with view " +
                        std::to_string(k));
    }
    double num = 0.0;
    double den = 0.0;
    for (size_t t = 0; t < mask.entries[k].size(); ++t) {
      const auto& [i, j] = mask.entries[k][t];
      const double actual = truth[k][t];
      num += std::pow(imputed.view(static_cast<int>(k))(i, j) - actual, 2);
      den += std::pow(actual - column_means[k](j), 2);
    }
    if (den > 0.0) {
      sum_ratio += num / den;
      ++counted;
    }
  }
  if (counted == 0) {
    throw InvalidMask("imputation_error: no view with usable held-out variation");
  }
  return sum_ratio / counted;
}

TuningGrid TuningGrid::default_grid(PenaltyFamily family, int view_count) {
  std::vector<double> ladder;
  for (int e = -3; e <= 3; ++e) ladder.push_back(std::pow(10.0, e));
  TuningGrid grid;
  grid.family = family;
  if (family != PenaltyFamily::MultiplicativeFrobenius && family != PenaltyFamily::None) {
    grid.sigma_ladder = ladder;
  }
  grid.view_ladders.assign(view_count, ladder);
  return grid;
}

namespace {

PenaltySpec assemble_spec(PenaltyFamily family, const std::optional<double>& sigma,
                          const std::vector<double>& view_values) {
  switch (family) {
    case PenaltyFamily::AdditiveFrobenius:
      return PenaltySpec::additive_frobenius(*sigma, view_values);
    case PenaltyFamily::MultiplicativeFrobenius:
      return PenaltySpec::multiplicative_frobenius(view_values);
    case PenaltyFamily::AdditiveL1Cov:
      return PenaltySpec::additive_l1_cov(*sigma, view_values);
    case PenaltyFamily::AdditiveL1Corr:
      return PenaltySpec::additive_l1_corr(*sigma, view_values);
    default:
      throw InvalidPenalty("select_penalties: family is not tunable");
  }
}

}  // namespace

TuningReport select_penalties(const MultiViewDataset& data, const TuningGrid& grid,
                              TuneMode mode, double fraction, std::uint64_t seed,
                              const FitOptions& options, int jobs) {
  const int K = data.view_count();
  const bool has_sigma = grid.family != PenaltyFamily::MultiplicativeFrobenius;
  if (grid.family == PenaltyFamily::None) {
    throw InvalidPenalty("select_penalties: nothing to tune for the unpenalized fit");
  }
  if (static_cast<int>(grid.view_ladders.size()) != K) {
    throw InvalidPenalty("select_penalties: need one ladder per view");
  }
  if (has_sigma && grid.sigma_ladder.empty()) {
    throw InvalidPenalty("select_penalties: missing the shared-parameter ladder");
  }
  for (const auto& ladder : grid.view_ladders) {
    if (ladder.empty()) throw InvalidPenalty("select_penalties: empty ladder");
  }

  MaskSample sample = mask_random(data, fraction, seed);
  const std::vector<Vector> means = observed_column_means(data, sample.mask);

  const auto evaluate = [&](const PenaltySpec& spec) -> double {
    try {
      MultiViewDataset imputed = impute_onestep(data, sample.mask, spec, options);
      return imputation_error(imputed, sample.mask, sample.held_out, means);
    } catch (const Error&) {
      return kInf;
    }
  };

  TuningReport report;
  report.mode = mode;
  report.seed = seed;
  report.fraction = fraction;

  if (mode == TuneMode::Full) {
    // Cartesian product; the shared parameter varies slowest, the last view
    // fastest.
    std::vector<const std::vector<double>*> ladders;
    if (has_sigma) ladders.push_back(&grid.sigma_ladder);
    for (const auto& l : grid.view_ladders) ladders.push_back(&l);
    std::vector<size_t> cursor(ladders.size(), 0);
    bool done = false;
    while (!done) {
      std::optional<double> sigma;
      size_t at = 0;
      if (has_sigma) sigma = (*ladders[0])[cursor[at++]];
      std::vector<double> views;
      for (int k = 0; k < K; ++k) views.push_back((*ladders[at + k])[cursor[at + k]]);
      report.grid.push_back(assemble_spec(grid.family, sigma, views));
      for (int d = static_cast<int>(ladders.size()) - 1; d >= 0; --d) {
        if (++cursor[d] < ladders[d]->size()) break;
        cursor[d] = 0;
        if (d == 0) done = true;
      }
    }
    report.errors.assign(report.grid.size(), kInf);
    parallel_for(static_cast<int>(report.grid.size()), jobs,
                 [&](int i) { report.errors[i] = evaluate(report.grid[i]); });
  } else {
    // One sweep per parameter, pinning each at its running best; parameters
    // not yet swept sit at their ladder midpoints.
    std::optional<double> sigma;
    if (has_sigma) sigma = grid.sigma_ladder[grid.sigma_ladder.size() / 2];
    std::vector<double> views(K);
    for (int k = 0; k < K; ++k) views[k] = grid.view_ladders[k][grid.view_ladders[k].size() / 2];

    const auto sweep = [&](const std::vector<double>& ladder,
                           const std::function<void(double)>& apply) {
      const int base = static_cast<int>(report.grid.size());
      for (double value : ladder) {
        apply(value);
        report.grid.push_back(assemble_spec(grid.family, sigma, views));
      }
      report.errors.resize(report.grid.size(), kInf);
      parallel_for(static_cast<int>(ladder.size()), jobs, [&](int i) {
        report.errors[base + i] = evaluate(report.grid[base + i]);
      });
      int best = base;
      for (int i = base; i < static_cast<int>(report.grid.size()); ++i) {
        if (report.errors[i] < report.errors[best]) best = i;
      }
      apply(ladder[best - base]);
    };

    if (has_sigma) {
      sweep(grid.sigma_ladder, [&](double v) { sigma = v; });
    }
    for (int k = 0; k < K; ++k) {
      sweep(grid.view_ladders[k], [&](double v) { views[k] = v; });
    }
  }

  int best = 0;
  for (size_t i = 1; i < report.errors.size(); ++i) {
    if (report.errors[i] < report.errors[best]) best = static_cast<int>(i);
  }
  report.best_index = best;
  return report;
}

}  // namespace ipca
