#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ipca/estimators.hpp"

namespace ipca {

/// Scattered held-out entries, one index list per view. Indices are unique
/// and never empty out a whole row or column of any view.
struct MissingMask {
  std::vector<std::vector<std::pair<Index, Index>>> entries;
  std::uint64_t seed = 0;
  double fraction = 0.0;

  bool empty() const;
};

struct MaskSample {
  MissingMask mask;
  /// Original values at the masked positions, aligned with mask.entries.
  std::vector<std::vector<double>> held_out;
};

/// Uniformly samples round(fraction * n * p_k) entries per view without
/// replacement, then resamples offenders until no row or column of a view is
/// fully masked. Deterministic per seed.
MaskSample mask_random(const MultiViewDataset& data, double fraction, std::uint64_t seed);

/// Fills the missing entries of a single view with the conditional mean of
/// the matrix-normal model N(1 mu', Sigma (x) Delta) given the observed
/// entries. Alternates row passes (each row's missing block replaced by its
/// conditional mean given everything else, a normal with covariance
/// proportional to Delta) and column passes (covariance proportional to
/// Sigma) until the largest entry change drops below tol.
Matrix conditional_expectation(const Matrix& x,
                               const std::vector<std::pair<Index, Index>>& missing,
                               const Vector& mu, const SymMatrix& sigma, const SymMatrix& delta,
                               double tol = 1e-6, int max_passes = 50);

/// Three-stage imputation: (1) per-view fill with observed column means
/// followed by a ridge-regularized conditional expectation under an identity
/// shared covariance; (2) one fit of the requested penalty family on the
/// filled data; (3) one conditional-expectation pass per view under the
/// fitted model. Observed entries are returned bit-exact.
MultiViewDataset impute_onestep(const MultiViewDataset& data, const MissingMask& mask,
                                const PenaltySpec& penalty, const FitOptions& options = {});

/// Mean over views of ||imputed - truth||_F^2 / ||truth - column-mean
/// fill||_F^2 at the masked entries; 1.0 for the column-mean imputer itself.
double imputation_error(const MultiViewDataset& imputed, const MissingMask& mask,
                        const std::vector<std::vector<double>>& truth,
                        const std::vector<Vector>& column_means);

/// Per-parameter candidate ladders; the shared ladder is ignored by the
/// multiplicative family.
struct TuningGrid {
  PenaltyFamily family = PenaltyFamily::MultiplicativeFrobenius;
  std::vector<double> sigma_ladder;
  std::vector<std::vector<double>> view_ladders;

  /// log-spaced 10^-3 .. 10^3, 7 points per parameter.
  static TuningGrid default_grid(PenaltyFamily family, int view_count);
};

enum class TuneMode { Full, Greedy };

struct TuningReport {
  std::vector<PenaltySpec> grid;  // evaluated candidates in evaluation order
  std::vector<double> errors;
  int best_index = 0;
  TuneMode mode = TuneMode::Full;
  std::uint64_t seed = 0;
  double fraction = 0.0;

  const PenaltySpec& best() const { return grid[best_index]; }
};

/// Draws one mask, evaluates candidates against it and picks the minimizer
/// (ties to the smallest index). Full mode walks the Cartesian product of
/// the ladders; greedy sweeps one parameter at a time in the order shared,
/// view 0, ..., view K-1, pinning each at its running best (unswept
/// parameters sit at their ladder midpoints). A candidate whose fit fails
/// scores +infinity. Candidates may be evaluated on `jobs` threads.
TuningReport select_penalties(const MultiViewDataset& data, const TuningGrid& grid,
                              TuneMode mode, double fraction, std::uint64_t seed,
                              const FitOptions& options = {}, int jobs = 1);

}  // namespace ipca
