#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ipca/simulation.hpp"
#include "ipca/tuning.hpp"
#include "test_support.hpp"

using namespace ipca;
using namespace ipca::testing;

namespace {

// Brute-force oracle: conditional mean of the missing coordinates under the
// full (n p)-dimensional normal with Cov[(i,j),(i',j')] = Sigma_ii' Delta_jj'
// and mean mu_j per column. Independent of the iterative implementation.
Matrix kronecker_conditional_mean(const Matrix& x,
                                  const std::vector<std::pair<Index, Index>>& missing,
                                  const Vector& mu, const SymMatrix& sigma,
                                  const SymMatrix& delta) {
  const Index n = x.rows();
  const Index p = x.cols();
  std::set<std::pair<Index, Index>> missing_set(missing.begin(), missing.end());
  std::vector<std::pair<Index, Index>> observed;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (!missing_set.count({i, j})) observed.emplace_back(i, j);
    }
  }
  const auto cov = [&](const std::pair<Index, Index>& a, const std::pair<Index, Index>& b) {
    return sigma(a.first, b.first) * delta(a.second, b.second);
  };
  const Index nm = static_cast<Index>(missing.size());
  const Index no = static_cast<Index>(observed.size());
  Matrix c_mo(nm, no), c_oo(no, no);
  Vector gap(no);
  for (Index a = 0; a < no; ++a) {
    gap(a) = x(observed[a].first, observed[a].second) - mu(observed[a].second);
    for (Index b = 0; b < no; ++b) c_oo(a, b) = cov(observed[a], observed[b]);
  }
  for (Index a = 0; a < nm; ++a) {
    for (Index b = 0; b < no; ++b) c_mo(a, b) = cov(missing[a], observed[b]);
  }
  Vector fill = c_mo * c_oo.ldlt().solve(gap);
  Matrix out = x;
  for (Index a = 0; a < nm; ++a) {
    out(missing[a].first, missing[a].second) = mu(missing[a].second) + fill(a);
  }
  return out;
}

MultiViewDataset small_dataset(std::uint64_t seed, Index n, std::vector<Index> dims) {
  auto gen = rng(seed);
  std::vector<Matrix> views;
  for (Index p : dims) views.push_back(random_matrix(n, p, gen));
  return MultiViewDataset::from_views(std::move(views));
}

}  // namespace

TEST_CASE("mask sampling counts, determinism and feasibility") {
  auto data = small_dataset(201, 10, {10, 6});

  SUBCASE("zero fraction masks nothing") {
    MaskSample s = mask_random(data, 0.0, 1);
    CHECK(s.mask.empty());
  }
  SUBCASE("five percent of a 10x10 view is five entries") {
    MaskSample s = mask_random(data, 0.05, 2);
    CHECK(s.mask.entries[0].size() == 5);
    CHECK(s.mask.entries[1].size() == 3);  // round(0.05 * 60)
  }
  SUBCASE("same seed, same mask; different seed, different mask") {
    MaskSample a = mask_random(data, 0.1, 3);
    MaskSample b = mask_random(data, 0.1, 3);
    CHECK(a.mask.entries == b.mask.entries);
    MaskSample c = mask_random(data, 0.1, 4);
    CHECK(a.mask.entries != c.mask.entries);
  }
  SUBCASE("entries are unique and in range, rows and columns keep anchors") {
    MaskSample s = mask_random(data, 0.4, 5);
    for (int k = 0; k < 2; ++k) {
      std::set<std::pair<Index, Index>> seen(s.mask.entries[k].begin(), s.mask.entries[k].end());
      CHECK(seen.size() == s.mask.entries[k].size());
      std::vector<int> row_count(10, 0), col_count(data.view_dim(k), 0);
      for (const auto& [i, j] : s.mask.entries[k]) {
        ++row_count[i];
        ++col_count[j];
      }
      for (Index i = 0; i < 10; ++i) CHECK(row_count[i] < data.view_dim(k));
      for (Index j = 0; j < data.view_dim(k); ++j) CHECK(col_count[j] < 10);
    }
  }
  SUBCASE("held-out values match the data") {
    MaskSample s = mask_random(data, 0.1, 6);
    for (int k = 0; k < 2; ++k) {
      for (size_t t = 0; t < s.mask.entries[k].size(); ++t) {
        const auto& [i, j] = s.mask.entries[k][t];
        CHECK(s.held_out[k][t] == data.view(k)(i, j));
      }
    }
  }
  SUBCASE("infeasible fractions are rejected") {
    auto thin = small_dataset(203, 4, {1});
    CHECK_THROWS_AS(mask_random(thin, 0.4, 1), InvalidMask);
    CHECK_THROWS_AS(mask_random(data, 0.5, 1), InvalidMask);
    CHECK_THROWS_AS(mask_random(data, -0.1, 1), InvalidMask);
  }
}

TEST_CASE("conditional expectation basics") {
  auto gen = rng(205);
  SUBCASE("no missing entries returns the input untouched") {
    Matrix x = random_matrix(3, 3, gen);
    Matrix out = conditional_expectation(x, {}, Vector::Zero(3), SymMatrix::identity(3),
                                         SymMatrix::identity(3));
    CHECK(max_abs_diff(out, x) == 0.0);
  }
  SUBCASE("independence fills with the column mean") {
    Matrix x = random_matrix(4, 3, gen);
    Vector mu(3);
    mu << 1.0, -2.0, 0.5;
    Matrix out = conditional_expectation(x, {{2, 1}}, mu, SymMatrix::identity(4),
                                         SymMatrix::identity(3));
    CHECK(out(2, 1) == doctest::Approx(-2.0).epsilon(1e-10));
    // Everything else untouched.
    out(2, 1) = x(2, 1);
    CHECK(max_abs_diff(out, x) == 0.0);
  }
}

TEST_CASE("conditional expectation matches the brute-force oracle") {
  auto gen = rng(207);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 2 + trial % 3;
    const Index p = 2 + (trial / 3) % 3;
    SymMatrix sigma = random_spd(n, gen, 0.6, 2.2);
    SymMatrix delta = random_spd(p, gen, 0.6, 2.2);
    Matrix x = random_matrix(n, p, gen);
    Vector mu = random_matrix(p, 1, gen).col(0);

    std::set<std::pair<Index, Index>> chosen;
    std::uniform_int_distribution<Index> row(0, n - 1), col(0, p - 1);
    const int want = 1 + trial % 3;
    while (static_cast<int>(chosen.size()) < want) chosen.insert({row(gen), col(gen)});
    std::vector<std::pair<Index, Index>> missing(chosen.begin(), chosen.end());

    Matrix got = conditional_expectation(x, missing, mu, sigma, delta, 1e-10, 500);
    Matrix oracle = kronecker_conditional_mean(x, missing, mu, sigma, delta);
    CHECK(max_abs_diff(got, oracle) < 1e-4);
  }
}

TEST_CASE("one-step imputation") {
  SimulatedData sim = simulate_scenario(make_scenario("base-desk", 209));
  const auto& data = sim.data;
  auto penalty = PenaltySpec::multiplicative_frobenius({1.0, 1.0, 1.0});
  FitOptions options;
  options.max_iter = 30;

  SUBCASE("observed entries are returned bit-exact") {
    MaskSample s = mask_random(data, 0.05, 11);
    MultiViewDataset imputed = impute_onestep(data, s.mask, penalty, options);
    for (int k = 0; k < data.view_count(); ++k) {
      std::set<std::pair<Index, Index>> masked(s.mask.entries[k].begin(),
                                               s.mask.entries[k].end());
      for (Index i = 0; i < data.n(); ++i) {
        for (Index j = 0; j < data.view_dim(k); ++j) {
          if (!masked.count({i, j})) {
            CHECK(imputed.view(k)(i, j) == data.view(k)(i, j));
          }
        }
      }
    }
  }
  SUBCASE("empty mask returns the input unchanged") {
    MissingMask empty;
    empty.entries.resize(data.view_count());
    MultiViewDataset imputed = impute_onestep(data, empty, penalty, options);
    for (int k = 0; k < data.view_count(); ++k) {
      CHECK(max_abs_diff(imputed.view(k), data.view(k)) == 0.0);
    }
  }
  SUBCASE("deterministic for a fixed mask and penalty") {
    MaskSample s = mask_random(data, 0.05, 13);
    MultiViewDataset a = impute_onestep(data, s.mask, penalty, options);
    MultiViewDataset b = impute_onestep(data, s.mask, penalty, options);
    for (int k = 0; k < data.view_count(); ++k) {
      CHECK(max_abs_diff(a.view(k), b.view(k)) == 0.0);
    }
  }
}

TEST_CASE("imputation error normalization") {
  auto data = small_dataset(211, 8, {6, 5});
  MaskSample s = mask_random(data, 0.1, 15);

  std::vector<Vector> means;
  for (int k = 0; k < 2; ++k) {
    Vector mu = Vector::Zero(data.view_dim(k));
    std::vector<int> seen(data.view_dim(k), 0);
    std::set<std::pair<Index, Index>> masked(s.mask.entries[k].begin(), s.mask.entries[k].end());
    for (Index j = 0; j < data.view_dim(k); ++j) {
      for (Index i = 0; i < 8; ++i) {
        if (!masked.count({i, j})) {
          mu(j) += data.view(k)(i, j);
          ++seen[j];
        }
      }
      mu(j) /= seen[j];
    }
    means.push_back(mu);
  }

  SUBCASE("exact recovery scores zero") {
    CHECK(imputation_error(data, s.mask, s.held_out, means) == doctest::Approx(0.0));
  }
  SUBCASE("column-mean fill scores one") {
    std::vector<Matrix> filled_views;
    for (int k = 0; k < 2; ++k) {
      Matrix x = data.view(k);
      for (const auto& [i, j] : s.mask.entries[k]) x(i, j) = means[k](j);
      filled_views.push_back(std::move(x));
    }
    auto filled = MultiViewDataset::from_views(std::move(filled_views));
    CHECK(imputation_error(filled, s.mask, s.held_out, means) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two-entry case matches a hand computation") {
    Matrix x(2, 2);
    x << 1.0, 2.0, 3.0, 4.0;
    auto tiny = MultiViewDataset::from_views({x});
    MissingMask mask;
    mask.entries = {{{0, 0}, {1, 1}}};
    std::vector<std::vector<double>> truth = {{1.0, 4.0}};
    std::vector<Vector> mu = {(Vector(2) << 0.0, 1.0).finished()};
    Matrix imput(2, 2);
    imput << 2.0, 2.0, 3.0, 3.0;  // errors 1 and 1
    auto imputed = MultiViewDataset::from_views({imput});
    // num = 1 + 1; den = (1-0)^2 + (4-1)^2 = 10
    CHECK(imputation_error(imputed, mask, truth, mu) == doctest::Approx(0.2));
  }
  SUBCASE("empty mask is rejected") {
    MissingMask empty;
    empty.entries.resize(2);
    CHECK_THROWS_AS(imputation_error(data, empty, {{}, {}}, means), InvalidMask);
  }
}

TEST_CASE("penalty selection") {
  SimulatedData sim = simulate_scenario(make_scenario("base-desk", 217));
  const auto& data = sim.data;
  FitOptions options;
  options.max_iter = 25;

  SUBCASE("single candidate grid selects index zero") {
    TuningGrid grid;
    grid.family = PenaltyFamily::MultiplicativeFrobenius;
    grid.view_ladders = {{1.0}, {1.0}, {1.0}};
    TuningReport report =
        select_penalties(data, grid, TuneMode::Full, 0.05, 19, options);
    CHECK(report.grid.size() == 1);
    CHECK(report.best_index == 0);
    CHECK(report.errors[0] < 1.0);
  }
  SUBCASE("an oversized penalty loses to a sane one") {
    TuningGrid grid;
    grid.family = PenaltyFamily::MultiplicativeFrobenius;
    grid.view_ladders = {{1.0, 1e6}, {1.0, 1e6}, {1.0, 1e6}};
    TuningReport report =
        select_penalties(data, grid, TuneMode::Full, 0.05, 21, options, 2);
    CHECK(report.grid.size() == 8);
    CHECK(report.best_index == 0);
    // The fully shrunk candidate behaves like the column-mean fill.
    CHECK(std::abs(report.errors.back() - 1.0) < 0.05);
  }
  SUBCASE("full and greedy agree on a separable ladder") {
    TuningGrid grid;
    grid.family = PenaltyFamily::MultiplicativeFrobenius;
    grid.view_ladders = {{0.5, 2.0}, {0.5, 2.0}, {1.0}};
    TuningReport full = select_penalties(data, grid, TuneMode::Full, 0.05, 23, options);
    TuningReport greedy = select_penalties(data, grid, TuneMode::Greedy, 0.05, 23, options);
    CHECK(full.grid.size() == 4);
    CHECK(greedy.grid.size() == 5);  // 2 + 2 + 1 sweeps
    CHECK(full.best().lambda_k == greedy.best().lambda_k);
  }
  SUBCASE("report is deterministic in the seed") {
    TuningGrid grid;
    grid.family = PenaltyFamily::MultiplicativeFrobenius;
    grid.view_ladders = {{0.5, 5.0}, {1.0}, {1.0}};
    TuningReport a = select_penalties(data, grid, TuneMode::Full, 0.05, 29, options);
    TuningReport b = select_penalties(data, grid, TuneMode::Full, 0.05, 29, options, 3);
    CHECK(a.errors == b.errors);
    CHECK(a.best_index == b.best_index);
  }
}
