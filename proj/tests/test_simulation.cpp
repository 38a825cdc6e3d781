#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ipca/simulation.hpp"
#include "test_support.hpp"

using namespace ipca;
using namespace ipca::testing;

namespace {

void check_spd(const SymMatrix& m) {
  EigenPairs e = sym_eigendecompose(m);
  CHECK(e.values(e.values.size() - 1) > 0.0);
}

Matrix random_orthonormal(Index n, Index d, std::uint64_t seed) {
  auto gen = rng(seed);
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, d, gen));
  return Matrix(qr.householderQ()).leftCols(d);
}

}  // namespace

TEST_CASE("ar_toeplitz entries and guards") {
  SymMatrix m = ar_toeplitz(2, 0.9);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == doctest::Approx(0.9));
  CHECK(max_abs_diff(ar_toeplitz(4, 0.0).mat(), Matrix::Identity(4, 4)) == 0.0);
  CHECK(ar_toeplitz(3, 0.5)(0, 2) == doctest::Approx(0.25));
  CHECK_THROWS_AS(ar_toeplitz(3, 1.0), InvalidInput);
  CHECK_THROWS_AS(ar_toeplitz(3, -1.5), InvalidInput);
  check_spd(ar_toeplitz(20, 0.9));
}

TEST_CASE("block diagonal covariance") {
  CHECK(max_abs_diff(block_diagonal_cov(5, 5, 0.7).mat(), Matrix::Identity(5, 5)) == 0.0);

  SymMatrix two = block_diagonal_cov(4, 2, 0.5);
  Matrix want = Matrix::Zero(4, 4);
  want.block(0, 0, 2, 2) << 1.0, 0.5, 0.5, 1.0;
  want.block(2, 2, 2, 2) << 1.0, 0.5, 0.5, 1.0;
  CHECK(max_abs_diff(two.mat(), want) == 0.0);

  CHECK_THROWS_AS(block_diagonal_cov(4, 2, 1.0), InvalidInput);
  CHECK_THROWS_AS(block_diagonal_cov(4, 5, 0.5), InvalidInput);

  // Smallest eigenvalue of an equicorrelated block is 1 - q > 0.
  SymMatrix big = block_diagonal_cov(30, 4, 0.9);
  EigenPairs e = sym_eigendecompose(big);
  CHECK(e.values(29) == doctest::Approx(0.1).epsilon(1e-10));
  check_spd(big);
}

TEST_CASE("sparse banded covariance") {
  SymMatrix m = sparse_banded_cov(12, 4);
  CHECK(m(0, 4) == doctest::Approx(std::pow(0.4, 4)));
  CHECK(m(0, 5) == 0.0);
  check_spd(m);
}

TEST_CASE("spiked covariance spectrum and basis") {
  SpikedCov sc = spiked_cov(12, 3, 2024);
  EigenPairs e = sym_eigendecompose(sc.cov);
  for (int i = 0; i < 3; ++i) {
    CHECK(e.values(i) >= 5.0 - 1e-9);
    CHECK(e.values(i) <= 75.0 + 1e-9);
  }
  for (int i = 3; i < 12; ++i) CHECK(e.values(i) == doctest::Approx(1.0).epsilon(1e-10));

  const double trace = sc.cov.mat().trace();
  CHECK(trace >= 12 - 3 + 5.0 * 3 - 1e-6);
  CHECK(trace <= 12 - 3 + 75.0 * 3 + 1e-6);

  Matrix proj_basis = sc.basis * sc.basis.transpose();
  Matrix proj_eig = e.vectors.leftCols(3) * e.vectors.leftCols(3).transpose();
  CHECK(max_abs_diff(proj_basis, proj_eig) < 1e-10);
}

TEST_CASE("cluster sigma carries labels and a pinned top eigenspace") {
  ClusterSigma cs = spiked_cluster_sigma(15, 3, 2, 7);
  std::set<int> labels(cs.labels.begin(), cs.labels.end());
  CHECK(labels.size() == 3);

  EigenPairs e = sym_eigendecompose(cs.cov);
  CHECK(e.values(0) <= 75.0 + 1e-9);
  CHECK(e.values(1) >= 5.0 - 1e-9);
  for (int i = 2; i < 15; ++i) CHECK(e.values(i) == doctest::Approx(1.0).epsilon(1e-9));

  Matrix proj_basis = cs.basis * cs.basis.transpose();
  Matrix proj_eig = e.vectors.leftCols(2) * e.vectors.leftCols(2).transpose();
  CHECK(max_abs_diff(proj_basis, proj_eig) < 1e-10);
}

TEST_CASE("matrix normal sampling moments") {
  auto gen = rng(401);
  SUBCASE("identity covariances reproduce the raw draws") {
    Matrix x = sample_matrix_normal(SymMatrix::identity(3), SymMatrix::identity(4), 5);
    // Same substream, same draws: regenerating gives the identical matrix.
    Matrix y = sample_matrix_normal(SymMatrix::identity(3), SymMatrix::identity(4), 5);
    CHECK(max_abs_diff(x, y) == 0.0);
  }
  SUBCASE("second moment matches sigma scaled by trace of delta") {
    SymMatrix sigma = random_spd(5, gen, 0.5, 2.5);
    SymMatrix delta = random_spd(4, gen, 0.5, 2.5);
    Matrix accum = Matrix::Zero(5, 5);
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
      Matrix x = sample_matrix_normal(sigma, delta, 1000 + t);
      accum += x * x.transpose();
    }
    accum /= trials * delta.mat().trace();
    CHECK((accum - sigma.mat()).norm() <= 0.1 * sigma.mat().norm());
  }
}

TEST_CASE("laplace noise moments and determinism") {
  Matrix zero = Matrix::Zero(200, 500);
  CHECK(max_abs_diff(add_laplace_noise(zero, 0.0, 1), zero) == 0.0);

  const double b = 0.7;
  Matrix noise = add_laplace_noise(zero, b, 99);
  const double mean = noise.mean();
  const double var = (noise.array() - mean).square().sum() / (noise.size() - 1);
  CHECK(var == doctest::Approx(2.0 * b * b).epsilon(0.1));
  CHECK(max_abs_diff(add_laplace_noise(zero, b, 99), noise) == 0.0);
}

TEST_CASE("joint/individual generator ranks and recovery") {
  SUBCASE("no individual part and no noise gives exact rank r") {
    SimulatedData sim = simulate_jive(12, {8, 9}, 3, {0, 0}, 0.0, FactorDist::StdNormal, 11);
    Eigen::JacobiSVD<Matrix> svd(sim.data.view(0));
    int rank = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > 1e-9 * svd.singularValues()(0)) ++rank;
    }
    CHECK(rank == 3);

    EigenPairs e = sym_eigendecompose(sim.truth.sigma_true);
    CHECK(e.values(2) > 1e-9);
    CHECK(e.values(3) < 1e-9 * e.values(0));
  }
  SUBCASE("concatenated analysis recovers the joint basis at low noise") {
    SimulatedData sim = simulate_jive(30, {25, 20}, 4, {0, 0}, 0.01, FactorDist::StdNormal, 13);
    Matrix basis = baseline_concatenated_pca(sim.data, 4);
    CHECK(subspace_recovery_error(sim.truth.joint_basis, basis) < 0.1);
  }
  SUBCASE("all factor distributions generate") {
    for (FactorDist dist : {FactorDist::StdNormal, FactorDist::Uniform01, FactorDist::Exp1,
                            FactorDist::DiscreteFive}) {
      SimulatedData sim = simulate_jive(6, {4}, 2, {1}, 0.5, dist, 17);
      CHECK(sim.data.view(0).allFinite());
    }
  }
}

TEST_CASE("scenario composition") {
  SUBCASE("desk-scale base dims and invariants") {
    SimScenario scenario = make_scenario("base-desk", 3);
    SimulatedData sim = simulate_scenario(scenario);
    CHECK(sim.data.n() == 50);
    CHECK(sim.data.view_count() == 3);
    CHECK(sim.data.view_dim(0) == 60);
    CHECK(sim.data.view_dim(1) == 100);
    CHECK(sim.data.view_dim(2) == 80);
    check_spd(sim.truth.sigma_true);
    const double sigma_top = sym_eigendecompose(sim.truth.sigma_true).values(0);
    for (const SymMatrix& delta : sim.truth.delta_true) {
      check_spd(delta);
      const double top = sym_eigendecompose(delta).values(0);
      CHECK(top == doctest::Approx(1.5 * sigma_top).epsilon(1e-9));
    }
    CHECK(sim.truth.joint_basis.cols() == 2);
  }
  SUBCASE("full-scale base dims") {
    SimScenario scenario = make_scenario("base", 1);
    CHECK(scenario.n == 150);
    CHECK(scenario.p_k == std::vector<int>{300, 500, 400});
  }
  SUBCASE("seeded determinism") {
    SimulatedData a = simulate_scenario(make_scenario("base-desk", 12));
    SimulatedData b = simulate_scenario(make_scenario("base-desk", 12));
    for (int k = 0; k < 3; ++k) CHECK(max_abs_diff(a.data.view(k), b.data.view(k)) == 0.0);
    SimulatedData c = simulate_scenario(make_scenario("base-desk", 13));
    CHECK(max_abs_diff(a.data.view(0), c.data.view(0)) > 0.0);
  }
  SUBCASE("sparse scenario shared covariance is block structured") {
    SimulatedData sim = simulate_scenario(make_scenario("sparse", 5));
    CHECK(sim.data.view_dim(0) == 60);
    CHECK(sim.data.view_dim(1) == 80);
    Matrix prec = spd_inverse(sim.truth.sigma_true).mat();
    int nonzero_off = 0;
    for (Index i = 0; i < 50; ++i) {
      for (Index j = i + 1; j < 50; ++j) {
        if (std::abs(prec(i, j)) > 1e-8) ++nonzero_off;
      }
    }
    CHECK(nonzero_off > 0);
    CHECK(nonzero_off < 50 * 49 / 2 / 2);  // genuinely sparse
  }
  SUBCASE("unknown scenario is rejected") {
    CHECK_THROWS_AS(make_scenario("nope", 1), InvalidInput);
  }
}

TEST_CASE("subspace recovery error metric") {
  Matrix u = random_orthonormal(10, 3, 501);
  CHECK(subspace_recovery_error(u, u) == doctest::Approx(0.0));

  Matrix e1 = Matrix::Zero(4, 1);
  e1(0, 0) = 1.0;
  Matrix e2 = Matrix::Zero(4, 1);
  e2(1, 0) = 1.0;
  CHECK(subspace_recovery_error(e1, e2) == doctest::Approx(2.0));

  SUBCASE("rotation invariance") {
    auto gen = rng(503);
    Eigen::HouseholderQR<Matrix> qr(random_matrix(3, 3, gen));
    Matrix rot = qr.householderQ();
    CHECK(subspace_recovery_error(u, u * rot) < 1e-10);
  }
  SUBCASE("bounds on random pairs") {
    for (int t = 0; t < 50; ++t) {
      Matrix a = random_orthonormal(8, 2, 600 + t);
      Matrix b = random_orthonormal(8, 2, 700 + t);
      const double err = subspace_recovery_error(a, b);
      CHECK(err >= 0.0);
      CHECK(err <= 2.0);
    }
  }
  SUBCASE("non-orthonormal input is rejected") {
    Matrix bad = Matrix::Ones(4, 2);
    CHECK_THROWS_AS(subspace_recovery_error(bad, bad), InvalidInput);
  }
}

TEST_CASE("baseline methods") {
  SimulatedData sim = simulate_scenario(make_scenario("base-desk", 21));

  SUBCASE("single-view analysis equals the concatenated one for one view") {
    auto gen = rng(507);
    Matrix x = random_matrix(10, 6, gen);
    auto one = MultiViewDataset::from_views({x});
    Matrix a = baseline_individual_pca(one, 0, 2);
    Matrix b = baseline_concatenated_pca(one, 2);
    CHECK(max_abs_diff(a, b) < 1e-12);
    // A single view rescaled to unit top singular value changes nothing
    // about its eigenvectors either.
    Matrix c = baseline_mfa(one, 2);
    CHECK(max_abs_diff(a * a.transpose(), c * c.transpose()) < 1e-8);
  }
  SUBCASE("mfa is invariant to per-view rescaling") {
    Matrix basis = baseline_mfa(sim.data, 2);
    std::vector<Matrix> scaled_views;
    for (int k = 0; k < 3; ++k) scaled_views.push_back(sim.data.view(k) * (10.0 * (k + 1)));
    auto scaled = MultiViewDataset::from_views(std::move(scaled_views));
    Matrix basis_scaled = baseline_mfa(scaled, 2);
    CHECK(max_abs_diff(basis * basis.transpose(), basis_scaled * basis_scaled.transpose()) <
          1e-8);
  }
  SUBCASE("an inflated view drags the concatenated analysis, not mfa") {
    std::vector<Matrix> inflated_views;
    for (int k = 0; k < 3; ++k) {
      inflated_views.push_back(sim.data.view(k) * (k == 1 ? 100.0 : 1.0));
    }
    auto inflated = MultiViewDataset::from_views(std::move(inflated_views));

    // Blowing up view 1 collapses the concatenated analysis onto that view's
    // own basis, while the normalized analysis barely moves.
    Matrix view1_basis = baseline_individual_pca(inflated, 1, 2);
    Matrix concat_inflated = baseline_concatenated_pca(inflated, 2);
    CHECK(subspace_recovery_error(view1_basis, concat_inflated) < 0.05);

    const double concat_shift = subspace_recovery_error(
        baseline_concatenated_pca(sim.data, 2), concat_inflated);
    const double mfa_shift =
        subspace_recovery_error(baseline_mfa(sim.data, 2), baseline_mfa(inflated, 2));
    CHECK(mfa_shift * 10.0 < concat_shift);
  }
}
