#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ipca/dataset.hpp"
#include "ipca/numerics.hpp"

namespace ipca {

/// Derives an independent RNG stream for (seed, operation name, index), so
/// every generator below is reproducible per seed on a fixed platform.
std::uint64_t substream_seed(std::uint64_t seed, const std::string& op, int index = 0);

/// True covariances behind a simulated dataset. joint_basis spans the top-d
/// eigenspace of sigma_true; cluster_labels is set by the cluster design.
struct GroundTruth {
  SymMatrix sigma_true;
  std::vector<SymMatrix> delta_true;
  Matrix joint_basis;
  std::vector<int> cluster_labels;

  GroundTruth() : sigma_true(SymMatrix::identity(1)) {}
};

/// Entry (i, j) = rho^|i-j|.
SymMatrix ar_toeplitz(int p, double rho);

/// Blocks of as-equal-as-possible size: diagonal 1, within-block off-diagonal
/// q, zero elsewhere.
SymMatrix block_diagonal_cov(int p, int blocks, double q);

/// Covariance with a banded profile: entry 0.4^|i-j| for |i-j| <= bandwidth,
/// zero beyond. Verified positive definite on construction.
SymMatrix sparse_banded_cov(int p, int bandwidth);

/// U D U' with a seeded random orthogonal U; the top d eigenvalues are drawn
/// Unif(eig_low, eig_high) (sorted descending), the rest are 1. basis holds
/// the top-d eigenvectors.
struct SpikedCov {
  SymMatrix cov;
  Matrix basis;
  SpikedCov() : cov(SymMatrix::identity(1)) {}
};
SpikedCov spiked_cov(int p, int d, std::uint64_t seed, double eig_low = 5.0,
                     double eig_high = 75.0);

/// Spiked covariance whose top-d factor coordinates place the samples in
/// n_clusters groups: round-robin labels, unit-scaled simplex-vertex
/// centroids plus N(0, 0.1^2) jitter, then orthonormalized. Spectrum as in
/// spiked_cov.
struct ClusterSigma {
  SymMatrix cov;
  Matrix basis;
  std::vector<int> labels;
  ClusterSigma() : cov(SymMatrix::identity(1)) {}
};
ClusterSigma spiked_cluster_sigma(int n, int n_clusters, int d, std::uint64_t seed);

/// X = Sigma^{1/2} Omega Delta^{1/2} with Omega i.i.d. standard normal, so
/// X is matrix-normal with row covariance Sigma and column covariance Delta.
Matrix sample_matrix_normal(const SymMatrix& sigma, const SymMatrix& delta, std::uint64_t seed);

/// X plus i.i.d. Laplace(0, b) noise drawn by inverse CDF from seeded
/// uniforms. b = 0 returns X unchanged.
Matrix add_laplace_noise(const Matrix& x, double b, std::uint64_t seed);

enum class FactorDist { StdNormal, Uniform01, Exp1, DiscreteFive };

/// Additive joint/individual model: X_k = U V_k + U_k W_k + E_k with a
/// shared n x r factor U, per-view individual factors of rank r_k, and
/// N(0, sigma_noise^2) errors. sigma_true = (U [V_1 ... V_K])(...)', and
/// joint_basis holds its top-r eigenvectors.
struct SimulatedData {
  MultiViewDataset data;
  GroundTruth truth;
};
SimulatedData simulate_jive(int n, const std::vector<int>& p_k, int r,
                            const std::vector<int>& r_k, double sigma_noise, FactorDist dist,
                            std::uint64_t seed);

struct SpikedClustersSpec {
  int n_clusters = 3;
  int d = 2;
  double eig_low = 5.0;
  double eig_high = 75.0;
};
struct SpikedSpec {
  int d = 2;
};
struct BlockSigmaSpec {  // eigenbasis of a block-diagonal matrix, spiked spectrum
  int blocks = 5;
  double q = 0.5;
  Vector spikes;  // leading eigenvalues; remaining are 1
};
using SigmaSpec = std::variant<SpikedClustersSpec, SpikedSpec, BlockSigmaSpec>;

struct ArToeplitzSpec {
  double rho = 0.9;
};
struct BlockDeltaSpec {
  int blocks = 5;
  double q = 0.5;
};
struct SpikedDeltaSpec {
  int d = 3;
};
struct SparseBandedSpec {
  int bandwidth = 4;
};
using DeltaSpec = std::variant<ArToeplitzSpec, BlockDeltaSpec, SpikedDeltaSpec, SparseBandedSpec>;

struct SimScenario {
  std::string name = "custom";
  int n = 0;
  std::vector<int> p_k;
  SigmaSpec sigma_spec;
  std::vector<DeltaSpec> delta_specs;
  double laplace_b = 0.0;  // 0 disables the noise term
  /// Rescales every view covariance so its top eigenvalue is 1.5x the shared
  /// covariance's, burying the joint signal under per-view variation.
  bool obscure_joint_signal = false;
  std::uint64_t seed = 0;
};

/// Composes the generators above into a dataset plus its ground truth.
SimulatedData simulate_scenario(const SimScenario& scenario);

/// Named presets; throws InvalidInput for unknown names. Known names:
/// "base", "base-desk", "sparse", "sparse-large".
SimScenario make_scenario(const std::string& name, std::uint64_t seed);

/// (1/d) || U_hat U_hat' - U U' ||_F^2 for two orthonormal n x d bases;
/// ranges over [0, 2].
double subspace_recovery_error(const Matrix& u_true, const Matrix& u_hat);

/// Top-d eigenvectors of the single-view covariance (1/p_k) X_k X_k'.
Matrix baseline_individual_pca(const MultiViewDataset& data, int k, int d);

/// Top-d eigenvectors of (1/p) X~ X~' on the stacked centered data.
Matrix baseline_concatenated_pca(const MultiViewDataset& data, int d);

/// Concatenated analysis after rescaling each view by its largest singular
/// value.
Matrix baseline_mfa(const MultiViewDataset& data, int d);

}  // namespace ipca
