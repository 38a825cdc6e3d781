#include "ipca/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ipca {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, const std::string& op, int index = 0) {
  return std::mt19937_64(substream_seed(seed, op, index));
}

Matrix standard_normal_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

// QR-based random orthogonal matrix, made unique by forcing a positive
// diagonal on the triangular factor.
Matrix random_orthogonal(Index dim, std::mt19937_64& rng) {
  Matrix g = standard_normal_matrix(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// Orthonormalizes the columns of m (QR with sign fix).
Matrix orthonormalize(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = Matrix(qr.householderQ()).leftCols(m.cols());
  Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  for (Index j = 0; j < m.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Vector sorted_spikes(int d, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector spikes(d);
  for (int i = 0; i < d; ++i) spikes(i) = unif(rng);
  std::sort(spikes.data(), spikes.data() + d, std::greater<double>());
  return spikes;
}

// Unit-norm vertices of a regular simplex with `count` points, embedded in
// `dims` coordinates (zero-padded or truncated).
Matrix simplex_vertices(int count, int dims) {
  Matrix centered(count, count);
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < count; ++i) {
      centered(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / count;
    }
  }
  // The centered unit vectors span a (count-1)-dimensional subspace.
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  Matrix basis = svd.matrixU().leftCols(count - 1);
  Matrix coords = (basis.transpose() * centered).transpose();  // count x (count-1)
  Matrix out = Matrix::Zero(count, dims);
  const int copy = std::min(dims, count - 1);
  out.leftCols(copy) = coords.leftCols(copy);
  for (int i = 0; i < count; ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

SymMatrix build_sigma(const SigmaSpec& spec, int n, std::uint64_t seed, GroundTruth& truth) {
  if (std::holds_alternative<SpikedClustersSpec>(spec)) {
    const auto& s = std::get<SpikedClustersSpec>(spec);
    ClusterSigma cs = spiked_cluster_sigma(n, s.n_clusters, s.d, seed);
    truth.joint_basis = cs.basis;
    truth.cluster_labels = cs.labels;
    return cs.cov;
  }
  if (std::holds_alternative<SpikedSpec>(spec)) {
    const auto& s = std::get<SpikedSpec>(spec);
    SpikedCov sc = spiked_cov(n, s.d, substream_seed(seed, "sigma-spiked"));
    truth.joint_basis = sc.basis;
    return sc.cov;
  }
  const auto& s = std::get<BlockSigmaSpec>(spec);
  SymMatrix base = block_diagonal_cov(n, s.blocks, s.q);
  EigenPairs e = sym_eigendecompose(base);
  Vector spikes = s.spikes.size() > 0 ? s.spikes : (Vector(2) << 25.0, 12.5).finished();
  if (spikes.size() >= n) {
    throw InvalidInput("block sigma: spike count must be below the dimension");
  }
  Vector evals = Vector::Ones(n);
  evals.head(spikes.size()) = spikes;
  Matrix cov = e.vectors * evals.asDiagonal() * e.vectors.transpose();
  truth.joint_basis = e.vectors.leftCols(spikes.size());
  return SymMatrix(cov);
}

SymMatrix build_delta(const DeltaSpec& spec, int p, std::uint64_t seed, int view) {
  if (std::holds_alternative<ArToeplitzSpec>(spec)) {
    return ar_toeplitz(p, std::get<ArToeplitzSpec>(spec).rho);
  }
  if (std::holds_alternative<BlockDeltaSpec>(spec)) {
    const auto& s = std::get<BlockDeltaSpec>(spec);
    return block_diagonal_cov(p, s.blocks, s.q);
  }
  if (std::holds_alternative<SpikedDeltaSpec>(spec)) {
    const auto& s = std::get<SpikedDeltaSpec>(spec);
    return spiked_cov(p, s.d, substream_seed(seed, "delta-spiked", view)).cov;
  }
  return sparse_banded_cov(p, std::get<SparseBandedSpec>(spec).bandwidth);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, const std::string& op, int index) {
  // FNV-1a over the seed, operation name and index, then a splitmix64 finisher.
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix_byte = [&h](unsigned char b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : op) mix_byte(static_cast<unsigned char>(c));
  const auto idx = static_cast<std::uint64_t>(index);
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(idx >> (8 * i)));
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

SymMatrix ar_toeplitz(int p, double rho) {
  if (p < 1) throw InvalidInput("ar_toeplitz: dimension must be positive");
  if (!(std::abs(rho) < 1.0)) {
    throw InvalidInput("ar_toeplitz: |rho| must be below 1");
  }
  Matrix m(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) m(i, j) = std::pow(rho, std::abs(i - j));
  }
  return SymMatrix(m);
}

SymMatrix block_diagonal_cov(int p, int blocks, double q) {
  if (p < 1 || blocks < 1 || blocks > p) {
    throw InvalidInput("block_diagonal_cov: need 1 <= blocks <= p");
  }
  if (!(q >= 0.0 && q < 1.0)) {
    throw InvalidInput("block_diagonal_cov: q must lie in [0, 1)");
  }
  Matrix m = Matrix::Zero(p, p);
  const int base = p / blocks;
  const int extra = p % blocks;  // first `extra` blocks get one more column
  int at = 0;
  for (int b = 0; b < blocks; ++b) {
    const int size = base + (b < extra ? 1 : 0);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        m(at + i, at + j) = (i == j) ? 1.0 : q;
      }
    }
    at += size;
  }
  return SymMatrix(m);
}

SymMatrix sparse_banded_cov(int p, int bandwidth) {
  if (p < 1 || bandwidth < 0) {
    throw InvalidInput("sparse_banded_cov: bad arguments");
  }
  Matrix m = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      const int gap = std::abs(i - j);
      if (gap <= bandwidth) m(i, j) = std::pow(0.4, gap);
    }
  }
  SymMatrix out(m);
  EigenPairs e = sym_eigendecompose(out);
  if (!(e.values(p - 1) > kPdThreshold * e.values(0))) {
    throw InvalidInput("sparse_banded_cov: profile is not positive definite at this bandwidth");
  }
  return out;
}

SpikedCov spiked_cov(int p, int d, std::uint64_t seed, double eig_low, double eig_high) {
  if (p < 2 || d < 1 || d >= p) {
    throw InvalidInput("spiked_cov: need 1 <= d < p");
  }
  if (!(eig_low > 1.0 && eig_high >= eig_low)) {
    throw InvalidInput("spiked_cov: spike range must sit above the unit bulk");
  }
  auto rng = make_rng(seed, "spiked-cov");
  Matrix u = random_orthogonal(p, rng);
  Vector evals = Vector::Ones(p);
  evals.head(d) = sorted_spikes(d, eig_low, eig_high, rng);
  SpikedCov out;
  out.cov = SymMatrix(u * evals.asDiagonal() * u.transpose());
  out.basis = u.leftCols(d);
  return out;
}

ClusterSigma spiked_cluster_sigma(int n, int n_clusters, int d, std::uint64_t seed) {
  if (n_clusters < 2 || d < 1 || n < 2 * n_clusters || d >= n) {
    throw InvalidInput("spiked_cluster_sigma: need n >= 2 * n_clusters and 1 <= d < n");
  }
  auto rng = make_rng(seed, "cluster-sigma");
  Matrix centroids = simplex_vertices(n_clusters, d);
  ClusterSigma out;
  out.labels.resize(n);
  Matrix factors(n, d);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (int i = 0; i < n; ++i) {
    const int label = i % n_clusters;
    out.labels[i] = label;
    for (int j = 0; j < d; ++j) factors(i, j) = centroids(label, j) + jitter(rng);
  }
  Matrix top = orthonormalize(factors);
  // Complete the basis with a random orthogonal complement.
  Matrix rest = standard_normal_matrix(n, n - d, rng);
  rest -= top * (top.transpose() * rest);
  rest = orthonormalize(rest);
  Matrix u(n, n);
  u.leftCols(d) = top;
  u.rightCols(n - d) = rest;
  Vector evals = Vector::Ones(n);
  evals.head(d) = sorted_spikes(d, 5.0, 75.0, rng);
  out.cov = SymMatrix(u * evals.asDiagonal() * u.transpose());
  out.basis = top;
  return out;
}

Matrix sample_matrix_normal(const SymMatrix& sigma, const SymMatrix& delta, std::uint64_t seed) {
  Matrix sig_half = spd_sqrt(sigma).mat();
  Matrix del_half = spd_sqrt(delta).mat();
  auto rng = make_rng(seed, "matrix-normal");
  Matrix omega = standard_normal_matrix(sigma.dim(), delta.dim(), rng);
  return sig_half * omega * del_half;
}

Matrix add_laplace_noise(const Matrix& x, double b, std::uint64_t seed) {
  if (b < 0.0) throw InvalidInput("add_laplace_noise: b must be non-negative");
  if (b == 0.0) return x;
  auto rng = make_rng(seed, "laplace");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out = x;
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      const double u = unif(rng) - 0.5;
      out(i, j) += -b * (u >= 0.0 ? 1.0 : -1.0) * std::log1p(-2.0 * std::abs(u));
    }
  }
  return out;
}

SimulatedData simulate_jive(int n, const std::vector<int>& p_k, int r,
                            const std::vector<int>& r_k, double sigma_noise, FactorDist dist,
                            std::uint64_t seed) {
  if (n < 1 || p_k.empty() || r < 1 || r_k.size() != p_k.size() || sigma_noise < 0.0) {
    throw InvalidInput("simulate_jive: bad arguments");
  }
  for (int rk : r_k) {
    if (rk < 0) throw InvalidInput("simulate_jive: individual ranks must be non-negative");
  }
  auto rng = make_rng(seed, "jive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_int_distribution<int> five(-2, 2);
  const auto draw = [&]() -> double {
    switch (dist) {
      case FactorDist::StdNormal: return normal(rng);
      case FactorDist::Uniform01: return unif(rng);
      case FactorDist::Exp1: return expo(rng);
      case FactorDist::DiscreteFive: return static_cast<double>(five(rng));
    }
    return 0.0;
  };
  const auto factor = [&](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = draw();
    }
    return m;
  };

  Matrix u = factor(n, r);
  std::vector<Matrix> views;
  Matrix joint_all(n, 0);
  for (size_t k = 0; k < p_k.size(); ++k) {
    Matrix v = factor(r, p_k[k]);
    Matrix joint = u * v;
    Matrix view = joint;
    if (r_k[k] > 0) {
      view += factor(n, r_k[k]) * factor(r_k[k], p_k[k]);
    }
    if (sigma_noise > 0.0) {
      std::normal_distribution<double> err(0.0, sigma_noise);
      for (Index i = 0; i < view.rows(); ++i) {
        for (Index j = 0; j < view.cols(); ++j) view(i, j) += err(rng);
      }
    }
    Matrix widened(n, joint_all.cols() + joint.cols());
    widened << joint_all, joint;
    joint_all = std::move(widened);
    views.push_back(std::move(view));
  }

  SimulatedData out{MultiViewDataset::from_views(std::move(views)), GroundTruth{}};
  out.truth.sigma_true = SymMatrix(joint_all * joint_all.transpose());
  EigenPairs e = sym_eigendecompose(out.truth.sigma_true);
  out.truth.joint_basis = e.vectors.leftCols(r);
  return out;
}

SimulatedData simulate_scenario(const SimScenario& scenario) {
  if (scenario.n < 2 || scenario.p_k.empty() ||
      scenario.p_k.size() != scenario.delta_specs.size()) {
    throw InvalidInput("simulate_scenario: need n >= 2 and one delta spec per view");
  }
  GroundTruth truth;
  truth.sigma_true = build_sigma(scenario.sigma_spec, scenario.n, scenario.seed, truth);
  const double sigma_top = sym_eigendecompose(truth.sigma_true).values(0);

  std::vector<Matrix> views;
  for (size_t k = 0; k < scenario.p_k.size(); ++k) {
    SymMatrix delta = build_delta(scenario.delta_specs[k], scenario.p_k[k], scenario.seed,
                                  static_cast<int>(k));
    if (scenario.obscure_joint_signal) {
      const double top = sym_eigendecompose(delta).values(0);
      delta = SymMatrix(delta.mat() * (1.5 * sigma_top / top));
    }
    Matrix x = sample_matrix_normal(truth.sigma_true, delta,
                                    substream_seed(scenario.seed, "view", static_cast<int>(k)));
    if (scenario.laplace_b > 0.0) {
      x = add_laplace_noise(x, scenario.laplace_b,
                            substream_seed(scenario.seed, "view-noise", static_cast<int>(k)));
    }
    truth.delta_true.push_back(std::move(delta));
    views.push_back(std::move(x));
  }
  return SimulatedData{MultiViewDataset::from_views(std::move(views)), std::move(truth)};
}

SimScenario make_scenario(const std::string& name, std::uint64_t seed) {
  SimScenario s;
  s.name = name;
  s.seed = seed;
  if (name == "base" || name == "base-desk") {
    const bool desk = name == "base-desk";
    s.n = desk ? 50 : 150;
    s.p_k = desk ? std::vector<int>{60, 100, 80} : std::vector<int>{300, 500, 400};
    s.sigma_spec = SpikedClustersSpec{3, 2, 5.0, 75.0};
    s.delta_specs = {ArToeplitzSpec{0.9}, SpikedDeltaSpec{3}, BlockDeltaSpec{5, 0.5}};
    s.obscure_joint_signal = true;
    return s;
  }
  if (name == "sparse" || name == "sparse-large") {
    const bool large = name == "sparse-large";
    s.n = 50;
    s.p_k = large ? std::vector<int>{120, 160} : std::vector<int>{60, 80};
    s.sigma_spec = BlockSigmaSpec{5, 0.5, (Vector(2) << 25.0, 12.5).finished()};
    s.delta_specs = {SparseBandedSpec{4}, BlockDeltaSpec{5, 0.5}};
    s.obscure_joint_signal = false;
    return s;
  }
  throw InvalidInput("unknown scenario '" + name + "'");
}

double subspace_recovery_error(const Matrix& u_true, const Matrix& u_hat) {
  if (u_true.rows() != u_hat.rows() || u_true.cols() != u_hat.cols() || u_true.cols() < 1) {
    throw InvalidInput("subspace_recovery_error: bases must share their shape");
  }
  const Index d = u_true.cols();
  const auto check_orthonormal = [d](const Matrix& u, const char* which) {
    Matrix gram = u.transpose() * u;
    if ((gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() >= 1e-8) {
      throw InvalidInput(std::string("subspace_recovery_error: ") + which +
                         " basis is not orthonormal");
    }
  };
  check_orthonormal(u_true, "reference");
  check_orthonormal(u_hat, "estimated");
  const Matrix diff = u_hat * u_hat.transpose() - u_true * u_true.transpose();
  return diff.squaredNorm() / static_cast<double>(d);
}

namespace {

Matrix top_eigvecs(const SymMatrix& m, int d) {
  if (d < 1 || d > m.dim()) {
    throw ShapeError("baseline: d outside [1, n]");
  }
  return sym_eigendecompose(m).vectors.leftCols(d);
}

MultiViewDataset centered_copy(const MultiViewDataset& data) {
  return data.centered() ? data : center_columns(data);
}

}  // namespace

Matrix baseline_individual_pca(const MultiViewDataset& data, int k, int d) {
  MultiViewDataset c = centered_copy(data);
  const Matrix& x = c.view(k);
  SymMatrix gram(x * x.transpose() / static_cast<double>(x.cols()));
  return top_eigvecs(gram, d);
}

Matrix baseline_concatenated_pca(const MultiViewDataset& data, int d) {
  MultiViewDataset c = centered_copy(data);
  Matrix x = concatenate(c);
  SymMatrix gram(x * x.transpose() / static_cast<double>(x.cols()));
  return top_eigvecs(gram, d);
}

Matrix baseline_mfa(const MultiViewDataset& data, int d) {
  MultiViewDataset c = centered_copy(data);
  Matrix gram = Matrix::Zero(c.n(), c.n());
  for (int k = 0; k < c.view_count(); ++k) {
    const Matrix& x = c.view(k);
    Eigen::JacobiSVD<Matrix> svd(x);
    const double top = svd.singularValues()(0);
    if (!(top > 0.0)) {
      throw DegenerateScale("baseline_mfa: view " + std::to_string(k) + " is zero");
    }
    gram += (x / top) * (x / top).transpose();
  }
  gram /= static_cast<double>(c.total_dim());
  return top_eigvecs(SymMatrix(gram), d);
}

}  // namespace ipca
