#pragma once

#include <string>
#include <vector>

#include "ipca/numerics.hpp"

namespace ipca {

/// K row-aligned views on the same n samples. Immutable after construction;
/// centering produces a new dataset.
class MultiViewDataset {
 public:
  /// Raw (uncentered) views. Missing sample ids default to "s0", "s1", ...;
  /// missing feature names default to "v<k>_f<j>".
  static MultiViewDataset from_views(std::vector<Matrix> views,
                                     std::vector<std::string> sample_ids = {},
                                     std::vector<std::vector<std::string>> feature_names = {});

  /// Views whose column means are known externally (zero-mean by construction
  /// or centered elsewhere). The dataset is marked centered with the supplied
  /// means without touching the entries. Empty `known_means` means all zeros.
  static MultiViewDataset from_centered_views(std::vector<Matrix> views,
                                              std::vector<Vector> known_means = {},
                                              std::vector<std::string> sample_ids = {},
                                              std::vector<std::vector<std::string>> feature_names = {});

  Index n() const { return views_.empty() ? 0 : views_[0].rows(); }
  int view_count() const { return static_cast<int>(views_.size()); }
  const Matrix& view(int k) const;
  Index view_dim(int k) const { return view(k).cols(); }
  Index total_dim() const;

  bool centered() const { return centered_; }
  /// Per-view column means; present only when centered.
  const std::vector<Vector>& column_means() const;

  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  const std::vector<std::string>& feature_names(int k) const;

  /// Copy with one view's entries replaced (same shape). Centering state is
  /// dropped; used by the imputation machinery.
  MultiViewDataset with_view_replaced(int k, Matrix entries) const;

 private:
  MultiViewDataset() = default;
  std::vector<Matrix> views_;
  std::vector<std::string> sample_ids_;
  std::vector<std::vector<std::string>> feature_names_;
  bool centered_ = false;
  std::vector<Vector> column_means_;
};

/// Subtracts column means from every view; records them. Errors if the data
/// is already centered.
MultiViewDataset center_columns(const MultiViewDataset& data);

/// n x p matrix [X_1, ..., X_K] with views in order.
Matrix concatenate(const MultiViewDataset& data);

/// Loads one CSV per view. Format: header row, first column sample id, comma
/// separated, '.' decimal. All files must list identical sample ids in
/// identical order.
MultiViewDataset load_csv(const std::vector<std::string>& paths);

/// Writes a matrix as CSV with the above layout. Values carry 17 significant
/// digits so a write/load round trip is lossless.
void write_csv(const Matrix& m, const std::string& path,
               const std::vector<std::string>& row_ids = {},
               const std::vector<std::string>& col_names = {});

/// Reads back a single matrix CSV written by write_csv (or any view file).
struct CsvMatrix {
  Matrix values;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_names;
};
CsvMatrix read_csv_matrix(const std::string& path);

}  // namespace ipca
