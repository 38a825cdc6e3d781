#include "ipca/dataset.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ipca {

namespace {

void check_views(const std::vector<Matrix>& views) {
  if (views.empty()) {
    throw ShapeError("dataset: need at least one view");
  }
  const Index n = views[0].rows();
  if (n < 1) {
    throw ShapeError("dataset: views must have at least one row");
  }
  for (size_t k = 0; k < views.size(); ++k) {
    if (views[k].rows() != n) {
      throw AlignmentError("view " + std::to_string(k) + " has " +
                           std::to_string(views[k].rows()) + " rows, expected " +
                           std::to_string(n));
    }
    if (views[k].cols() < 1) {
      throw ShapeError("view " + std::to_string(k) + " has no columns");
    }
  }
}

std::vector<std::string> default_sample_ids(Index n) {
  std::vector<std::string> ids(n);
  for (Index i = 0; i < n; ++i) ids[i] = "s" + std::to_string(i);
  return ids;
}

std::vector<std::string> default_feature_names(int k, Index p) {
  std::vector<std::string> names(p);
  for (Index j = 0; j < p; ++j) {
    names[j] = "v" + std::to_string(k) + "_f" + std::to_string(j);
  }
  return names;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

MultiViewDataset MultiViewDataset::from_views(std::vector<Matrix> views,
                                              std::vector<std::string> sample_ids,
                                              std::vector<std::vector<std::string>> feature_names) {
  check_views(views);
  MultiViewDataset d;
  d.views_ = std::move(views);
  d.sample_ids_ = sample_ids.empty() ? default_sample_ids(d.views_[0].rows())
                                     : std::move(sample_ids);
  if (static_cast<Index>(d.sample_ids_.size()) != d.views_[0].rows()) {
    throw AlignmentError("sample id count does not match row count");
  }
  if (feature_names.empty()) {
    for (size_t k = 0; k < d.views_.size(); ++k) {
      d.feature_names_.push_back(default_feature_names(static_cast<int>(k), d.views_[k].cols()));
    }
  } else {
    if (feature_names.size() != d.views_.size()) {
      throw AlignmentError("feature name lists do not match view count");
    }
    for (size_t k = 0; k < d.views_.size(); ++k) {
      if (static_cast<Index>(feature_names[k].size()) != d.views_[k].cols()) {
        throw AlignmentError("feature names for view " + std::to_string(k) +
                             " do not match its width");
      }
    }
    d.feature_names_ = std::move(feature_names);
  }
  d.centered_ = false;
  return d;
}

MultiViewDataset MultiViewDataset::from_centered_views(std::vector<Matrix> views,
                                                       std::vector<Vector> known_means,
                                                       std::vector<std::string> sample_ids,
                                                       std::vector<std::vector<std::string>> feature_names) {
  MultiViewDataset d = from_views(std::move(views), std::move(sample_ids), std::move(feature_names));
  if (known_means.empty()) {
    for (int k = 0; k < d.view_count(); ++k) {
      known_means.emplace_back(Vector::Zero(d.view_dim(k)));
    }
  }
  if (static_cast<int>(known_means.size()) != d.view_count()) {
    throw ShapeError("known means do not match view count");
  }
  for (int k = 0; k < d.view_count(); ++k) {
    if (known_means[k].size() != d.view_dim(k)) {
      throw ShapeError("known means for view " + std::to_string(k) + " have wrong length");
    }
  }
  d.centered_ = true;
  d.column_means_ = std::move(known_means);
  return d;
}

const Matrix& MultiViewDataset::view(int k) const {
  if (k < 0 || k >= view_count()) {
    throw ShapeError("view index " + std::to_string(k) + " out of range [0, " +
                     std::to_string(view_count()) + ")");
  }
  return views_[k];
}

Index MultiViewDataset::total_dim() const {
  Index p = 0;
  for (const auto& v : views_) p += v.cols();
  return p;
}

const std::vector<Vector>& MultiViewDataset::column_means() const {
  if (!centered_) {
    throw InvalidInput("column means are recorded only on centered datasets");
  }
  return column_means_;
}

const std::vector<std::string>& MultiViewDataset::feature_names(int k) const {
  view(k);  // range check
  return feature_names_[k];
}

MultiViewDataset MultiViewDataset::with_view_replaced(int k, Matrix entries) const {
  const Matrix& old = view(k);
  if (entries.rows() != old.rows() || entries.cols() != old.cols()) {
    throw ShapeError("replacement for view " + std::to_string(k) + " has wrong shape");
  }
  MultiViewDataset d;
  d.views_ = views_;
  d.views_[k] = std::move(entries);
  d.sample_ids_ = sample_ids_;
  d.feature_names_ = feature_names_;
  d.centered_ = false;
  return d;
}

MultiViewDataset center_columns(const MultiViewDataset& data) {
  if (data.centered()) {
    throw AlreadyCentered("dataset is already centered");
  }
  std::vector<Matrix> views;
  std::vector<Vector> means;
  std::vector<std::vector<std::string>> names;
  for (int k = 0; k < data.view_count(); ++k) {
    Vector mu = data.view(k).colwise().mean();
    views.push_back(data.view(k).rowwise() - mu.transpose());
    means.push_back(std::move(mu));
    names.push_back(data.feature_names(k));
  }
  return MultiViewDataset::from_centered_views(std::move(views), std::move(means),
                                               data.sample_ids(), std::move(names));
}

Matrix concatenate(const MultiViewDataset& data) {
  Matrix out(data.n(), data.total_dim());
  Index at = 0;
  for (int k = 0; k < data.view_count(); ++k) {
    out.middleCols(at, data.view_dim(k)) = data.view(k);
    at += data.view_dim(k);
  }
  return out;
}

CsvMatrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty file '" + path + "'", 0, 0);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  if (header.size() < 2) {
    throw ParseError("header of '" + path + "' needs an id column and at least one feature", 0, 0);
  }
  CsvMatrix out;
  out.col_names.assign(header.begin() + 1, header.end());
  const size_t width = out.col_names.size();

  std::vector<std::vector<double>> rows;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != width + 1) {
      throw ParseError("'" + path + "': expected " + std::to_string(width + 1) + " cells, got " +
                           std::to_string(cells.size()),
                       row, static_cast<int>(cells.size()));
    }
    out.row_ids.push_back(cells[0]);
    std::vector<double> values(width);
    for (size_t j = 0; j < width; ++j) {
      const std::string& cell = cells[j + 1];
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE) {
        throw ParseError("'" + path + "': non-numeric cell '" + cell + "'", row,
                         static_cast<int>(j + 1));
      }
      values[j] = v;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    throw ParseError("'" + path + "' has no data rows", 0, 0);
  }
  out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < width; ++j) {
      out.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return out;
}

MultiViewDataset load_csv(const std::vector<std::string>& paths) {
  if (paths.empty()) {
    throw InvalidInput("load_csv: no paths given");
  }
  std::vector<Matrix> views;
  std::vector<std::vector<std::string>> names;
  std::vector<std::string> ids;
  for (size_t k = 0; k < paths.size(); ++k) {
    CsvMatrix m = read_csv_matrix(paths[k]);
    if (k == 0) {
      ids = m.row_ids;
    } else if (m.row_ids != ids) {
      throw AlignmentError("sample ids in '" + paths[k] + "' do not match '" + paths[0] + "'");
    }
    views.push_back(std::move(m.values));
    names.push_back(std::move(m.col_names));
  }
  return MultiViewDataset::from_views(std::move(views), std::move(ids), std::move(names));
}

void write_csv(const Matrix& m, const std::string& path, const std::vector<std::string>& row_ids,
               const std::vector<std::string>& col_names) {
  if (path.empty()) {
    throw IoError("write_csv: empty path");
  }
  if (!row_ids.empty() && static_cast<Index>(row_ids.size()) != m.rows()) {
    throw ShapeError("write_csv: row id count does not match");
  }
  if (!col_names.empty() && static_cast<Index>(col_names.size()) != m.cols()) {
    throw ShapeError("write_csv: column name count does not match");
  }
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << "id";
  for (Index j = 0; j < m.cols(); ++j) {
    out << ',' << (col_names.empty() ? "c" + std::to_string(j) : col_names[j]);
  }
  out << '\n';
  char buf[40];
  for (Index i = 0; i < m.rows(); ++i) {
    out << (row_ids.empty() ? "r" + std::to_string(i) : row_ids[i]);
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("failed while writing '" + path + "'");
  }
}

}  // namespace ipca
