#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ipca {

/// Base class for all library errors. `kind()` returns a stable machine-readable
/// name that the CLI maps onto its exit diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& what) : Error("InvalidInput", what) {}
};

struct NotPositiveDefinite : Error {
  explicit NotPositiveDefinite(const std::string& what) : Error("NotPositiveDefinite", what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error("ShapeError", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error("IoError", what) {}
};

/// Carries the 1-based data row/column of the offending cell (header row and
/// id column excluded from the count).
struct ParseError : Error {
  ParseError(const std::string& what, int row, int col)
      : Error("ParseError", what + " at row " + std::to_string(row) + ", column " +
                                std::to_string(col)),
        row(row),
        col(col) {}
  int row;
  int col;
};

struct AlignmentError : Error {
  explicit AlignmentError(const std::string& what) : Error("AlignmentError", what) {}
};

struct AlreadyCentered : Error {
  explicit AlreadyCentered(const std::string& what) : Error("AlreadyCentered", what) {}
};

struct NonexistentMLE : Error {
  explicit NonexistentMLE(const std::string& what) : Error("NonexistentMLE", what) {}
};

struct InvalidPenalty : Error {
  explicit InvalidPenalty(const std::string& what) : Error("InvalidPenalty", what) {}
};

/// Iteration limit reached. Carries the last iterate (when the failing routine
/// works on a single matrix) and the residual at that iterate.
struct NoConvergence : Error {
  NoConvergence(const std::string& what, double residual,
                std::optional<Eigen::MatrixXd> last = std::nullopt)
      : Error("NoConvergence", what + " (residual " + std::to_string(residual) + ")"),
        residual(residual),
        last_iterate(std::move(last)) {}
  double residual;
  std::optional<Eigen::MatrixXd> last_iterate;
};

struct DegenerateScale : Error {
  explicit DegenerateScale(const std::string& what) : Error("DegenerateScale", what) {}
};

struct InvalidMask : Error {
  explicit InvalidMask(const std::string& what) : Error("InvalidMask", what) {}
};

}  // namespace ipca
