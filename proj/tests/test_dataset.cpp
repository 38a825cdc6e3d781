#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "ipca/dataset.hpp"
#include "test_support.hpp"

using namespace ipca;
using namespace ipca::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ipca_dataset_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("center_columns records means and zeroes column sums") {
  Matrix x(2, 2);
  x << 1.0, 2.0, 3.0, 4.0;
  auto data = MultiViewDataset::from_views({x});
  auto centered = center_columns(data);
  CHECK(centered.centered());
  CHECK(centered.column_means()[0](0) == doctest::Approx(2.0));
  CHECK(centered.column_means()[0](1) == doctest::Approx(3.0));
  Matrix want(2, 2);
  want << -1.0, -1.0, 1.0, 1.0;
  CHECK(max_abs_diff(centered.view(0), want) == 0.0);
  CHECK(max_abs_diff(data.view(0), x) == 0.0);  // original untouched
  CHECK_THROWS_AS(center_columns(centered), AlreadyCentered);
}

TEST_CASE("centering an all-zero view changes nothing") {
  auto data = MultiViewDataset::from_views({Matrix::Zero(3, 2)});
  auto centered = center_columns(data);
  CHECK(centered.view(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(centered.column_means()[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("column sums after centering vanish") {
  auto gen = rng(2);
  auto data = MultiViewDataset::from_views({random_matrix(10, 4, gen)});
  auto centered = center_columns(data);
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(centered.view(0).col(j).sum()) < 1e-8 * 10);
  }
}

TEST_CASE("centering is idempotent in effect") {
  auto gen = rng(4);
  auto data = MultiViewDataset::from_views({random_matrix(8, 3, gen), random_matrix(8, 5, gen)});
  auto once = center_columns(data);
  // Clear the flag by reconstructing from the centered entries, then center
  // again.
  auto cleared = MultiViewDataset::from_views({once.view(0), once.view(1)});
  auto twice = center_columns(cleared);
  CHECK(max_abs_diff(once.view(0), twice.view(0)) < 1e-12);
  CHECK(max_abs_diff(once.view(1), twice.view(1)) < 1e-12);
}

TEST_CASE("concatenate keeps view order and round-trips by slicing") {
  auto gen = rng(6);
  Matrix a = random_matrix(4, 2, gen);
  Matrix b = random_matrix(4, 3, gen);
  auto data = MultiViewDataset::from_views({a, b});
  Matrix joined = concatenate(data);
  CHECK(joined.rows() == 4);
  CHECK(joined.cols() == 5);
  CHECK(max_abs_diff(joined.leftCols(2), a) == 0.0);
  CHECK(max_abs_diff(joined.rightCols(3), b) == 0.0);

  auto single = MultiViewDataset::from_views({a});
  CHECK(max_abs_diff(concatenate(single), a) == 0.0);
}

TEST_CASE("concatenate commutes with centering") {
  auto gen = rng(8);
  auto data = MultiViewDataset::from_views({random_matrix(6, 2, gen), random_matrix(6, 4, gen)});
  Matrix centered_then_joined = concatenate(center_columns(data));
  Matrix joined = concatenate(data);
  Matrix joined_then_centered = joined.rowwise() - joined.colwise().mean();
  CHECK(max_abs_diff(centered_then_joined, joined_then_centered) < 1e-12);
}

TEST_CASE("csv round trip") {
  TempDir dir;
  SUBCASE("identity") {
    write_csv(Matrix::Identity(3, 3), dir.file("eye.csv"));
    CsvMatrix back = read_csv_matrix(dir.file("eye.csv"));
    CHECK(max_abs_diff(back.values, Matrix::Identity(3, 3)) == 0.0);
  }
  SUBCASE("tiny magnitudes survive") {
    Matrix m(1, 2);
    m << 1e-300, -3.25e-17;
    write_csv(m, dir.file("tiny.csv"));
    CsvMatrix back = read_csv_matrix(dir.file("tiny.csv"));
    CHECK(back.values(0, 0) == 1e-300);
    CHECK(back.values(0, 1) == -3.25e-17);
  }
  SUBCASE("random entries are bit-exact") {
    auto gen = rng(10);
    Matrix m = random_matrix(5, 7, gen);
    write_csv(m, dir.file("rand.csv"));
    CsvMatrix back = read_csv_matrix(dir.file("rand.csv"));
    CHECK((back.values.array() == m.array()).all());
  }
  SUBCASE("empty path fails") { CHECK_THROWS_AS(write_csv(Matrix::Zero(1, 1), ""), IoError); }
}

TEST_CASE("load_csv aligns views by sample id") {
  TempDir dir;
  std::ofstream(dir.file("a.csv")) << "id,x0,x1\nalpha,1,2\nbeta,3,4\n";
  std::ofstream(dir.file("b.csv")) << "id,y0\nalpha,5\nbeta,6\n";
  auto data = load_csv({dir.file("a.csv"), dir.file("b.csv")});
  CHECK(data.view_count() == 2);
  CHECK(data.n() == 2);
  CHECK(data.sample_ids()[0] == "alpha");
  CHECK(data.feature_names(1)[0] == "y0");
  CHECK(data.view(0)(1, 1) == 4.0);
  CHECK_FALSE(data.centered());
}

TEST_CASE("load_csv rejects misaligned ids") {
  TempDir dir;
  std::ofstream(dir.file("a.csv")) << "id,x0\nalpha,1\nbeta,2\n";
  std::ofstream(dir.file("b.csv")) << "id,y0\nbeta,3\nalpha,4\n";
  CHECK_THROWS_AS(load_csv({dir.file("a.csv"), dir.file("b.csv")}), AlignmentError);
}

TEST_CASE("load_csv rejects a missing file") {
  CHECK_THROWS_AS(load_csv({"/nonexistent/never.csv"}), IoError);
}

TEST_CASE("load_csv names the offending cell") {
  TempDir dir;
  std::ofstream(dir.file("bad.csv"))
      << "id,x0,x1,x2\nr1,1,2,3\nr2,4,5,6\nr3,7,abc,9\n";
  try {
    load_csv({dir.file("bad.csv")});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row == 3);
    CHECK(e.col == 2);
  }
}

TEST_CASE("row count mismatch is an alignment error") {
  TempDir dir;
  std::ofstream(dir.file("a.csv")) << "id,x0\nalpha,1\nbeta,2\n";
  std::ofstream(dir.file("b.csv")) << "id,y0\nalpha,3\n";
  CHECK_THROWS_AS(load_csv({dir.file("a.csv"), dir.file("b.csv")}), AlignmentError);
}

TEST_CASE("from_centered_views marks known means") {
  Matrix x(2, 1);
  x << 1.0, -1.0;
  auto data = MultiViewDataset::from_centered_views({x});
  CHECK(data.centered());
  CHECK(data.column_means()[0](0) == 0.0);
}

TEST_CASE("view alignment rules") {
  CHECK_THROWS_AS(MultiViewDataset::from_views({Matrix::Zero(2, 1), Matrix::Zero(3, 1)}),
                  AlignmentError);
  CHECK_THROWS_AS(MultiViewDataset::from_views({}), ShapeError);
}
