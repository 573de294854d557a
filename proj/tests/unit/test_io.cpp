#include "gen.hpp"

#include "pdhg/io.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace pdhg;
using pdhg::testing::Gen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pdhg_io_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Io, DenseTextRoundTrip) {
  Gen g(1);
  const Mat a = g.normal_mat(3, 4);
  io::write_dense_text(scratch("a.txt"), a);
  EXPECT_EQ(io::read_dense_text(scratch("a.txt")), a);
  EXPECT_EQ(io::read_matrix(scratch("a.txt")), a);
}

TEST(Io, DenseTextSkipsCommentsAndRejectsRagged) {
  std::ofstream(scratch("c.txt")) << "# header\n1 2\n\n3 4\n";
  EXPECT_EQ(io::read_dense_text(scratch("c.txt")), (Mat(2, 2) << 1, 2, 3, 4).finished());
  std::ofstream(scratch("r.txt")) << "1 2\n3\n";
  EXPECT_THROW(io::read_dense_text(scratch("r.txt")), io::IoError);
  EXPECT_THROW(io::read_dense_text(scratch("missing.txt")), io::IoError);
}

TEST(Io, NpyRoundTrip) {
  Gen g(2);
  const Mat a = g.normal_mat(5, 2);
  io::write_npy(scratch("a.npy"), a);
  EXPECT_EQ(io::read_npy(scratch("a.npy")), a);
  EXPECT_EQ(io::read_matrix(scratch("a.npy")), a);
}

TEST(Io, MatrixMarketRoundTripAndSymmetric) {
  Gen g(3);
  const SpMat s = g.sparse(6, 5, 0.4);
  io::write_matrix_market(scratch("s.mtx"), s);
  EXPECT_EQ(Mat(io::read_matrix_market(scratch("s.mtx"))), Mat(s));
  std::ofstream(scratch("sym.mtx")) << "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 -1\n";
  EXPECT_EQ(Mat(io::read_matrix_market(scratch("sym.mtx"))), (Mat(2, 2) << 4, -1, -1, 0).finished());
  std::ofstream(scratch("bad.mtx")) << "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
  EXPECT_THROW(io::read_matrix_market(scratch("bad.mtx")), io::IoError);
}
