#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "trapmat/ring_matrix.hpp"

using namespace trapmat;

namespace {

SparseMatrix random_sparse(std::size_t r, std::size_t c, double density, std::mt19937_64& gen) {
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<std::uint32_t> val;
  std::vector<SparseEntry> e;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (keep(gen)) e.push_back({std::uint32_t(i), std::uint32_t(j), val(gen)});
  return SparseMatrix(r, c, std::move(e));
}

}  // namespace

TEST(DenseMatrix, ConstructorRejectsWrongLength) {
  EXPECT_THROW(DenseMatrix(2, 3, std::vector<Word>(5)), ShapeError);
  EXPECT_NO_THROW(DenseMatrix(0, 7, {}));
}

TEST(MatMul, IdentityLeavesOperand) {
  std::mt19937_64 gen(1);
  const auto b = oracle::random(3, 5, gen);
  EXPECT_EQ(mat_mul(DenseMatrix::identity(3), b), b);
}

TEST(MatMul, WrapsModulo2To32) {
  const auto a = DenseMatrix::from_rows({{0x80000000u, 1}, {0, 1}});
  const auto b = DenseMatrix::from_rows({{2, 0}, {3, 1}});
  EXPECT_EQ(mat_mul(a, b), DenseMatrix::from_rows({{3, 1}, {3, 1}}));
}

TEST(MatMul, MatchesSchoolbook5x4x3) {
  std::mt19937_64 gen(2);
  const auto a = oracle::random(5, 4, gen);
  const auto b = oracle::random(4, 3, gen);
  EXPECT_EQ(mat_mul(a, b), oracle::matmul(a, b));
}

TEST(MatMul, BlockedMatchesSchoolbookOnRandomShapes) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> dim(0, 90);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = dim(gen), n = dim(gen) * (t % 5 == 0 ? 4 : 1), l = dim(gen);
    const auto a = oracle::random(m, n, gen);
    const auto b = oracle::random(n, l, gen);
    ASSERT_EQ(mat_mul(a, b), oracle::matmul(a, b)) << m << "x" << n << "x" << l;
  }
}

TEST(MatMul, LargeKCrossesTileBoundary) {
  std::mt19937_64 gen(4);
  const auto a = oracle::random(9, 700, gen);
  const auto b = oracle::random(700, 130, gen);
  EXPECT_EQ(mat_mul(a, b), oracle::matmul(a, b));
}

TEST(MatMul, ShapeMismatchNamesBothShapes) {
  try {
    mat_mul(DenseMatrix(2, 3), DenseMatrix(4, 5));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("4x5"), std::string::npos);
  }
}

TEST(MatMul, ZeroDimensionsGiveEmptyOrZeroResults) {
  EXPECT_EQ(mat_mul(DenseMatrix(0, 4), DenseMatrix(4, 3)).shape(), "0x3");
  EXPECT_TRUE(mat_mul(DenseMatrix(2, 0), DenseMatrix(0, 3)).is_zero());
  EXPECT_EQ(mat_mul(DenseMatrix(2, 0), DenseMatrix(0, 3)).shape(), "2x3");
}

TEST(MatMul, CounterReportsMNL) {
  OpCounter c;
  mat_mul(DenseMatrix(7, 11), DenseMatrix(11, 13), &c);
  EXPECT_EQ(c.ring_muls, 7u * 11u * 13u);
}

TEST(MatMul, AssociativeAndDistributive) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  for (int t = 0; t < 40; ++t) {
    const std::size_t p = dim(gen), q = dim(gen), r = dim(gen), s = dim(gen);
    const auto a = oracle::random(p, q, gen);
    const auto b = oracle::random(q, r, gen);
    const auto b2 = oracle::random(q, r, gen);
    const auto c = oracle::random(r, s, gen);
    EXPECT_EQ(mat_mul(mat_mul(a, b), c), mat_mul(a, mat_mul(b, c)));
    EXPECT_EQ(mat_mul(a, mat_add(b, b2)), mat_add(mat_mul(a, b), mat_mul(a, b2)));
  }
}

TEST(SparseMatrix, CanonicalForm) {
  SparseMatrix s(3, 3, {{2, 1, 5}, {0, 2, 1}, {2, 1, 0xffffffffu}, {1, 1, 0}, {0, 0, 9}});
  // (2,1) sums to 4; (1,1) is a stored zero and is dropped.
  ASSERT_EQ(s.nnz(), 3u);
  EXPECT_EQ(s.entries()[0].row, 0u);
  EXPECT_EQ(s.entries()[0].col, 0u);
  EXPECT_EQ(s.entries()[1].col, 2u);
  EXPECT_EQ(s.entries()[2].value, 4u);
  EXPECT_THROW(SparseMatrix(2, 2, {{2, 0, 1}}), ShapeError);
}

TEST(SparseMatrix, CancellingDuplicatesVanish) {
  SparseMatrix s(1, 1, {{0, 0, 1}, {0, 0, 0xffffffffu}});
  EXPECT_EQ(s.nnz(), 0u);
}

TEST(SparseDenseMul, EmptyGivesZero) {
  std::mt19937_64 gen(6);
  EXPECT_TRUE(sparse_dense_mul(SparseMatrix(4, 5), oracle::random(5, 3, gen)).is_zero());
}

TEST(SparseDenseMul, SingleEntryScalesOneRow) {
  std::mt19937_64 gen(7);
  const auto b = oracle::random(4, 3, gen);
  const auto out = sparse_dense_mul(SparseMatrix(3, 4, {{0, 2, 7}}), b);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out(0, j), Word(7 * b(2, j)));
  for (std::size_t i = 1; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out(i, j), 0u);
}

TEST(SparseDenseMul, MatchesDensifiedAndCountsNnzTimesL) {
  std::mt19937_64 gen(8);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_sparse(20, 20, 0.1, gen);
    const auto b = oracle::random(20, 6, gen);
    OpCounter c;
    EXPECT_EQ(sparse_dense_mul(s, b, &c), oracle::matmul(s.densify(), b));
    EXPECT_EQ(c.ring_muls, s.nnz() * 6);
  }
}

TEST(DenseSparseMul, Cases) {
  std::mt19937_64 gen(9);
  const auto a = oracle::random(5, 6, gen);
  EXPECT_TRUE(dense_sparse_mul(a, SparseMatrix(6, 4)).is_zero());

  const auto row = oracle::random(1, 6, gen);
  const auto unit = dense_sparse_mul(row, SparseMatrix(6, 4, {{3, 1, 1}}));
  EXPECT_EQ(unit(0, 1), row(0, 3));
  EXPECT_EQ(unit(0, 0) | unit(0, 2) | unit(0, 3), 0u);

  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random(7, 15, gen);
    const auto s = random_sparse(15, 9, 0.2, gen);
    OpCounter c;
    EXPECT_EQ(dense_sparse_mul(x, s, &c), oracle::matmul(x, s.densify()));
    EXPECT_EQ(c.ring_muls, s.nnz() * 7);
  }
}

TEST(Elementwise, AddSubTransposeSparseAdd) {
  std::mt19937_64 gen(10);
  const auto a = oracle::random(6, 9, gen);
  const auto b = oracle::random(6, 9, gen);
  EXPECT_EQ(mat_add(a, DenseMatrix(6, 9)), a);
  EXPECT_EQ(mat_sub(mat_add(a, b), b), a);
  EXPECT_EQ(mat_sub(a, b), oracle::sub(a, b));
  EXPECT_EQ(transpose(a), oracle::transpose(a));
  const auto big = oracle::random(70, 45, gen);
  EXPECT_EQ(transpose(big), oracle::transpose(big));
  const auto s = random_sparse(6, 9, 0.3, gen);
  EXPECT_EQ(add_sparse_into(a, s), oracle::add(a, s.densify()));
  EXPECT_THROW(mat_add(a, DenseMatrix(9, 6)), ShapeError);
}

TEST(Zeroize, ClearsStorage) {
  std::mt19937_64 gen(11);
  auto a = oracle::random(4, 4, gen);
  a.zeroize();
  EXPECT_TRUE(a.is_zero());
  SparseMatrix s(2, 2, {{0, 0, 3}});
  s.zeroize();
  EXPECT_EQ(s.nnz(), 0u);
}

TEST(MatMulTn, MatchesTransposeThenMultiply) {
  std::mt19937_64 gen(21);
  for (auto [n, m, l] : {std::tuple{37, 11, 1}, {64, 65, 3}, {5, 300, 15}, {40, 17, 16}, {90, 33, 70}}) {
    const DenseMatrix a = oracle::random(n, m, gen);
    const DenseMatrix b = oracle::random(n, l, gen);
    OpCounter ops;
    EXPECT_EQ(mat_mul_tn(a, b, &ops), oracle::matmul(oracle::transpose(a), b)) << n << " " << m << " " << l;
    EXPECT_EQ(ops.ring_muls, std::uint64_t(n) * m * l);
  }
  EXPECT_THROW(mat_mul_tn(DenseMatrix(3, 2), DenseMatrix(4, 1)), ShapeError);
}

TEST(SparseDenseMul, SingleColumnMatchesDensified) {
  std::mt19937_64 gen(22);
  const SparseMatrix s = random_sparse(50, 70, 0.1, gen);
  const DenseMatrix v = oracle::random(70, 1, gen);
  OpCounter ops;
  EXPECT_EQ(sparse_dense_mul(s, v, &ops), oracle::matmul(s.densify(), v));
  EXPECT_EQ(ops.ring_muls, s.nnz());
}

TEST(OpCounter, LargestTracksBiggestSingleCall) {
  OpCounter ops;
  mat_mul(DenseMatrix(3, 4), DenseMatrix(4, 5), &ops);
  mat_mul(DenseMatrix(2, 2), DenseMatrix(2, 2), &ops);
  EXPECT_EQ(ops.ring_muls, 60u + 8u);
  EXPECT_EQ(ops.largest_muls, 60u);
  OpCounter other;
  mat_mul(DenseMatrix(10, 10), DenseMatrix(10, 1), &other);
  ops += other;
  EXPECT_EQ(ops.largest_muls, 100u);
}
