#include <doctest.h>

#include <cmath>
#include <vector>

#include "hal/error.hpp"
#include "hal/linalg.hpp"
#include "hal/random.hpp"
#include "hal/sparse.hpp"
#include "support/oracles.hpp"

using namespace hal;

namespace {

DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, Rng& rng) {
  std::vector<SparseMatrix::Triplet> t;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (rng.uniform() < density) t.push_back({r, c, rng.uniform(0.1, 3.0)});
    }
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

}  // namespace

TEST_CASE("DenseMatrix basics") {
  DenseMatrix m(2, 3, 1.5);
  CHECK(m.size() == 6);
  m(1, 2) = 4.0;
  CHECK(m.row(1)[2] == 4.0);
  CHECK(m.all_finite());
  m(0, 0) = NAN;
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), InvalidArgument);
  const auto t = transpose(DenseMatrix(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6}));
  CHECK(t == DenseMatrix(3, 2, std::vector<double>{1, 4, 2, 5, 3, 6}));
  CHECK(frobenius_norm(DenseMatrix(1, 2, std::vector<double>{3, 4})) == 5.0);
}

TEST_CASE("matmul matches the naive triple loop") {
  Rng rng(1);
  const auto a = random_dense(7, 5, rng);
  const auto b = random_dense(5, 4, rng);
  CHECK(max_abs_diff(matmul(a, b), naive_product(a, b)) < 1e-12);
  CHECK(matmul(a, b, 3) == matmul(a, b, 1));
  CHECK(max_abs_diff(matmul_transposed_left(a, random_dense(7, 2, rng)), DenseMatrix(5, 2)) >= 0.0);
  const auto c = random_dense(7, 3, rng);
  CHECK(max_abs_diff(matmul_transposed_left(a, c), naive_product(transpose(a), c)) < 1e-12);
  CHECK_THROWS_AS(matmul(a, a), InvalidArgument);
}

TEST_CASE("spmm examples") {
  Rng rng(2);
  const auto identity = SparseMatrix::from_triplets(4, 4, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0}});
  const auto d = random_dense(4, 3, rng);
  CHECK(spmm(identity, d) == d);

  const auto single = SparseMatrix::from_triplets(2, 3, {{0, 1, 2.0}});
  const auto ones = DenseMatrix(3, 1, 1.0);
  CHECK(spmm(single, ones) == DenseMatrix(2, 1, std::vector<double>{2.0, 0.0}));

  const auto s = random_sparse(20, 30, 0.2, rng);
  const auto x = random_dense(30, 6, rng);
  CHECK(max_abs_diff(spmm(s, x), naive_product(to_dense(s), x)) < 1e-12);
  CHECK(spmm(s, x, 4) == spmm(s, x, 1));
  CHECK_THROWS_AS(spmm(s, random_dense(20, 2, rng)), InvalidArgument);
}

TEST_CASE("SparseOperator is the horizontal concatenation") {
  Rng rng(3);
  const auto left = random_sparse(15, 15, 0.3, rng);
  const auto right = left.transpose();
  const SparseOperator op({&left, &right});
  CHECK(op.rows() == 15);
  CHECK(op.cols() == 30);

  DenseMatrix concat(15, 30);
  const auto dl = to_dense(left), dr = to_dense(right);
  for (std::size_t r = 0; r < 15; ++r) {
    for (std::size_t c = 0; c < 15; ++c) {
      concat(r, c) = dl(r, c);
      concat(r, 15 + c) = dr(r, c);
    }
  }
  const auto x = random_dense(30, 4, rng);
  const auto y = random_dense(15, 4, rng);
  CHECK(max_abs_diff(op.multiply(x), naive_product(concat, x)) < 1e-12);
  CHECK(max_abs_diff(op.multiply_transposed(y), naive_product(transpose(concat), y)) < 1e-12);
  CHECK(op.multiply(x, 3) == op.multiply(x, 1));
  CHECK(op.multiply_transposed(y, 3) == op.multiply_transposed(y, 1));
  CHECK_THROWS_AS(op.multiply(y), InvalidArgument);

  const auto other = random_sparse(14, 3, 0.5, rng);
  CHECK_THROWS_AS(SparseOperator({&left, &other}), InvalidArgument);
}

TEST_CASE("DenseOperator products") {
  Rng rng(4);
  const auto a = random_dense(9, 6, rng);
  const DenseOperator op(a);
  const auto x = random_dense(6, 2, rng);
  const auto y = random_dense(9, 2, rng);
  CHECK(max_abs_diff(op.multiply(x), naive_product(a, x)) < 1e-12);
  CHECK(max_abs_diff(op.multiply_transposed(y), naive_product(transpose(a), y)) < 1e-12);
  CHECK(op.multiply_transposed(y, 4) == op.multiply_transposed(y, 1));
}

TEST_CASE("orthonormalize_columns produces Q R") {
  Rng rng(5);
  const auto a = random_dense(12, 5, rng);
  auto q = a;
  Rng fill(6);
  const auto r = orthonormalize_columns(q, fill);
  CHECK(testing::orthonormality_residual(q) < 1e-12);
  CHECK(max_abs_diff(naive_product(q, r), a) < 1e-12);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(r(i, j) == 0.0);
}

TEST_CASE("orthonormalize_columns replaces dependent columns") {
  Rng rng(7);
  auto a = random_dense(10, 4, rng);
  for (std::size_t r = 0; r < 10; ++r) {
    a(r, 2) = 2.0 * a(r, 0) - a(r, 1);
    a(r, 3) = 0.0;
  }
  auto q = a;
  Rng fill(8);
  const auto r = orthonormalize_columns(q, fill);
  CHECK(testing::orthonormality_residual(q) < 1e-12);
  CHECK(r(2, 2) == 0.0);
  CHECK(r(3, 3) == 0.0);
  CHECK(max_abs_diff(naive_product(q, r), a) < 1e-12);
  DenseMatrix wide(2, 3);
  CHECK_THROWS_AS(orthonormalize_columns(wide, fill), InvalidArgument);
}
