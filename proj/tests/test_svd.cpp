#include <doctest.h>

#include <cmath>
#include <vector>

#include "hal/error.hpp"
#include "hal/linalg.hpp"
#include "hal/random.hpp"
#include "hal/svd.hpp"
#include "support/oracles.hpp"

using namespace hal;

namespace {

DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("jacobi_svd matches the dense oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cols = 1 + rng.below(12);
    const auto rows = cols + rng.below(10);
    const auto a = random_dense(rows, cols, rng);
    const auto got = jacobi_svd(a);
    const auto oracle = testing::dense_svd(a);
    REQUIRE(got.singular_values.size() == cols);
    for (std::size_t i = 0; i < cols; ++i) {
      CHECK(got.singular_values[i] == doctest::Approx(oracle.singular_values[i]).epsilon(1e-12));
      if (i > 0) CHECK(got.singular_values[i] <= got.singular_values[i - 1]);
    }
    CHECK(testing::reconstruction_error(a, got) < 1e-12 * (1.0 + frobenius_norm(a)));
    CHECK(testing::orthonormality_residual(got.u) < 1e-12);
    CHECK(testing::orthonormality_residual(transpose(got.vt)) < 1e-12);
  }
}

TEST_CASE("jacobi_svd on a rank-deficient matrix keeps U orthonormal") {
  DenseMatrix a(4, 3);
  for (std::size_t r = 0; r < 4; ++r) {
    a(r, 0) = static_cast<double>(r + 1);
    a(r, 1) = 2.0 * a(r, 0);
  }
  const auto got = jacobi_svd(a);
  CHECK(got.singular_values[1] < 1e-12);
  CHECK(got.singular_values[2] < 1e-12);
  CHECK(testing::orthonormality_residual(got.u) < 1e-12);
}

TEST_CASE("truncated_svd of a diagonal matrix") {
  DenseMatrix a(3, 3);
  a(0, 0) = 5.0;
  a(1, 1) = 3.0;
  a(2, 2) = 1.0;
  const auto got = truncated_svd(DenseOperator(a), {.rank = 2, .oversample = 1});
  REQUIRE(got.singular_values.size() == 2);
  CHECK(got.singular_values[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(got.singular_values[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(got.u.rows() == 3);
  CHECK(got.u.cols() == 2);
  CHECK(got.vt.rows() == 2);
  CHECK(got.vt.cols() == 3);
}

TEST_CASE("truncated_svd of a rank-one matrix") {
  Rng rng(2);
  std::vector<double> x(30), y(45);
  for (double& v : x) v = rng.normal();
  for (double& v : y) v = rng.normal();
  DenseMatrix a(30, 45);
  double nx = 0.0, ny = 0.0;
  for (double v : x) nx += v * v;
  for (double v : y) ny += v * v;
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 45; ++c) a(r, c) = x[r] * y[c];
  const auto got = truncated_svd(DenseOperator(a), {.rank = 1});
  CHECK(got.singular_values[0] == doctest::Approx(std::sqrt(nx) * std::sqrt(ny)).epsilon(1e-12));
  CHECK(testing::reconstruction_error(a, got) < 1e-10);
}

TEST_CASE("truncated_svd of a 50x80 matrix against the oracle") {
  Rng rng(3);
  const auto a = testing::random_matrix_with_spectrum(50, 80, 0.7, 10.0, rng);
  const auto got = truncated_svd(DenseOperator(a), {.rank = 10, .seed = 9});
  const auto oracle = testing::dense_svd(a);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(std::abs(got.singular_values[i] - oracle.singular_values[i]) / oracle.singular_values[i] < 1e-6);
  }
  CHECK(testing::reconstruction_error(a, got) <= 1.05 * testing::optimal_rank_error(oracle.singular_values, 10));
  CHECK(testing::orthonormality_residual(got.u) < 1e-8);
  CHECK(testing::orthonormality_residual(transpose(got.vt)) < 1e-8);
}

TEST_CASE("truncated_svd on a sparse operator") {
  Rng rng(4);
  std::vector<SparseMatrix::Triplet> t;
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 40; ++c)
      if (rng.uniform() < 0.15) t.push_back({r, c, rng.uniform(0.1, 2.0)});
  const auto left = SparseMatrix::from_triplets(40, 40, t);
  const auto right = left.transpose();
  const SparseOperator op({&left, &right});
  const auto got = truncated_svd(op, {.rank = 5, .power_iters = 4, .seed = 1});
  DenseMatrix dense(40, 80);
  const auto dl = to_dense(left), dr = to_dense(right);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 40; ++c) {
      dense(r, c) = dl(r, c);
      dense(r, 40 + c) = dr(r, c);
    }
  const auto oracle = testing::dense_svd(dense);
  // The leading singular value is well separated; the rest only need to be sane.
  CHECK(got.singular_values[0] == doctest::Approx(oracle.singular_values[0]).epsilon(1e-6));
  for (std::size_t i = 1; i < 5; ++i) CHECK(got.singular_values[i] <= got.singular_values[i - 1]);
  CHECK(testing::orthonormality_residual(got.u) < 1e-8);
}

TEST_CASE("truncated_svd is seed deterministic and thread invariant") {
  Rng rng(5);
  const auto a = random_dense(30, 40, rng);
  const auto first = truncated_svd(DenseOperator(a), {.rank = 4, .seed = 7});
  const auto second = truncated_svd(DenseOperator(a), {.rank = 4, .seed = 7, .threads = 3});
  CHECK(first.u == second.u);
  CHECK(first.vt == second.vt);
  CHECK(first.singular_values == second.singular_values);
}

TEST_CASE("truncated_svd argument errors") {
  const DenseMatrix a(6, 8, 1.0);
  CHECK_THROWS_AS(truncated_svd(DenseOperator(a), {.rank = 0}), InvalidArgument);
  CHECK_THROWS_AS(truncated_svd(DenseOperator(a), {.rank = 4, .oversample = 3}), InvalidArgument);
  CHECK_NOTHROW(truncated_svd(DenseOperator(a), {.rank = 4, .oversample = 2}));
}

TEST_CASE("embed scales U by the singular values") {
  SvdResult svd;
  svd.u = DenseMatrix::identity(2);
  svd.singular_values = {3.0, 2.0};
  svd.vt = DenseMatrix::identity(2);
  const auto table = embed(svd);
  CHECK(table.vocab_size() == 2);
  CHECK(table.dim() == 2);
  CHECK(table.vectors() == DenseMatrix(2, 2, std::vector<double>{3, 0, 0, 2}));

  Rng rng(6);
  const auto a = random_dense(12, 20, rng);
  const auto s = truncated_svd(DenseOperator(a), {.rank = 3, .oversample = 5});
  const auto t = embed(s);
  for (std::size_t r = 0; r < 12; ++r) {
    double norm = 0.0, expected = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      norm += t.row(r)[c] * t.row(r)[c];
      expected += std::pow(s.u(r, c) * s.singular_values[c], 2);
    }
    CHECK(norm == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("EmbeddingTable rounds to float and normalizes") {
  const EmbeddingTable t(DenseMatrix(2, 2, std::vector<double>{0.1, 0.0, 3.0, 4.0}));
  CHECK(t.row(0)[0] == static_cast<double>(0.1f));
  const auto n = t.normalized();
  CHECK(n.row(1)[0] == doctest::Approx(0.6));
  CHECK(n.row(1)[1] == doctest::Approx(0.8));
  const EmbeddingTable zero(DenseMatrix(1, 2, 0.0));
  CHECK(zero.normalized().row(0)[0] == 0.0);
  CHECK_THROWS_AS(EmbeddingTable(DenseMatrix(1, 1, INFINITY)), InvalidArgument);
}
