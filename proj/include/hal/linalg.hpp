#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hal/sparse.hpp"

namespace hal {

class Rng;

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, std::size_t threads = 1);
/// aᵀ b without materializing the transpose.
DenseMatrix matmul_transposed_left(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& a);
DenseMatrix to_dense(const SparseMatrix& m);

/// A matrix known only through its products with dense blocks.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  /// A * dense, dense is cols() x m.
  virtual DenseMatrix multiply(const DenseMatrix& dense, std::size_t threads = 1) const = 0;
  /// Aᵀ * dense, dense is rows() x m.
  virtual DenseMatrix multiply_transposed(const DenseMatrix& dense, std::size_t threads = 1) const = 0;
};

/// Horizontal concatenation [B0 | B1 | ...] of CSR blocks sharing a row
/// count, viewed as one linear operator. For a co-occurrence pair this is the
/// V x 2V matrix [L | R]. Transposes are cached so both products are
/// row-parallel with no cross-thread reduction.
class SparseOperator final : public LinearOperator {
 public:
  explicit SparseOperator(std::vector<const SparseMatrix*> blocks);

  std::size_t rows() const override { return rows_; }
  std::size_t cols() const override { return cols_; }
  DenseMatrix multiply(const DenseMatrix& dense, std::size_t threads = 1) const override;
  DenseMatrix multiply_transposed(const DenseMatrix& dense, std::size_t threads = 1) const override;

 private:
  std::vector<const SparseMatrix*> blocks_;
  std::vector<SparseMatrix> transposes_;
  std::vector<std::size_t> col_starts_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

/// Borrowed dense matrix as an operator.
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(const DenseMatrix& matrix) : matrix_(matrix) {}

  std::size_t rows() const override { return matrix_.rows(); }
  std::size_t cols() const override { return matrix_.cols(); }
  DenseMatrix multiply(const DenseMatrix& dense, std::size_t threads = 1) const override;
  DenseMatrix multiply_transposed(const DenseMatrix& dense, std::size_t threads = 1) const override;

 private:
  const DenseMatrix& matrix_;
};

/// sparse * dense for a single CSR matrix.
DenseMatrix spmm(const SparseMatrix& sparse, const DenseMatrix& dense, std::size_t threads = 1);

/// Orthonormalizes the columns of `m` in place by modified Gram-Schmidt with
/// one re-orthogonalization pass, returning the upper-triangular R with
/// m_in = Q R. Columns that are numerically dependent on earlier ones are
/// replaced by random unit vectors orthogonal to them (R diagonal entry 0), so
/// Q always has orthonormal columns. Requires rows >= cols.
DenseMatrix orthonormalize_columns(DenseMatrix& m, Rng& rng);

}  // namespace hal
