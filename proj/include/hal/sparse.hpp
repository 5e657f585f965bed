#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hal {

/// Compressed sparse row matrix with strictly positive stored values and
/// strictly increasing column indices inside each row.
class SparseMatrix {
 public:
  struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
  };

  struct RowView {
    std::span<const std::uint32_t> cols;
    std::span<const double> values;
    std::size_t size() const noexcept { return cols.size(); }
  };

  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Takes ownership of raw CSR arrays after validating every invariant.
  /// Throws InvalidArgument when they do not hold.
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols,
                               std::vector<std::uint64_t> row_offsets,
                               std::vector<std::uint32_t> col_indices,
                               std::vector<double> values);

  /// Sums duplicate coordinates and drops entries that end up exactly zero.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::uint64_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::uint32_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  RowView row(std::size_t r) const;
  /// Value at (r, c); zero when not stored.
  double at(std::size_t r, std::size_t c) const;
  double sum() const;

  SparseMatrix transpose() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> row_offsets_{0};
  std::vector<std::uint32_t> col_indices_;
  std::vector<double> values_;
};

}  // namespace hal
