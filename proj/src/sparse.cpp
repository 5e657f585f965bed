#include "hal/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hal/error.hpp"

namespace hal {

namespace {

void check_width(std::size_t cols) {
  if (cols > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("sparse matrix: column count " + std::to_string(cols) +
                          " exceeds 32-bit index range");
  }
}

}  // namespace

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {
  check_width(cols);
}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols,
                                    std::vector<std::uint64_t> row_offsets,
                                    std::vector<std::uint32_t> col_indices,
                                    std::vector<double> values) {
  check_width(cols);
  if (row_offsets.size() != rows + 1) throw InvalidArgument("csr: row_offsets must have rows+1 entries");
  if (row_offsets.front() != 0) throw InvalidArgument("csr: row_offsets[0] must be 0");
  if (row_offsets.back() != values.size() || col_indices.size() != values.size()) {
    throw InvalidArgument("csr: row_offsets, col_indices and values disagree on nnz");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_offsets[r] > row_offsets[r + 1]) throw InvalidArgument("csr: row_offsets decreasing");
    for (auto i = row_offsets[r]; i < row_offsets[r + 1]; ++i) {
      if (col_indices[i] >= cols) throw InvalidArgument("csr: column index out of range");
      if (i > row_offsets[r] && col_indices[i] <= col_indices[i - 1]) {
        throw InvalidArgument("csr: column indices not strictly increasing in row " + std::to_string(r));
      }
      if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
        throw InvalidArgument("csr: stored values must be finite and positive");
      }
    }
  }
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_offsets_ = std::move(row_offsets);
  m.col_indices_ = std::move(col_indices);
  m.values_ = std::move(values);
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  check_width(cols);
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw InvalidArgument("triplet outside matrix bounds");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  std::size_t i = 0;
  while (i < triplets.size()) {
    const auto row = triplets[i].row;
    const auto col = triplets[i].col;
    double sum = 0.0;
    for (; i < triplets.size() && triplets[i].row == row && triplets[i].col == col; ++i) {
      sum += triplets[i].value;
    }
    if (sum < 0.0) throw InvalidArgument("sparse matrix values must be non-negative");
    if (sum == 0.0) continue;
    m.col_indices_.push_back(static_cast<std::uint32_t>(col));
    m.values_.push_back(sum);
    ++m.row_offsets_[row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
  return m;
}

SparseMatrix::RowView SparseMatrix::row(std::size_t r) const {
  if (r >= rows_) throw InvalidArgument("sparse row " + std::to_string(r) + " out of range");
  const auto begin = row_offsets_[r];
  const auto count = row_offsets_[r + 1] - begin;
  return {std::span<const std::uint32_t>(col_indices_).subspan(begin, count),
          std::span<const double>(values_).subspan(begin, count)};
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  if (c >= cols_) throw InvalidArgument("sparse column " + std::to_string(c) + " out of range");
  const auto view = row(r);
  const auto it = std::lower_bound(view.cols.begin(), view.cols.end(), c);
  if (it == view.cols.end() || *it != c) return 0.0;
  return view.values[static_cast<std::size_t>(it - view.cols.begin())];
}

double SparseMatrix::sum() const {
  double total = 0.0;
  for (double v : values_) total += v;
  return total;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t(cols_, rows_);
  for (auto c : col_indices_) ++t.row_offsets_[c + 1];
  for (std::size_t r = 0; r < cols_; ++r) t.row_offsets_[r + 1] += t.row_offsets_[r];
  t.col_indices_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<std::uint64_t> cursor(t.row_offsets_.begin(), t.row_offsets_.end() - 1);
  // Rows are visited in increasing order, so each transposed row receives
  // strictly increasing column indices.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (auto i = row_offsets_[r]; i < row_offsets_[r + 1]; ++i) {
      const auto dst = cursor[col_indices_[i]]++;
      t.col_indices_[dst] = static_cast<std::uint32_t>(r);
      t.values_[dst] = values_[i];
    }
  }
  return t;
}

}  // namespace hal
