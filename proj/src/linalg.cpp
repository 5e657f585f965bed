#include "hal/linalg.hpp"

#include <cmath>
#include <string>

#include "hal/error.hpp"
#include "hal/parallel.hpp"
#include "hal/random.hpp"

namespace hal {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw InvalidArgument("dense matrix: expected " + std::to_string(rows * cols) + " values, got " +
                          std::to_string(values_.size()));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, std::size_t threads) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
  DenseMatrix out(a.rows(), b.cols());
  parallel_for(a.rows(), threads, [&](std::size_t i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
    }
  });
  return out;
}

DenseMatrix matmul_transposed_left(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("matmul_transposed_left: row counts differ");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

double frobenius_norm(const DenseMatrix& a) {
  double sum = 0.0;
  for (double v : a.values()) sum += v * v;
  return std::sqrt(sum);
}

DenseMatrix to_dense(const SparseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) out(r, row.cols[i]) = row.values[i];
  }
  return out;
}

namespace {

// dst_row += Σ v * dense[col_offset + c] over the sparse row.
void accumulate_row(const SparseMatrix::RowView& row, std::size_t col_offset,
                    const DenseMatrix& dense, std::span<double> dst) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double v = row.values[i];
    const auto src = dense.row(col_offset + row.cols[i]);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += v * src[j];
  }
}

}  // namespace

DenseMatrix spmm(const SparseMatrix& sparse, const DenseMatrix& dense, std::size_t threads) {
  if (sparse.cols() != dense.rows()) throw InvalidArgument("spmm: shape mismatch");
  DenseMatrix out(sparse.rows(), dense.cols());
  parallel_for(sparse.rows(), threads,
               [&](std::size_t r) { accumulate_row(sparse.row(r), 0, dense, out.row(r)); });
  return out;
}

SparseOperator::SparseOperator(std::vector<const SparseMatrix*> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw InvalidArgument("sparse operator: no blocks");
  rows_ = blocks_.front()->rows();
  for (const auto* block : blocks_) {
    if (block->rows() != rows_) throw InvalidArgument("sparse operator: blocks differ in row count");
    col_starts_.push_back(cols_);
    cols_ += block->cols();
    transposes_.push_back(block->transpose());
  }
}

DenseMatrix SparseOperator::multiply(const DenseMatrix& dense, std::size_t threads) const {
  if (dense.rows() != cols_) throw InvalidArgument("sparse operator multiply: shape mismatch");
  DenseMatrix out(rows_, dense.cols());
  parallel_for(rows_, threads, [&](std::size_t r) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      accumulate_row(blocks_[b]->row(r), col_starts_[b], dense, out.row(r));
    }
  });
  return out;
}

DenseMatrix SparseOperator::multiply_transposed(const DenseMatrix& dense, std::size_t threads) const {
  if (dense.rows() != rows_) throw InvalidArgument("sparse operator transposed multiply: shape mismatch");
  DenseMatrix out(cols_, dense.cols());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& t = transposes_[b];
    const auto offset = col_starts_[b];
    parallel_for(t.rows(), threads,
                 [&](std::size_t r) { accumulate_row(t.row(r), 0, dense, out.row(offset + r)); });
  }
  return out;
}

DenseMatrix DenseOperator::multiply(const DenseMatrix& dense, std::size_t threads) const {
  return matmul(matrix_, dense, threads);
}

DenseMatrix DenseOperator::multiply_transposed(const DenseMatrix& dense, std::size_t threads) const {
  if (dense.rows() != matrix_.rows()) throw InvalidArgument("dense operator transposed multiply: shape mismatch");
  DenseMatrix out(matrix_.cols(), dense.cols());
  parallel_for(matrix_.cols(), threads, [&](std::size_t j) {
    auto dst = out.row(j);
    for (std::size_t i = 0; i < matrix_.rows(); ++i) {
      const double a = matrix_(i, j);
      if (a == 0.0) continue;
      const auto src = dense.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += a * src[c];
    }
  });
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

constexpr double kDependenceTolerance = 1e-10;

}  // namespace

DenseMatrix orthonormalize_columns(DenseMatrix& m, Rng& rng) {
  const auto n = m.cols();
  if (m.rows() < n) throw InvalidArgument("orthonormalize_columns: needs rows >= cols");
  // Work on columns as contiguous rows.
  DenseMatrix cols = transpose(m);
  DenseMatrix r(n, n);

  const auto project_out = [&](std::size_t j, std::span<double> v, bool record) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const double c = dot(cols.row(i), v);
        axpy(-c, cols.row(i), v);
        if (record) r(i, j) += c;
      }
    }
  };

  for (std::size_t j = 0; j < n; ++j) {
    auto v = cols.row(j);
    const double initial = norm(v);
    project_out(j, v, true);
    const double remaining = norm(v);
    if (remaining > kDependenceTolerance * initial && remaining > 0.0) {
      for (double& x : v) x /= remaining;
      r(j, j) = remaining;
      continue;
    }
    r(j, j) = 0.0;
    for (;;) {
      for (double& x : v) x = rng.normal();
      const double fresh = norm(v);
      project_out(j, v, false);
      const double left = norm(v);
      if (left > 1e-3 * fresh) {
        for (double& x : v) x /= left;
        break;
      }
    }
  }
  m = transpose(cols);
  return r;
}

}  // namespace hal
