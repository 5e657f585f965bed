#include "hal/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hal/error.hpp"
#include "hal/random.hpp"

namespace hal {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Rotates the pair (x, y) <- (c x - s y, s x + c y).
void rotate(std::span<double> x, std::span<double> y, double c, double s) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

}  // namespace

SvdResult jacobi_svd(const DenseMatrix& a) {
  const auto m = a.rows();
  const auto n = a.cols();
  if (m < n) throw InvalidArgument("jacobi_svd: needs rows >= cols");

  DenseMatrix work = transpose(a);            // row j = column j of a
  DenseMatrix basis = DenseMatrix::identity(n);  // row j = column j of V

  bool converged = false;
  for (std::size_t sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(work.row(p), work.row(p));
        const double beta = dot(work.row(q), work.row(q));
        const double gamma = dot(work.row(p), work.row(q));
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(work.row(p), work.row(q), c, s);
        rotate(basis.row(p), basis.row(q), c, s);
      }
    }
  }
  if (!converged) {
    throw NumericError("jacobi_svd: no convergence within " + std::to_string(kJacobiMaxSweeps) +
                       " sweeps (ill-conditioned input)");
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(work.row(j), work.row(j)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult result;
  result.singular_values.resize(n);
  DenseMatrix u_cols(n, m);  // row j = column j of U
  result.vt = DenseMatrix(n, n);
  std::vector<std::size_t> null_columns;
  for (std::size_t j = 0; j < n; ++j) {
    const auto src = order[j];
    result.singular_values[j] = sigma[src];
    std::copy_n(basis.row(src).begin(), n, result.vt.row(j).begin());
    if (sigma[src] > 0.0) {
      auto dst = u_cols.row(j);
      const auto w = work.row(src);
      for (std::size_t i = 0; i < m; ++i) dst[i] = w[i] / sigma[src];
    } else {
      null_columns.push_back(j);
    }
  }
  // Complete U with unit vectors orthogonal to the columns already fixed.
  std::size_t candidate = 0;
  for (auto j : null_columns) {
    for (;; ++candidate) {
      auto v = u_cols.row(j);
      std::fill(v.begin(), v.end(), 0.0);
      v[candidate % m] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
          if (i == j) continue;
          const auto other = u_cols.row(i);
          const double c = dot(other, v);
          for (std::size_t r = 0; r < m; ++r) v[r] -= c * other[r];
        }
      }
      const double len = std::sqrt(dot(v, v));
      if (len > 0.5) {
        for (double& x : v) x /= len;
        ++candidate;
        break;
      }
    }
  }
  result.u = transpose(u_cols);
  return result;
}

SvdResult truncated_svd(const LinearOperator& a, const SvdOptions& options) {
  const auto k = options.rank;
  const auto width = k + options.oversample;
  const auto limit = std::min(a.rows(), a.cols());
  if (k == 0) throw InvalidArgument("truncated_svd: rank must be >= 1");
  if (width > limit) {
    throw InvalidArgument("truncated_svd: rank + oversample = " + std::to_string(width) +
                          " exceeds min(rows, cols) = " + std::to_string(limit));
  }

  Rng rng(options.seed);
  DenseMatrix omega(a.cols(), width);
  for (double& x : omega.values()) x = rng.normal();

  DenseMatrix q = a.multiply(omega, options.threads);
  orthonormalize_columns(q, rng);
  for (std::size_t it = 0; it < options.power_iters; ++it) {
    DenseMatrix z = a.multiply_transposed(q, options.threads);
    orthonormalize_columns(z, rng);
    q = a.multiply(z, options.threads);
    orthonormalize_columns(q, rng);
  }

  // Bᵀ = Aᵀ Q = Q2 R, and R = Ur Σ Vrᵀ, so A ≈ Q B = (Q Vr) Σ (Q2 Ur)ᵀ.
  DenseMatrix q2 = a.multiply_transposed(q, options.threads);
  const DenseMatrix r = orthonormalize_columns(q2, rng);
  const SvdResult small = jacobi_svd(r);

  const DenseMatrix u_full = matmul(q, transpose(small.vt), options.threads);
  const DenseMatrix v_full = matmul(q2, small.u, options.threads);

  SvdResult result;
  result.singular_values.assign(small.singular_values.begin(), small.singular_values.begin() + k);
  result.u = DenseMatrix(a.rows(), k);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy_n(u_full.row(i).begin(), k, result.u.row(i).begin());
  }
  result.vt = DenseMatrix(k, a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const auto src = v_full.row(j);
    for (std::size_t c = 0; c < k; ++c) result.vt(c, j) = src[c];
  }
  return result;
}

EmbeddingTable::EmbeddingTable(DenseMatrix vectors) : vectors_(std::move(vectors)) {
  for (double& v : vectors_.values()) {
    if (!std::isfinite(v)) throw InvalidArgument("embedding table: non-finite entry");
    v = static_cast<double>(static_cast<float>(v));
  }
}

EmbeddingTable EmbeddingTable::normalized() const {
  DenseMatrix out = vectors_;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double len = std::sqrt(dot(row, row));
    if (len == 0.0) continue;
    for (double& v : row) v /= len;
  }
  return EmbeddingTable(std::move(out));
}

EmbeddingTable embed(const SvdResult& svd) {
  if (svd.u.cols() != svd.singular_values.size()) throw InvalidArgument("embed: u/sigma size mismatch");
  DenseMatrix table(svd.u.rows(), svd.u.cols());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t c = 0; c < table.cols(); ++c) table(i, c) = svd.u(i, c) * svd.singular_values[c];
  }
  return EmbeddingTable(std::move(table));
}

}  // namespace hal
