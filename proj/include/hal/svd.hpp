#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hal/corpus.hpp"
#include "hal/linalg.hpp"

namespace hal {

struct SvdOptions {
  std::size_t rank = 300;
  std::size_t oversample = 10;
  std::size_t power_iters = 2;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// a ≈ u * diag(singular_values) * vt, singular values non-increasing.
struct SvdResult {
  DenseMatrix u;
  std::vector<double> singular_values;
  DenseMatrix vt;
};

/// Hestenes one-sided Jacobi on the columns of `a` (rows >= cols). Returns the
/// thin SVD of `a` with all cols() singular triplets.
inline constexpr std::size_t kJacobiMaxSweeps = 30;
inline constexpr double kJacobiTolerance = 1e-12;
SvdResult jacobi_svd(const DenseMatrix& a);

/// Randomized range finder with power iterations followed by a small Jacobi
/// SVD. Deterministic for a given seed and independent of `threads`.
/// Throws InvalidArgument when rank + oversample exceeds min(rows, cols), and
/// NumericError when the Jacobi sweeps do not converge.
SvdResult truncated_svd(const LinearOperator& a, const SvdOptions& options);

/// Frozen word vectors, one row per vocabulary id. Values are rounded to
/// float precision on construction so the 32-bit file format is lossless.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(DenseMatrix vectors);

  std::size_t vocab_size() const noexcept { return vectors_.rows(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  std::span<const double> row(std::size_t id) const { return vectors_.row(id); }
  const DenseMatrix& vectors() const noexcept { return vectors_; }

  /// Copy with every row scaled to unit L2 norm (zero rows stay zero).
  EmbeddingTable normalized() const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  DenseMatrix vectors_;
};

/// Row i is u[i, :] scaled elementwise by the singular values (U_k Σ_k).
EmbeddingTable embed(const SvdResult& svd);

}  // namespace hal
