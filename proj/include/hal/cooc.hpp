#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hal/corpus.hpp"
#include "hal/sparse.hpp"

namespace hal {

/// Largest supported window. Weights are accumulated exactly as integer
/// multiples of 1/lcm(1..W), which must stay well inside 64 bits.
inline constexpr std::size_t kMaxWindow = 20;

/// Inverse-distance weight: 1/d for 0 < d <= window, else 0.
double hal_weight(std::size_t distance, std::size_t window);

/// Directional co-occurrence matrices. left(t, c) accumulates 1/d for every
/// context c found d positions before target t; right(t, c) for contexts
/// after t. right is always the exact transpose of left.
struct CoocPair {
  SparseMatrix left;
  SparseMatrix right;
  std::size_t window = 0;
  std::size_t vocab_size = 0;

  friend bool operator==(const CoocPair&, const CoocPair&) = default;
};

/// One row of [L | R] with right-hand columns shifted by V.
struct SparseRow {
  std::size_t width = 0;
  std::vector<std::size_t> cols;
  std::vector<double> values;
};

/// Builds L and R over the masked-true ids of each document. Windows never
/// cross document boundaries. The result is independent of document order and
/// of `threads`.
CoocPair build_cooc(std::span<const EncodedDocument> corpus, std::size_t vocab_size,
                    std::size_t window, std::size_t threads = 1);

SparseRow concat_row(const CoocPair& pair, std::size_t word_id);

}  // namespace hal
