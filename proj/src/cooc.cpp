#include "hal/cooc.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "hal/error.hpp"
#include "hal/parallel.hpp"

namespace hal {

double hal_weight(std::size_t distance, std::size_t window) {
  if (distance == 0 || distance > window) return 0.0;
  return 1.0 / static_cast<double>(distance);
}

namespace {

std::uint64_t window_lcm(std::size_t window) {
  std::uint64_t l = 1;
  for (std::uint64_t d = 2; d <= window; ++d) l = std::lcm(l, d);
  return l;
}

// Streams documents into per-row buffers of (context, units) where one unit is
// 1/lcm(1..W). Integer sums make the result independent of accumulation order.
class CoocAccumulator {
 public:
  struct Entry {
    std::uint32_t col;
    std::uint64_t units;
  };

  CoocAccumulator(std::size_t vocab_size, std::size_t window)
      : window_(window), lcm_(window_lcm(window)), rows_(vocab_size), compacted_(vocab_size, 0) {}

  void add_document(std::span<const TokenId> ids) {
    scratch_.clear();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t reach = std::min(window_, i);
      for (std::size_t d = 1; d <= reach; ++d) {
        scratch_.push_back({ids[i], ids[i - d], lcm_ / d});
      }
    }
    std::sort(scratch_.begin(), scratch_.end(), [](const Pending& a, const Pending& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::size_t i = 0;
    while (i < scratch_.size()) {
      const auto row = scratch_[i].row;
      const auto col = scratch_[i].col;
      std::uint64_t units = 0;
      for (; i < scratch_.size() && scratch_[i].row == row && scratch_[i].col == col; ++i) {
        units += scratch_[i].units;
      }
      auto& buffer = rows_[row];
      buffer.push_back({col, units});
      if (buffer.size() > 2 * compacted_[row] + 64) compact(row);
    }
  }

  void merge(CoocAccumulator&& other) {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      auto& theirs = other.rows_[r];
      if (theirs.empty()) continue;
      rows_[r].insert(rows_[r].end(), theirs.begin(), theirs.end());
      std::vector<Entry>().swap(theirs);
      compact(r);
    }
  }

  SparseMatrix finish() {
    const auto n = rows_.size();
    std::vector<std::uint64_t> offsets(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
      compact(r);
      offsets[r + 1] = offsets[r] + rows_[r].size();
    }
    std::vector<std::uint32_t> cols;
    std::vector<double> values;
    cols.reserve(offsets[n]);
    values.reserve(offsets[n]);
    const auto scale = static_cast<double>(lcm_);
    for (auto& buffer : rows_) {
      for (const auto& e : buffer) {
        cols.push_back(e.col);
        values.push_back(static_cast<double>(e.units) / scale);
      }
      std::vector<Entry>().swap(buffer);
    }
    return SparseMatrix::from_csr(n, n, std::move(offsets), std::move(cols), std::move(values));
  }

 private:
  struct Pending {
    std::uint32_t row;
    std::uint32_t col;
    std::uint64_t units;
  };

  void compact(std::size_t row) {
    auto& buffer = rows_[row];
    std::sort(buffer.begin(), buffer.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      if (out > 0 && buffer[out - 1].col == buffer[i].col) {
        buffer[out - 1].units += buffer[i].units;
      } else {
        buffer[out++] = buffer[i];
      }
    }
    buffer.resize(out);
    compacted_[row] = out;
  }

  std::size_t window_;
  std::uint64_t lcm_;
  std::vector<std::vector<Entry>> rows_;
  std::vector<std::size_t> compacted_;
  std::vector<Pending> scratch_;
};

}  // namespace

CoocPair build_cooc(std::span<const EncodedDocument> corpus, std::size_t vocab_size,
                    std::size_t window, std::size_t threads) {
  if (corpus.empty()) throw InvalidArgument("build_cooc: empty corpus");
  if (vocab_size == 0) throw InvalidArgument("build_cooc: vocabulary size must be >= 1");
  if (window == 0 || window > kMaxWindow) {
    throw InvalidArgument("build_cooc: window must be in [1, " + std::to_string(kMaxWindow) + "]");
  }
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (auto id : corpus[d].real_ids()) {
      if (id >= vocab_size) {
        throw InvalidArgument("build_cooc: document " + std::to_string(d) + " has token id " +
                              std::to_string(id) + " >= vocabulary size " + std::to_string(vocab_size));
      }
    }
  }

  threads = std::clamp<std::size_t>(threads, 1, corpus.size());
  std::vector<CoocAccumulator> partials;
  partials.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) partials.emplace_back(vocab_size, window);
  const std::size_t block = (corpus.size() + threads - 1) / threads;
  parallel_for(threads, threads, [&](std::size_t w) {
    const auto end = std::min(corpus.size(), (w + 1) * block);
    for (std::size_t d = w * block; d < end; ++d) partials[w].add_document(corpus[d].real_ids());
  });
  for (std::size_t w = 1; w < partials.size(); ++w) partials[0].merge(std::move(partials[w]));

  CoocPair pair;
  pair.left = partials[0].finish();
  pair.right = pair.left.transpose();
  pair.window = window;
  pair.vocab_size = vocab_size;
  return pair;
}

SparseRow concat_row(const CoocPair& pair, std::size_t word_id) {
  if (word_id >= pair.vocab_size) {
    throw InvalidArgument("concat_row: word id " + std::to_string(word_id) + " out of range");
  }
  SparseRow row;
  row.width = 2 * pair.vocab_size;
  const auto left = pair.left.row(word_id);
  const auto right = pair.right.row(word_id);
  row.cols.reserve(left.size() + right.size());
  row.values.reserve(left.size() + right.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    row.cols.push_back(left.cols[i]);
    row.values.push_back(left.values[i]);
  }
  for (std::size_t i = 0; i < right.size(); ++i) {
    row.cols.push_back(pair.vocab_size + right.cols[i]);
    row.values.push_back(right.values[i]);
  }
  return row;
}

}  // namespace hal
