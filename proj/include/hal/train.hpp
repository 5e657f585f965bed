#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hal/config.hpp"
#include "hal/corpus.hpp"
#include "hal/model.hpp"
#include "hal/optimizer.hpp"
#include "hal/svd.hpp"

namespace hal {

/// Trained model plus everything needed to resume or evaluate it.
struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  AdamState adam;
  std::size_t epoch = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::optional<double> test_acc;
  double wall_seconds = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct DataSplit {
  std::vector<EncodedDocument> train;
  std::vector<EncodedDocument> validation;
};

/// Stratified shuffle split: each class contributes round(n_c * fraction)
/// documents to validation. Throws InvalidArgument when a class has fewer than
/// two documents or either side comes out empty.
DataSplit split(std::span<const EncodedDocument> corpus, double val_fraction, std::uint64_t seed);

/// Tracks the best validation accuracy and counts epochs without strict
/// improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when `val_acc` is a new best.
  bool update(double val_acc);
  bool should_stop() const noexcept { return stale_ >= patience_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = -1.0;
};

struct FitOptions {
  std::size_t threads = 1;
  /// Evaluated every epoch for reporting only; never used for selection.
  std::span<const EncodedDocument> test;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
};

/// Trains from a fresh initialization with Adam and early stopping on
/// validation accuracy; returns the best-validation checkpoint. A pure
/// function of its inputs apart from wall_seconds.
FitResult fit(std::span<const EncodedDocument> train, std::span<const EncodedDocument> validation,
              const EmbeddingTable& embeddings, const TrainConfig& config, const FitOptions& options = {});

/// Eval-mode accuracy of `checkpoint` on `dataset`.
double evaluate(const Checkpoint& checkpoint, std::span<const EncodedDocument> dataset,
                const EmbeddingTable& embeddings, std::size_t threads = 1);

struct TokenWeight {
  std::string token;
  double alpha = 0.0;
};

struct AttentionReport {
  std::vector<TokenWeight> tokens;  // real tokens in sequence order
  Label predicted = Label::Negative;
  std::array<double, kNumClasses> probabilities{};
};

/// Tokenizes and encodes `text`, then reports per-token attention weights and
/// the prediction. Requires an attention-pooling checkpoint.
AttentionReport inspect_attention(const Checkpoint& checkpoint, const EmbeddingTable& embeddings,
                                  const Vocabulary& vocab, std::string_view text);

/// One pooling variant trained under the shared protocol.
struct PoolingRun {
  Pooling pooling = Pooling::Attention;
  FitResult fit;
  /// Accuracy after the first epoch.
  double initial_acc = 0.0;
  /// Highest per-epoch accuracy over the run.
  double peak_acc = 0.0;
  /// Accuracy of the early-stopped (best validation) checkpoint.
  double selected_acc = 0.0;
};

/// Mean vs attention pooling on identical split, initialization and batch
/// order. Accuracies are test accuracies when `test` is non-empty, otherwise
/// validation accuracies.
struct PoolingComparison {
  PoolingRun mean;
  PoolingRun attention;
  bool on_test = false;
};

PoolingComparison compare_pooling(std::span<const EncodedDocument> corpus, std::span<const EncodedDocument> test,
                                  const EmbeddingTable& embeddings, const TrainConfig& config,
                                  std::size_t threads = 1,
                                  const std::function<void(Pooling, const EpochRecord&)>& on_epoch = {});

/// The table the model actually consumes under `config`.
EmbeddingTable prepare_embeddings(const EmbeddingTable& embeddings, const TrainConfig& config);

}  // namespace hal
