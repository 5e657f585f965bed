#include "hal/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "hal/error.hpp"
#include "hal/parallel.hpp"
#include "hal/random.hpp"

namespace hal {

DataSplit split(std::span<const EncodedDocument> corpus, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("split: fraction must be in (0, 1)");
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    by_class[static_cast<std::size_t>(label_index(corpus[i].label))].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
  for (auto& ids : by_class) {
    if (ids.size() < 2) throw InvalidArgument("split: every class needs at least two documents");
    rng.shuffle(ids);
    const auto take = static_cast<std::size_t>(std::llround(static_cast<double>(ids.size()) * val_fraction));
    val_ids.insert(val_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
    train_ids.insert(train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end());
  }
  if (train_ids.empty() || val_ids.empty()) {
    throw InvalidArgument("split: fraction " + std::to_string(val_fraction) + " leaves an empty side");
  }
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(val_ids.begin(), val_ids.end());
  DataSplit out;
  for (auto i : train_ids) out.train.push_back(corpus[i]);
  for (auto i : val_ids) out.validation.push_back(corpus[i]);
  return out;
}

bool EarlyStopping::update(double val_acc) {
  if (val_acc > best_) {
    best_ = val_acc;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

EmbeddingTable prepare_embeddings(const EmbeddingTable& embeddings, const TrainConfig& config) {
  return config.normalize_embeddings ? embeddings.normalized() : embeddings;
}

namespace {

double accuracy_of(const ModelParams& params, Pooling pooling, std::span<const EncodedDocument> dataset,
                   const EmbeddingTable& table, std::size_t threads) {
  if (dataset.empty()) throw InvalidArgument("evaluate: empty dataset");
  std::vector<std::uint8_t> correct(dataset.size(), 0);
  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    correct[i] = predict(dataset[i], table, params, pooling).label == dataset[i].label;
  });
  const auto hits = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace

FitResult fit(std::span<const EncodedDocument> train, std::span<const EncodedDocument> validation,
              const EmbeddingTable& embeddings, const TrainConfig& config, const FitOptions& options) {
  config.validate();
  if (train.empty() || validation.empty()) throw InvalidArgument("fit: training and validation sets must be non-empty");
  if (embeddings.dim() != config.embed_dim) {
    throw InvalidArgument("fit: config embed_dim " + std::to_string(config.embed_dim) +
                          " != embedding dimension " + std::to_string(embeddings.dim()));
  }
  const EmbeddingTable table = prepare_embeddings(embeddings, config);

  Checkpoint current{config, init_params(config, config.seed), {}, 0};
  current.adam = AdamState::zeros_like(current.params);
  const AdamOptions adam{.learning_rate = config.learning_rate};

  FitResult result;
  EarlyStopping stopping(config.patience);
  std::vector<std::size_t> order(train.size());
  std::vector<EncodedDocument> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(config.seed + epoch);
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t batches = (train.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      batch.clear();
      const auto end = std::min(train.size(), (b + 1) * config.batch_size);
      for (std::size_t i = b * config.batch_size; i < end; ++i) batch.push_back(train[order[i]]);
      LossOptions loss_options;
      loss_options.pooling = config.pooling;
      loss_options.weight_decay = config.weight_decay;
      loss_options.noise_seed = Rng::derive(config.seed, (static_cast<std::uint64_t>(epoch) << 32) | b);
      loss_options.threads = options.threads;
      loss_options.epoch = epoch;
      loss_options.batch_index = b;
      const auto step = loss_and_grad(batch, table, current.params, loss_options);
      loss_sum += step.loss * static_cast<double>(batch.size());
      correct += step.correct;
      adam_step(current.params, step.grads, current.adam, adam);
    }
    current.epoch = epoch;

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train.size());
    record.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    record.val_acc = accuracy_of(current.params, config.pooling, validation, table, options.threads);
    if (!options.test.empty()) {
      record.test_acc = accuracy_of(current.params, config.pooling, options.test, table, options.threads);
    }
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);

    if (stopping.update(record.val_acc)) result.best = current;
    if (stopping.should_stop()) break;
  }
  return result;
}

double evaluate(const Checkpoint& checkpoint, std::span<const EncodedDocument> dataset,
                const EmbeddingTable& embeddings, std::size_t threads) {
  if (checkpoint.params.embed_dim() != embeddings.dim()) {
    throw InvalidArgument("evaluate: checkpoint expects dimension " +
                          std::to_string(checkpoint.params.embed_dim()) + ", embeddings have " +
                          std::to_string(embeddings.dim()));
  }
  const EmbeddingTable table = prepare_embeddings(embeddings, checkpoint.config);
  return accuracy_of(checkpoint.params, checkpoint.config.pooling, dataset, table, threads);
}

AttentionReport inspect_attention(const Checkpoint& checkpoint, const EmbeddingTable& embeddings,
                                  const Vocabulary& vocab, std::string_view text) {
  if (checkpoint.config.pooling != Pooling::Attention) {
    throw InvalidArgument("inspect_attention: checkpoint was trained with mean pooling");
  }
  if (checkpoint.params.embed_dim() != embeddings.dim()) {
    throw InvalidArgument("inspect_attention: embedding dimension mismatch");
  }
  if (vocab.size() != embeddings.vocab_size()) {
    throw InvalidArgument("inspect_attention: vocabulary and embedding table sizes differ");
  }
  const auto doc = encode(RawDocument{std::string(text), Label::Negative}, vocab, checkpoint.config.seq_len);
  const EmbeddingTable table = prepare_embeddings(embeddings, checkpoint.config);
  const auto prediction = predict(doc, table, checkpoint.params, Pooling::Attention);

  AttentionReport report;
  report.predicted = prediction.label;
  report.probabilities = prediction.probabilities;
  for (std::size_t t = 0; t < doc.real_length; ++t) {
    report.tokens.push_back({vocab.token(doc.ids[t]), prediction.alphas[t]});
  }
  return report;
}

PoolingComparison compare_pooling(std::span<const EncodedDocument> corpus, std::span<const EncodedDocument> test,
                                  const EmbeddingTable& embeddings, const TrainConfig& config, std::size_t threads,
                                  const std::function<void(Pooling, const EpochRecord&)>& on_epoch) {
  const DataSplit data = split(corpus, config.val_fraction, config.seed);
  PoolingComparison out;
  out.on_test = !test.empty();
  const auto run = [&](Pooling pooling) {
    TrainConfig variant = config;
    variant.pooling = pooling;
    FitOptions options;
    options.threads = threads;
    options.test = test;
    if (on_epoch) options.on_epoch = [&](const EpochRecord& r) { on_epoch(pooling, r); };
    PoolingRun r;
    r.pooling = pooling;
    r.fit = fit(data.train, data.validation, embeddings, variant, options);
    const auto acc = [&](const EpochRecord& e) { return out.on_test ? *e.test_acc : e.val_acc; };
    r.initial_acc = acc(r.fit.history.front());
    for (const auto& e : r.fit.history) r.peak_acc = std::max(r.peak_acc, acc(e));
    r.selected_acc = acc(r.fit.history[r.fit.best.epoch - 1]);
    return r;
  };
  out.mean = run(Pooling::Mean);
  out.attention = run(Pooling::Attention);
  return out;
}

}  // namespace hal
