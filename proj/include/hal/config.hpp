#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace hal {

enum class Pooling { Mean, Attention };

std::string_view to_string(Pooling pooling);
/// Accepts "mean" or "attention"; throws InvalidArgument otherwise.
Pooling parse_pooling(std::string_view text);

/// Every hyperparameter of an experiment. Defaults are the published IMDB
/// settings; attn_dim, hidden, val_fraction and max_epochs are local choices.
struct TrainConfig {
  std::size_t window = 5;
  std::size_t embed_dim = 300;
  std::size_t seq_len = 200;
  std::size_t vocab_cap = 10000;
  double temperature = 2.0;
  std::size_t attn_dim = 64;
  std::size_t hidden = 128;
  double dropout_p = 0.6;
  double learning_rate = 5e-4;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t patience = 5;
  std::size_t max_epochs = 50;
  double val_fraction = 0.1;
  std::uint64_t seed = 42;
  Pooling pooling = Pooling::Attention;
  bool normalize_embeddings = false;

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Sets one field by its name. Throws InvalidArgument for unknown keys or
/// unparsable values.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

/// Parses flat `key = value` lines; `#` starts a comment. Later lines win.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Inverse of parse_config.
std::string format_config(const TrainConfig& config);

}  // namespace hal
