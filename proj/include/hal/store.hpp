#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hal/cooc.hpp"
#include "hal/corpus.hpp"
#include "hal/error.hpp"
#include "hal/svd.hpp"
#include "hal/train.hpp"

namespace hal {

enum class StoreErrorKind { Io, MagicMismatch, UnsupportedVersion, ChecksumMismatch, Truncated, Malformed };

std::string_view to_string(StoreErrorKind kind);

class StoreError : public DataError {
 public:
  StoreError(StoreErrorKind kind, std::filesystem::path path, const std::string& detail);

  StoreErrorKind kind() const noexcept { return kind_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  StoreErrorKind kind_;
  std::filesystem::path path_;
};

inline constexpr std::uint64_t kFormatVersion = 1;

/// 64-bit FNV-1a. Any single-byte change alters the digest.
std::uint64_t checksum(std::span<const std::byte> bytes);
std::uint64_t checksum(std::string_view bytes);

// Binary artifacts share one envelope:
//   magic[8] | version u64 | payload length u64 | payload checksum u64 | payload
// with all integers little-endian. Text artifacts (vocabulary, metrics) end
// with a `#checksum <16 hex digits>` line covering the lines between the
// header and the trailer.

/// `HALVOCAB 1 <V>`, then one token per line (line i+1 holds id i).
std::string serialize_vocabulary(const Vocabulary& vocab);
Vocabulary parse_vocabulary(std::string_view text, const std::filesystem::path& origin = {});
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

/// Co-occurrence pair with the vocabulary it was built over.
struct CoocArtifact {
  CoocPair pair;
  Vocabulary vocab;
};
void save_cooc(const CoocPair& pair, const Vocabulary& vocab, const std::filesystem::path& path);
CoocArtifact load_cooc(const std::filesystem::path& path);

/// Embedding table (32-bit floats) with the vocabulary block appended.
struct EmbeddingArtifact {
  EmbeddingTable table;
  Vocabulary vocab;
};
void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab, const std::filesystem::path& path);
EmbeddingArtifact load_embeddings(const std::filesystem::path& path);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr std::string_view kMetricsHeader = "epoch,train_loss,train_acc,val_acc,test_acc,wall_seconds";
std::string serialize_metrics(std::span<const EpochRecord> records);
void save_metrics(std::span<const EpochRecord> records, const std::filesystem::path& path);
std::vector<EpochRecord> load_metrics(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace hal
