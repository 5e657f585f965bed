#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hal {

using TokenId = std::uint32_t;

enum class Label : int { Negative = 0, Positive = 1 };

inline int label_index(Label label) { return static_cast<int>(label); }

struct RawDocument {
  std::string text;
  Label label = Label::Negative;
};

/// Frequency-ranked token <-> id bijection. Id i is the i-th most frequent
/// token; equal frequencies are ordered lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from tokens already in rank order. Throws InvalidArgument on
  /// duplicates or empty tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> index_;
};

/// Fixed-length id sequence. Real tokens occupy the first real_length slots;
/// the rest hold id 0 with mask false.
struct EncodedDocument {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  Label label = Label::Negative;
  std::size_t real_length = 0;

  std::size_t seq_len() const noexcept { return ids.size(); }
  std::span<const TokenId> real_ids() const {
    return std::span<const TokenId>(ids).first(real_length);
  }
};

/// Lowercases, removes `<...>` spans, and splits on runs of non-alphanumeric
/// characters. Input is treated as UTF-8; non-ASCII letters are kept as word
/// characters, Latin-1 capitals are lowercased, and Unicode punctuation
/// separates tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Keeps the `cap` most frequent tokens. Throws DataError when the corpus has
/// no tokens at all.
Vocabulary build_vocab(std::span<const RawDocument> docs, std::size_t cap);

/// Drops out-of-vocabulary tokens, truncates to seq_len and right-pads.
/// Throws DataError when no in-vocabulary token remains.
EncodedDocument encode(const RawDocument& doc, const Vocabulary& vocab,
                       std::size_t seq_len);

/// Encodes every document that has at least one in-vocabulary token. The
/// number of skipped documents is written to `skipped` when given.
std::vector<EncodedDocument> encode_all(std::span<const RawDocument> docs,
                                        const Vocabulary& vocab,
                                        std::size_t seq_len,
                                        std::size_t* skipped = nullptr);

/// Reads `<root>/pos/*` (label 1) then `<root>/neg/*` (label 0), each in
/// sorted filename order.
std::vector<RawDocument> load_labeled_dir(const std::filesystem::path& root);

/// True when `text` is well-formed UTF-8.
bool is_valid_utf8(std::string_view text);

}  // namespace hal
