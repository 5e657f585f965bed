#include "hal/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hal/error.hpp"

namespace hal {

namespace fs = std::filesystem;

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw InvalidArgument("vocabulary: empty token at id " + std::to_string(i));
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw InvalidArgument("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw InvalidArgument("vocabulary: id " + std::to_string(id) + " out of range (size " +
                          std::to_string(tokens_.size()) + ")");
  }
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point starting at text[pos]; advances pos. Malformed
// sequences yield kInvalid and consume a single byte.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  const unsigned char lead = byte(pos);
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  std::size_t extra;
  char32_t cp;
  char32_t min_cp;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1, cp = lead & 0x1F, min_cp = 0x80;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2, cp = lead & 0x0F, min_cp = 0x800;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3, cp = lead & 0x07, min_cp = 0x10000;
  } else {
    ++pos;
    return kInvalid;
  }
  if (pos + extra >= text.size()) {
    ++pos;
    return kInvalid;
  }
  for (std::size_t i = 1; i <= extra; ++i) {
    const unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++pos;
    return kInvalid;
  }
  pos += extra + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp == kInvalid) return false;
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;     // C1 controls, Latin-1 symbols
  if (cp >= 0x2000 && cp <= 0x206F) return false;                // general punctuation
  if (cp >= 0x2190 && cp <= 0x2BFF) return false;                // arrows, math, box drawing
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;                // CJK punctuation
  if (cp == 0xFEFF) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

}  // namespace

bool is_valid_utf8(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (decode_utf8(text, pos) == kInvalid) return false;
  }
  return true;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == '<') {
      const auto close = text.find('>', pos + 1);
      if (close != std::string_view::npos) {
        flush();
        pos = close + 1;
        continue;
      }
    }
    const char32_t cp = decode_utf8(text, pos);
    if (is_word_char(cp)) {
      append_utf8(current, to_lower(cp));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary build_vocab(std::span<const RawDocument> docs, std::size_t cap) {
  if (docs.empty()) throw InvalidArgument("build_vocab: no documents");
  if (cap == 0) throw InvalidArgument("build_vocab: cap must be >= 1");

  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& doc : docs) {
    for (auto& token : tokenize(doc.text)) ++counts[std::move(token)];
  }
  if (counts.empty()) throw DataError("build_vocab: corpus contains no tokens");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(
      std::make_move_iterator(counts.begin()), std::make_move_iterator(counts.end()));
  const auto keep = std::min(cap, ranked.size());
  const auto by_rank = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), by_rank);

  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(tokens));
}

EncodedDocument encode(const RawDocument& doc, const Vocabulary& vocab, std::size_t seq_len) {
  if (vocab.empty()) throw InvalidArgument("encode: empty vocabulary");
  if (seq_len == 0) throw InvalidArgument("encode: sequence length must be >= 1");

  EncodedDocument out;
  out.ids.assign(seq_len, 0);
  out.mask.assign(seq_len, 0);
  out.label = doc.label;
  for (const auto& token : tokenize(doc.text)) {
    if (out.real_length == seq_len) break;
    if (auto id = vocab.find(token)) {
      out.ids[out.real_length] = *id;
      out.mask[out.real_length] = 1;
      ++out.real_length;
    }
  }
  if (out.real_length == 0) throw DataError("encode: document has no in-vocabulary tokens");
  return out;
}

std::vector<EncodedDocument> encode_all(std::span<const RawDocument> docs, const Vocabulary& vocab,
                                        std::size_t seq_len, std::size_t* skipped) {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  std::size_t dropped = 0;
  for (const auto& doc : docs) {
    try {
      out.push_back(encode(doc, vocab, seq_len));
    } catch (const DataError&) {
      ++dropped;
    }
  }
  if (skipped) *skipped = dropped;
  return out;
}

namespace {

void read_class_dir(const fs::path& dir, Label label, std::vector<RawDocument>& out) {
  if (!fs::is_directory(dir)) throw DataError("missing directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read file: " + file.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!is_valid_utf8(text)) throw DataError("file is not valid UTF-8: " + file.string());
    if (text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
      throw DataError("empty document: " + file.string());
    }
    out.push_back({std::move(text), label});
  }
}

}  // namespace

std::vector<RawDocument> load_labeled_dir(const fs::path& root) {
  std::vector<RawDocument> docs;
  read_class_dir(root / "pos", Label::Positive, docs);
  read_class_dir(root / "neg", Label::Negative, docs);
  return docs;
}

}  // namespace hal
