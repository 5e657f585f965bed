#include "hal/store.hpp"

#include <bit>
#include <cmath>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace hal {

namespace fs = std::filesystem;

std::string_view to_string(StoreErrorKind kind) {
  switch (kind) {
    case StoreErrorKind::Io: return "I/O error";
    case StoreErrorKind::MagicMismatch: return "magic mismatch";
    case StoreErrorKind::UnsupportedVersion: return "unsupported version";
    case StoreErrorKind::ChecksumMismatch: return "checksum mismatch";
    case StoreErrorKind::Truncated: return "truncated file";
    case StoreErrorKind::Malformed: return "malformed payload";
  }
  return "unknown";
}

StoreError::StoreError(StoreErrorKind kind, fs::path path, const std::string& detail)
    : DataError(std::string(to_string(kind)) + ": " + path.string() + (detail.empty() ? "" : " (" + detail + ")")),
      kind_(kind),
      path_(std::move(path)) {}

std::uint64_t checksum(std::span<const std::byte> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t checksum(std::string_view bytes) { return checksum(std::as_bytes(std::span(bytes))); }

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError(StoreErrorKind::Io, path, "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError(StoreErrorKind::Io, path, "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StoreError(StoreErrorKind::Io, path, ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreErrorKind::Io, path, "cannot open for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

namespace {

// ---- binary helpers -------------------------------------------------------

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void raw(std::string_view s) { bytes_.append(s); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  std::uint64_t u64() {
    const auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() {
    const auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return std::bit_cast<float>(v);
  }
  /// Bounded element count: each element needs at least `unit` bytes.
  std::size_t count(std::size_t unit) {
    const auto n = u64();
    if (unit > 0 && n > remaining() / unit) malformed("element count exceeds payload");
    return static_cast<std::size_t>(n);
  }
  std::string_view take(std::size_t n) {
    if (n > remaining()) malformed("payload shorter than its contents");
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string_view rest() { return take(remaining()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() {
    if (remaining() != 0) malformed("trailing bytes after payload");
  }
  [[noreturn]] void malformed(const std::string& detail) const {
    throw StoreError(StoreErrorKind::Malformed, path_, detail);
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  const fs::path& path_;
};

constexpr std::size_t kEnvelopeSize = 32;

std::string envelope(std::string_view magic, std::string_view payload) {
  Writer w;
  w.raw(magic);
  w.u64(kFormatVersion);
  w.u64(payload.size());
  w.u64(checksum(payload));
  w.raw(payload);
  return w.bytes();
}

// Validates the envelope and returns the payload slice of `file`.
std::string_view open_envelope(std::string_view file, std::string_view magic, const fs::path& path) {
  if (file.size() < magic.size() || file.substr(0, magic.size()) != magic) {
    throw StoreError(StoreErrorKind::MagicMismatch, path, "expected '" + std::string(magic) + "'");
  }
  if (file.size() < kEnvelopeSize) throw StoreError(StoreErrorKind::Truncated, path, "incomplete header");
  Reader header(file.substr(8, 24), path);
  const auto version = header.u64();
  if (version != kFormatVersion) {
    throw StoreError(StoreErrorKind::UnsupportedVersion, path, "version " + std::to_string(version));
  }
  const auto length = header.u64();
  const auto expected = header.u64();
  const auto body = file.substr(kEnvelopeSize);
  if (body.size() < length) throw StoreError(StoreErrorKind::Truncated, path, "payload shorter than declared");
  if (body.size() > length) throw StoreError(StoreErrorKind::Malformed, path, "bytes beyond declared payload");
  if (checksum(body) != expected) throw StoreError(StoreErrorKind::ChecksumMismatch, path, "");
  return body;
}

// ---- text helpers ---------------------------------------------------------

constexpr std::string_view kChecksumPrefix = "#checksum ";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string with_trailer(std::string header_line, std::string_view body) {
  header_line += '\n';
  header_line.append(body);
  header_line += kChecksumPrefix;
  header_line += hex64(checksum(body));
  header_line += '\n';
  return header_line;
}

struct TextParts {
  std::string_view header;
  std::string_view body;
};

// Splits `header\n body #checksum X\n` and verifies the body checksum. The
// header is returned unvalidated.
TextParts split_text(std::string_view text, const fs::path& path) {
  const auto first_nl = text.find('\n');
  if (first_nl == std::string_view::npos) throw StoreError(StoreErrorKind::Truncated, path, "missing header line");
  TextParts parts;
  parts.header = text.substr(0, first_nl);
  auto rest = text.substr(first_nl + 1);
  if (rest.empty() || rest.back() != '\n') throw StoreError(StoreErrorKind::Truncated, path, "missing checksum line");
  const auto trailer_start = rest.find_last_of('\n', rest.size() - 2);
  const auto trailer_pos = trailer_start == std::string_view::npos ? 0 : trailer_start + 1;
  const auto trailer = rest.substr(trailer_pos, rest.size() - 1 - trailer_pos);
  if (trailer.substr(0, kChecksumPrefix.size()) != kChecksumPrefix) {
    throw StoreError(StoreErrorKind::Truncated, path, "missing checksum line");
  }
  const auto digest = trailer.substr(kChecksumPrefix.size());
  std::uint64_t expected = 0;
  auto [ptr, ec] = std::from_chars(digest.data(), digest.data() + digest.size(), expected, 16);
  if (digest.size() != 16 || ec != std::errc() || ptr != digest.data() + digest.size()) {
    throw StoreError(StoreErrorKind::Malformed, path, "bad checksum line");
  }
  parts.body = rest.substr(0, trailer_pos);
  if (checksum(parts.body) != expected) throw StoreError(StoreErrorKind::ChecksumMismatch, path, "");
  return parts;
}

std::vector<std::string_view> split_lines(std::string_view body) {
  std::vector<std::string_view> lines;
  while (!body.empty()) {
    const auto nl = body.find('\n');
    lines.push_back(body.substr(0, nl));
    body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
  }
  return lines;
}

template <class T>
bool parse_exact(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// ---- matrices -------------------------------------------------------------

void write_sparse(Writer& w, const SparseMatrix& m) {
  w.u64(m.rows());
  w.u64(m.cols());
  w.u64(m.nnz());
  for (auto o : m.row_offsets()) w.u64(o);
  for (auto c : m.col_indices()) w.u64(c);
  for (auto v : m.values()) w.f64(v);
}

SparseMatrix read_sparse(Reader& r) {
  const auto rows = r.u64();
  const auto cols = r.u64();
  const auto nnz = r.u64();
  if (rows > r.remaining() / 8 || nnz > r.remaining() / 16) r.malformed("sparse matrix sizes exceed payload");
  std::vector<std::uint64_t> offsets(rows + 1);
  for (auto& o : offsets) o = r.u64();
  std::vector<std::uint32_t> col_indices(nnz);
  for (auto& c : col_indices) {
    const auto v = r.u64();
    if (v >= cols) r.malformed("column index out of range");
    c = static_cast<std::uint32_t>(v);
  }
  std::vector<double> values(nnz);
  for (auto& v : values) v = r.f64();
  try {
    return SparseMatrix::from_csr(rows, cols, std::move(offsets), std::move(col_indices), std::move(values));
  } catch (const InvalidArgument& e) {
    r.malformed(e.what());
  }
}

Vocabulary read_vocab_block(Reader& r, const fs::path& path) {
  const auto block = r.rest();
  try {
    return parse_vocabulary(block, path);
  } catch (const StoreError& e) {
    throw StoreError(StoreErrorKind::Malformed, path, std::string("embedded vocabulary: ") + e.what());
  }
}

// ---- checkpoint config block ----------------------------------------------

constexpr std::uint64_t kConfigFields = 17;

void write_config(Writer& w, const TrainConfig& c) {
  w.u64(kConfigFields);
  w.u64(c.window);
  w.u64(c.embed_dim);
  w.u64(c.seq_len);
  w.u64(c.vocab_cap);
  w.f64(c.temperature);
  w.u64(c.attn_dim);
  w.u64(c.hidden);
  w.f64(c.dropout_p);
  w.f64(c.learning_rate);
  w.f64(c.weight_decay);
  w.u64(c.batch_size);
  w.u64(c.patience);
  w.u64(c.max_epochs);
  w.f64(c.val_fraction);
  w.u64(c.seed);
  w.u64(c.pooling == Pooling::Attention ? 1 : 0);
  w.u64(c.normalize_embeddings ? 1 : 0);
}

TrainConfig read_config(Reader& r) {
  if (r.u64() != kConfigFields) r.malformed("unexpected config field count");
  TrainConfig c;
  c.window = r.u64();
  c.embed_dim = r.u64();
  c.seq_len = r.u64();
  c.vocab_cap = r.u64();
  c.temperature = r.f64();
  c.attn_dim = r.u64();
  c.hidden = r.u64();
  c.dropout_p = r.f64();
  c.learning_rate = r.f64();
  c.weight_decay = r.f64();
  c.batch_size = r.u64();
  c.patience = r.u64();
  c.max_epochs = r.u64();
  c.val_fraction = r.f64();
  c.seed = r.u64();
  const auto pooling = r.u64();
  const auto normalize = r.u64();
  if (pooling > 1 || normalize > 1) r.malformed("invalid enum in config block");
  c.pooling = pooling ? Pooling::Attention : Pooling::Mean;
  c.normalize_embeddings = normalize != 0;
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    r.malformed(e.what());
  }
  return c;
}

void write_tensor(Writer& w, std::string_view name, std::size_t rows, std::size_t cols,
                  std::span<const double> data) {
  w.u64(name.size());
  w.raw(name);
  w.u64(rows);
  w.u64(cols);
  for (double v : data) w.f64(v);
}

void read_tensor(Reader& r, std::string_view expected_name, std::size_t rows, std::size_t cols,
                 std::span<double> data) {
  const auto name = r.take(r.count(1));
  if (name != expected_name) {
    r.malformed("expected tensor '" + std::string(expected_name) + "', found '" + std::string(name) + "'");
  }
  if (r.u64() != rows || r.u64() != cols) r.malformed("shape mismatch for tensor " + std::string(name));
  for (double& v : data) v = r.f64();
}

}  // namespace

// ---- vocabulary ---------------------------------------------------------------

std::string serialize_vocabulary(const Vocabulary& vocab) {
  std::string body;
  for (const auto& t : vocab.tokens()) {
    body += t;
    body += '\n';
  }
  return with_trailer("HALVOCAB " + std::to_string(kFormatVersion) + " " + std::to_string(vocab.size()), body);
}

Vocabulary parse_vocabulary(std::string_view text, const fs::path& origin) {
  constexpr std::string_view magic = "HALVOCAB ";
  if (text.substr(0, magic.size()) != magic) throw StoreError(StoreErrorKind::MagicMismatch, origin, "expected HALVOCAB");
  const auto parts = split_text(text, origin);
  const auto fields = parts.header.substr(magic.size());
  const auto space = fields.find(' ');
  std::uint64_t version = 0;
  std::uint64_t size = 0;
  if (space == std::string_view::npos || !parse_exact(fields.substr(0, space), version)) {
    throw StoreError(StoreErrorKind::Malformed, origin, "bad header");
  }
  if (version != kFormatVersion) {
    throw StoreError(StoreErrorKind::UnsupportedVersion, origin, "version " + std::to_string(version));
  }
  if (!parse_exact(fields.substr(space + 1), size)) throw StoreError(StoreErrorKind::Malformed, origin, "bad header");
  auto lines = split_lines(parts.body);
  if (lines.size() != size) {
    throw StoreError(StoreErrorKind::Malformed, origin,
                     "header declares " + std::to_string(size) + " tokens, found " + std::to_string(lines.size()));
  }
  std::vector<std::string> tokens(lines.begin(), lines.end());
  try {
    return Vocabulary(std::move(tokens));
  } catch (const InvalidArgument& e) {
    throw StoreError(StoreErrorKind::Malformed, origin, e.what());
  }
}

void save_vocabulary(const Vocabulary& vocab, const fs::path& path) {
  write_file_atomic(path, serialize_vocabulary(vocab));
}

Vocabulary load_vocabulary(const fs::path& path) { return parse_vocabulary(read_file(path), path); }

// ---- co-occurrence --------------------------------------------------------------

namespace {
constexpr std::string_view kCoocMagic{"HALCOO  ", 8};
constexpr std::string_view kEmbMagic{"HALEMB  ", 8};
constexpr std::string_view kCkptMagic{"HALCKPT ", 8};
}  // namespace

void save_cooc(const CoocPair& pair, const Vocabulary& vocab, const fs::path& path) {
  if (vocab.size() != pair.vocab_size) throw InvalidArgument("save_cooc: vocabulary size does not match matrices");
  Writer w;
  w.u64(pair.window);
  w.u64(pair.vocab_size);
  write_sparse(w, pair.left);
  write_sparse(w, pair.right);
  w.raw(serialize_vocabulary(vocab));
  write_file_atomic(path, envelope(kCoocMagic, w.bytes()));
}

CoocArtifact load_cooc(const fs::path& path) {
  const auto file = read_file(path);
  Reader r(open_envelope(file, kCoocMagic, path), path);
  CoocArtifact out;
  out.pair.window = r.u64();
  out.pair.vocab_size = r.u64();
  out.pair.left = read_sparse(r);
  out.pair.right = read_sparse(r);
  const auto v = out.pair.vocab_size;
  if (out.pair.left.rows() != v || out.pair.left.cols() != v || out.pair.right.rows() != v ||
      out.pair.right.cols() != v) {
    r.malformed("matrix shape does not match vocabulary size");
  }
  out.vocab = read_vocab_block(r, path);
  if (out.vocab.size() != v) r.malformed("embedded vocabulary size does not match matrices");
  return out;
}

// ---- embeddings -----------------------------------------------------------------

void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab, const fs::path& path) {
  if (vocab.size() != table.vocab_size()) throw InvalidArgument("save_embeddings: vocabulary size mismatch");
  Writer w;
  w.u64(table.vocab_size());
  w.u64(table.dim());
  for (double v : table.vectors().values()) w.f32(static_cast<float>(v));
  w.raw(serialize_vocabulary(vocab));
  write_file_atomic(path, envelope(kEmbMagic, w.bytes()));
}

EmbeddingArtifact load_embeddings(const fs::path& path) {
  const auto file = read_file(path);
  Reader r(open_envelope(file, kEmbMagic, path), path);
  const auto rows = r.u64();
  const auto dim = r.u64();
  if (dim != 0 && rows > r.remaining() / 4 / dim) r.malformed("table size exceeds payload");
  DenseMatrix vectors(rows, dim);
  for (double& v : vectors.values()) {
    const float f = r.f32();
    if (!std::isfinite(f)) r.malformed("non-finite embedding value");
    v = f;
  }
  EmbeddingArtifact out{EmbeddingTable(std::move(vectors)), read_vocab_block(r, path)};
  if (out.vocab.size() != rows) r.malformed("embedded vocabulary size does not match table");
  return out;
}

// ---- checkpoint -----------------------------------------------------------------

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  Writer w;
  write_config(w, ckpt.config);
  w.u64(ckpt.epoch);
  w.u64(ckpt.adam.step);
  const auto params = tensors(ckpt.params);
  const bool has_adam = ckpt.adam.first_moment.size() == params.size();
  w.u64(has_adam ? 3 * params.size() : params.size());
  for (const auto& t : params) write_tensor(w, t.name, t.rows, t.cols, t.data);
  if (has_adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      write_tensor(w, "adam.m." + std::string(params[i].name), params[i].rows, params[i].cols,
                   ckpt.adam.first_moment[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      write_tensor(w, "adam.v." + std::string(params[i].name), params[i].rows, params[i].cols,
                   ckpt.adam.second_moment[i]);
    }
  }
  write_file_atomic(path, envelope(kCkptMagic, w.bytes()));
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto file = read_file(path);
  Reader r(open_envelope(file, kCkptMagic, path), path);
  Checkpoint ckpt;
  ckpt.config = read_config(r);
  ckpt.epoch = r.u64();
  const auto adam_steps = r.u64();
  ckpt.params = init_params(ckpt.config, 0);
  auto params = tensors(ckpt.params);
  const auto count = r.u64();
  if (count != params.size() && count != 3 * params.size()) r.malformed("unexpected tensor count");
  for (auto& t : params) read_tensor(r, t.name, t.rows, t.cols, t.data);
  if (count == 3 * params.size()) {
    ckpt.adam = AdamState::zeros_like(ckpt.params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      read_tensor(r, "adam.m." + std::string(params[i].name), params[i].rows, params[i].cols,
                  ckpt.adam.first_moment[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      read_tensor(r, "adam.v." + std::string(params[i].name), params[i].rows, params[i].cols,
                  ckpt.adam.second_moment[i]);
    }
  }
  r.expect_end();
  ckpt.adam.step = adam_steps;
  return ckpt;
}

// ---- metrics --------------------------------------------------------------------

std::string serialize_metrics(std::span<const EpochRecord> records) {
  std::string body;
  for (const auto& rec : records) {
    body += std::to_string(rec.epoch);
    body += ',' + format_double(rec.train_loss);
    body += ',' + format_double(rec.train_acc);
    body += ',' + format_double(rec.val_acc);
    body += ',';
    if (rec.test_acc) body += format_double(*rec.test_acc);
    body += ',' + format_double(rec.wall_seconds);
    body += '\n';
  }
  return with_trailer(std::string(kMetricsHeader), body);
}

void save_metrics(std::span<const EpochRecord> records, const fs::path& path) {
  write_file_atomic(path, serialize_metrics(records));
}

std::vector<EpochRecord> load_metrics(const fs::path& path) {
  const auto text = read_file(path);
  if (text.substr(0, kMetricsHeader.size() + 1) != std::string(kMetricsHeader) + "\n") {
    throw StoreError(StoreErrorKind::MagicMismatch, path, "expected metrics CSV header");
  }
  const auto parts = split_text(text, path);
  std::vector<EpochRecord> records;
  for (auto line : split_lines(parts.body)) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    EpochRecord rec;
    bool ok = fields.size() == 6 && parse_exact(fields[0], rec.epoch) && parse_exact(fields[1], rec.train_loss) &&
              parse_exact(fields[2], rec.train_acc) && parse_exact(fields[3], rec.val_acc) &&
              parse_exact(fields[5], rec.wall_seconds);
    if (ok && !fields[4].empty()) {
      double test = 0.0;
      ok = parse_exact(fields[4], test);
      rec.test_acc = test;
    }
    if (!ok) throw StoreError(StoreErrorKind::Malformed, path, "bad metrics row '" + std::string(line) + "'");
    records.push_back(rec);
  }
  return records;
}

}  // namespace hal
