#include "hal/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hal/error.hpp"

namespace hal {

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::Mean ? "mean" : "attention";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "mean") return Pooling::Mean;
  if (text == "attention") return Pooling::Attention;
  throw InvalidArgument("pooling must be 'mean' or 'attention', got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("config: ") + what);
  };
  require(window >= 1, "window must be >= 1");
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(seq_len >= 1, "seq_len must be >= 1");
  require(vocab_cap >= 1, "vocab_cap must be >= 1");
  require(attn_dim >= 1, "attn_dim must be >= 1");
  require(hidden >= 1, "hidden must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(std::isfinite(temperature) && temperature > 0.0, "temperature must be > 0");
  require(dropout_p >= 0.0 && dropout_p < 1.0, "dropout_p must be in [0, 1)");
  require(val_fraction > 0.0 && val_fraction < 1.0, "val_fraction must be in (0, 1)");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate must be > 0");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "weight_decay must be >= 0");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw InvalidArgument("config: invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InvalidArgument("config: invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

}  // namespace

void apply_setting(TrainConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  const auto count = [&] { return parse_number<std::size_t>(key, value); };
  const auto real = [&] { return parse_number<double>(key, value); };
  if (key == "window") c.window = count();
  else if (key == "embed_dim") c.embed_dim = count();
  else if (key == "seq_len") c.seq_len = count();
  else if (key == "vocab_cap") c.vocab_cap = count();
  else if (key == "temperature") c.temperature = real();
  else if (key == "attn_dim") c.attn_dim = count();
  else if (key == "hidden") c.hidden = count();
  else if (key == "dropout_p") c.dropout_p = real();
  else if (key == "learning_rate") c.learning_rate = real();
  else if (key == "weight_decay") c.weight_decay = real();
  else if (key == "batch_size") c.batch_size = count();
  else if (key == "patience") c.patience = count();
  else if (key == "max_epochs") c.max_epochs = count();
  else if (key == "val_fraction") c.val_fraction = real();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "pooling") c.pooling = parse_pooling(value);
  else if (key == "normalize_embeddings") c.normalize_embeddings = parse_bool(key, value);
  else throw InvalidArgument("config: unknown key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), base);
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "window = " << c.window << '\n'
      << "embed_dim = " << c.embed_dim << '\n'
      << "seq_len = " << c.seq_len << '\n'
      << "vocab_cap = " << c.vocab_cap << '\n'
      << "temperature = " << c.temperature << '\n'
      << "attn_dim = " << c.attn_dim << '\n'
      << "hidden = " << c.hidden << '\n'
      << "dropout_p = " << c.dropout_p << '\n'
      << "learning_rate = " << c.learning_rate << '\n'
      << "weight_decay = " << c.weight_decay << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "patience = " << c.patience << '\n'
      << "max_epochs = " << c.max_epochs << '\n'
      << "val_fraction = " << c.val_fraction << '\n'
      << "seed = " << c.seed << '\n'
      << "pooling = " << to_string(c.pooling) << '\n'
      << "normalize_embeddings = " << (c.normalize_embeddings ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace hal
