#include "hal/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "hal/config.hpp"
#include "hal/cooc.hpp"
#include "hal/corpus.hpp"
#include "hal/error.hpp"
#include "hal/parallel.hpp"
#include "hal/store.hpp"
#include "hal/svd.hpp"
#include "hal/train.hpp"

namespace hal {

namespace fs = std::filesystem;

namespace {

// Labeled documents from either an `aclImdb`-style root (train/ and test/) or
// a single directory with pos/ and neg/.
struct LabeledData {
  std::vector<RawDocument> train;
  std::vector<RawDocument> test;
};

bool is_split_root(const fs::path& dir) {
  return fs::is_directory(dir / "train") && fs::is_directory(dir / "test");
}

LabeledData load_data(const fs::path& dir, bool want_test) {
  LabeledData data;
  if (is_split_root(dir)) {
    data.train = load_labeled_dir(dir / "train");
    if (want_test) data.test = load_labeled_dir(dir / "test");
  } else {
    data.train = load_labeled_dir(dir);
  }
  return data;
}

// Evaluation data: the test split when present, otherwise the directory itself.
std::vector<RawDocument> load_eval_data(const fs::path& dir) {
  return is_split_root(dir) ? load_labeled_dir(dir / "test") : load_labeled_dir(dir);
}

std::vector<EncodedDocument> encode_reporting(std::span<const RawDocument> docs, const Vocabulary& vocab,
                                              std::size_t seq_len, std::string_view what, std::ostream& out) {
  std::size_t skipped = 0;
  auto encoded = encode_all(docs, vocab, seq_len, &skipped);
  if (skipped > 0) out << what << ": skipped " << skipped << " documents with no in-vocabulary tokens\n";
  if (encoded.empty()) throw DataError(std::string(what) + ": no usable documents");
  return encoded;
}

std::string percent(double fraction) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * fraction << '%';
  return s.str();
}

void print_epoch(std::ostream& out, std::string_view prefix, const EpochRecord& r) {
  out << prefix << "epoch " << std::setw(3) << r.epoch << std::fixed << std::setprecision(4) << "  loss "
      << r.train_loss << "  train_acc " << r.train_acc << "  val_acc " << r.val_acc;
  if (r.test_acc) out << "  test_acc " << *r.test_acc;
  out << std::setprecision(1) << "  (" << r.wall_seconds << " s)\n" << std::defaultfloat;
  out.flush();
}

// Config file first, then explicit overrides in command-line order.
TrainConfig resolve_config(const std::string& path, const std::vector<std::string>& sets) {
  TrainConfig config = path.empty() ? TrainConfig{} : load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects KEY=VALUE, got '" + kv + "'");
    apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

// Uses the embedding dimension unless the config pinned a different one.
void bind_embed_dim(TrainConfig& config, const EmbeddingTable& table, bool pinned) {
  if (pinned && config.embed_dim != table.dim()) {
    throw InvalidArgument("config embed_dim " + std::to_string(config.embed_dim) +
                          " does not match embeddings (dimension " + std::to_string(table.dim()) + ")");
  }
  config.embed_dim = table.dim();
}

bool pins_embed_dim(const std::string& config_path, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    if (kv.rfind("embed_dim", 0) == 0) return true;
  }
  if (config_path.empty()) return false;
  return parse_config(read_file(config_path), TrainConfig{.embed_dim = 0}).embed_dim != 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HAL co-occurrence embeddings with attention pooling"};
  app.name(args.empty() ? "hal" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.fallthrough(false);

  std::size_t threads = default_thread_count();
  const auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
  };

  // build-vocab
  std::string data_dir, out_path, vocab_path, cooc_path, emb_path, ckpt_path, metrics_path, config_path, text;
  std::string metrics_prefix;
  std::size_t cap = 10000, window = 5, seq_len = 200, dim = 300, oversample = 10, power_iters = 2;
  std::uint64_t seed = 0;
  std::string pooling_flag;
  std::vector<std::string> sets;

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the frequency-ranked vocabulary");
  vocab_cmd->add_option("--data", data_dir, "Labeled corpus directory")->required();
  vocab_cmd->add_option("--cap", cap, "Maximum vocabulary size")->check(CLI::PositiveNumber);
  vocab_cmd->add_option("--out", out_path, "Vocabulary file to write")->required();

  auto* hal_cmd = app.add_subcommand("build-hal", "Build the directional co-occurrence matrices");
  hal_cmd->add_option("--data", data_dir, "Labeled corpus directory")->required();
  hal_cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  hal_cmd->add_option("--window", window, "Co-occurrence window W")->check(CLI::Range(std::size_t{1}, kMaxWindow));
  hal_cmd->add_option("--seq-len", seq_len, "Sequence length T")->check(CLI::PositiveNumber);
  hal_cmd->add_option("--out", out_path, "Co-occurrence file to write")->required();
  add_threads(hal_cmd);

  auto* svd_cmd = app.add_subcommand("svd", "Compress [L | R] into k-dimensional embeddings");
  svd_cmd->add_option("--cooc", cooc_path, "Co-occurrence file")->required();
  svd_cmd->add_option("--dim", dim, "Embedding dimension k")->check(CLI::PositiveNumber);
  svd_cmd->add_option("--oversample", oversample, "Range-finder oversampling");
  svd_cmd->add_option("--power-iters", power_iters, "Power iterations");
  svd_cmd->add_option("--seed", seed, "Random seed");
  svd_cmd->add_option("--out", out_path, "Embedding file to write")->required();
  add_threads(svd_cmd);

  const auto add_train_options = [&](CLI::App* cmd) {
    cmd->add_option("--data", data_dir, "Corpus directory (pos/neg, or train/ and test/)")->required();
    cmd->add_option("--embeddings", emb_path, "Embedding file")->required();
    cmd->add_option("--config", config_path, "key = value configuration file");
    cmd->add_option("--seed", seed, "Overrides the configured seed");
    cmd->add_option("--set", sets, "Override one configuration key (KEY=VALUE)");
    add_threads(cmd);
  };

  auto* train_cmd = app.add_subcommand("train", "Train one pooling variant");
  add_train_options(train_cmd);
  train_cmd->add_option("--pooling", pooling_flag, "mean or attention")->check(CLI::IsMember({"mean", "attention"}));
  train_cmd->add_option("--out", ckpt_path, "Checkpoint file to write")->required();
  train_cmd->add_option("--metrics", metrics_path, "Per-epoch metrics CSV to write");

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on a labeled directory");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  eval_cmd->add_option("--embeddings", emb_path, "Embedding file")->required();
  eval_cmd->add_option("--data", data_dir, "Labeled directory (uses test/ when present)")->required();
  add_threads(eval_cmd);

  auto* attend_cmd = app.add_subcommand("attend", "Per-token attention weights for one text");
  attend_cmd->add_option("--ckpt", ckpt_path, "Attention-pooling checkpoint")->required();
  attend_cmd->add_option("--embeddings", emb_path, "Embedding file")->required();
  attend_cmd->add_option("--text", text, "Text to inspect")->required();

  auto* compare_cmd = app.add_subcommand("compare", "Train mean and attention pooling with a shared seed");
  add_train_options(compare_cmd);
  compare_cmd->add_option("--metrics-prefix", metrics_prefix,
                          "Write <prefix>-mean.csv and <prefix>-attention.csv");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (vocab_cmd->parsed()) {
      const auto docs = load_data(data_dir, false).train;
      const auto vocab = build_vocab(docs, cap);
      save_vocabulary(vocab, out_path);
      out << "vocabulary: " << vocab.size() << " tokens from " << docs.size() << " documents -> " << out_path << '\n';
    } else if (hal_cmd->parsed()) {
      const auto vocab = load_vocabulary(vocab_path);
      const auto docs = load_data(data_dir, false).train;
      const auto encoded = encode_reporting(docs, vocab, seq_len, "build-hal", out);
      const auto pair = build_cooc(encoded, vocab.size(), window, threads);
      save_cooc(pair, vocab, out_path);
      out << "co-occurrence: V=" << pair.vocab_size << " window=" << window << " documents=" << encoded.size()
          << " nnz(L)=" << pair.left.nnz() << " -> " << out_path << '\n';
    } else if (svd_cmd->parsed()) {
      const auto cooc = load_cooc(cooc_path);
      const SparseOperator m_raw({&cooc.pair.left, &cooc.pair.right});
      const auto svd = truncated_svd(
          m_raw, {.rank = dim, .oversample = oversample, .power_iters = power_iters, .seed = seed, .threads = threads});
      const auto table = embed(svd);
      save_embeddings(table, cooc.vocab, out_path);
      out << "embeddings: " << table.vocab_size() << " x " << table.dim() << "  sigma_1=" << svd.singular_values.front()
          << "  sigma_k=" << svd.singular_values.back() << " -> " << out_path << '\n';
    } else if (train_cmd->parsed() || compare_cmd->parsed()) {
      TrainConfig config = resolve_config(config_path, sets);
      if (app.get_subcommand(train_cmd->parsed() ? "train" : "compare")->count("--seed")) config.seed = seed;
      if (!pooling_flag.empty()) config.pooling = parse_pooling(pooling_flag);
      const auto emb = load_embeddings(emb_path);
      bind_embed_dim(config, emb.table, pins_embed_dim(config_path, sets));
      config.validate();

      const auto raw = load_data(data_dir, true);
      const auto corpus = encode_reporting(raw.train, emb.vocab, config.seq_len, "train", out);
      std::vector<EncodedDocument> test;
      if (!raw.test.empty()) test = encode_reporting(raw.test, emb.vocab, config.seq_len, "test", out);

      if (train_cmd->parsed()) {
        const auto data = split(corpus, config.val_fraction, config.seed);
        out << "training " << to_string(config.pooling) << " pooling on " << data.train.size() << " documents ("
            << data.validation.size() << " validation";
        if (!test.empty()) out << ", " << test.size() << " test";
        out << ")\n";
        FitOptions options;
        options.threads = threads;
        options.test = test;
        options.on_epoch = [&](const EpochRecord& r) { print_epoch(out, "", r); };
        const auto result = fit(data.train, data.validation, emb.table, config, options);
        save_checkpoint(result.best, ckpt_path);
        if (!metrics_path.empty()) save_metrics(result.history, metrics_path);
        const auto& best = result.history[result.best.epoch - 1];
        out << "best epoch " << best.epoch << "  val_acc " << std::fixed << std::setprecision(4) << best.val_acc;
        if (best.test_acc) out << "  test_acc " << *best.test_acc;
        out << " -> " << ckpt_path << '\n' << std::defaultfloat;
      } else {
        const auto cmp = compare_pooling(corpus, test, emb.table, config, threads, [&](Pooling p, const EpochRecord& r) {
          print_epoch(out, p == Pooling::Mean ? "[mean]      " : "[attention] ", r);
        });
        if (!metrics_prefix.empty()) {
          save_metrics(cmp.mean.fit.history, metrics_prefix + "-mean.csv");
          save_metrics(cmp.attention.fit.history, metrics_prefix + "-attention.csv");
        }
        const std::string split_name = cmp.on_test ? "test" : "validation";
        out << '\n'
            << "pooling     initial_acc(E1)  peak_acc   early_stopped_acc   (" << split_name << ")\n"
            << "mean        " << std::setw(15) << std::left << percent(cmp.mean.initial_acc) << "  "
            << std::setw(9) << percent(cmp.mean.peak_acc) << "  " << percent(cmp.mean.selected_acc) << '\n'
            << "attention   " << std::setw(15) << percent(cmp.attention.initial_acc) << "  " << std::setw(9)
            << percent(cmp.attention.peak_acc) << "  " << percent(cmp.attention.selected_acc) << '\n'
            << std::right;
        char delta[64];
        std::snprintf(delta, sizeof delta, "%+.2f", 100.0 * (cmp.attention.peak_acc - cmp.mean.peak_acc));
        out << "peak delta (attention - mean): " << delta << " points\n";
      }
    } else if (eval_cmd->parsed()) {
      const auto ckpt = load_checkpoint(ckpt_path);
      const auto emb = load_embeddings(emb_path);
      const auto docs = load_eval_data(data_dir);
      const auto encoded = encode_reporting(docs, emb.vocab, ckpt.config.seq_len, "eval", out);
      const double acc = evaluate(ckpt, encoded, emb.table, threads);
      out << "accuracy " << std::fixed << std::setprecision(4) << acc << std::defaultfloat << '\n';
    } else if (attend_cmd->parsed()) {
      const auto ckpt = load_checkpoint(ckpt_path);
      const auto emb = load_embeddings(emb_path);
      const auto report = inspect_attention(ckpt, emb.table, emb.vocab, text);
      std::size_t width = 5;
      for (const auto& tw : report.tokens) width = std::max(width, tw.token.size());
      out << std::left << std::setw(static_cast<int>(width)) << "token" << "  alpha\n";
      for (const auto& tw : report.tokens) {
        out << std::setw(static_cast<int>(width)) << tw.token << "  " << std::fixed << std::setprecision(4)
            << tw.alpha << '\n';
      }
      out << std::right << "prediction: " << (report.predicted == Label::Positive ? "positive" : "negative")
          << std::fixed << std::setprecision(4) << "  (p_negative=" << report.probabilities[0]
          << ", p_positive=" << report.probabilities[1] << ")\n"
          << std::defaultfloat;
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace hal
