#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hal/error.hpp"
#include "hal/random.hpp"
#include "hal/train.hpp"

using namespace hal;

namespace {

EncodedDocument doc_of(std::vector<TokenId> ids, std::size_t seq, Label label) {
  EncodedDocument d;
  d.real_length = ids.size();
  d.ids = std::move(ids);
  d.mask.assign(d.real_length, 1);
  d.ids.resize(seq, 0);
  d.mask.resize(seq, 0);
  d.label = label;
  return d;
}

std::vector<EncodedDocument> labeled(std::size_t pos, std::size_t neg) {
  std::vector<EncodedDocument> out;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    out.push_back(doc_of({static_cast<TokenId>(i)}, 2, i < pos ? Label::Positive : Label::Negative));
  }
  return out;
}

std::size_t count_label(std::span<const EncodedDocument> docs, Label l) {
  return static_cast<std::size_t>(std::count_if(docs.begin(), docs.end(), [&](auto& d) { return d.label == l; }));
}

// Words 0..9 sit near +mu, words 10..19 near -mu; documents draw only from
// their own class, so the classes are linearly separable after pooling.
struct ClusterData {
  EmbeddingTable table;
  std::vector<EncodedDocument> docs;
};

ClusterData clusters(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t k = 4;
  DenseMatrix v(20, k);
  for (std::size_t w = 0; w < 20; ++w) {
    const double sign = w < 10 ? 1.0 : -1.0;
    for (std::size_t c = 0; c < k; ++c) v(w, c) = sign * 1.0 + 0.3 * rng.normal();
  }
  ClusterData out{EmbeddingTable(std::move(v)), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    std::vector<TokenId> ids(3 + rng.below(6));
    for (auto& id : ids) id = static_cast<TokenId>(rng.below(10) + (pos ? 0 : 10));
    out.docs.push_back(doc_of(ids, 8, pos ? Label::Positive : Label::Negative));
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.embed_dim = 4;
  c.attn_dim = 3;
  c.hidden = 8;
  c.seq_len = 8;
  c.batch_size = 16;
  c.learning_rate = 1e-2;
  c.dropout_p = 0.2;
  c.max_epochs = 20;
  c.patience = 20;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("split is stratified") {
  const auto corpus = labeled(5, 5);
  const auto s = split(corpus, 0.2, 1);
  CHECK(s.train.size() == 8);
  CHECK(s.validation.size() == 2);
  CHECK(count_label(s.validation, Label::Positive) == 1);
  CHECK(count_label(s.validation, Label::Negative) == 1);

  const auto again = split(corpus, 0.2, 1);
  CHECK(again.train.size() == s.train.size());
  for (std::size_t i = 0; i < s.validation.size(); ++i) CHECK(again.validation[i].ids == s.validation[i].ids);
}

TEST_CASE("split at corpus scale") {
  const auto corpus = labeled(12500, 12500);
  const auto s = split(corpus, 0.1, 42);
  CHECK(s.train.size() == 22500);
  CHECK(s.validation.size() == 2500);
  CHECK(count_label(s.validation, Label::Positive) == 1250);
}

TEST_CASE("split keeps each document exactly once") {
  const auto corpus = labeled(7, 13);
  const auto s = split(corpus, 0.3, 9);
  std::vector<TokenId> seen;
  for (const auto& d : s.train) seen.push_back(d.ids[0]);
  for (const auto& d : s.validation) seen.push_back(d.ids[0]);
  std::sort(seen.begin(), seen.end());
  for (TokenId i = 0; i < 20; ++i) CHECK(seen[i] == i);
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(split(labeled(1, 5), 0.2, 1), InvalidArgument);
  CHECK_THROWS_AS(split(labeled(3, 3), 0.01, 1), InvalidArgument);
  CHECK_THROWS_AS(split(labeled(3, 3), 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(split(labeled(3, 3), 1.0, 1), InvalidArgument);
}

TEST_CASE("EarlyStopping") {
  EarlyStopping one(1);
  CHECK(one.update(0.8));
  CHECK_FALSE(one.should_stop());
  CHECK_FALSE(one.update(0.7));
  CHECK(one.should_stop());
  CHECK(one.best() == 0.8);

  EarlyStopping three(3);
  CHECK(three.update(0.5));
  CHECK_FALSE(three.update(0.5));  // ties are not improvements
  CHECK_FALSE(three.update(0.4));
  CHECK(three.update(0.6));
  CHECK_FALSE(three.should_stop());
  CHECK_FALSE(three.update(0.6));
  CHECK_FALSE(three.update(0.6));
  CHECK_FALSE(three.update(0.6));
  CHECK(three.should_stop());
}

TEST_CASE("fit separates linearly separable clusters") {
  const auto data = clusters(200, 1);
  const auto s = split(data.docs, 0.2, 2);
  for (const auto pooling : {Pooling::Attention, Pooling::Mean}) {
    auto config = small_config();
    config.pooling = pooling;
    const auto result = fit(s.train, s.validation, data.table, config);
    CHECK(result.history.size() <= 20);
    const bool perfect = std::any_of(result.history.begin(), result.history.end(),
                                     [](const EpochRecord& r) { return r.val_acc == 1.0; });
    CHECK(perfect);
    CHECK(evaluate(result.best, s.validation, data.table) == 1.0);
  }
}

TEST_CASE("fit is deterministic and thread invariant") {
  const auto data = clusters(120, 4);
  const auto s = split(data.docs, 0.25, 5);
  auto config = small_config();
  config.max_epochs = 4;
  const auto a = fit(s.train, s.validation, data.table, config);
  const auto b = fit(s.train, s.validation, data.table, config, {.threads = 3});
  CHECK(a.best == b.best);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_acc == b.history[i].val_acc);
  }
}

TEST_CASE("fit returns the best validation epoch and honors patience") {
  const auto data = clusters(120, 6);
  const auto s = split(data.docs, 0.25, 7);
  auto config = small_config();
  config.patience = 1;
  config.max_epochs = 30;
  config.learning_rate = 0.05;
  std::vector<EpochRecord> seen;
  const auto result = fit(s.train, s.validation, data.table, config,
                          {.test = data.docs, .on_epoch = [&](const EpochRecord& r) { seen.push_back(r); }});
  CHECK(seen == result.history);
  double best = 0.0;
  for (const auto& r : result.history) best = std::max(best, r.val_acc);
  REQUIRE(result.best.epoch >= 1);
  CHECK(result.history[result.best.epoch - 1].val_acc == best);
  CHECK(evaluate(result.best, s.validation, data.table) == best);
  // With patience 1 the run ends at the first epoch that fails to improve.
  if (result.history.size() < config.max_epochs) {
    const auto n = result.history.size();
    CHECK(n >= 2);
    CHECK(result.history[n - 1].val_acc <= result.history[n - 2].val_acc);
    for (std::size_t i = 1; i + 1 < n; ++i) CHECK(result.history[i].val_acc > result.history[i - 1].val_acc);
  }
  for (const auto& r : result.history) {
    REQUIRE(r.test_acc.has_value());
    CHECK(*r.test_acc >= 0.0);
    CHECK(*r.test_acc <= 1.0);
  }
}

TEST_CASE("fit argument errors") {
  const auto data = clusters(40, 8);
  const auto s = split(data.docs, 0.25, 9);
  auto config = small_config();
  config.embed_dim = 5;
  CHECK_THROWS_AS(fit(s.train, s.validation, data.table, config), InvalidArgument);
  CHECK_THROWS_AS(fit({}, s.validation, data.table, small_config()), InvalidArgument);
  auto bad = small_config();
  bad.dropout_p = 1.0;
  CHECK_THROWS_AS(fit(s.train, s.validation, data.table, bad), InvalidArgument);
}

TEST_CASE("evaluate examples") {
  auto config = small_config();
  Checkpoint ckpt{config, init_params(config, 1), {}, 1};
  // A constant-logit model predicts one class for everything.
  ckpt.params.classifier.w_o = DenseMatrix(2, 8, 0.0);
  ckpt.params.classifier.b_o = {1.0, 0.0};
  const EmbeddingTable table(DenseMatrix(4, 4, 0.5));
  const std::vector<EncodedDocument> balanced{doc_of({0}, 2, Label::Positive), doc_of({1}, 2, Label::Negative),
                                              doc_of({2}, 2, Label::Positive), doc_of({3}, 2, Label::Negative)};
  CHECK(evaluate(ckpt, balanced, table) == 0.5);
  const std::vector<EncodedDocument> one{doc_of({0}, 2, Label::Negative)};
  CHECK(evaluate(ckpt, one, table) == 1.0);

  const auto copy = ckpt;
  CHECK(evaluate(ckpt, balanced, table, 3) == evaluate(ckpt, balanced, table, 1));
  CHECK(ckpt == copy);
  CHECK_THROWS_AS(evaluate(ckpt, balanced, EmbeddingTable(DenseMatrix(4, 3, 0.5))), InvalidArgument);
}

TEST_CASE("inspect_attention") {
  auto config = small_config();
  config.embed_dim = 2;
  Checkpoint ckpt{config, init_params(config, 2), {}, 1};
  const Vocabulary vocab({"great", "film", "the"});
  const EmbeddingTable table(DenseMatrix(3, 2, std::vector<double>{1, 0, 0, 1, 0.5, 0.5}));

  const auto single = inspect_attention(ckpt, table, vocab, "Great!");
  REQUIRE(single.tokens.size() == 1);
  CHECK(single.tokens[0].token == "great");
  CHECK(single.tokens[0].alpha == 1.0);
  CHECK(single.probabilities[0] + single.probabilities[1] == doctest::Approx(1.0));

  std::fill(ckpt.params.attention.v_a.begin(), ckpt.params.attention.v_a.end(), 0.0);
  const auto flat = inspect_attention(ckpt, table, vocab, "the film unknown great");
  REQUIRE(flat.tokens.size() == 3);
  CHECK(flat.tokens[0].token == "the");
  CHECK(flat.tokens[1].token == "film");
  CHECK(flat.tokens[2].token == "great");
  for (const auto& tw : flat.tokens) CHECK(tw.alpha == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(inspect_attention(ckpt, table, vocab, "unknown words only"), DataError);
  auto mean = ckpt;
  mean.config.pooling = Pooling::Mean;
  CHECK_THROWS_AS(inspect_attention(mean, table, vocab, "great"), InvalidArgument);
}

TEST_CASE("compare_pooling shares split, initialization and batch order") {
  const auto data = clusters(100, 10);
  auto config = small_config();
  config.max_epochs = 3;
  const auto cmp = compare_pooling(data.docs, {}, data.table, config);
  CHECK_FALSE(cmp.on_test);
  CHECK(cmp.mean.pooling == Pooling::Mean);
  CHECK(cmp.attention.pooling == Pooling::Attention);
  CHECK(cmp.mean.fit.best.config.pooling == Pooling::Mean);
  // Same seed means the same classifier draw before training.
  const auto mean_init = init_params(cmp.mean.fit.best.config, config.seed).classifier;
  const auto attn_init = init_params(cmp.attention.fit.best.config, config.seed).classifier;
  CHECK(mean_init.w_c == attn_init.w_c);
  CHECK(mean_init.w_o == attn_init.w_o);
  for (const auto* run : {&cmp.mean, &cmp.attention}) {
    CHECK(run->initial_acc == run->fit.history.front().val_acc);
    double peak = 0.0;
    for (const auto& r : run->fit.history) peak = std::max(peak, r.val_acc);
    CHECK(run->peak_acc == peak);
    CHECK(run->selected_acc == run->fit.history[run->fit.best.epoch - 1].val_acc);
  }

  const auto with_test = compare_pooling(data.docs, data.docs, data.table, config);
  CHECK(with_test.on_test);
  CHECK(with_test.attention.initial_acc == *with_test.attention.fit.history.front().test_acc);
}

TEST_CASE("prepare_embeddings honors the normalization toggle") {
  const EmbeddingTable t(DenseMatrix(1, 2, std::vector<double>{3, 4}));
  TrainConfig c;
  CHECK(prepare_embeddings(t, c) == t);
  c.normalize_embeddings = true;
  CHECK(prepare_embeddings(t, c).row(0)[0] == doctest::Approx(0.6));
}
