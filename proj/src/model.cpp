#include "hal/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hal/error.hpp"
#include "hal/parallel.hpp"
#include "hal/random.hpp"

namespace hal {

namespace {

template <class Params, class Ref>
std::vector<Ref> collect(Params& p, auto& attention_w, auto& attention_b, auto& attention_v) {
  auto vec = [](std::string_view name, auto& v, bool attn) {
    return Ref{name, 1, v.size(), std::span(v.data(), v.size()), false, attn};
  };
  auto mat = [](std::string_view name, auto& m, bool attn) {
    return Ref{name, m.rows(), m.cols(), m.values(), true, attn};
  };
  return {
      mat("attention.w_a", attention_w, true),
      vec("attention.b_a", attention_b, true),
      vec("attention.v_a", attention_v, true),
      mat("classifier.w_c", p.w_c, false),
      vec("classifier.b_c", p.b_c, false),
      vec("classifier.ln_gain", p.ln_gain, false),
      vec("classifier.ln_shift", p.ln_shift, false),
      mat("classifier.w_o", p.w_o, false),
      vec("classifier.b_o", p.b_o, false),
  };
}

}  // namespace

std::vector<TensorRef> tensors(ModelParams& p) {
  return collect<ClassifierParams, TensorRef>(p.classifier, p.attention.w_a, p.attention.b_a, p.attention.v_a);
}

std::vector<ConstTensorRef> tensors(const ModelParams& p) {
  return collect<const ClassifierParams, ConstTensorRef>(p.classifier, p.attention.w_a, p.attention.b_a,
                                                         p.attention.v_a);
}

std::vector<TensorRef> tensors(Gradients& g) { return collect<Gradients, TensorRef>(g, g.w_a, g.b_a, g.v_a); }

std::vector<ConstTensorRef> tensors(const Gradients& g) {
  return collect<const Gradients, ConstTensorRef>(g, g.w_a, g.b_a, g.v_a);
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.attention.temperature != b.attention.temperature ||
      a.classifier.dropout_p != b.classifier.dropout_p) {
    return false;
  }
  const auto ta = tensors(a);
  const auto tb = tensors(b);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].rows != tb[i].rows || ta[i].cols != tb[i].cols ||
        !std::equal(ta[i].data.begin(), ta[i].data.end(), tb[i].data.begin())) {
      return false;
    }
  }
  return true;
}

Gradients Gradients::zeros_like(const ModelParams& p) {
  Gradients g;
  g.w_a = DenseMatrix(p.attention.w_a.rows(), p.attention.w_a.cols());
  g.b_a.assign(p.attention.b_a.size(), 0.0);
  g.v_a.assign(p.attention.v_a.size(), 0.0);
  g.w_c = DenseMatrix(p.classifier.w_c.rows(), p.classifier.w_c.cols());
  g.b_c.assign(p.classifier.b_c.size(), 0.0);
  g.ln_gain.assign(p.classifier.ln_gain.size(), 0.0);
  g.ln_shift.assign(p.classifier.ln_shift.size(), 0.0);
  g.w_o = DenseMatrix(p.classifier.w_o.rows(), p.classifier.w_o.cols());
  g.b_o.assign(p.classifier.b_o.size(), 0.0);
  return g;
}

void Gradients::add(const Gradients& other) {
  auto mine = tensors(*this);
  const auto theirs = tensors(other);
  for (std::size_t i = 0; i < mine.size(); ++i) {
    for (std::size_t j = 0; j < mine[i].data.size(); ++j) mine[i].data[j] += theirs[i].data[j];
  }
}

bool Gradients::all_finite() const {
  for (const auto& t : tensors(*this)) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ModelParams init_params(const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const auto xavier = [&](std::size_t fan_out, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_out, fan_in);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    return w;
  };
  ModelParams p;
  // Attention tensors are always drawn first so that the classifier
  // initialization is identical for both pooling modes.
  p.attention.w_a = xavier(config.attn_dim, config.embed_dim);
  p.attention.b_a.assign(config.attn_dim, 0.0);
  {
    const DenseMatrix v = xavier(1, config.attn_dim);
    p.attention.v_a.assign(v.values().begin(), v.values().end());
  }
  p.attention.temperature = config.temperature;
  p.classifier.w_c = xavier(config.hidden, config.embed_dim);
  p.classifier.b_c.assign(config.hidden, 0.0);
  p.classifier.ln_gain.assign(config.hidden, 1.0);
  p.classifier.ln_shift.assign(config.hidden, 0.0);
  p.classifier.w_o = xavier(kNumClasses, config.hidden);
  p.classifier.b_o.assign(kNumClasses, 0.0);
  p.classifier.dropout_p = config.dropout_p;
  return p;
}

std::vector<double> attention_scores(const DenseMatrix& x, std::span<const std::uint8_t> mask,
                                     const AttentionParams& params) {
  const auto& w = params.w_a;
  if (mask.size() != x.rows() || w.cols() != x.cols() || params.b_a.size() != w.rows() ||
      params.v_a.size() != w.rows()) {
    throw InvalidArgument("attention_scores: shape mismatch");
  }
  std::vector<double> scores(x.rows(), -std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    if (!mask[t]) continue;
    const auto xt = x.row(t);
    double e = 0.0;
    for (std::size_t a = 0; a < w.rows(); ++a) {
      const auto wa = w.row(a);
      double u = params.b_a[a];
      for (std::size_t c = 0; c < xt.size(); ++c) u += wa[c] * xt[c];
      e += params.v_a[a] * std::tanh(u);
    }
    scores[t] = e;
  }
  return scores;
}

namespace {

// exp((e_t - max e) / τ) at unmasked positions, 0 elsewhere, and their sum.
struct SoftmaxTerms {
  std::vector<double> terms;
  double total = 0.0;
};

SoftmaxTerms softmax_terms(std::span<const double> scores, std::span<const std::uint8_t> mask, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("attention_weights: temperature must be > 0");
  if (scores.size() != mask.size()) throw InvalidArgument("attention_weights: scores/mask size mismatch");
  double peak = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (!mask[t]) continue;
    peak = any ? std::max(peak, scores[t]) : scores[t];
    any = true;
  }
  if (!any) throw InvalidArgument("attention_weights: sequence has no unmasked positions");
  SoftmaxTerms out;
  out.terms.assign(scores.size(), 0.0);
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (!mask[t]) continue;
    out.terms[t] = std::exp((scores[t] - peak) / temperature);
    out.total += out.terms[t];
  }
  return out;
}

// Σ w_t x_t / Σ w_t. Summing first and dividing once makes equal weights
// reproduce mean_pool bit for bit.
std::vector<double> normalized_pool(const DenseMatrix& x, const SoftmaxTerms& w) {
  std::vector<double> s(x.cols(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    if (w.terms[t] == 0.0) continue;
    const auto xt = x.row(t);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += w.terms[t] * xt[c];
  }
  for (double& v : s) v /= w.total;
  return s;
}

std::vector<double> normalize(SoftmaxTerms w) {
  for (double& a : w.terms) a /= w.total;
  return std::move(w.terms);
}

}  // namespace

std::vector<double> attention_weights(std::span<const double> scores, std::span<const std::uint8_t> mask,
                                      double temperature) {
  return normalize(softmax_terms(scores, mask, temperature));
}

std::vector<double> attention_pool(const DenseMatrix& x, std::span<const double> alphas) {
  if (alphas.size() != x.rows()) throw InvalidArgument("attention_pool: alphas/rows size mismatch");
  std::vector<double> s(x.cols(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    if (alphas[t] == 0.0) continue;
    const auto xt = x.row(t);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += alphas[t] * xt[c];
  }
  return s;
}

std::vector<double> mean_pool(const DenseMatrix& x, std::span<const std::uint8_t> mask) {
  if (mask.size() != x.rows()) throw InvalidArgument("mean_pool: mask/rows size mismatch");
  std::vector<double> s(x.cols(), 0.0);
  std::size_t count = 0;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    if (!mask[t]) continue;
    ++count;
    const auto xt = x.row(t);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += xt[c];
  }
  if (count == 0) throw InvalidArgument("mean_pool: sequence has no unmasked positions");
  for (double& v : s) v /= static_cast<double>(count);
  return s;
}

PoolResult pool(const DenseMatrix& x, std::span<const std::uint8_t> mask, const AttentionParams& params,
                Pooling pooling) {
  PoolResult out;
  if (pooling == Pooling::Attention) {
    const auto terms = softmax_terms(attention_scores(x, mask, params), mask, params.temperature);
    out.pooled = normalized_pool(x, terms);
    out.alphas = normalize(terms);
  } else {
    out.pooled = mean_pool(x, mask);
    const auto real = static_cast<double>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
    out.alphas.resize(mask.size());
    for (std::size_t t = 0; t < mask.size(); ++t) out.alphas[t] = mask[t] ? 1.0 / real : 0.0;
  }
  return out;
}

DenseMatrix gather_embeddings(const EncodedDocument& doc, const EmbeddingTable& table) {
  DenseMatrix x(doc.seq_len(), table.dim());
  for (std::size_t t = 0; t < doc.seq_len(); ++t) {
    if (doc.ids[t] >= table.vocab_size()) {
      throw InvalidArgument("gather_embeddings: token id " + std::to_string(doc.ids[t]) +
                            " outside embedding table");
    }
    const auto src = table.row(doc.ids[t]);
    std::copy(src.begin(), src.end(), x.row(t).begin());
  }
  return x;
}

ClassifierOutput classifier_forward(std::span<const double> pooled, const ClassifierParams& p, Mode mode,
                                    Rng* noise) {
  const auto hidden = p.w_c.rows();
  if (pooled.size() != p.w_c.cols() || p.w_o.cols() != hidden || p.w_o.rows() != kNumClasses) {
    throw InvalidArgument("classifier_forward: shape mismatch");
  }
  const bool drop = mode == Mode::Train && p.dropout_p > 0.0;
  if (drop && noise == nullptr) throw InvalidArgument("classifier_forward: train mode needs a noise stream");

  ClassifierOutput out;
  auto& c = out.cache;
  c.input.assign(pooled.begin(), pooled.end());

  std::vector<double> z(hidden);
  double mean = 0.0;
  for (std::size_t j = 0; j < hidden; ++j) {
    const auto w = p.w_c.row(j);
    double acc = p.b_c[j];
    for (std::size_t i = 0; i < pooled.size(); ++i) acc += w[i] * pooled[i];
    z[j] = acc;
    mean += acc;
  }
  mean /= static_cast<double>(hidden);
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(hidden);
  c.inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);

  c.normalized.resize(hidden);
  c.affine.resize(hidden);
  c.keep_scale.assign(hidden, 1.0);
  c.hidden.resize(hidden);
  const double scale = drop ? 1.0 / (1.0 - p.dropout_p) : 1.0;
  for (std::size_t j = 0; j < hidden; ++j) {
    c.normalized[j] = (z[j] - mean) * c.inv_std;
    c.affine[j] = p.ln_gain[j] * c.normalized[j] + p.ln_shift[j];
    if (drop) c.keep_scale[j] = noise->uniform() < p.dropout_p ? 0.0 : scale;
    c.hidden[j] = std::max(0.0, c.affine[j]) * c.keep_scale[j];
  }
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto w = p.w_o.row(k);
    double acc = p.b_o[k];
    for (std::size_t j = 0; j < hidden; ++j) acc += w[j] * c.hidden[j];
    out.logits[k] = acc;
  }
  return out;
}

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& logits) {
  const double peak = std::max(logits[0], logits[1]);
  std::array<double, kNumClasses> p{};
  double total = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) total += p[k] = std::exp(logits[k] - peak);
  for (double& v : p) v /= total;
  return p;
}

namespace {

Label argmax(const std::array<double, kNumClasses>& logits) {
  return logits[1] > logits[0] ? Label::Positive : Label::Negative;
}

// Backpropagates d(loss)/d(logits) through the classifier into `g`; returns
// d(loss)/d(pooled).
std::vector<double> classifier_backward(const std::array<double, kNumClasses>& dlogits,
                                        const ClassifierParams& p, const ClassifierCache& c, Gradients& g) {
  const auto hidden = c.hidden.size();
  std::vector<double> dhidden(hidden, 0.0);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    g.b_o[k] += dlogits[k];
    auto gw = g.w_o.row(k);
    const auto w = p.w_o.row(k);
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += dlogits[k] * c.hidden[j];
      dhidden[j] += dlogits[k] * w[j];
    }
  }
  std::vector<double> dnorm(hidden);
  double mean_dnorm = 0.0;
  double mean_dnorm_x = 0.0;
  for (std::size_t j = 0; j < hidden; ++j) {
    const double daffine = c.affine[j] > 0.0 ? dhidden[j] * c.keep_scale[j] : 0.0;
    g.ln_gain[j] += daffine * c.normalized[j];
    g.ln_shift[j] += daffine;
    dnorm[j] = daffine * p.ln_gain[j];
    mean_dnorm += dnorm[j];
    mean_dnorm_x += dnorm[j] * c.normalized[j];
  }
  mean_dnorm /= static_cast<double>(hidden);
  mean_dnorm_x /= static_cast<double>(hidden);

  std::vector<double> dpooled(c.input.size(), 0.0);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double dz = c.inv_std * (dnorm[j] - mean_dnorm - c.normalized[j] * mean_dnorm_x);
    g.b_c[j] += dz;
    auto gw = g.w_c.row(j);
    const auto w = p.w_c.row(j);
    for (std::size_t i = 0; i < c.input.size(); ++i) {
      gw[i] += dz * c.input[i];
      dpooled[i] += dz * w[i];
    }
  }
  return dpooled;
}

struct ExampleOutcome {
  double loss = 0.0;
  bool correct = false;
};

// Forward and backward for one document over its real tokens only; adds the
// unscaled gradient into `g`.
ExampleOutcome example_step(const EncodedDocument& doc, const EmbeddingTable& embeddings, const ModelParams& p,
                            Pooling pooling, Rng* noise, Gradients& g) {
  const auto m = doc.real_length;
  DenseMatrix x(m, embeddings.dim());
  for (std::size_t t = 0; t < m; ++t) {
    const auto src = embeddings.row(doc.ids[t]);
    std::copy(src.begin(), src.end(), x.row(t).begin());
  }
  const std::vector<std::uint8_t> mask(m, 1);

  const auto& att = p.attention;
  const auto attn_dim = att.w_a.rows();
  std::vector<double> pooled;
  std::vector<double> alphas;
  DenseMatrix activations;  // tanh(W_a x_t + b_a), m x attn_dim
  if (pooling == Pooling::Attention) {
    activations = DenseMatrix(m, attn_dim);
    std::vector<double> scores(m, 0.0);
    for (std::size_t t = 0; t < m; ++t) {
      const auto xt = x.row(t);
      auto act = activations.row(t);
      for (std::size_t a = 0; a < attn_dim; ++a) {
        const auto w = att.w_a.row(a);
        double u = att.b_a[a];
        for (std::size_t c = 0; c < xt.size(); ++c) u += w[c] * xt[c];
        act[a] = std::tanh(u);
        scores[t] += att.v_a[a] * act[a];
      }
    }
    const auto terms = softmax_terms(scores, mask, att.temperature);
    pooled = normalized_pool(x, terms);
    alphas = normalize(terms);
  } else {
    pooled = mean_pool(x, mask);
  }

  const Mode mode = noise ? Mode::Train : Mode::Eval;
  const auto out = classifier_forward(pooled, p.classifier, mode, noise);
  const auto probs = softmax(out.logits);
  const auto y = static_cast<std::size_t>(label_index(doc.label));
  const double peak = std::max(out.logits[0], out.logits[1]);
  const double lse = peak + std::log(std::exp(out.logits[0] - peak) + std::exp(out.logits[1] - peak));

  ExampleOutcome outcome;
  outcome.loss = lse - out.logits[y];
  outcome.correct = argmax(out.logits) == doc.label;

  std::array<double, kNumClasses> dlogits = probs;
  dlogits[y] -= 1.0;
  const auto dpooled = classifier_backward(dlogits, p.classifier, out.cache, g);

  if (pooling == Pooling::Attention) {
    std::vector<double> dalpha(m);
    double weighted = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      const auto xt = x.row(t);
      double d = 0.0;
      for (std::size_t c = 0; c < xt.size(); ++c) d += dpooled[c] * xt[c];
      dalpha[t] = d;
      weighted += alphas[t] * d;
    }
    for (std::size_t t = 0; t < m; ++t) {
      const double de = alphas[t] * (dalpha[t] - weighted) / att.temperature;
      if (de == 0.0) continue;
      const auto act = activations.row(t);
      const auto xt = x.row(t);
      for (std::size_t a = 0; a < attn_dim; ++a) {
        g.v_a[a] += de * act[a];
        const double du = de * att.v_a[a] * (1.0 - act[a] * act[a]);
        g.b_a[a] += du;
        auto gw = g.w_a.row(a);
        for (std::size_t c = 0; c < xt.size(); ++c) gw[c] += du * xt[c];
      }
    }
  }
  return outcome;
}

constexpr std::size_t kChunk = 8;

}  // namespace

LossResult loss_and_grad(std::span<const EncodedDocument> batch, const EmbeddingTable& embeddings,
                         const ModelParams& params, const LossOptions& options) {
  if (batch.empty()) throw InvalidArgument("loss_and_grad: empty batch");
  if (embeddings.dim() != params.embed_dim()) {
    throw InvalidArgument("loss_and_grad: embedding dim " + std::to_string(embeddings.dim()) +
                          " != model dim " + std::to_string(params.embed_dim()));
  }
  for (const auto& doc : batch) {
    if (doc.real_length == 0) throw InvalidArgument("loss_and_grad: document without real tokens");
    for (auto id : doc.real_ids()) {
      if (id >= embeddings.vocab_size()) throw InvalidArgument("loss_and_grad: token id outside embedding table");
    }
  }

  // Fixed-size chunks reduced in index order keep the sum independent of the
  // thread count.
  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<Gradients> partial(chunks);
  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<std::size_t> chunk_correct(chunks, 0);
  parallel_for(chunks, options.threads, [&](std::size_t ci) {
    partial[ci] = Gradients::zeros_like(params);
    const auto end = std::min(batch.size(), (ci + 1) * kChunk);
    for (std::size_t i = ci * kChunk; i < end; ++i) {
      std::optional<Rng> noise;
      if (options.noise_seed) noise.emplace(Rng::derive(*options.noise_seed, i));
      const auto outcome =
          example_step(batch[i], embeddings, params, options.pooling, noise ? &*noise : nullptr, partial[ci]);
      chunk_loss[ci] += outcome.loss;
      chunk_correct[ci] += outcome.correct ? 1 : 0;
    }
  });

  LossResult result;
  result.grads = std::move(partial[0]);
  double data_loss = chunk_loss[0];
  result.correct = chunk_correct[0];
  for (std::size_t ci = 1; ci < chunks; ++ci) {
    result.grads.add(partial[ci]);
    data_loss += chunk_loss[ci];
    result.correct += chunk_correct[ci];
  }
  const double n = static_cast<double>(batch.size());
  for (auto& t : tensors(result.grads)) {
    for (double& v : t.data) v /= n;
  }

  double penalty = 0.0;
  const auto param_tensors = tensors(params);
  auto grad_tensors = tensors(result.grads);
  for (std::size_t i = 0; i < param_tensors.size(); ++i) {
    const auto& t = param_tensors[i];
    if (!t.decayed || (t.attention && options.pooling == Pooling::Mean)) continue;
    for (std::size_t j = 0; j < t.data.size(); ++j) {
      penalty += t.data[j] * t.data[j];
      grad_tensors[i].data[j] += 2.0 * options.weight_decay * t.data[j];
    }
  }
  result.loss = data_loss / n + options.weight_decay * penalty;
  result.accuracy = static_cast<double>(result.correct) / n;
  if (!std::isfinite(result.loss) || !result.grads.all_finite()) {
    throw DivergenceError("non-finite loss at epoch " + std::to_string(options.epoch) + ", batch " +
                              std::to_string(options.batch_index),
                          options.epoch, options.batch_index);
  }
  return result;
}

Prediction predict(const EncodedDocument& doc, const EmbeddingTable& embeddings, const ModelParams& params,
                   Pooling pooling) {
  if (embeddings.dim() != params.embed_dim()) throw InvalidArgument("predict: embedding dimension mismatch");
  const DenseMatrix x = gather_embeddings(doc, embeddings);
  auto pooled = pool(x, doc.mask, params.attention, pooling);
  const auto out = classifier_forward(pooled.pooled, params.classifier, Mode::Eval, nullptr);
  Prediction prediction;
  prediction.probabilities = softmax(out.logits);
  prediction.label = argmax(out.logits);
  prediction.alphas = std::move(pooled.alphas);
  return prediction;
}

}  // namespace hal
