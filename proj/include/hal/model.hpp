#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hal/config.hpp"
#include "hal/corpus.hpp"
#include "hal/linalg.hpp"
#include "hal/svd.hpp"

namespace hal {

class Rng;

inline constexpr std::size_t kNumClasses = 2;
inline constexpr double kLayerNormEpsilon = 1e-5;

/// Additive attention scorer: e_t = v_aᵀ tanh(W_a x_t + b_a), softmax(e / τ).
struct AttentionParams {
  DenseMatrix w_a;  // attn_dim x embed_dim
  std::vector<double> b_a;
  std::vector<double> v_a;
  double temperature = 2.0;
};

/// z = W_c s + b_c -> LayerNorm -> ReLU -> Dropout -> W_o h + b_o.
struct ClassifierParams {
  DenseMatrix w_c;  // hidden x embed_dim
  std::vector<double> b_c;
  std::vector<double> ln_gain;
  std::vector<double> ln_shift;
  DenseMatrix w_o;  // 2 x hidden
  std::vector<double> b_o;
  double dropout_p = 0.0;
};

struct ModelParams {
  AttentionParams attention;
  ClassifierParams classifier;

  std::size_t embed_dim() const noexcept { return classifier.w_c.cols(); }
  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Same tensors as ModelParams, without the hyperparameters.
struct Gradients {
  DenseMatrix w_a;
  std::vector<double> b_a;
  std::vector<double> v_a;
  DenseMatrix w_c;
  std::vector<double> b_c;
  std::vector<double> ln_gain;
  std::vector<double> ln_shift;
  DenseMatrix w_o;
  std::vector<double> b_o;

  static Gradients zeros_like(const ModelParams& params);
  void add(const Gradients& other);
  bool all_finite() const;
};

/// Named view of one trainable tensor. Vectors have rows == 1.
template <class T>
struct BasicTensorRef {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<T> data;
  /// Weight matrices carry L2 decay; biases and LayerNorm affine do not.
  bool decayed;
  /// Part of the attention scorer (unused under mean pooling).
  bool attention;
};
using TensorRef = BasicTensorRef<double>;
using ConstTensorRef = BasicTensorRef<const double>;

/// Tensors in a fixed canonical order shared by all three overloads.
std::vector<TensorRef> tensors(ModelParams& params);
std::vector<ConstTensorRef> tensors(const ModelParams& params);
std::vector<TensorRef> tensors(Gradients& grads);
std::vector<ConstTensorRef> tensors(const Gradients& grads);

/// Xavier-uniform weights, zero biases and shift, unit gain.
ModelParams init_params(const TrainConfig& config, std::uint64_t seed);

/// Rows of `x` are token vectors. Masked-false positions get -infinity.
std::vector<double> attention_scores(const DenseMatrix& x, std::span<const std::uint8_t> mask,
                                     const AttentionParams& params);

/// Temperature softmax over masked-true positions; masked-false weights are 0.
/// Throws InvalidArgument when nothing is unmasked or temperature <= 0.
std::vector<double> attention_weights(std::span<const double> scores,
                                      std::span<const std::uint8_t> mask, double temperature);

std::vector<double> attention_pool(const DenseMatrix& x, std::span<const double> alphas);

/// Average over masked-true rows. Throws InvalidArgument on an empty mask.
std::vector<double> mean_pool(const DenseMatrix& x, std::span<const std::uint8_t> mask);

struct PoolResult {
  std::vector<double> pooled;
  std::vector<double> alphas;  // uniform over real tokens for mean pooling
};

PoolResult pool(const DenseMatrix& x, std::span<const std::uint8_t> mask,
                const AttentionParams& params, Pooling pooling);

/// T x k matrix of the document's token vectors (padded slots use id 0).
DenseMatrix gather_embeddings(const EncodedDocument& doc, const EmbeddingTable& table);

enum class Mode { Train, Eval };

/// Intermediate values kept for the backward pass.
struct ClassifierCache {
  std::vector<double> input;
  std::vector<double> normalized;  // LayerNorm output before the affine
  double inv_std = 0.0;
  std::vector<double> affine;      // after gain/shift, before ReLU
  std::vector<double> keep_scale;  // 0 or 1/(1-p) per unit; 1 in eval mode
  std::vector<double> hidden;      // after dropout
};

struct ClassifierOutput {
  std::array<double, kNumClasses> logits{};
  ClassifierCache cache;
};

/// `noise` is required in train mode when dropout_p > 0.
ClassifierOutput classifier_forward(std::span<const double> pooled, const ClassifierParams& params,
                                    Mode mode, Rng* noise);

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& logits);

struct LossResult {
  double loss = 0.0;  // mean cross-entropy + L2 term
  Gradients grads;
  double accuracy = 0.0;
  std::size_t correct = 0;
};

struct LossOptions {
  Pooling pooling = Pooling::Attention;
  double weight_decay = 0.0;
  /// Dropout noise seed. nullopt runs the classifier in eval mode.
  std::optional<std::uint64_t> noise_seed;
  std::size_t threads = 1;
  /// Reported in the divergence error.
  std::size_t epoch = 0;
  std::size_t batch_index = 0;
};

/// Mean cross-entropy over the batch plus weight_decay * Σ‖W‖² over the weight
/// matrices in use, and its exact gradient. Embeddings receive no gradient.
/// The summed gradient is independent of `threads`. Throws DivergenceError
/// when the loss is not finite.
LossResult loss_and_grad(std::span<const EncodedDocument> batch, const EmbeddingTable& embeddings,
                         const ModelParams& params, const LossOptions& options);

struct Prediction {
  std::array<double, kNumClasses> probabilities{};
  Label label = Label::Negative;
  std::vector<double> alphas;  // length T, zero on padding
};

/// Eval-mode forward pass for one document.
Prediction predict(const EncodedDocument& doc, const EmbeddingTable& embeddings,
                   const ModelParams& params, Pooling pooling);

}  // namespace hal
