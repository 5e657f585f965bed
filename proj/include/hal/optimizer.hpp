#pragma once

#include <cstdint>
#include <vector>

#include "hal/model.hpp"

namespace hal {

struct AdamOptions {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates, one buffer per tensor in canonical order.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update of every tensor in `params`.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const AdamOptions& options);

}  // namespace hal
