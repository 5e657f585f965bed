#include "hal/optimizer.hpp"

#include <cmath>

#include "hal/error.hpp"

namespace hal {

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState state;
  for (const auto& t : tensors(params)) {
    state.first_moment.emplace_back(t.data.size(), 0.0);
    state.second_moment.emplace_back(t.data.size(), 0.0);
  }
  return state;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const AdamOptions& options) {
  auto values = tensors(params);
  const auto gradients = tensors(grads);
  if (state.first_moment.size() != values.size() || state.second_moment.size() != values.size()) {
    throw InvalidArgument("adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, step);
  const double correction2 = 1.0 - std::pow(options.beta2, step);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto g = gradients[i].data;
    auto w = values[i].data;
    if (m.size() != w.size() || v.size() != w.size() || g.size() != w.size()) {
      throw InvalidArgument("adam_step: shape mismatch in tensor " + std::string(values[i].name));
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

}  // namespace hal
