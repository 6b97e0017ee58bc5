#include "aliascope/nn/adam.hpp"

#include <cmath>

namespace aliascope::nn {

AdamState make_adam_state(std::span<const ParamRef<float>> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value->shape());
    state.second_moment.emplace_back(p.value->shape());
  }
  return state;
}

void adam_step(std::span<const ParamRef<float>> params, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state has " + std::to_string(state.first_moment.size()) +
                     " entries for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].shape() != params[i].value->shape() ||
        params[i].grad->shape() != params[i].value->shape()) {
      throw ShapeError("adam_step: state shape mismatch for " + params[i].name);
    }
    if (!params[i].grad->all_finite()) throw NumericError("adam_step: non-finite gradient in " + params[i].name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const auto b1 = static_cast<float>(config.beta1);
  const auto b2 = static_cast<float>(config.beta2);
  const auto wd = static_cast<float>(config.weight_decay);
  const auto step_size = static_cast<float>(config.learning_rate / correction1);
  const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));
  const auto eps = static_cast<float>(config.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].value->data();
    const float* g = params[i].grad->data();
    float* m = state.first_moment[i].data();
    float* v = state.second_moment[i].data();
    for (std::size_t j = 0; j < params[i].value->numel(); ++j) {
      const float grad = g[j] + wd * p[j];
      m[j] = b1 * m[j] + (1.0F - b1) * grad;
      v[j] = b2 * v[j] + (1.0F - b2) * grad * grad;
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

}  // namespace aliascope::nn
