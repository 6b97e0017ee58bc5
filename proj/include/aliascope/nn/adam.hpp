#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aliascope/nn/layers.hpp"

namespace aliascope::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// First and second moments, one tensor each per parameter.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor<float>> first_moment;
  std::vector<Tensor<float>> second_moment;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(std::span<const ParamRef<float>> params);

/// One Adam update with bias correction. Weight decay is L2 folded into the
/// gradient (g + wd * p) before the moment updates. Throws NumericError naming
/// the parameter if any gradient is NaN or infinite; nothing is modified then.
void adam_step(std::span<const ParamRef<float>> params, AdamState& state, const AdamConfig& config);

}  // namespace aliascope::nn
