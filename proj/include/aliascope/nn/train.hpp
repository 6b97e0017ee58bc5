#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "aliascope/nn/adam.hpp"
#include "aliascope/nn/model.hpp"
#include "aliascope/oscillations.hpp"

namespace aliascope::nn {

using FloatModel = Model<float>;

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::size_t lr_drop_epoch = 35;  // 1-based; this epoch and later use lr / lr_drop_factor
  double lr_drop_factor = 10.0;
  double weight_decay = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  /// Learning rate used during 1-based `epoch`.
  double learning_rate_at(std::size_t epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;      // mean training loss over the epoch
  double accuracy = 0.0;  // train-mode top-1 over the epoch

  bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
  FloatModel model;
  TrainConfig config;
  std::uint64_t init_seed = 0;
  std::size_t epoch = 0;
  std::vector<EpochRecord> history;
  AdamState optimizer;
};

/// Packs the listed samples into an (n, 1, S, S) batch.
Tensor<float> make_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Runs the full schedule. Deterministic given the seeds: the epoch shuffles
/// derive from config.seed, reductions are sequential. Throws NumericError
/// naming the epoch and batch when the loss diverges.
Checkpoint train(FloatModel model, std::uint64_t init_seed, const Dataset& data, const TrainConfig& config,
                 const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Per-sample logits in eval mode, batched internally.
Tensor<float> predict(FloatModel& model, const Dataset& data, std::size_t batch_size = 256);

/// True when the label is among the k largest logits (ties resolved in the
/// label's favour only when fewer than k logits are strictly larger).
bool in_top_k(std::span<const float> logits, std::uint32_t label, std::size_t k);

/// Top-k accuracy for each requested k. Throws on an empty dataset or
/// k outside [1, n_classes].
std::vector<double> evaluate(FloatModel& model, const Dataset& data, std::span<const std::size_t> topk);

}  // namespace aliascope::nn
