#include "aliascope/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace aliascope::nn {

namespace {

constexpr std::uint64_t kEpochShuffleStream = 11;

void check_classes(const FloatModel& model, const Dataset& data) {
  if (model.spec().n_classes != data.n_classes()) {
    throw std::invalid_argument("model has " + std::to_string(model.spec().n_classes) + " classes, dataset has " +
                                std::to_string(data.n_classes()));
  }
  if (model.spec().input_size != data.spec().size || model.spec().input_channels != 1) {
    throw std::invalid_argument("model input size does not match the dataset's " +
                                std::to_string(data.spec().size) + "x" + std::to_string(data.spec().size) +
                                " images");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw std::invalid_argument("epochs and batch size must be positive");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (lr_drop_epoch == 0 || lr_drop_epoch > epochs) {
    throw std::invalid_argument("lr drop epoch must lie in [1, epochs]");
  }
  if (!(lr_drop_factor > 0.0) || !(weight_decay >= 0.0) || !(adam_eps > 0.0)) {
    throw std::invalid_argument("lr drop factor and adam epsilon must be positive, weight decay non-negative");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  return epoch >= lr_drop_epoch ? learning_rate / lr_drop_factor : learning_rate;
}

Tensor<float> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t s = data.spec().size;
  Tensor<float> batch({indices.size(), 1, s, s});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto img = data.image(indices[b]);
    std::copy(img.begin(), img.end(), batch.data() + b * img.size());
  }
  return batch;
}

bool in_top_k(std::span<const float> logits, std::uint32_t label, std::size_t k) {
  const float target = logits[label];
  std::size_t larger = 0;
  for (float z : logits) larger += z > target ? 1 : 0;
  return larger < k;
}

Checkpoint train(FloatModel model, std::uint64_t init_seed, const Dataset& data, const TrainConfig& config,
                 const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  check_classes(model, data);
  if (data.size() == 0) throw std::invalid_argument("training set is empty");

  auto params = model.parameters();
  AdamState state = make_adam_state(params);
  std::vector<EpochRecord> history;
  std::vector<std::size_t> order(data.size());
  std::vector<std::uint32_t> labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = substream(config.seed, kEpochShuffleStream, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
      std::swap(order[i - 1], order[j]);
    }

    const AdamConfig adam{config.learning_rate_at(epoch), config.adam_beta1, config.adam_beta2, config.adam_eps,
                          config.weight_decay};
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Tensor<float> x = make_batch(data, idx);
      labels.resize(count);
      for (std::size_t b = 0; b < count; ++b) labels[b] = data.label(idx[b]);

      model.zero_grad();
      const Tensor<float> logits = model.forward(x, Mode::Train);
      const LossResult<float> loss = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      model.backward(loss.grad);
      adam_step(params, state, adam);

      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(count);
      const std::size_t k = logits.dim(1);
      for (std::size_t b = 0; b < count; ++b) {
        if (in_top_k(std::span(logits.data() + b * k, k), labels[b], 1)) ++correct;
      }
    }
    EpochRecord record{epoch, adam.learning_rate, loss_sum / static_cast<double>(data.size()),
                       static_cast<double>(correct) / static_cast<double>(data.size())};
    history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return {std::move(model), config, init_seed, config.epochs, std::move(history), std::move(state)};
}

Tensor<float> predict(FloatModel& model, const Dataset& data, std::size_t batch_size) {
  check_classes(model, data);
  const std::size_t k = model.spec().n_classes;
  Tensor<float> logits({data.size(), k});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<float> out = model.forward(make_batch(data, idx), Mode::Eval);
    std::copy(out.values().begin(), out.values().end(), logits.data() + start * k);
  }
  return logits;
}

std::vector<double> evaluate(FloatModel& model, const Dataset& data, std::span<const std::size_t> topk) {
  if (data.size() == 0) throw std::invalid_argument("cannot evaluate on an empty dataset");
  for (std::size_t k : topk) {
    if (k == 0 || k > model.spec().n_classes) {
      throw std::invalid_argument("top-k value " + std::to_string(k) + " outside [1, " +
                                  std::to_string(model.spec().n_classes) + "]");
    }
  }
  const Tensor<float> logits = predict(model, data);
  const std::size_t classes = logits.dim(1);
  std::vector<double> acc(topk.size(), 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const std::span<const float> row(logits.data() + n * classes, classes);
    for (std::size_t i = 0; i < topk.size(); ++i) acc[i] += in_top_k(row, data.label(n), topk[i]) ? 1.0 : 0.0;
  }
  for (double& a : acc) a /= static_cast<double>(data.size());
  return acc;
}

}  // namespace aliascope::nn
