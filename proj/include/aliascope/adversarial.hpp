#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aliascope/instrumentation.hpp"

namespace aliascope {

struct AttackConfig {
  double epsilon = 0.0;  // L-infinity radius
  std::size_t steps = 100;
  std::optional<double> step_size;  // default 2.5 * epsilon / steps
  std::optional<std::pair<double, double>> clip_range;
  bool random_start = false;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_step_size() const;
};

/// Untargeted L-infinity PGD on the training loss:
///   x <- clip(project_{|x - x0| <= eps}(x + step * sign(grad)))
/// with sign(0) = 0. The bound holds exactly: the projection box is rounded
/// inward so |x_adv - x0| <= eps in exact arithmetic. `first_index` offsets the
/// per-sample random-start substreams. Throws NumericError on a non-finite
/// input gradient, naming the step.
nn::Tensor<float> pgd_attack(FloatModel& model, const nn::Tensor<float>& input, std::span<const std::uint32_t> labels,
                             const AttackConfig& config, std::size_t first_index = 0);

/// Largest |adv - clean| over all elements, evaluated in double.
double max_perturbation(const nn::Tensor<float>& clean, const nn::Tensor<float>& adversarial);

struct FractionBand {
  double median = 0.0;
  double p1 = 0.0;
  double p99 = 0.0;
};

struct SweepRow {
  double epsilon = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double max_perturbation = 0.0;
  std::vector<FractionBand> per_point;  // aliased + aliased-tangled fraction per sample
  FractionBand overall;                  // pooled over all points of each sample
};

struct SweepTable {
  std::vector<std::string> point_names;
  std::size_t samples = 0;
  std::size_t top5_k = 5;
  std::vector<SweepRow> rows;
};

/// Attacks the first min(limit, size) samples at every epsilon (which must
/// include 0) and analyzes the adversarial inputs. `attack` supplies steps,
/// step size, clipping and seed; its epsilon is ignored.
SweepTable adversarial_sweep(const FloatModel& model, const Dataset& dataset, std::span<const double> epsilons,
                             const ThresholdRule& rule, const AttackConfig& attack,
                             std::optional<std::size_t> sample_limit = std::nullopt);

}  // namespace aliascope
