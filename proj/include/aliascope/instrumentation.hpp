#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aliascope/aliasing.hpp"
#include "aliascope/nn/train.hpp"
#include "aliascope/oscillations.hpp"
#include "aliascope/spectral.hpp"

namespace aliascope {

using nn::DownsamplePointId;
using nn::FloatModel;

/// Signals immediately before and after one downsampling step, per channel.
struct DownsampleTrace {
  DownsamplePointId point;
  std::size_t factor = 1;
  std::vector<RealGrid> pre;
  std::vector<RealGrid> post;
};

struct CapturedForward {
  std::vector<DownsampleTrace> traces;
  nn::Tensor<float> logits;
};

/// One id per strided convolution or pooling layer, in forward order.
std::vector<DownsamplePointId> enumerate_downsample_points(const FloatModel& model);

/// Eval-mode forward pass of a single input (1, C, S, S) with every strided op
/// split into its dense evaluation and a downsample. Throws std::logic_error
/// for a model without batchnorm running statistics.
CapturedForward capture_traces(FloatModel& model, const nn::Tensor<float>& input);

struct PointReport {
  DownsamplePointId point;
  std::size_t factor = 1;
  std::vector<CategoryCounts> per_channel;
  CategoryCounts pooled;  // componentwise sum over channels

  Fractions fractions() const { return fractions_of(pooled); }
};

struct SampleAnalysis {
  std::uint32_t label = 0;
  std::uint32_t predicted = 0;
  bool correct = false;
  bool correct_top5 = false;
  std::vector<std::vector<CategoryGrid>> grids;  // [point][channel]
  std::vector<PointReport> points;
};

/// Classifies every channel of every downsample point with its own threshold.
SampleAnalysis analyze_sample(FloatModel& model, const nn::Tensor<float>& input, std::uint32_t label,
                              const ThresholdRule& rule);

struct SampleRecord {
  std::size_t index = 0;
  std::uint32_t label = 0;
  bool correct = false;
  bool correct_top5 = false;
  std::vector<CategoryCounts> per_point;  // pooled over channels, in point order

  /// Per-entry pooling over all points of this sample.
  CategoryCounts pooled() const;
};

struct AnalysisReport {
  nn::ModelSpec model;
  DatasetSpec dataset;
  double divisor = 10.0;
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t top5_k = 5;
  std::vector<PointReport> points;  // pooled over channels and samples
  std::optional<Fractions> outer;   // equal weight over points; empty without points
  std::vector<SampleRecord> samples;
};

/// Analyzes the first min(sample_limit, size) samples (all when unset).
/// Samples run in parallel on model copies; results are merged in index order.
AnalysisReport analyze_dataset(const FloatModel& model, const Dataset& dataset, const ThresholdRule& rule,
                               std::optional<std::size_t> sample_limit = std::nullopt);

/// Per-point and outer aggregates rebuilt from the per-sample records only.
AnalysisReport recompute_aggregates(const AnalysisReport& report);

/// Distribution of one category's per-sample fraction within a group.
struct FractionSummary {
  double mean = 0.0;
  double median = 0.0;
  double p1 = 0.0;
  double p99 = 0.0;
};

struct CorrectnessGroup {
  std::size_t count = 0;
  std::array<FractionSummary, kCategoryCount> categories{};
};

/// Splits per-sample pooled fraction vectors into correctly and incorrectly
/// classified samples.
std::pair<CorrectnessGroup, CorrectnessGroup> split_by_correctness(const AnalysisReport& report);

/// Linear-interpolation percentile, q in [0, 100]. Throws on empty input.
double percentile(std::vector<double> values, double q);

}  // namespace aliascope
