#include "aliascope/instrumentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aliascope/parallel.hpp"

namespace aliascope {

namespace {

std::vector<RealGrid> channel_grids(const nn::Tensor<float>& t) {
  const std::size_t channels = t.dim(1), h = t.dim(2), w = t.dim(3);
  std::vector<RealGrid> grids;
  grids.reserve(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* p = t.data() + c * h * w;
    grids.emplace_back(h, w, std::vector<double>(p, p + h * w));
  }
  return grids;
}

class TraceRecorder final : public nn::DownsampleObserver<float> {
 public:
  void on_downsample(const DownsamplePointId& point, std::size_t factor, const nn::Tensor<float>& pre,
                     const nn::Tensor<float>& post) override {
    traces.push_back({point, factor, channel_grids(pre), channel_grids(post)});
  }
  std::vector<DownsampleTrace> traces;
};

std::uint32_t argmax(std::span<const float> logits) {
  return static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace

std::vector<DownsamplePointId> enumerate_downsample_points(const FloatModel& model) {
  return model.downsample_points();
}

CapturedForward capture_traces(FloatModel& model, const nn::Tensor<float>& input) {
  if (input.rank() != 4 || input.dim(0) != 1) {
    throw nn::ShapeError("capture_traces expects a single input (1, C, H, W), got " + nn::shape_string(input.shape()));
  }
  if (!model.has_running_stats()) {
    throw std::logic_error("capture_traces: model has never been trained (no batchnorm running statistics)");
  }
  TraceRecorder recorder;
  nn::Tensor<float> logits = model.forward(input, nn::Mode::Eval, &recorder);
  return {std::move(recorder.traces), std::move(logits)};
}

SampleAnalysis analyze_sample(FloatModel& model, const nn::Tensor<float>& input, std::uint32_t label,
                              const ThresholdRule& rule) {
  CapturedForward captured = capture_traces(model, input);
  const std::span<const float> logits = captured.logits.values();
  if (label >= logits.size()) throw std::out_of_range("label outside the model's classes");

  SampleAnalysis out;
  out.label = label;
  out.predicted = argmax(logits);
  out.correct = nn::in_top_k(logits, label, 1);
  out.correct_top5 = nn::in_top_k(logits, label, std::min<std::size_t>(5, logits.size()));
  for (const DownsampleTrace& trace : captured.traces) {
    PointReport report{trace.point, trace.factor, {}, {}};
    std::vector<CategoryGrid> grids;
    for (const RealGrid& pre : trace.pre) {
      CategoryGrid grid = classify(dft2(pre), trace.factor, rule);
      const CategoryCounts counts = tally(grid);
      report.per_channel.push_back(counts);
      report.pooled += counts;
      grids.push_back(std::move(grid));
    }
    out.grids.push_back(std::move(grids));
    out.points.push_back(std::move(report));
  }
  return out;
}

CategoryCounts SampleRecord::pooled() const {
  CategoryCounts total;
  for (const auto& c : per_point) total += c;
  return total;
}

AnalysisReport analyze_dataset(const FloatModel& model, const Dataset& dataset, const ThresholdRule& rule,
                               std::optional<std::size_t> sample_limit) {
  if (sample_limit && *sample_limit == 0) throw std::invalid_argument("sample limit must be positive");
  if (dataset.size() == 0) throw std::invalid_argument("cannot analyze an empty dataset");
  if (model.spec().n_classes != dataset.n_classes()) {
    throw std::invalid_argument("model and dataset disagree on the number of classes");
  }
  const std::size_t n = std::min(dataset.size(), sample_limit.value_or(dataset.size()));

  AnalysisReport report;
  report.model = model.spec();
  report.dataset = dataset.spec();
  report.divisor = rule.divisor;
  report.top5_k = std::min<std::size_t>(5, model.spec().n_classes);

  std::vector<SampleAnalysis> results(n);
  std::vector<std::optional<FloatModel>> workers(std::min(worker_count(), n));
  parallel_for(n, [&](std::size_t i, std::size_t w) {
    if (!workers[w]) workers[w].emplace(model);
    const std::size_t indices[] = {i};
    SampleAnalysis a = analyze_sample(*workers[w], nn::make_batch(dataset, indices), dataset.label(i), rule);
    a.grids.clear();
    results[i] = std::move(a);
  });

  const auto points = model.downsample_points();
  for (const auto& p : points) report.points.push_back({p, 0, {}, {}});
  std::size_t correct = 0, correct5 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    SampleAnalysis& a = results[i];
    SampleRecord record{i, a.label, a.correct, a.correct_top5, {}};
    for (std::size_t p = 0; p < a.points.size(); ++p) {
      PointReport& agg = report.points[p];
      agg.factor = a.points[p].factor;
      if (agg.per_channel.empty()) agg.per_channel.resize(a.points[p].per_channel.size());
      for (std::size_t c = 0; c < a.points[p].per_channel.size(); ++c) agg.per_channel[c] += a.points[p].per_channel[c];
      agg.pooled += a.points[p].pooled;
      record.per_point.push_back(a.points[p].pooled);
    }
    correct += a.correct ? 1 : 0;
    correct5 += a.correct_top5 ? 1 : 0;
    report.samples.push_back(std::move(record));
  }
  report.top1 = static_cast<double>(correct) / static_cast<double>(n);
  report.top5 = static_cast<double>(correct5) / static_cast<double>(n);
  if (!report.points.empty()) {
    std::vector<CategoryCounts> pooled;
    for (const auto& p : report.points) pooled.push_back(p.pooled);
    report.outer = aggregate(pooled, Weighting::EqualPerGroup);
  }
  return report;
}

AnalysisReport recompute_aggregates(const AnalysisReport& report) {
  AnalysisReport out = report;
  for (auto& p : out.points) {
    p.pooled = {};
    p.per_channel.clear();
  }
  for (const auto& s : report.samples) {
    if (s.per_point.size() != out.points.size()) throw std::invalid_argument("sample record has wrong point count");
    for (std::size_t p = 0; p < s.per_point.size(); ++p) out.points[p].pooled += s.per_point[p];
  }
  out.outer.reset();
  if (!out.points.empty()) {
    std::vector<CategoryCounts> pooled;
    for (const auto& p : out.points) pooled.push_back(p.pooled);
    out.outer = aggregate(pooled, Weighting::EqualPerGroup);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::pair<CorrectnessGroup, CorrectnessGroup> split_by_correctness(const AnalysisReport& report) {
  std::array<std::vector<double>, kCategoryCount> correct_vals, wrong_vals;
  for (const auto& s : report.samples) {
    const CategoryCounts pooled = s.pooled();
    if (pooled.total() == 0) continue;
    const Fractions f = fractions_of(pooled);
    auto& dst = s.correct ? correct_vals : wrong_vals;
    for (std::size_t k = 0; k < kCategoryCount; ++k) dst[k].push_back(f[k]);
  }
  auto summarize = [](const std::array<std::vector<double>, kCategoryCount>& vals) {
    CorrectnessGroup g;
    g.count = vals[0].size();
    if (g.count == 0) return g;
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      double sum = 0.0;
      for (double v : vals[k]) sum += v;
      g.categories[k] = {sum / static_cast<double>(g.count), percentile(vals[k], 50.0), percentile(vals[k], 1.0),
                         percentile(vals[k], 99.0)};
    }
    return g;
  };
  return {summarize(correct_vals), summarize(wrong_vals)};
}

}  // namespace aliascope
