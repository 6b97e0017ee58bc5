#include "aliascope/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aliascope/parallel.hpp"

namespace aliascope {

namespace {

constexpr std::uint64_t kRandomStartStream = 21;
constexpr std::size_t kAttackChunk = 32;

// Largest float f with f - x0 <= eps and smallest with x0 - f <= eps, exactly.
std::pair<float, float> ball_bounds(float x0, double eps) {
  auto lo = static_cast<float>(static_cast<double>(x0) - eps);
  auto hi = static_cast<float>(static_cast<double>(x0) + eps);
  while (static_cast<double>(x0) - static_cast<double>(lo) > eps) lo = std::nextafter(lo, x0);
  while (static_cast<double>(hi) - static_cast<double>(x0) > eps) hi = std::nextafter(hi, x0);
  return {lo, hi};
}

double aliased_fraction(const CategoryCounts& c) {
  return static_cast<double>(c.aliased + c.aliased_tangled) / static_cast<double>(c.total());
}

FractionBand band(const std::vector<double>& v) {
  if (v.empty()) return {};
  return {percentile(v, 50.0), percentile(v, 1.0), percentile(v, 99.0)};
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be finite and >= 0");
  if (steps == 0) throw std::invalid_argument("attack needs at least one step");
  if (epsilon > 0.0 && !(effective_step_size() > 0.0)) throw std::invalid_argument("step size must be positive");
  if (clip_range && !(clip_range->first <= clip_range->second)) throw std::invalid_argument("empty clip range");
}

double AttackConfig::effective_step_size() const {
  return step_size.value_or(2.5 * epsilon / static_cast<double>(steps));
}

nn::Tensor<float> pgd_attack(FloatModel& model, const nn::Tensor<float>& input, std::span<const std::uint32_t> labels,
                             const AttackConfig& config, std::size_t first_index) {
  config.validate();
  if (input.rank() != 4 || input.dim(0) != labels.size()) {
    throw nn::ShapeError("pgd_attack: batch of " + nn::shape_string(input.shape()) + " with " +
                         std::to_string(labels.size()) + " labels");
  }
  if (config.epsilon == 0.0) return input;

  std::vector<float> lo(input.numel()), hi(input.numel());
  for (std::size_t i = 0; i < input.numel(); ++i) {
    auto [l, h] = ball_bounds(input[i], config.epsilon);
    if (config.clip_range) {
      const auto cl = static_cast<float>(config.clip_range->first);
      const auto ch = static_cast<float>(config.clip_range->second);
      // Clip only where it keeps the point inside the ball.
      if (std::max(l, cl) <= std::min(h, ch)) {
        l = std::max(l, cl);
        h = std::min(h, ch);
      }
    }
    lo[i] = l;
    hi[i] = h;
  }

  nn::Tensor<float> x = input;
  if (config.random_start) {
    const std::size_t per_sample = input.stride0();
    for (std::size_t b = 0; b < labels.size(); ++b) {
      auto rng = substream(config.seed, kRandomStartStream, first_index + b);
      for (std::size_t j = 0; j < per_sample; ++j) {
        const std::size_t i = b * per_sample + j;
        const double u = uniform01(rng) * 2.0 - 1.0;
        x[i] = std::clamp(static_cast<float>(static_cast<double>(input[i]) + u * config.epsilon), lo[i], hi[i]);
      }
    }
  }

  const auto step = static_cast<float>(config.effective_step_size());
  for (std::size_t t = 1; t <= config.steps; ++t) {
    model.zero_grad();
    const nn::Tensor<float> logits = model.forward(x, nn::Mode::Eval);
    const auto loss = nn::softmax_cross_entropy(logits, labels);
    const nn::Tensor<float> grad = model.backward(loss.grad);
    if (!grad.all_finite()) {
      throw nn::NumericError("pgd_attack: non-finite input gradient at step " + std::to_string(t));
    }
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const float g = grad[i];
      const float s = g > 0.0F ? step : (g < 0.0F ? -step : 0.0F);
      x[i] = std::clamp(x[i] + s, lo[i], hi[i]);
    }
  }
  return x;
}

double max_perturbation(const nn::Tensor<float>& clean, const nn::Tensor<float>& adversarial) {
  if (clean.shape() != adversarial.shape()) throw nn::ShapeError("max_perturbation: shape mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < clean.numel(); ++i) {
    best = std::max(best, std::abs(static_cast<double>(adversarial[i]) - static_cast<double>(clean[i])));
  }
  return best;
}

SweepTable adversarial_sweep(const FloatModel& model, const Dataset& dataset, std::span<const double> epsilons,
                             const ThresholdRule& rule, const AttackConfig& attack,
                             std::optional<std::size_t> sample_limit) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon list is empty");
  if (std::find(epsilons.begin(), epsilons.end(), 0.0) == epsilons.end()) {
    throw std::invalid_argument("epsilon list must include 0");
  }
  if (sample_limit && *sample_limit == 0) throw std::invalid_argument("sample limit must be positive");
  if (dataset.size() == 0) throw std::invalid_argument("cannot attack an empty dataset");
  if (!model.has_running_stats()) throw std::logic_error("adversarial_sweep: model has no running statistics");

  const std::size_t n = std::min(dataset.size(), sample_limit.value_or(dataset.size()));
  SweepTable table;
  for (const auto& p : model.downsample_points()) table.point_names.push_back(p.name);
  table.samples = n;
  table.top5_k = std::min<std::size_t>(5, model.spec().n_classes);

  const std::size_t chunks = (n + kAttackChunk - 1) / kAttackChunk;
  for (double eps : epsilons) {
    AttackConfig cfg = attack;
    cfg.epsilon = eps;
    cfg.validate();

    std::vector<SampleAnalysis> analyses(n);
    std::vector<double> chunk_max(chunks, 0.0);
    std::vector<std::optional<FloatModel>> workers(std::min(worker_count(), chunks));
    parallel_for(chunks, [&](std::size_t c, std::size_t w) {
      if (!workers[w]) workers[w].emplace(model);
      FloatModel& m = *workers[w];
      const std::size_t begin = c * kAttackChunk;
      const std::size_t count = std::min(kAttackChunk, n - begin);
      std::vector<std::size_t> idx(count);
      std::iota(idx.begin(), idx.end(), begin);
      std::vector<std::uint32_t> labels(count);
      for (std::size_t b = 0; b < count; ++b) labels[b] = dataset.label(idx[b]);
      const nn::Tensor<float> clean = nn::make_batch(dataset, idx);
      const nn::Tensor<float> adv = pgd_attack(m, clean, labels, cfg, begin);
      chunk_max[c] = max_perturbation(clean, adv);
      const std::size_t per_sample = adv.stride0();
      for (std::size_t b = 0; b < count; ++b) {
        nn::Tensor<float> one({1, adv.dim(1), adv.dim(2), adv.dim(3)},
                              std::vector<float>(adv.data() + b * per_sample, adv.data() + (b + 1) * per_sample));
        SampleAnalysis a = analyze_sample(m, one, labels[b], rule);
        a.grids.clear();
        analyses[begin + b] = std::move(a);
      }
    });

    SweepRow row;
    row.epsilon = eps;
    row.max_perturbation = *std::max_element(chunk_max.begin(), chunk_max.end());
    std::size_t correct = 0, correct5 = 0;
    std::vector<std::vector<double>> per_point(table.point_names.size());
    std::vector<double> overall;
    for (const auto& a : analyses) {
      correct += a.correct ? 1 : 0;
      correct5 += a.correct_top5 ? 1 : 0;
      CategoryCounts pooled;
      for (std::size_t p = 0; p < a.points.size(); ++p) {
        per_point[p].push_back(aliased_fraction(a.points[p].pooled));
        pooled += a.points[p].pooled;
      }
      if (pooled.total() > 0) overall.push_back(aliased_fraction(pooled));
    }
    row.top1 = static_cast<double>(correct) / static_cast<double>(n);
    row.top5 = static_cast<double>(correct5) / static_cast<double>(n);
    for (const auto& v : per_point) row.per_point.push_back(band(v));
    row.overall = band(overall);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace aliascope
