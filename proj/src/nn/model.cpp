#include "aliascope/nn/model.hpp"

#include <random>
#include <stdexcept>

namespace aliascope::nn {

namespace {

constexpr std::size_t kStages = 3;

std::vector<std::size_t> widths_for(const ModelSpec& spec) {
  const std::size_t w = spec.base_width;
  if (spec.family == Family::ResnetW) return {w, 2 * w, 4 * w};
  return {w, w, w};
}

std::string transition_name(std::size_t transition, PointPath path) {
  return (path == PointPath::Skip ? "*" : "") + std::to_string(transition);
}

template <typename T, typename Op>
Tensor<T> run_strided(Op& op, const Tensor<T>& x, const std::optional<DownsamplePointId>& point,
                      DownsampleObserver<T>* observer) {
  if (observer == nullptr || !point || op.stride() == 1) return op.forward(x);
  Tensor<T> pre = op.forward_dense(x);
  Tensor<T> post = downsample_spatial(pre, op.stride());
  observer->on_downsample(*point, op.stride(), pre, post);
  return post;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("residual add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Fc1h: return "fc-1h";
    case Family::Fc2h: return "fc-2h";
    case Family::ResnetC: return "resnet-c";
    case Family::ResnetW: return "resnet-w";
    case Family::ResnetD: return "resnet-d";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::Fc1h, Family::Fc2h, Family::ResnetC, Family::ResnetW, Family::ResnetD}) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
}

bool is_resnet(Family f) { return f == Family::ResnetC || f == Family::ResnetW || f == Family::ResnetD; }

void ModelSpec::validate() const {
  if (base_width == 0) throw std::invalid_argument("model width must be positive");
  if (n_classes == 0) throw std::invalid_argument("n_classes must be positive");
  if (input_size == 0 || input_channels == 0) throw std::invalid_argument("input dimensions must be positive");
  if (is_resnet(family)) {
    if (depth == 0) throw std::invalid_argument("resnet depth must be positive");
    if (stem_stride == 0) throw std::invalid_argument("stem stride must be positive");
  }
}

std::size_t analytic_parameter_count(const ModelSpec& spec) {
  spec.validate();
  const std::size_t k = spec.n_classes;
  if (!is_resnet(spec.family)) {
    const std::size_t in = spec.input_channels * spec.input_size * spec.input_size;
    const std::size_t h = spec.base_width;
    std::size_t count = in * h + h;
    if (spec.family == Family::Fc2h) count += h * h + h;
    return count + h * k + k;
  }
  const auto widths = widths_for(spec);
  std::size_t count = spec.input_channels * widths[0] * 9 + 2 * widths[0];
  std::size_t in = widths[0];
  for (std::size_t s = 0; s < kStages; ++s) {
    for (std::size_t b = 0; b < spec.depth; ++b) {
      const std::size_t out = widths[s];
      count += in * out * 9 + 2 * out + out * out * 9 + 2 * out;
      if (s > 0 && b == 0) count += in * out + 2 * out;
      in = out;
    }
  }
  return count + in * k + k;
}

template <typename T>
Model<T>::Model(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  if (!is_resnet(spec_.family)) {
    const std::size_t in = spec_.input_channels * spec_.input_size * spec_.input_size;
    const std::size_t layers = spec_.family == Family::Fc2h ? 2 : 1;
    std::size_t width = in;
    for (std::size_t i = 0; i < layers; ++i) {
      hidden_.emplace_back(width, spec_.base_width);
      hidden_.back().init(rng);
      hidden_relu_.emplace_back();
      width = spec_.base_width;
    }
    classifier_ = Linear<T>(width, spec_.n_classes);
    classifier_.init(rng);
    return;
  }

  const auto widths = widths_for(spec_);
  stem_conv_ = Conv2d<T>(spec_.input_channels, widths[0], 3, spec_.stem_stride, 1, false);
  stem_conv_.init(rng);
  stem_bn_ = BatchNorm2d<T>(widths[0]);
  if (spec_.stem_pool) pool_ = MaxPool2d<T>(3, 2, 1);

  std::size_t in = widths[0];
  for (std::size_t s = 0; s < kStages; ++s) {
    for (std::size_t b = 0; b < spec_.depth; ++b) {
      const std::size_t out = widths[s];
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      ResidualBlock<T> block;
      block.conv1 = Conv2d<T>(in, out, 3, stride, 1, false);
      block.conv1.init(rng);
      block.bn1 = BatchNorm2d<T>(out);
      block.conv2 = Conv2d<T>(out, out, 3, 1, 1, false);
      block.conv2.init(rng);
      block.bn2 = BatchNorm2d<T>(out);
      if (stride != 1 || in != out) {
        block.projection = true;
        block.proj = Conv2d<T>(in, out, 1, stride, 0, false);
        block.proj.init(rng);
        block.proj_bn = BatchNorm2d<T>(out);
      }
      if (stride != 1) {
        block.main_point = DownsamplePointId{s, PointPath::Main, transition_name(s, PointPath::Main)};
        block.skip_point = DownsamplePointId{s, PointPath::Skip, transition_name(s, PointPath::Skip)};
      }
      blocks_.push_back(std::move(block));
      in = out;
    }
  }
  classifier_ = Linear<T>(in, spec_.n_classes);
  classifier_.init(rng);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, Mode mode, DownsampleObserver<T>* observer) {
  if (x.rank() != 4 || x.dim(1) != spec_.input_channels || x.dim(2) != spec_.input_size ||
      x.dim(3) != spec_.input_size) {
    throw ShapeError("model expects input (N, " + std::to_string(spec_.input_channels) + ", " +
                     std::to_string(spec_.input_size) + ", " + std::to_string(spec_.input_size) + "), got " +
                     shape_string(x.shape()));
  }
  if (!is_resnet(spec_.family)) {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < hidden_.size(); ++i) h = hidden_relu_[i].forward(hidden_[i].forward(h));
    return classifier_.forward(h);
  }

  static const std::optional<DownsamplePointId> stem_point{DownsamplePointId{0, PointPath::Stem, "0"}};
  static const std::optional<DownsamplePointId> pool_point{DownsamplePointId{0, PointPath::Pool, "m"}};
  Tensor<T> h = run_strided(stem_conv_, x, stem_point, observer);
  h = stem_relu_.forward(stem_bn_.forward(h, mode));
  if (spec_.stem_pool) h = run_strided(pool_, h, pool_point, observer);

  for (auto& block : blocks_) {
    Tensor<T> main = run_strided(block.conv1, h, block.main_point, observer);
    main = block.relu1.forward(block.bn1.forward(main, mode));
    main = block.bn2.forward(block.conv2.forward(main), mode);
    if (block.projection) {
      const Tensor<T> skip = block.proj_bn.forward(run_strided(block.proj, h, block.skip_point, observer), mode);
      add_inplace(main, skip);
    } else {
      add_inplace(main, h);
    }
    h = block.relu_out.forward(main);
  }
  return classifier_.forward(gap_.forward(h));
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& grad_logits) {
  Tensor<T> g = classifier_.backward(grad_logits);
  if (!is_resnet(spec_.family)) {
    for (std::size_t i = hidden_.size(); i-- > 0;) g = hidden_[i].backward(hidden_relu_[i].backward(g));
    return g;
  }
  g = gap_.backward(g);
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    auto& block = blocks_[b];
    g = block.relu_out.backward(g);
    Tensor<T> gm = block.conv2.backward(block.bn2.backward(g));
    gm = block.conv1.backward(block.bn1.backward(block.relu1.backward(gm)));
    if (block.projection) {
      add_inplace(gm, block.proj.backward(block.proj_bn.backward(g)));
    } else {
      add_inplace(gm, g);
    }
    g = std::move(gm);
  }
  if (spec_.stem_pool) g = pool_.backward(g);
  return stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(g)));
}

template <typename T>
std::vector<ParamRef<T>> Model<T>::parameters() {
  std::vector<ParamRef<T>> out;
  if (!is_resnet(spec_.family)) {
    for (std::size_t i = 0; i < hidden_.size(); ++i) hidden_[i].collect("hidden" + std::to_string(i + 1), out);
    classifier_.collect("classifier", out);
    return out;
  }
  stem_conv_.collect("stem.conv", out);
  stem_bn_.collect("stem.bn", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = "stage" + std::to_string(b / spec_.depth + 1) + ".block" + std::to_string(b % spec_.depth);
    auto& block = blocks_[b];
    block.conv1.collect(p + ".conv1", out);
    block.bn1.collect(p + ".bn1", out);
    block.conv2.collect(p + ".conv2", out);
    block.bn2.collect(p + ".bn2", out);
    if (block.projection) {
      block.proj.collect(p + ".proj", out);
      block.proj_bn.collect(p + ".proj_bn", out);
    }
  }
  classifier_.collect("classifier", out);
  return out;
}

template <typename T>
std::vector<BufferRef<T>> Model<T>::buffers() {
  std::vector<BufferRef<T>> out;
  if (!is_resnet(spec_.family)) return out;
  stem_bn_.collect_buffers("stem.bn", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = "stage" + std::to_string(b / spec_.depth + 1) + ".block" + std::to_string(b % spec_.depth);
    auto& block = blocks_[b];
    block.bn1.collect_buffers(p + ".bn1", out);
    block.bn2.collect_buffers(p + ".bn2", out);
    if (block.projection) block.proj_bn.collect_buffers(p + ".proj_bn", out);
  }
  return out;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(T{0});
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t count = classifier_.parameter_count();
  for (const auto& h : hidden_) count += h.parameter_count();
  if (is_resnet(spec_.family)) {
    count += stem_conv_.parameter_count() + stem_bn_.parameter_count();
    for (const auto& b : blocks_) {
      count += b.conv1.parameter_count() + b.bn1.parameter_count() + b.conv2.parameter_count() +
               b.bn2.parameter_count();
      if (b.projection) count += b.proj.parameter_count() + b.proj_bn.parameter_count();
    }
  }
  return count;
}

template <typename T>
std::vector<DownsamplePointId> Model<T>::downsample_points() const {
  std::vector<DownsamplePointId> points;
  if (!is_resnet(spec_.family)) return points;
  if (spec_.stem_stride > 1) points.push_back({0, PointPath::Stem, "0"});
  if (spec_.stem_pool) points.push_back({0, PointPath::Pool, "m"});
  for (const auto& b : blocks_) {
    if (b.main_point) points.push_back(*b.main_point);
    if (b.skip_point) points.push_back(*b.skip_point);
  }
  return points;
}

template <typename T>
bool Model<T>::has_running_stats() const {
  if (!is_resnet(spec_.family)) return true;
  if (!stem_bn_.has_running_stats()) return false;
  for (const auto& b : blocks_) {
    if (!b.bn1.has_running_stats() || !b.bn2.has_running_stats()) return false;
    if (b.projection && !b.proj_bn.has_running_stats()) return false;
  }
  return true;
}

template <typename T>
std::vector<std::size_t> Model<T>::stage_widths() const {
  if (!is_resnet(spec_.family)) return {};
  return widths_for(spec_);
}

template class Model<float>;
template class Model<double>;

}  // namespace aliascope::nn
