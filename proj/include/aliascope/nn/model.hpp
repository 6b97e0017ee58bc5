#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aliascope/nn/layers.hpp"

namespace aliascope::nn {

enum class Family { Fc1h, Fc2h, ResnetC, ResnetW, ResnetD };

std::string_view family_name(Family f);
/// Accepts "fc-1h", "fc-2h", "resnet-c", "resnet-w", "resnet-d".
Family parse_family(std::string_view name);
bool is_resnet(Family f);

struct ModelSpec {
  Family family = Family::ResnetC;
  std::size_t base_width = 16;  // channels of the first stage, or hidden units for fc
  std::size_t depth = 3;        // residual blocks per stage
  std::size_t n_classes = 400;
  std::size_t input_size = 32;
  std::size_t input_channels = 1;
  // ImageNet-style stem: stride-2 stem conv and a 3x3 stride-2 max pool.
  std::size_t stem_stride = 1;
  bool stem_pool = false;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

enum class PointPath { Stem, Pool, Main, Skip };

/// A place where the forward pass downsamples. Names follow "0", "m", "1",
/// "*1", ... with '*' marking the skip connection of transition k.
struct DownsamplePointId {
  std::size_t stage = 0;
  PointPath path = PointPath::Main;
  std::string name;

  bool operator==(const DownsamplePointId&) const = default;
};

/// Receives the dense (pre) and downsampled (post) signals of every strided op
/// during an instrumented forward pass.
template <typename T>
class DownsampleObserver {
 public:
  virtual ~DownsampleObserver() = default;
  virtual void on_downsample(const DownsamplePointId& point, std::size_t factor, const Tensor<T>& pre,
                             const Tensor<T>& post) = 0;
};

template <typename T>
struct ResidualBlock {
  Conv2d<T> conv1;
  BatchNorm2d<T> bn1;
  ReLU<T> relu1;
  Conv2d<T> conv2;
  BatchNorm2d<T> bn2;
  bool projection = false;
  Conv2d<T> proj;
  BatchNorm2d<T> proj_bn;
  ReLU<T> relu_out;
  std::optional<DownsamplePointId> main_point;
  std::optional<DownsamplePointId> skip_point;
};

template <typename T>
class Model {
 public:
  /// Builds and initializes (fan-in scaled normal weights, gamma 1, beta 0)
  /// from `seed`. Throws std::invalid_argument for an invalid spec.
  Model(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  /// Input (N, input_channels, input_size, input_size) -> logits (N, n_classes).
  /// With an observer, every strided op runs densely and is then downsampled;
  /// the logits are bit-identical to the plain pass.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, DownsampleObserver<T>* observer = nullptr);

  /// Backpropagates d(loss)/d(logits) of the last forward pass, accumulating
  /// parameter gradients; returns d(loss)/d(input).
  Tensor<T> backward(const Tensor<T>& grad_logits);

  std::vector<ParamRef<T>> parameters();
  std::vector<BufferRef<T>> buffers();
  void zero_grad();

  std::size_t parameter_count() const;
  std::vector<DownsamplePointId> downsample_points() const;

  /// False while any batchnorm layer has never seen a training batch.
  bool has_running_stats() const;

  /// Widths of the three residual stages (empty for fc models).
  std::vector<std::size_t> stage_widths() const;

 private:
  ModelSpec spec_;

  // fc families
  std::vector<Linear<T>> hidden_;
  std::vector<ReLU<T>> hidden_relu_;

  // resnet families
  Conv2d<T> stem_conv_;
  BatchNorm2d<T> stem_bn_;
  ReLU<T> stem_relu_;
  MaxPool2d<T> pool_;
  std::vector<ResidualBlock<T>> blocks_;
  GlobalAvgPool<T> gap_;

  Linear<T> classifier_;
};

/// Parameter count of build_model(spec) computed from the architecture
/// formulas, independent of any Model instance.
std::size_t analytic_parameter_count(const ModelSpec& spec);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace aliascope::nn
