#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aliascope/nn/tensor.hpp"

namespace aliascope::nn {

enum class Mode { Train, Eval };

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

// ---------------------------------------------------------------------------
// Stateless kernels.
//
// Every convolution output element accumulates its taps in (input channel,
// kernel row, kernel column) order starting from the bias, whatever the
// stride. A strided convolution is therefore bit-identical to the stride-1
// convolution subsampled on the same grid.

/// Output side of a strided window op: floor((size + 2 pad - kernel) / stride) + 1.
std::size_t window_output_size(std::size_t size, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Cross-correlation with zero padding. `bias` may be null.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias, std::size_t stride,
                 std::size_t padding);

/// As conv2d, with an explicit output grid; windows start at
/// (oy * stride - padding, ox * stride - padding) and read zeros outside.
template <typename T>
Tensor<T> conv2d_sized(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                       std::size_t stride, std::size_t padding, std::size_t out_h, std::size_t out_w);

/// Max over k x k windows with -inf fill. `argmax` (optional) receives the
/// flat input index of each output's maximum within its sample plane.
template <typename T>
Tensor<T> maxpool_sized(const Tensor<T>& input, std::size_t window, std::size_t stride, std::size_t padding,
                        std::size_t out_h, std::size_t out_w, std::vector<std::uint32_t>* argmax = nullptr);

/// Standard strided max pooling.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride, std::size_t padding = 0);

enum class PoolPadding { Valid, Same };

/// Stride-1 max pooling. Valid: output (H-k+1) x (W-k+1). Same: output H x W,
/// windows anchored at the output position and filled with -inf past the end,
/// so that downsample(maxpool_dense(x, k, Same), s) equals the stride-s pool
/// with zero leading padding.
template <typename T>
Tensor<T> maxpool_dense(const Tensor<T>& input, std::size_t window, PoolPadding padding);

// ---------------------------------------------------------------------------
// Layers. Each caches what its backward pass needs; backward accumulates
// into the parameter gradients and returns the input gradient.

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding, bool bias);

  void init(std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x);
  /// Stride-1 evaluation on the grid stride * output_size, so that
  /// downsample_spatial(forward_dense(x), stride) == forward(x).
  Tensor<T> forward_dense(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::size_t output_size(std::size_t input_size) const;
  std::size_t stride() const { return stride_; }
  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  std::size_t parameter_count() const { return weight.numel() + bias.numel(); }
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out);

  Tensor<T> weight, bias, grad_weight, grad_bias;

 private:
  void check_input(const Tensor<T>& x) const;

  std::size_t in_channels_ = 0, out_channels_ = 0, kernel_ = 1, stride_ = 1, padding_ = 0;
  bool has_bias_ = false;
  Tensor<T> input_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(std::size_t window, std::size_t stride, std::size_t padding);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> forward_dense(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::size_t output_size(std::size_t input_size) const;
  std::size_t stride() const { return stride_; }

 private:
  std::size_t window_ = 2, stride_ = 2, padding_ = 0;
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
};

template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  /// Eval mode throws std::logic_error until train mode has run at least once
  /// (or running statistics were loaded).
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  bool has_running_stats() const { return tracked[0] > T{0}; }
  std::size_t parameter_count() const { return gamma.numel() + beta.numel(); }
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out);
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out);

  Tensor<T> gamma, beta, grad_gamma, grad_beta;
  Tensor<T> running_mean, running_var;
  Tensor<T> tracked;  // number of train-mode batches seen, shape (1)

 private:
  std::size_t channels_ = 0;
  Mode mode_ = Mode::Train;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  Tensor<T> input_;
};

/// (N, C, H, W) -> (N, C).
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  Shape input_shape_;
};

/// Flattens everything after the batch axis: (N, ...) -> (N, out).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features);

  void init(std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::size_t parameter_count() const { return weight.numel() + bias.numel(); }
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out);

  Tensor<T> weight, bias, grad_weight, grad_bias;

 private:
  std::size_t in_ = 0, out_ = 0;
  Tensor<T> input_;
};

template <typename T>
struct LossResult {
  T loss;
  Tensor<T> grad;  // d(mean loss) / d(logits)
};

/// Mean softmax cross-entropy over the batch. Throws std::out_of_range for a
/// label outside [0, K).
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint32_t> labels);

/// Per-row log-softmax loss without the gradient.
template <typename T>
std::vector<T> per_sample_cross_entropy(const Tensor<T>& logits, std::span<const std::uint32_t> labels);

}  // namespace aliascope::nn
