#include "aliascope/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aliascope::nn {

namespace {

// Output columns [lo, hi) whose tap column ox * stride + kx - pad lies in [0, width).
struct ColumnRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

ColumnRange valid_columns(std::size_t out_w, std::size_t width, std::size_t kx, std::size_t stride,
                          std::size_t pad) {
  ColumnRange r;
  if (pad > kx) r.lo = (pad - kx + stride - 1) / stride;
  if (width - 1 + pad < kx) return {0, 0};
  r.hi = std::min(out_w, (width - 1 + pad - kx) / stride + 1);
  if (r.lo > r.hi) r.lo = r.hi;
  return r;
}

// Row of the input read by output row oy at kernel row ky, or -1 when it lies
// in the padding.
inline std::ptrdiff_t tap_row(std::size_t oy, std::size_t ky, std::size_t stride, std::size_t pad,
                              std::size_t height) {
  const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
  return iy >= 0 && iy < static_cast<std::ptrdiff_t>(height) ? iy : -1;
}

struct ConvGeometry {
  std::size_t ci, h, w, co, k, stride, pad, oh, ow;
};

// Patch matrix col[(ci, ky, kx)][oy * ow + ox] with zeros in the padding.
template <typename T>
void im2col(const T* __restrict in, const ConvGeometry& g, T* __restrict col) {
  const std::size_t p = g.oh * g.ow;
  for (std::size_t ci = 0; ci < g.ci; ++ci) {
    const T* in_plane = in + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((ci * g.k + ky) * g.k + kx) * p;
        const ColumnRange cols = valid_columns(g.ow, g.w, kx, g.stride, g.pad);
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          T* dst = row + oy * g.ow;
          const std::ptrdiff_t iy = tap_row(oy, ky, g.stride, g.pad, g.h);
          if (iy < 0) {
            std::fill(dst, dst + g.ow, T{0});
            continue;
          }
          const T* irow = in_plane + static_cast<std::size_t>(iy) * g.w;
          std::fill(dst, dst + cols.lo, T{0});
          for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox] = irow[ox * g.stride + kx - g.pad];
          std::fill(dst + cols.hi, dst + g.ow, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* __restrict col, const ConvGeometry& g, T* __restrict gin) {
  const std::size_t p = g.oh * g.ow;
  for (std::size_t ci = 0; ci < g.ci; ++ci) {
    T* gin_plane = gin + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((ci * g.k + ky) * g.k + kx) * p;
        const ColumnRange cols = valid_columns(g.ow, g.w, kx, g.stride, g.pad);
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = tap_row(oy, ky, g.stride, g.pad, g.h);
          if (iy < 0) continue;
          T* girow = gin_plane + static_cast<std::size_t>(iy) * g.w;
          const T* src = row + oy * g.ow;
          for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) girow[ox * g.stride + kx - g.pad] += src[ox];
        }
      }
    }
  }
}

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 64;

// out[r][c] = init[r] + sum_k a[r][k] * b[k][c], accumulated in ascending k
// for every element regardless of blocking.
template <typename T, std::size_t R, std::size_t C>
inline void gemm_tile(const T* __restrict a, std::size_t lda, const T* __restrict b, std::size_t ldb,
                      std::size_t kdim, const T* init, T* __restrict out, std::size_t ldo) {
  T acc[R][C];
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) acc[r][c] = init ? init[r] : T{0};
  }
  for (std::size_t k = 0; k < kdim; ++k) {
    const T* brow = b + k * ldb;
    for (std::size_t r = 0; r < R; ++r) {
      const T av = a[r * lda + k];
      for (std::size_t c = 0; c < C; ++c) acc[r][c] += av * brow[c];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) out[r * ldo + c] = acc[r][c];
  }
}

template <typename T>
void gemm_edge(const T* a, std::size_t lda, const T* b, std::size_t ldb, std::size_t kdim, const T* init,
               T* out, std::size_t ldo, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      T acc = init ? init[r] : T{0};
      for (std::size_t k = 0; k < kdim; ++k) acc += a[r * lda + k] * b[k * ldb + c];
      out[r * ldo + c] = acc;
    }
  }
}

// out (m x n) = init (per row, optional) + a (m x kdim) * b (kdim x n).
template <typename T>
void gemm_rowinit(const T* a, const T* b, const T* init, T* out, std::size_t m, std::size_t n, std::size_t kdim) {
  const std::size_t m_full = m - m % kRowBlock;
  const std::size_t n_full = n - n % kColBlock;
  for (std::size_t r = 0; r < m; r += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, m - r);
    const T* ar = a + r * kdim;
    const T* ir = init ? init + r : nullptr;
    for (std::size_t c = 0; c < n; c += kColBlock) {
      const std::size_t cols = std::min(kColBlock, n - c);
      if (r < m_full && c < n_full) {
        gemm_tile<T, kRowBlock, kColBlock>(ar, kdim, b + c, n, kdim, ir, out + r * n + c, n);
      } else {
        gemm_edge(ar, kdim, b + c, n, kdim, ir, out + r * n + c, n, rows, cols);
      }
    }
  }
}

template <typename T>
void conv_forward_sample(const T* __restrict in, const T* __restrict weight, const T* bias,
                         const ConvGeometry& g, T* __restrict out, std::vector<T>& col) {
  const std::size_t kdim = g.ci * g.k * g.k;
  const std::size_t p = g.oh * g.ow;
  col.resize(kdim * p);
  im2col(in, g, col.data());
  std::vector<T> zeros;
  if (!bias) zeros.assign(g.co, T{0});
  gemm_rowinit(weight, col.data(), bias ? bias : zeros.data(), out, g.co, p, kdim);
}

template <typename T>
void conv_backward_sample(const T* __restrict in, const T* __restrict weight, const T* __restrict gout,
                          const ConvGeometry& g, T* __restrict gin, T* __restrict gweight, T* gbias,
                          std::vector<T>& col, std::vector<T>& wt, std::vector<T>& gcol) {
  const std::size_t kdim = g.ci * g.k * g.k;
  const std::size_t p = g.oh * g.ow;
  col.resize(kdim * p);
  im2col(in, g, col.data());
  for (std::size_t co = 0; co < g.co; ++co) {
    const T* grow = gout + co * p;
    if (gbias) {
      T acc{0};
      for (std::size_t t = 0; t < p; ++t) acc += grow[t];
      gbias[co] += acc;
    }
    for (std::size_t k = 0; k < kdim; ++k) {
      const T* crow = col.data() + k * p;
      T lanes[16] = {};
      std::size_t t = 0;
      for (; t + 16 <= p; t += 16) {
        for (std::size_t j = 0; j < 16; ++j) lanes[j] += grow[t + j] * crow[t + j];
      }
      T sum{0};
      for (; t < p; ++t) sum += grow[t] * crow[t];
      for (std::size_t j = 0; j < 16; ++j) sum += lanes[j];
      gweight[co * kdim + k] += sum;
    }
  }
  // gcol = W^T * gout
  wt.resize(kdim * g.co);
  for (std::size_t co = 0; co < g.co; ++co) {
    for (std::size_t k = 0; k < kdim; ++k) wt[k * g.co + co] = weight[co * kdim + k];
  }
  gcol.resize(kdim * p);
  gemm_rowinit<T>(wt.data(), gout, nullptr, gcol.data(), kdim, p, g.co);
  col2im_add(gcol.data(), g, gin);
}

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight, std::size_t stride,
                           std::size_t padding, std::size_t out_h, std::size_t out_w) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("conv2d expects rank-4 input and weight, got " + shape_string(input.shape()) + " and " +
                     shape_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, weight " +
                     shape_string(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(2) != weight.dim(3)) throw ShapeError("conv2d: kernel must be square");
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  if (out_h == 0 || out_w == 0) throw ShapeError("conv2d: empty output grid");
  return {input.dim(1), input.dim(2), input.dim(3), weight.dim(0), weight.dim(2), stride, padding, out_h, out_w};
}

template <typename T>
void kaiming_normal(Tensor<T>& t, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (T& v : t.values()) v = static_cast<T>(dist(rng));
}

}  // namespace

std::size_t window_output_size(std::size_t size, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (size + 2 * pad < kernel) {
    throw ShapeError("window " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(size + 2 * pad));
  }
  return (size + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_sized(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                       std::size_t stride, std::size_t padding, std::size_t out_h, std::size_t out_w) {
  const ConvGeometry g = conv_geometry(input, weight, stride, padding, out_h, out_w);
  if (bias && bias->numel() != g.co) throw ShapeError("conv2d: bias length does not match output channels");
  const std::size_t batch = input.dim(0);
  Tensor<T> out({batch, g.co, out_h, out_w});
  std::vector<T> col;
  for (std::size_t n = 0; n < batch; ++n) {
    conv_forward_sample(input.data() + n * input.stride0(), weight.data(), bias ? bias->data() : nullptr, g,
                        out.data() + n * out.stride0(), col);
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias, std::size_t stride,
                 std::size_t padding) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("conv2d expects rank-4 input and weight, got " + shape_string(input.shape()) + " and " +
                     shape_string(weight.shape()));
  }
  const std::size_t oh = window_output_size(input.dim(2), weight.dim(2), stride, padding);
  const std::size_t ow = window_output_size(input.dim(3), weight.dim(3), stride, padding);
  return conv2d_sized(input, weight, bias, stride, padding, oh, ow);
}

template <typename T>
Tensor<T> maxpool_sized(const Tensor<T>& input, std::size_t window, std::size_t stride, std::size_t padding,
                        std::size_t out_h, std::size_t out_w, std::vector<std::uint32_t>* argmax) {
  if (input.rank() != 4) throw ShapeError("maxpool expects rank-4 input, got " + shape_string(input.shape()));
  if (window == 0 || stride == 0) throw ShapeError("maxpool: window and stride must be >= 1");
  const std::size_t batch = input.dim(0), channels = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor<T> out({batch, channels, out_h, out_w});
  if (argmax) argmax->assign(out.numel(), 0);
  const auto sh = static_cast<std::ptrdiff_t>(h);
  const auto sw = static_cast<std::ptrdiff_t>(w);
  std::size_t o = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t plane = (n * channels + c) * h * w;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_index = plane;
          const auto y0 = static_cast<std::ptrdiff_t>(oy * stride) - static_cast<std::ptrdiff_t>(padding);
          const auto x0 = static_cast<std::ptrdiff_t>(ox * stride) - static_cast<std::ptrdiff_t>(padding);
          for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(y0, 0); y < std::min<std::ptrdiff_t>(y0 + window, sh); ++y) {
            for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(x0, 0); x < std::min<std::ptrdiff_t>(x0 + window, sw);
                 ++x) {
              const std::size_t idx = plane + static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
              if (input[idx] > best) {
                best = input[idx];
                best_index = idx;
              }
            }
          }
          out[o] = best;
          if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best_index);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride, std::size_t padding) {
  if (input.rank() != 4) throw ShapeError("maxpool expects rank-4 input, got " + shape_string(input.shape()));
  return maxpool_sized(input, window, stride, padding, window_output_size(input.dim(2), window, stride, padding),
                       window_output_size(input.dim(3), window, stride, padding));
}

template <typename T>
Tensor<T> maxpool_dense(const Tensor<T>& input, std::size_t window, PoolPadding padding) {
  if (input.rank() != 4) throw ShapeError("maxpool expects rank-4 input, got " + shape_string(input.shape()));
  if (window > input.dim(2) || window > input.dim(3)) {
    throw ShapeError("maxpool_dense: window " + std::to_string(window) + " larger than input " +
                     shape_string(input.shape()));
  }
  if (padding == PoolPadding::Same) return maxpool_sized(input, window, 1, 0, input.dim(2), input.dim(3));
  return maxpool_sized(input, window, 1, 0, input.dim(2) - window + 1, input.dim(3) - window + 1);
}

// --- Conv2d ---------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t padding, bool bias)
    : weight({out_channels, in_channels, kernel, kernel}),
      bias({bias ? out_channels : 0}),
      grad_weight({out_channels, in_channels, kernel, kernel}),
      grad_bias({bias ? out_channels : 0}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      has_bias_(bias) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
    throw ShapeError("Conv2d: channels, kernel and stride must be positive");
  }
}

template <typename T>
void Conv2d<T>::init(std::mt19937_64& rng) {
  kaiming_normal(weight, in_channels_ * kernel_ * kernel_, rng);
  bias.fill(T{0});
}

template <typename T>
void Conv2d<T>::check_input(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != in_channels_) {
    throw ShapeError("Conv2d expects (N, " + std::to_string(in_channels_) + ", H, W), got " +
                     shape_string(x.shape()));
  }
}

template <typename T>
std::size_t Conv2d<T>::output_size(std::size_t input_size) const {
  return window_output_size(input_size, kernel_, stride_, padding_);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  check_input(x);
  input_ = x;
  return conv2d_sized(x, weight, has_bias_ ? &bias : nullptr, stride_, padding_, output_size(x.dim(2)),
                      output_size(x.dim(3)));
}

template <typename T>
Tensor<T> Conv2d<T>::forward_dense(const Tensor<T>& x) {
  check_input(x);
  input_ = x;
  return conv2d_sized(x, weight, has_bias_ ? &bias : nullptr, 1, padding_, stride_ * output_size(x.dim(2)),
                      stride_ * output_size(x.dim(3)));
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const ConvGeometry g =
      conv_geometry(input_, weight, stride_, padding_, output_size(input_.dim(2)), output_size(input_.dim(3)));
  if (grad_out.rank() != 4 || grad_out.dim(0) != input_.dim(0) || grad_out.dim(1) != g.co ||
      grad_out.dim(2) != g.oh || grad_out.dim(3) != g.ow) {
    throw ShapeError("Conv2d::backward: gradient shape " + shape_string(grad_out.shape()) +
                     " does not match output");
  }
  Tensor<T> grad_in(input_.shape());
  std::vector<T> col, wt, gcol;
  for (std::size_t n = 0; n < input_.dim(0); ++n) {
    conv_backward_sample(input_.data() + n * input_.stride0(), weight.data(), grad_out.data() + n * grad_out.stride0(),
                         g, grad_in.data() + n * grad_in.stride0(), grad_weight.data(),
                         has_bias_ ? grad_bias.data() : nullptr, col, wt, gcol);
  }
  return grad_in;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  if (has_bias_) out.push_back({prefix + ".bias", &bias, &grad_bias});
}

// --- MaxPool2d ------------------------------------------------------------

template <typename T>
MaxPool2d<T>::MaxPool2d(std::size_t window, std::size_t stride, std::size_t padding)
    : window_(window), stride_(stride), padding_(padding) {
  if (window == 0 || stride == 0 || padding >= window) {
    throw ShapeError("MaxPool2d: need window >= 1, stride >= 1, padding < window");
  }
  // Keeps every dense grid position within reach of at least one input.
  if (stride + padding > window) throw ShapeError("MaxPool2d: stride + padding must not exceed window");
}

template <typename T>
std::size_t MaxPool2d<T>::output_size(std::size_t input_size) const {
  return window_output_size(input_size, window_, stride_, padding_);
}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("MaxPool2d expects rank-4 input, got " + shape_string(x.shape()));
  input_shape_ = x.shape();
  return maxpool_sized(x, window_, stride_, padding_, output_size(x.dim(2)), output_size(x.dim(3)), &argmax_);
}

template <typename T>
Tensor<T> MaxPool2d<T>::forward_dense(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("MaxPool2d expects rank-4 input, got " + shape_string(x.shape()));
  input_shape_.clear();
  argmax_.clear();
  return maxpool_sized(x, window_, 1, padding_, stride_ * output_size(x.dim(2)), stride_ * output_size(x.dim(3)));
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad_out) {
  if (input_shape_.empty() || grad_out.numel() != argmax_.size()) {
    throw ShapeError("MaxPool2d::backward without a matching strided forward pass");
  }
  Tensor<T> grad_in(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_in[argmax_[o]] += grad_out[o];
  return grad_in;
}

// --- BatchNorm2d ----------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels)
    : gamma({channels}, T{1}),
      beta({channels}, T{0}),
      grad_gamma({channels}),
      grad_beta({channels}),
      running_mean({channels}, T{0}),
      running_var({channels}, T{1}),
      tracked({1}, T{0}),
      channels_(channels) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != channels_) {
    throw ShapeError("BatchNorm2d expects (N, " + std::to_string(channels_) + ", H, W), got " +
                     shape_string(x.shape()));
  }
  if (mode == Mode::Eval && !has_running_stats()) {
    throw std::logic_error("BatchNorm2d: eval mode requested before any running statistics exist");
  }
  mode_ = mode;
  const std::size_t batch = x.dim(0), hw = x.dim(2) * x.dim(3);
  const std::size_t count = batch * hw;
  normalized_ = Tensor<T>(x.shape());
  inv_std_.assign(channels_, T{0});
  Tensor<T> y(x.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels_ + c) * hw;
        for (std::size_t t = 0; t < hw; ++t) mean += static_cast<double>(p[t]);
      }
      mean /= static_cast<double>(count);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels_ + c) * hw;
        for (std::size_t t = 0; t < hw; ++t) {
          const double d = static_cast<double>(p[t]) - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      running_mean[c] = static_cast<T>((1.0 - kMomentum) * running_mean[c] + kMomentum * mean);
      running_var[c] = static_cast<T>((1.0 - kMomentum) * running_var[c] + kMomentum * unbiased);
    } else {
      mean = static_cast<double>(running_mean[c]);
      var = static_cast<double>(running_var[c]);
    }
    const T m = static_cast<T>(mean);
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEpsilon));
    inv_std_[c] = inv;
    const T gm = gamma[c], bt = beta[c];
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = (n * channels_ + c) * hw;
      for (std::size_t t = 0; t < hw; ++t) {
        const T xh = (x[off + t] - m) * inv;
        normalized_[off + t] = xh;
        y[off + t] = gm * xh + bt;
      }
    }
  }
  if (mode == Mode::Train) tracked[0] += T{1};
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != normalized_.shape()) {
    throw ShapeError("BatchNorm2d::backward: gradient shape " + shape_string(grad_out.shape()) +
                     " does not match forward " + shape_string(normalized_.shape()));
  }
  const std::size_t batch = grad_out.dim(0), hw = grad_out.dim(2) * grad_out.dim(3);
  const double count = static_cast<double>(batch * hw);
  Tensor<T> grad_in(grad_out.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = (n * channels_ + c) * hw;
      for (std::size_t t = 0; t < hw; ++t) {
        sum_g += static_cast<double>(grad_out[off + t]);
        sum_gx += static_cast<double>(grad_out[off + t]) * static_cast<double>(normalized_[off + t]);
      }
    }
    grad_gamma[c] += static_cast<T>(sum_gx);
    grad_beta[c] += static_cast<T>(sum_g);
    const T scale = gamma[c] * inv_std_[c];
    if (mode_ == Mode::Eval) {
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t off = (n * channels_ + c) * hw;
        for (std::size_t t = 0; t < hw; ++t) grad_in[off + t] = scale * grad_out[off + t];
      }
      continue;
    }
    const T mean_g = static_cast<T>(sum_g / count);
    const T mean_gx = static_cast<T>(sum_gx / count);
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = (n * channels_ + c) * hw;
      for (std::size_t t = 0; t < hw; ++t) {
        grad_in[off + t] = scale * (grad_out[off + t] - mean_g - normalized_[off + t] * mean_gx);
      }
    }
  }
  return grad_in;
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
  out.push_back({prefix + ".beta", &beta, &grad_beta});
}

template <typename T>
void BatchNorm2d<T>::collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
  out.push_back({prefix + ".running_mean", &running_mean});
  out.push_back({prefix + ".running_var", &running_var});
  out.push_back({prefix + ".tracked", &tracked});
}

// --- ReLU / GlobalAvgPool -------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  input_ = x;
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != input_.shape()) throw ShapeError("ReLU::backward: shape mismatch");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = input_[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("GlobalAvgPool expects rank-4 input, got " + shape_string(x.shape()));
  input_shape_ = x.shape();
  const std::size_t hw = x.dim(2) * x.dim(3);
  Tensor<T> y({x.dim(0), x.dim(1)});
  for (std::size_t p = 0; p < y.numel(); ++p) {
    double acc = 0.0;
    for (std::size_t t = 0; t < hw; ++t) acc += static_cast<double>(x[p * hw + t]);
    y[p] = static_cast<T>(acc / static_cast<double>(hw));
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g(input_shape_);
  const std::size_t hw = input_shape_[2] * input_shape_[3];
  if (grad_out.numel() * hw != g.numel()) throw ShapeError("GlobalAvgPool::backward: shape mismatch");
  const T inv = T{1} / static_cast<T>(hw);
  for (std::size_t p = 0; p < grad_out.numel(); ++p) {
    for (std::size_t t = 0; t < hw; ++t) g[p * hw + t] = grad_out[p] * inv;
  }
  return g;
}

// --- Linear ---------------------------------------------------------------

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features)
    : weight({out_features, in_features}),
      bias({out_features}),
      grad_weight({out_features, in_features}),
      grad_bias({out_features}),
      in_(in_features),
      out_(out_features) {
  if (in_features == 0 || out_features == 0) throw ShapeError("Linear: feature counts must be positive");
}

template <typename T>
void Linear<T>::init(std::mt19937_64& rng) {
  kaiming_normal(weight, in_, rng);
  bias.fill(T{0});
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  if (x.rank() < 1 || x.dim(0) == 0 || x.stride0() != in_) {
    throw ShapeError("Linear expects (N, " + std::to_string(in_) + ") after flattening, got " +
                     shape_string(x.shape()));
  }
  input_ = x;
  const std::size_t batch = x.dim(0);
  Tensor<T> y({batch, out_});
  constexpr std::size_t kLanes = 8;
  for (std::size_t n = 0; n < batch; ++n) {
    const T* xr = x.data() + n * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T* wr = weight.data() + o * in_;
      T lanes[kLanes] = {};
      std::size_t i = 0;
      for (; i + kLanes <= in_; i += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += wr[i + l] * xr[i + l];
      }
      T acc = bias[o];
      for (std::size_t l = 0; l < kLanes; ++l) acc += lanes[l];
      for (; i < in_; ++i) acc += wr[i] * xr[i];
      y[n * out_ + o] = acc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t batch = input_.dim(0);
  if (grad_out.numel() != batch * out_) throw ShapeError("Linear::backward: shape mismatch");
  Tensor<T> grad_in(input_.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    const T* xr = input_.data() + n * in_;
    T* gr = grad_in.data() + n * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T g = grad_out[n * out_ + o];
      grad_bias[o] += g;
      T* __restrict gw = grad_weight.data() + o * in_;
      const T* __restrict wr = weight.data() + o * in_;
      for (std::size_t i = 0; i < in_; ++i) {
        gw[i] += g * xr[i];
        gr[i] += g * wr[i];
      }
    }
  }
  return grad_in;
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  out.push_back({prefix + ".bias", &bias, &grad_bias});
}

// --- Loss -----------------------------------------------------------------

template <typename T>
std::vector<T> per_sample_cross_entropy(const Tensor<T>& logits, std::span<const std::uint32_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("cross entropy expects (N, K) logits with N labels, got " + shape_string(logits.shape()) +
                     " and " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = logits.dim(1);
  std::vector<T> losses(labels.size());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= k) {
      throw std::out_of_range("label " + std::to_string(labels[n]) + " outside [0, " + std::to_string(k) + ")");
    }
    const T* z = logits.data() + n * k;
    const double zmax = static_cast<double>(*std::max_element(z, z + k));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(static_cast<double>(z[c]) - zmax);
    losses[n] = static_cast<T>(zmax + std::log(sum) - static_cast<double>(z[labels[n]]));
  }
  return losses;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint32_t> labels) {
  const std::vector<T> losses = per_sample_cross_entropy(logits, labels);
  const std::size_t batch = labels.size(), k = logits.dim(1);
  Tensor<T> grad(logits.shape());
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    total += static_cast<double>(losses[n]);
    const T* z = logits.data() + n * k;
    const double zmax = static_cast<double>(*std::max_element(z, z + k));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(static_cast<double>(z[c]) - zmax);
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(static_cast<double>(z[c]) - zmax) / sum;
      grad[n * k + c] = static_cast<T>((p - (c == labels[n] ? 1.0 : 0.0)) / static_cast<double>(batch));
    }
  }
  return {static_cast<T>(total / static_cast<double>(batch)), std::move(grad)};
}

#define ALIASCOPE_INSTANTIATE(T)                                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, std::size_t, std::size_t); \
  template Tensor<T> conv2d_sized(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, std::size_t,         \
                                  std::size_t, std::size_t, std::size_t);                                    \
  template Tensor<T> maxpool_sized(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t,     \
                                   std::size_t, std::vector<std::uint32_t>*);                                \
  template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                     \
  template Tensor<T> maxpool_dense(const Tensor<T>&, std::size_t, PoolPadding);                              \
  template class Conv2d<T>;                                                                                   \
  template class MaxPool2d<T>;                                                                                \
  template class BatchNorm2d<T>;                                                                              \
  template class ReLU<T>;                                                                                     \
  template class GlobalAvgPool<T>;                                                                            \
  template class Linear<T>;                                                                                   \
  template LossResult<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::uint32_t>);             \
  template std::vector<T> per_sample_cross_entropy(const Tensor<T>&, std::span<const std::uint32_t>);

ALIASCOPE_INSTANTIATE(float)
ALIASCOPE_INSTANTIATE(double)

#undef ALIASCOPE_INSTANTIATE

}  // namespace aliascope::nn
