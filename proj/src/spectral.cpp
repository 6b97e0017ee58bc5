#include "aliascope/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace aliascope {

namespace {

void require_positive(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw SpectralError("grid dimensions must be positive, got " + std::to_string(height) +
                        "x" + std::to_string(width));
  }
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// exp(sign * 2 pi i t / n) for t in [0, n).
std::vector<Complex> twiddles(std::size_t n, double sign) {
  std::vector<Complex> w(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n);
    w[t] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

// In-place 1-D transform of `n` values spaced `stride` apart.
class Transform1d {
 public:
  Transform1d(std::size_t n, double sign) : n_(n), w_(twiddles(n, sign)), scratch_(n) {
    if (is_power_of_two(n_)) {
      bitrev_.resize(n_);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n_) ++bits;
      for (std::size_t t = 0; t < n_; ++t) {
        std::size_t rev = 0;
        for (std::size_t b = 0; b < bits; ++b) rev |= ((t >> b) & 1U) << (bits - 1 - b);
        bitrev_[t] = rev;
      }
    }
  }

  void operator()(Complex* data, std::size_t stride) {
    for (std::size_t t = 0; t < n_; ++t) scratch_[t] = data[t * stride];
    if (bitrev_.empty()) {
      direct();
    } else {
      radix2();
    }
    for (std::size_t t = 0; t < n_; ++t) data[t * stride] = scratch_[t];
  }

 private:
  void direct() {
    std::vector<Complex> out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      Complex acc{};
      for (std::size_t t = 0; t < n_; ++t) acc += scratch_[t] * w_[(k * t) % n_];
      out[k] = acc;
    }
    scratch_.swap(out);
  }

  void radix2() {
    for (std::size_t t = 0; t < n_; ++t) {
      if (t < bitrev_[t]) std::swap(scratch_[t], scratch_[bitrev_[t]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t t = 0; t < half; ++t) {
          const Complex u = scratch_[start + t];
          const Complex v = scratch_[start + t + half] * w_[t * step];
          scratch_[start + t] = u + v;
          scratch_[start + t + half] = u - v;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<Complex> w_;
  std::vector<Complex> scratch_;
  std::vector<std::size_t> bitrev_;
};

void transform2d(std::vector<Complex>& values, std::size_t height, std::size_t width, double sign) {
  Transform1d rows(width, sign);
  for (std::size_t i = 0; i < height; ++i) rows(values.data() + i * width, 1);
  Transform1d cols(height, sign);
  for (std::size_t j = 0; j < width; ++j) cols(values.data() + j, width);
}

}  // namespace

RealGrid::RealGrid(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {}

RealGrid::RealGrid(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != height_ * width_) {
    throw SpectralError("RealGrid expects " + std::to_string(height_ * width_) + " values, got " +
                        std::to_string(values_.size()));
  }
}

Spectrum::Spectrum(std::size_t height, std::size_t width, Complex fill)
    : height_(height), width_(width), values_(height * width, fill) {}

Spectrum::Spectrum(std::size_t height, std::size_t width, std::vector<Complex> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != height_ * width_) {
    throw SpectralError("Spectrum expects " + std::to_string(height_ * width_) + " values, got " +
                        std::to_string(values_.size()));
  }
}

double Spectrum::max_amplitude() const {
  double best = 0.0;
  for (const Complex& v : values_) best = std::max(best, std::abs(v));
  return best;
}

BlockSet::BlockSet(std::size_t factor, std::vector<Spectrum> blocks)
    : factor_(factor), blocks_(std::move(blocks)) {
  if (factor_ == 0 || blocks_.size() != factor_ * factor_) {
    throw SpectralError("BlockSet needs r*r blocks");
  }
  for (const Spectrum& b : blocks_) {
    if (b.height() != blocks_.front().height() || b.width() != blocks_.front().width()) {
      throw SpectralError("BlockSet blocks must share dimensions");
    }
  }
}

const Spectrum& BlockSet::block(std::size_t i, std::size_t j) const {
  if (i < 1 || j < 1 || i > factor_ || j > factor_) {
    throw SpectralError("block index (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") outside 1.." + std::to_string(factor_));
  }
  return blocks_[(i - 1) * factor_ + (j - 1)];
}

Spectrum BlockSet::reassemble() const {
  const std::size_t bh = block_height();
  const std::size_t bw = block_width();
  Spectrum out(bh * factor_, bw * factor_);
  for (std::size_t i = 0; i < factor_; ++i) {
    for (std::size_t j = 0; j < factor_; ++j) {
      const Spectrum& b = blocks_[i * factor_ + j];
      for (std::size_t p = 0; p < bh; ++p) {
        for (std::size_t q = 0; q < bw; ++q) out(i * bh + p, j * bw + q) = b(p, q);
      }
    }
  }
  return out;
}

Spectrum dft2(const RealGrid& signal) {
  require_positive(signal.height(), signal.width());
  std::vector<Complex> values(signal.size());
  for (std::size_t t = 0; t < signal.size(); ++t) {
    const double v = signal.values()[t];
    if (!std::isfinite(v)) {
      throw SpectralError("dft2: non-finite value at (" + std::to_string(t / signal.width()) +
                          ", " + std::to_string(t % signal.width()) + ")");
    }
    values[t] = v;
  }
  transform2d(values, signal.height(), signal.width(), -1.0);
  return {signal.height(), signal.width(), std::move(values)};
}

RealGrid idft2(const Spectrum& spectrum) {
  require_positive(spectrum.height(), spectrum.width());
  std::vector<Complex> values(spectrum.values().begin(), spectrum.values().end());
  transform2d(values, spectrum.height(), spectrum.width(), +1.0);
  const double scale = 1.0 / static_cast<double>(values.size());
  const double tolerance = 1e-6 * spectrum.max_amplitude();
  std::vector<double> out(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) {
    const double residue = std::abs(values[t].imag() * scale);
    if (residue > tolerance) {
      throw SpectralError("idft2: imaginary residue " + std::to_string(residue) +
                          " exceeds tolerance; spectrum is not conjugate symmetric");
    }
    out[t] = values[t].real() * scale;
  }
  return {spectrum.height(), spectrum.width(), std::move(out)};
}

std::pair<RealGrid, RealGrid> amplitude_phase(const Spectrum& spectrum) {
  RealGrid amplitude(spectrum.height(), spectrum.width());
  RealGrid phase(spectrum.height(), spectrum.width());
  for (std::size_t t = 0; t < spectrum.size(); ++t) {
    const Complex v = spectrum.values()[t];
    const double a = std::abs(v);
    double phi = 0.0;
    if (a > 0.0) {
      phi = std::arg(v);
      if (phi <= -std::numbers::pi) phi = std::numbers::pi;
    }
    amplitude.values()[t] = a;
    phase.values()[t] = phi;
  }
  return {std::move(amplitude), std::move(phase)};
}

Spectrum center_shift(const Spectrum& spectrum) {
  const std::size_t m = spectrum.height();
  const std::size_t n = spectrum.width();
  Spectrum out(m, n);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t l = 0; l < n; ++l) out((k + m / 2) % m, (l + n / 2) % n) = spectrum(k, l);
  }
  return out;
}

RealGrid downsample(const RealGrid& signal, std::size_t r) {
  if (r == 0 || signal.height() % r != 0 || signal.width() % r != 0) {
    throw SpectralError("downsample: factor " + std::to_string(r) + " does not divide " +
                        std::to_string(signal.height()) + "x" + std::to_string(signal.width()));
  }
  RealGrid out(signal.height() / r, signal.width() / r);
  for (std::size_t k = 0; k < out.height(); ++k) {
    for (std::size_t l = 0; l < out.width(); ++l) out(k, l) = signal(r * k, r * l);
  }
  return out;
}

BlockSet block_partition(const Spectrum& spectrum, std::size_t r) {
  if (r == 0 || spectrum.height() % r != 0 || spectrum.width() % r != 0) {
    throw SpectralError("block_partition: factor " + std::to_string(r) + " does not divide " +
                        std::to_string(spectrum.height()) + "x" + std::to_string(spectrum.width()));
  }
  const std::size_t bh = spectrum.height() / r;
  const std::size_t bw = spectrum.width() / r;
  std::vector<Spectrum> blocks;
  blocks.reserve(r * r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      Spectrum b(bh, bw);
      for (std::size_t p = 0; p < bh; ++p) {
        for (std::size_t q = 0; q < bw; ++q) b(p, q) = spectrum(i * bh + p, j * bw + q);
      }
      blocks.push_back(std::move(b));
    }
  }
  return {r, std::move(blocks)};
}

Spectrum downsampled_spectrum(const BlockSet& blocks) {
  const std::size_t r = blocks.factor();
  Spectrum out(blocks.block_height(), blocks.block_width());
  for (std::size_t i = 1; i <= r; ++i) {
    for (std::size_t j = 1; j <= r; ++j) {
      const Spectrum& b = blocks.block(i, j);
      for (std::size_t t = 0; t < out.size(); ++t) out.values()[t] += b.values()[t];
    }
  }
  const double scale = 1.0 / static_cast<double>(r * r);
  for (Complex& v : out.values()) v *= scale;
  return out;
}

}  // namespace aliascope
