#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace aliascope {

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Real m x n signal, row-major; (i, j) = (row, column).
class RealGrid {
 public:
  RealGrid() = default;
  RealGrid(std::size_t height, std::size_t width, double fill = 0.0);
  RealGrid(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * width_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * width_ + j]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const RealGrid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

using Complex = std::complex<double>;

/// Complex m x n spectrum. Entry (k, l) is the standard DFT bin: k runs over
/// the m rows, l over the n columns.
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(std::size_t height, std::size_t width, Complex fill = {});
  Spectrum(std::size_t height, std::size_t width, std::vector<Complex> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  Complex& operator()(std::size_t k, std::size_t l) { return values_[k * width_ + l]; }
  const Complex& operator()(std::size_t k, std::size_t l) const { return values_[k * width_ + l]; }

  std::span<Complex> values() { return values_; }
  std::span<const Complex> values() const { return values_; }

  double max_amplitude() const;

  bool operator==(const Spectrum&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Complex> values_;
};

/// The r x r polyphase partition of a spectrum. Blocks are addressed 1-based,
/// block (1, 1) holding the lowest rows and columns of the source.
class BlockSet {
 public:
  BlockSet(std::size_t factor, std::vector<Spectrum> blocks);

  std::size_t factor() const { return factor_; }
  std::size_t block_height() const { return blocks_.front().height(); }
  std::size_t block_width() const { return blocks_.front().width(); }

  const Spectrum& block(std::size_t i, std::size_t j) const;

  /// Inverse of block_partition.
  Spectrum reassemble() const;

 private:
  std::size_t factor_;
  std::vector<Spectrum> blocks_;  // row-major over (i-1, j-1)
};

/// Unnormalized forward 2-D DFT. Radix-2 along power-of-two axes, direct
/// summation otherwise. Throws SpectralError on non-finite input.
Spectrum dft2(const RealGrid& signal);

/// Inverse of dft2 with the 1/(mn) factor. Throws SpectralError when the
/// imaginary residue exceeds 1e-6 of the spectrum's max amplitude.
RealGrid idft2(const Spectrum& spectrum);

/// Polar form X = A e^{i Phi}; Phi in (-pi, pi], zero entries get phase 0.
std::pair<RealGrid, RealGrid> amplitude_phase(const Spectrum& spectrum);

/// Moves bin (0, 0) to (floor(m/2), floor(n/2)).
Spectrum center_shift(const Spectrum& spectrum);

/// x'_{k,l} = x_{rk, rl}. Both dimensions must be multiples of r.
RealGrid downsample(const RealGrid& signal, std::size_t r);

BlockSet block_partition(const Spectrum& spectrum, std::size_t r);

/// (1/r^2) times the elementwise sum of all blocks; equals the DFT of the
/// downsampled signal.
Spectrum downsampled_spectrum(const BlockSet& blocks);

}  // namespace aliascope
