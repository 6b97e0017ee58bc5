#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "aliascope/spectral.hpp"

namespace aliascope {

/// One of the N^2 classes: frequency (k pi / N, l pi / N).
struct FrequencyLabel {
  std::uint32_t k = 0;
  std::uint32_t l = 0;
  std::uint32_t n_freqs = 1;

  std::uint32_t class_index() const { return k * n_freqs + l; }
  std::pair<double, double> omega() const;

  static FrequencyLabel from_class_index(std::uint32_t index, std::uint32_t n_freqs);
  bool operator==(const FrequencyLabel&) const = default;
};

struct Sample {
  RealGrid image;
  FrequencyLabel label;
  std::pair<double, double> theta;
  double noise_amplitude = 0.0;
};

struct DatasetSpec {
  std::uint32_t n_freqs = 20;
  std::uint32_t size = 32;
  std::uint32_t count = 0;
  double noise_amplitude = 0.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when count is not a positive multiple of N^2.
  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

/// Samples are stored in single precision, as the network consumes them.
class Dataset {
 public:
  Dataset(DatasetSpec spec, std::vector<std::uint32_t> labels, std::vector<float> pixels);

  const DatasetSpec& spec() const { return spec_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t n_classes() const { return std::size_t{spec_.n_freqs} * spec_.n_freqs; }
  std::size_t pixels_per_sample() const { return std::size_t{spec_.size} * spec_.size; }

  std::uint32_t label(std::size_t i) const { return labels_[i]; }
  std::span<const float> image(std::size_t i) const {
    return std::span(pixels_).subspan(i * pixels_per_sample(), pixels_per_sample());
  }
  RealGrid image_grid(std::size_t i) const;

  std::span<const std::uint32_t> labels() const { return labels_; }
  std::span<const float> pixels() const { return pixels_; }

  /// First `n` samples, keeping the header fields.
  Dataset head(std::size_t n) const;

  bool operator==(const Dataset&) const = default;

 private:
  DatasetSpec spec_;
  std::vector<std::uint32_t> labels_;
  std::vector<float> pixels_;
};

/// Row-major (k, l) order, class_index = k * N + l.
std::vector<FrequencyLabel> frequency_grid(std::uint32_t n_freqs);

/// x_{i,j} = cos(w1 i + t1) cos(w2 j + t2) + A alpha_{i,j}, alpha ~ U(-1/2, 1/2).
Sample generate_sample(const FrequencyLabel& label, std::pair<double, double> theta,
                       double noise_amplitude, std::mt19937_64& rng, std::uint32_t size = 32);

/// Balanced, seeded-shuffled dataset. Sample i draws from its own substream
/// derived from (seed, i), so the result is independent of thread count.
Dataset generate_dataset(const DatasetSpec& spec);

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Uniform on [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

/// Generator seeded from (seed, stream, index) via std::seed_seq.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace aliascope
