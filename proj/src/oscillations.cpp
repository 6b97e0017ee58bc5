#include "aliascope/oscillations.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "aliascope/binary_io.hpp"
#include "aliascope/parallel.hpp"

namespace aliascope {

namespace {

constexpr char kMagic[] = "OSCD";
constexpr std::uint32_t kVersion = 1;

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kSampleStream = 2;

}  // namespace

std::pair<double, double> FrequencyLabel::omega() const {
  const double step = std::numbers::pi / static_cast<double>(n_freqs);
  return {step * k, step * l};
}

FrequencyLabel FrequencyLabel::from_class_index(std::uint32_t index, std::uint32_t n_freqs) {
  if (n_freqs == 0 || index >= n_freqs * n_freqs) {
    throw std::invalid_argument("class index " + std::to_string(index) + " out of range for N=" +
                                std::to_string(n_freqs));
  }
  return {index / n_freqs, index % n_freqs, n_freqs};
}

void DatasetSpec::validate() const {
  if (n_freqs == 0) throw std::invalid_argument("n_freqs must be positive");
  if (size == 0) throw std::invalid_argument("image size must be positive");
  if (!(noise_amplitude >= 0.0) || !std::isfinite(noise_amplitude)) {
    throw std::invalid_argument("noise amplitude must be finite and non-negative");
  }
  const std::uint64_t classes = std::uint64_t{n_freqs} * n_freqs;
  if (count == 0 || count % classes != 0) {
    throw std::invalid_argument("count " + std::to_string(count) + " is not a positive multiple of N^2 = " +
                                std::to_string(classes));
  }
}

Dataset::Dataset(DatasetSpec spec, std::vector<std::uint32_t> labels, std::vector<float> pixels)
    : spec_(spec), labels_(std::move(labels)), pixels_(std::move(pixels)) {
  if (pixels_.size() != labels_.size() * pixels_per_sample()) {
    throw std::invalid_argument("dataset pixel buffer does not match sample count");
  }
  for (std::uint32_t label : labels_) {
    if (label >= n_classes()) throw std::invalid_argument("dataset label out of range");
  }
}

RealGrid Dataset::image_grid(std::size_t i) const {
  const auto img = image(i);
  return {spec_.size, spec_.size, std::vector<double>(img.begin(), img.end())};
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  DatasetSpec spec = spec_;
  spec.count = static_cast<std::uint32_t>(n);
  return {spec, std::vector<std::uint32_t>(labels_.begin(), labels_.begin() + n),
          std::vector<float>(pixels_.begin(), pixels_.begin() + n * pixels_per_sample())};
}

std::vector<FrequencyLabel> frequency_grid(std::uint32_t n_freqs) {
  if (n_freqs == 0) throw std::invalid_argument("n_freqs must be positive");
  std::vector<FrequencyLabel> labels;
  labels.reserve(std::size_t{n_freqs} * n_freqs);
  for (std::uint32_t k = 0; k < n_freqs; ++k) {
    for (std::uint32_t l = 0; l < n_freqs; ++l) labels.push_back({k, l, n_freqs});
  }
  return labels;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Sample generate_sample(const FrequencyLabel& label, std::pair<double, double> theta,
                       double noise_amplitude, std::mt19937_64& rng, std::uint32_t size) {
  if (!(noise_amplitude >= 0.0)) throw std::invalid_argument("noise amplitude must be non-negative");
  const auto [w1, w2] = label.omega();
  RealGrid image(size, size);
  for (std::uint32_t i = 0; i < size; ++i) {
    const double row = std::cos(w1 * i + theta.first);
    for (std::uint32_t j = 0; j < size; ++j) {
      const double alpha = uniform01(rng) - 0.5;
      image(i, j) = row * std::cos(w2 * j + theta.second) + noise_amplitude * alpha;
    }
  }
  return {std::move(image), label, theta, noise_amplitude};
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  const std::uint32_t classes = spec.n_freqs * spec.n_freqs;
  const std::uint32_t per_class = spec.count / classes;

  std::vector<std::uint32_t> labels;
  labels.reserve(spec.count);
  for (std::uint32_t c = 0; c < classes; ++c) labels.insert(labels.end(), per_class, c);
  auto shuffle_rng = substream(spec.seed, kShuffleStream, 0);
  for (std::size_t i = labels.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(shuffle_rng) * static_cast<double>(i));
    std::swap(labels[i - 1], labels[std::min(j, i - 1)]);
  }

  const std::size_t pixels_per_sample = std::size_t{spec.size} * spec.size;
  std::vector<float> pixels(labels.size() * pixels_per_sample);
  parallel_for(labels.size(), [&](std::size_t i, std::size_t) {
    auto rng = substream(spec.seed, kSampleStream, i);
    const double two_pi = 2.0 * std::numbers::pi;
    const double t1 = two_pi * uniform01(rng);
    const double t2 = two_pi * uniform01(rng);
    const Sample s = generate_sample(FrequencyLabel::from_class_index(labels[i], spec.n_freqs),
                                     {t1, t2}, spec.noise_amplitude, rng, spec.size);
    std::transform(s.image.values().begin(), s.image.values().end(),
                   pixels.begin() + static_cast<std::ptrdiff_t>(i * pixels_per_sample),
                   [](double v) { return static_cast<float>(v); });
  });
  return {spec, std::move(labels), std::move(pixels)};
}

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  const DatasetSpec& spec = dataset.spec();
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u32(spec.size);
  w.u32(spec.size);
  w.u32(spec.n_freqs);
  w.f64(spec.noise_amplitude);
  w.u64(spec.seed);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    w.u32(dataset.label(i));
    for (float v : dataset.image(i)) w.f32(v);
  }
  w.seal();
  return w.bytes();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kMagic) {
    throw FormatError("unrecognized format: missing OSCD magic");
  }
  ByteReader header(bytes);
  header.raw(4);
  const std::uint32_t version = header.u32();
  if (version != kVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");
  }
  DatasetSpec spec;
  spec.count = header.u32();
  const std::uint32_t height = header.u32();
  const std::uint32_t width = header.u32();
  spec.n_freqs = header.u32();
  spec.noise_amplitude = header.f64();
  spec.seed = header.u64();
  if (height != width) throw FormatError("dataset images must be square");
  spec.size = height;
  const std::size_t per_sample = std::size_t{height} * width;
  const std::size_t expected = header.position() + std::size_t{spec.count} * (4 + 4 * per_sample) + 4;
  if (bytes.size() < expected) {
    throw FormatError("truncated dataset: " + std::to_string(bytes.size()) + " bytes, header implies " +
                      std::to_string(expected));
  }
  if (bytes.size() > expected) throw FormatError("dataset has trailing bytes after checksum");
  const auto payload = verify_crc_trailer(bytes, "dataset");
  ByteReader r(payload.subspan(header.position()));
  std::vector<std::uint32_t> labels(spec.count);
  std::vector<float> pixels(spec.count * per_sample);
  for (std::size_t i = 0; i < spec.count; ++i) {
    labels[i] = r.u32();
    for (std::size_t p = 0; p < per_sample; ++p) pixels[i * per_sample + p] = r.f32();
  }
  return {spec, std::move(labels), std::move(pixels)};
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace aliascope
