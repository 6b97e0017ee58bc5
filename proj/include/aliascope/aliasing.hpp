#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "aliascope/spectral.hpp"

namespace aliascope {

/// How a frequency entry of a downsampled signal is formed from the blocks
/// of the signal before downsampling.
enum class Category : std::uint8_t {
  NoPass,          // no block contributes significantly
  NonAliased,      // only the baseband block (1, 1) contributes
  Aliased,         // exactly one block, not (1, 1)
  AliasedTangled,  // two or more blocks
};

inline constexpr std::size_t kCategoryCount = 4;

std::string_view category_name(Category c);

class CategoryGrid {
 public:
  CategoryGrid(std::size_t height, std::size_t width)
      : height_(height), width_(width), entries_(height * width, Category::NoPass) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  Category& operator()(std::size_t p, std::size_t q) { return entries_[p * width_ + q]; }
  Category operator()(std::size_t p, std::size_t q) const { return entries_[p * width_ + q]; }

  std::span<const Category> entries() const { return entries_; }

  bool operator==(const CategoryGrid&) const = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<Category> entries_;
};

struct CategoryCounts {
  std::uint64_t no_pass = 0;
  std::uint64_t non_aliased = 0;
  std::uint64_t aliased = 0;
  std::uint64_t aliased_tangled = 0;

  std::uint64_t total() const { return no_pass + non_aliased + aliased + aliased_tangled; }
  std::uint64_t& operator[](Category c);
  std::uint64_t operator[](Category c) const;

  CategoryCounts& operator+=(const CategoryCounts& other);
  bool operator==(const CategoryCounts&) const = default;
};

/// Fractions in category order: no-pass, non-aliased, aliased, aliased-tangled.
using Fractions = std::array<double, kCategoryCount>;

Fractions fractions_of(const CategoryCounts& counts);

/// T = max |X'| / divisor.
struct ThresholdRule {
  double divisor = 10.0;

  explicit ThresholdRule(double d = 10.0);
};

double significance_threshold(const Spectrum& xprime, const ThresholdRule& rule);

/// Classifies every entry of X' = dft2(downsample(x, r)) given X = dft2(x).
/// Block magnitudes are compared against T literally (strict >, no 1/r^2).
CategoryGrid classify(const Spectrum& pre_spectrum, std::size_t r, const ThresholdRule& rule);

CategoryCounts tally(const CategoryGrid& grid);

enum class Weighting { PerEntry, EqualPerGroup };

/// Throws std::invalid_argument if no record has a positive total.
Fractions aggregate(std::span<const CategoryCounts> counts, Weighting weighting);

}  // namespace aliascope
