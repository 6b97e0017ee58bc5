#include "aliascope/aliasing.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aliascope {

std::string_view category_name(Category c) {
  switch (c) {
    case Category::NoPass: return "no_pass";
    case Category::NonAliased: return "non_aliased";
    case Category::Aliased: return "aliased";
    case Category::AliasedTangled: return "aliased_tangled";
  }
  return "unknown";
}

std::uint64_t& CategoryCounts::operator[](Category c) {
  switch (c) {
    case Category::NoPass: return no_pass;
    case Category::NonAliased: return non_aliased;
    case Category::Aliased: return aliased;
    case Category::AliasedTangled: return aliased_tangled;
  }
  throw std::invalid_argument("invalid category");
}

std::uint64_t CategoryCounts::operator[](Category c) const {
  return const_cast<CategoryCounts&>(*this)[c];
}

CategoryCounts& CategoryCounts::operator+=(const CategoryCounts& other) {
  no_pass += other.no_pass;
  non_aliased += other.non_aliased;
  aliased += other.aliased;
  aliased_tangled += other.aliased_tangled;
  return *this;
}

Fractions fractions_of(const CategoryCounts& counts) {
  const std::uint64_t total = counts.total();
  if (total == 0) throw std::invalid_argument("fractions of an empty tally");
  const double t = static_cast<double>(total);
  return {static_cast<double>(counts.no_pass) / t, static_cast<double>(counts.non_aliased) / t,
          static_cast<double>(counts.aliased) / t, static_cast<double>(counts.aliased_tangled) / t};
}

ThresholdRule::ThresholdRule(double d) : divisor(d) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw std::invalid_argument("threshold divisor must be positive, got " + std::to_string(d));
  }
}

double significance_threshold(const Spectrum& xprime, const ThresholdRule& rule) {
  return xprime.max_amplitude() / rule.divisor;
}

CategoryGrid classify(const Spectrum& pre_spectrum, std::size_t r, const ThresholdRule& rule) {
  const BlockSet blocks = block_partition(pre_spectrum, r);
  const Spectrum xprime = downsampled_spectrum(blocks);
  const double threshold = significance_threshold(xprime, rule);

  CategoryGrid grid(xprime.height(), xprime.width());
  for (std::size_t p = 0; p < grid.height(); ++p) {
    for (std::size_t q = 0; q < grid.width(); ++q) {
      std::size_t significant = 0;
      bool baseband = false;
      for (std::size_t i = 1; i <= r; ++i) {
        for (std::size_t j = 1; j <= r; ++j) {
          if (std::abs(blocks.block(i, j)(p, q)) > threshold) {
            ++significant;
            if (i == 1 && j == 1) baseband = true;
          }
        }
      }
      Category c = Category::AliasedTangled;
      if (significant == 0) {
        c = Category::NoPass;
      } else if (significant == 1) {
        c = baseband ? Category::NonAliased : Category::Aliased;
      }
      grid(p, q) = c;
    }
  }
  return grid;
}

CategoryCounts tally(const CategoryGrid& grid) {
  CategoryCounts counts;
  for (Category c : grid.entries()) ++counts[c];
  return counts;
}

Fractions aggregate(std::span<const CategoryCounts> counts, Weighting weighting) {
  if (weighting == Weighting::PerEntry) {
    CategoryCounts pooled;
    for (const CategoryCounts& c : counts) pooled += c;
    if (pooled.total() == 0) throw std::invalid_argument("aggregate: all totals are zero");
    return fractions_of(pooled);
  }
  Fractions sum{};
  std::size_t groups = 0;
  for (const CategoryCounts& c : counts) {
    if (c.total() == 0) continue;
    const Fractions f = fractions_of(c);
    for (std::size_t k = 0; k < kCategoryCount; ++k) sum[k] += f[k];
    ++groups;
  }
  if (groups == 0) throw std::invalid_argument("aggregate: all totals are zero");
  for (double& v : sum) v /= static_cast<double>(groups);
  return sum;
}

}  // namespace aliascope
