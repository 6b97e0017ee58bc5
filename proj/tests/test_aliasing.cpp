#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "aliascope/aliasing.hpp"
#include "aliascope/spectral.hpp"
#include "oracles.hpp"

using namespace aliascope;

namespace {

RealGrid tone_grid(std::size_t size, std::initializer_list<double> omegas) {
  RealGrid x(size, size);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j)
      for (double w : omegas) x(i, j) += std::cos(w * static_cast<double>(i));
  return x;
}

// A few random tones plus weak noise, so that every category shows up.
RealGrid sparse_signal(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.02);
  RealGrid x(size, size);
  const int tones = 1 + static_cast<int>(rng() % 4);
  for (int t = 0; t < tones; ++t) {
    const double a = 0.2 + unit(rng), w1 = 2.0 * std::numbers::pi * static_cast<double>(rng() % size) / size,
                 w2 = 2.0 * std::numbers::pi * static_cast<double>(rng() % size) / size,
                 p1 = unit(rng) * 6.28, p2 = unit(rng) * 6.28;
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) x(i, j) += a * std::cos(w1 * i + p1) * std::cos(w2 * j + p2);
  }
  for (double& v : x.values()) v += noise(rng);
  return x;
}

std::vector<int> as_ints(const CategoryGrid& g) {
  std::vector<int> out;
  for (Category c : g.entries()) out.push_back(static_cast<int>(c));
  return out;
}

oracle::Grid to_oracle(const RealGrid& g) {
  return {g.height(), g.width(), {g.values().begin(), g.values().end()}};
}

}  // namespace

TEST_SUITE("aliasing") {

TEST_CASE("threshold") {
  Spectrum s(2, 2);
  s(1, 1) = Complex(0.0, 18.0);
  CHECK(significance_threshold(s, ThresholdRule()) == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(significance_threshold(Spectrum(3, 3), ThresholdRule()) == 0.0);
  CHECK(ThresholdRule().divisor == 10.0);
  CHECK_THROWS_AS(ThresholdRule(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdRule(-1.0), std::invalid_argument);
}

TEST_CASE("zero signal is all no-pass") {
  for (std::size_t r : {2u, 4u}) {
    const CategoryGrid g = classify(dft2(RealGrid(8, 8)), r, ThresholdRule());
    for (Category c : g.entries()) CHECK(c == Category::NoPass);
  }
}

TEST_CASE("single 12x12 tone: one non-aliased and one aliased entry") {
  const RealGrid x = tone_grid(12, {2.0 * std::numbers::pi / 3.0});
  const Spectrum spec = dft2(x);
  CHECK(std::abs(spec(4, 0)) == doctest::Approx(72.0));
  CHECK(std::abs(spec(8, 0)) == doctest::Approx(72.0));
  const Spectrum xprime = dft2(downsample(x, 2));
  CHECK(xprime.max_amplitude() == doctest::Approx(18.0));
  CHECK(significance_threshold(xprime, ThresholdRule()) == doctest::Approx(1.8));

  const CategoryGrid g = classify(spec, 2, ThresholdRule());
  for (std::size_t p = 0; p < 6; ++p)
    for (std::size_t q = 0; q < 6; ++q) {
      if (p == 4 && q == 0) CHECK(g(p, q) == Category::NonAliased);
      else if (p == 2 && q == 0) CHECK(g(p, q) == Category::Aliased);
      else CHECK(g(p, q) == Category::NoPass);
    }
  const CategoryCounts counts = tally(g);
  CHECK(counts == CategoryCounts{34, 1, 1, 0});
  CHECK(as_ints(g) == oracle::classify(oracle::dft(to_oracle(x)), oracle::dft(oracle::decimate(to_oracle(x), 2)),
                                      2, 10.0));
}

TEST_CASE("two 12x12 tones tangle at (2, 0)") {
  const RealGrid x = tone_grid(12, {std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0});
  const CategoryGrid g = classify(dft2(x), 2, ThresholdRule());
  CHECK(g(2, 0) == Category::AliasedTangled);
  CHECK(as_ints(g) == oracle::classify(oracle::dft(to_oracle(x)), oracle::dft(oracle::decimate(to_oracle(x), 2)),
                                      2, 10.0));
}

TEST_CASE("classify agrees with the brute-force oracle") {
  std::mt19937_64 rng(21);
  CategoryCounts seen;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t r = trial % 3 == 0 ? 4 : 2;
    const RealGrid x = sparse_signal(8, rng);
    const double divisor = trial % 2 ? 10.0 : 3.0;
    const CategoryGrid g = classify(dft2(x), r, ThresholdRule(divisor));
    seen += tally(g);
    REQUIRE(as_ints(g) == oracle::classify(oracle::dft(to_oracle(x)),
                                          oracle::dft(oracle::decimate(to_oracle(x), r)), r, divisor));
  }
  CHECK(seen.no_pass > 0);
  CHECK(seen.non_aliased > 0);
  CHECK(seen.aliased > 0);
  CHECK(seen.aliased_tangled > 0);
}

TEST_CASE("classification depends only on relative magnitudes") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    RealGrid x = sparse_signal(8, rng);
    const CategoryGrid base = classify(dft2(x), 2, ThresholdRule());
    for (double& v : x.values()) v *= 4.0;
    CHECK(classify(dft2(x), 2, ThresholdRule()) == base);
  }
}

TEST_CASE("a larger divisor never makes an entry less significant") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Spectrum s = dft2(sparse_signal(8, rng));
    const CategoryCounts loose = tally(classify(s, 2, ThresholdRule(100.0)));
    const CategoryCounts strict = tally(classify(s, 2, ThresholdRule(2.0)));
    CHECK(loose.no_pass <= strict.no_pass);
    CHECK(loose.aliased_tangled >= strict.aliased_tangled);
  }
}

TEST_CASE("tally") {
  const CategoryGrid g(6, 6);
  const CategoryCounts c = tally(g);
  CHECK(c == CategoryCounts{36, 0, 0, 0});
  CHECK(c.total() == 36);

  CategoryGrid a(2, 2), b(1, 3);
  a(0, 1) = Category::Aliased;
  a(1, 1) = Category::AliasedTangled;
  b(0, 0) = Category::NonAliased;
  CategoryCounts sum = tally(a);
  sum += tally(b);
  CHECK(sum == CategoryCounts{4, 1, 1, 1});
}

TEST_CASE("aggregate weighting") {
  const std::vector<CategoryCounts> one{{1, 2, 3, 4}};
  CHECK(aggregate(one, Weighting::PerEntry) == fractions_of(one[0]));
  CHECK(aggregate(one, Weighting::EqualPerGroup) == fractions_of(one[0]));

  const std::vector<CategoryCounts> two{{10, 0, 0, 0}, {0, 0, 30, 0}};
  CHECK(aggregate(two, Weighting::PerEntry) == Fractions{0.25, 0.0, 0.75, 0.0});
  CHECK(aggregate(two, Weighting::EqualPerGroup) == Fractions{0.5, 0.0, 0.5, 0.0});

  const std::vector<CategoryCounts> empty{{0, 0, 0, 0}};
  CHECK_THROWS_AS(aggregate(empty, Weighting::PerEntry), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(std::span<const CategoryCounts>{}, Weighting::EqualPerGroup), std::invalid_argument);

  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CategoryCounts> recs(1 + rng() % 5);
    for (auto& c : recs) c = {rng() % 50, rng() % 50, rng() % 50, 1 + rng() % 50};
    for (Weighting w : {Weighting::PerEntry, Weighting::EqualPerGroup}) {
      const Fractions f = aggregate(recs, w);
      CHECK(f[0] + f[1] + f[2] + f[3] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

}
