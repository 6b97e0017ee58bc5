#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "aliascope/spectral.hpp"
#include "oracles.hpp"

using namespace aliascope;

namespace {

RealGrid random_grid(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  RealGrid g(h, w);
  for (double& v : g.values()) v = dist(rng);
  return g;
}

oracle::Grid to_oracle(const RealGrid& g) {
  return {g.height(), g.width(), {g.values().begin(), g.values().end()}};
}

double max_diff(const Spectrum& a, const oracle::CGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.v[i]));
  return m;
}

double max_diff(const Spectrum& a, const Spectrum& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("dft2 of a constant grid is pure DC") {
  const Spectrum s = dft2(RealGrid(2, 2, 1.0));
  CHECK(s(0, 0) == Complex(4.0, 0.0));
  CHECK(std::abs(s(0, 1)) < 1e-15);
  CHECK(std::abs(s(1, 0)) < 1e-15);
  CHECK(std::abs(s(1, 1)) < 1e-15);
}

TEST_CASE("Nyquist row tone lands in bin (2, 0)") {
  RealGrid x(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = std::cos(std::numbers::pi * static_cast<double>(i));
  const Spectrum s = dft2(x);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t l = 0; l < 4; ++l) {
      if (k == 2 && l == 0) CHECK(std::abs(s(k, l) - Complex(16.0, 0.0)) < 1e-12);
      else CHECK(std::abs(s(k, l)) < 1e-12);
    }
}

TEST_CASE("dft2 matches the direct-summation oracle") {
  std::mt19937_64 rng(11);
  for (std::size_t h : {1u, 2u, 3u, 5u, 6u, 8u, 12u, 16u}) {
    for (std::size_t w : {1u, 4u, 7u, 8u, 12u}) {
      const RealGrid x = random_grid(h, w, rng);
      CHECK(max_diff(dft2(x), oracle::dft(to_oracle(x))) <= 1e-9);
    }
  }
}

TEST_CASE("dft2 is linear and satisfies Parseval") {
  std::mt19937_64 rng(12);
  const RealGrid a = random_grid(8, 12, rng), b = random_grid(8, 12, rng);
  RealGrid sum(8, 12);
  for (std::size_t i = 0; i < sum.size(); ++i) sum.values()[i] = 2.0 * a.values()[i] - 3.0 * b.values()[i];
  const Spectrum sa = dft2(a), sb = dft2(b), ss = dft2(sum);
  double worst = 0.0, energy_x = 0.0, energy_s = 0.0;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    worst = std::max(worst, std::abs(ss.values()[i] - (2.0 * sa.values()[i] - 3.0 * sb.values()[i])));
    energy_s += std::norm(sa.values()[i]);
  }
  for (double v : a.values()) energy_x += v * v;
  CHECK(worst <= 1e-9);
  CHECK(energy_s / 96.0 == doctest::Approx(energy_x).epsilon(1e-12));
}

TEST_CASE("dft2 rejects non-finite input") {
  RealGrid x(4, 4);
  x(1, 2) = std::nan("");
  CHECK_THROWS_AS(dft2(x), SpectralError);
  x(1, 2) = INFINITY;
  CHECK_THROWS_AS(dft2(x), SpectralError);
}

TEST_CASE("idft2 inverts dft2") {
  Spectrum dc(3, 5);
  dc(0, 0) = 15.0;
  const RealGrid ones = idft2(dc);
  for (double v : ones.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(13);
  const RealGrid x = random_grid(8, 8, rng);
  const RealGrid back = idft2(dft2(x));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back.values()[i] - x.values()[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("idft2 refuses a spectrum without conjugate symmetry") {
  Spectrum s(4, 4);
  s(1, 2) = 1.0;
  CHECK_THROWS_AS(idft2(s), SpectralError);
}

TEST_CASE("amplitude_phase") {
  Spectrum s(1, 3);
  s(0, 0) = Complex(3.0, 4.0);
  s(0, 1) = 0.0;
  s(0, 2) = Complex(-1.0, -0.0);
  const auto [amp, phase] = amplitude_phase(s);
  CHECK(amp(0, 0) == 5.0);
  CHECK(phase(0, 0) == std::atan2(4.0, 3.0));
  CHECK(amp(0, 1) == 0.0);
  CHECK(phase(0, 1) == 0.0);
  CHECK(phase(0, 2) == doctest::Approx(std::numbers::pi));

  std::mt19937_64 rng(14);
  std::normal_distribution<double> dist;
  Spectrum r(6, 6);
  for (Complex& c : r.values()) c = {dist(rng), dist(rng)};
  const auto [a, p] = amplitude_phase(r);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    worst = std::max(worst, std::abs(std::polar(a.values()[i], p.values()[i]) - r.values()[i]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("center_shift") {
  Spectrum s(4, 4);
  s(0, 0) = 1.0;
  const Spectrum c = center_shift(s);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t l = 0; l < 4; ++l) CHECK(c(k, l) == (k == 2 && l == 2 ? Complex(1.0) : Complex(0.0)));
  std::mt19937_64 rng(15);
  Spectrum r(4, 4);
  for (Complex& v : r.values()) v = {static_cast<double>(rng() % 100), 1.0};
  CHECK(center_shift(center_shift(r)) == r);

  Spectrum odd(3, 3);
  odd(0, 0) = 1.0;
  const Spectrum co = center_shift(odd);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t l = 0; l < 3; ++l) CHECK(co(k, l) == (k == 1 && l == 1 ? Complex(1.0) : Complex(0.0)));
}

TEST_CASE("downsample") {
  std::mt19937_64 rng(16);
  const RealGrid x = random_grid(6, 6, rng);
  CHECK(downsample(x, 1) == x);

  RealGrid ramp(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) ramp(i, j) = static_cast<double>(i);
  CHECK(downsample(ramp, 2) == RealGrid(2, 2, {0.0, 0.0, 2.0, 2.0}));

  CHECK_THROWS(downsample(RealGrid(5, 4), 2));
  CHECK_THROWS(downsample(x, 0));
}

TEST_CASE("block partition layout") {
  Spectrum s(4, 4);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t l = 0; l < 4; ++l) s(k, l) = Complex(static_cast<double>(k), static_cast<double>(l));
  const BlockSet blocks = block_partition(s, 2);
  CHECK(blocks.block_height() == 2);
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t q = 0; q < 2; ++q) {
      CHECK(blocks.block(1, 1)(p, q) == s(p, q));
      CHECK(blocks.block(2, 1)(p, q) == s(p + 2, q));
      CHECK(blocks.block(1, 2)(p, q) == s(p, q + 2));
      CHECK(blocks.block(2, 2)(p, q) == s(p + 2, q + 2));
    }
  CHECK_THROWS(blocks.block(0, 1));
  CHECK_THROWS(blocks.block(3, 1));

  const BlockSet zero = block_partition(Spectrum(4, 4), 2);
  for (std::size_t i = 1; i <= 2; ++i)
    for (std::size_t j = 1; j <= 2; ++j) CHECK(zero.block(i, j) == Spectrum(2, 2));

  std::mt19937_64 rng(17);
  Spectrum r(8, 8);
  for (Complex& c : r.values()) c = {static_cast<double>(rng() % 1000), static_cast<double>(rng() % 1000)};
  CHECK(block_partition(r, 4).reassemble() == r);
}

TEST_CASE("downsampled_spectrum") {
  std::vector<Spectrum> blocks(4, Spectrum(2, 2));
  CHECK(downsampled_spectrum(BlockSet(2, blocks)) == Spectrum(2, 2));
  blocks[0](1, 0) = Complex(8.0, -4.0);
  const Spectrum out = downsampled_spectrum(BlockSet(2, blocks));
  CHECK(out(1, 0) == Complex(2.0, -1.0));
  CHECK(out(0, 0) == Complex(0.0));
}

TEST_CASE("block identity: spectrum of the downsampled signal equals the scaled block sum") {
  std::mt19937_64 rng(18);
  for (std::size_t r : {2u, 4u}) {
    for (std::size_t size : {8u, 12u, 16u}) {
      const RealGrid x = random_grid(size, size, rng);
      const Spectrum direct = dft2(downsample(x, r));
      CHECK(max_diff(downsampled_spectrum(block_partition(dft2(x), r)), direct) <= 1e-9);
      CHECK(max_diff(direct, oracle::dft(oracle::decimate(to_oracle(x), r))) <= 1e-9);
    }
  }
}

}
