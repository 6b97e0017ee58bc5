#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>

#include "aliascope/binary_io.hpp"
#include "aliascope/oscillations.hpp"
#include "aliascope/spectral.hpp"

using namespace aliascope;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "aliascope_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("oscillations") {

TEST_CASE("frequency grid") {
  CHECK(frequency_grid(20).size() == 400);
  const auto one = frequency_grid(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].omega() == std::pair{0.0, 0.0});

  const auto two = frequency_grid(2);
  const double h = std::numbers::pi / 2.0;
  REQUIRE(two.size() == 4);
  CHECK(two[0].omega() == std::pair{0.0, 0.0});
  CHECK(two[1].omega() == std::pair{0.0, h});
  CHECK(two[2].omega() == std::pair{h, 0.0});
  CHECK(two[3].omega() == std::pair{h, h});
  for (std::uint32_t i = 0; i < 400; ++i) CHECK(FrequencyLabel::from_class_index(i, 20).class_index() == i);
}

TEST_CASE("noiseless DC sample is all ones") {
  std::mt19937_64 rng(1);
  const Sample s = generate_sample({0, 0, 20}, {0.0, 0.0}, 0.0, rng);
  CHECK(s.image == RealGrid(32, 32, 1.0));
}

TEST_CASE("pi/3 tone repeats every 6 pixels") {
  std::mt19937_64 rng(2);
  const Sample s = generate_sample({2, 2, 6}, {0.3, 1.1}, 0.0, rng);
  for (std::size_t i = 0; i + 6 < 32; ++i)
    for (std::size_t j = 0; j + 6 < 32; ++j) {
      CHECK(s.image(i, j) == doctest::Approx(s.image(i + 6, j)).epsilon(1e-12));
      CHECK(s.image(i, j) == doctest::Approx(s.image(i, j + 6)).epsilon(1e-12));
    }
}

TEST_CASE("noise stays within A/2") {
  std::mt19937_64 rng(3);
  for (double a : {0.01, 1.0, 3.0}) {
    const FrequencyLabel label{3, 7, 20};
    const auto [w1, w2] = label.omega();
    const Sample s = generate_sample(label, {0.4, 2.0}, a, rng);
    double worst = 0.0;
    for (std::size_t i = 0; i < 32; ++i)
      for (std::size_t j = 0; j < 32; ++j) {
        const double clean = std::cos(w1 * i + 0.4) * std::cos(w2 * j + 2.0);
        worst = std::max(worst, std::abs(s.image(i, j) - clean));
      }
    CHECK(worst <= a / 2.0);
    CHECK(worst > a / 4.0);
  }
}

TEST_CASE("noiseless sample concentrates its energy on the label's bins") {
  std::mt19937_64 rng(4);
  const FrequencyLabel label{5, 3, 8};  // omega = (5 pi / 8, 3 pi / 8): bins (10, 6) on a 32 grid
  const Sample s = generate_sample(label, {0.7, 0.2}, 0.0, rng);
  const Spectrum spec = dft2(s.image);
  double on = 0.0, total = 0.0;
  for (std::size_t k = 0; k < 32; ++k)
    for (std::size_t l = 0; l < 32; ++l) {
      const double e = std::norm(spec(k, l));
      total += e;
      if ((k == 10 || k == 22) && (l == 6 || l == 26)) on += e;
    }
  CHECK(on / total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dataset is balanced and deterministic") {
  const DatasetSpec small{2, 8, 8, 0.5, 9};
  const Dataset d = generate_dataset(small);
  std::map<std::uint32_t, int> counts;
  for (auto l : d.labels()) ++counts[l];
  CHECK(counts.size() == 4);
  for (const auto& [label, n] : counts) CHECK(n == 2);
  CHECK(generate_dataset(small) == d);
  CHECK(!(generate_dataset({2, 8, 8, 0.5, 10}) == d));

  const Dataset paper = generate_dataset({20, 32, 20000, 1.0, 7});
  std::map<std::uint32_t, int> per_class;
  for (auto l : paper.labels()) ++per_class[l];
  CHECK(per_class.size() == 400);
  for (const auto& [label, n] : per_class) CHECK(n == 50);
}

TEST_CASE("dataset generation does not depend on the worker count") {
  const DatasetSpec spec{3, 16, 90, 1.0, 5};
  setenv("ALIASCOPE_THREADS", "1", 1);
  const Dataset one = generate_dataset(spec);
  setenv("ALIASCOPE_THREADS", "3", 1);
  const Dataset three = generate_dataset(spec);
  unsetenv("ALIASCOPE_THREADS");
  CHECK(one == three);
}

TEST_CASE("dataset spec validation") {
  CHECK_THROWS_AS(DatasetSpec({2, 8, 7, 0.0, 0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(DatasetSpec({2, 8, 0, 0.0, 0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(DatasetSpec({0, 8, 4, 0.0, 0}).validate(), std::invalid_argument);
  CHECK_NOTHROW(DatasetSpec({2, 8, 12, 0.0, 0}).validate());
}

TEST_CASE("save and load round trip") {
  const Dataset d = generate_dataset({3, 12, 18, 1.0, 4});
  const auto path = scratch("roundtrip.oscd");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  CHECK(std::memcmp(back.pixels().data(), d.pixels().data(), d.pixels().size_bytes()) == 0);
}

TEST_CASE("corrupted files are rejected with a specific message") {
  const Dataset d = generate_dataset({2, 8, 4, 1.0, 4});
  std::vector<std::uint8_t> bytes = encode_dataset(d);

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  CHECK(error_of([&] { decode_dataset(flipped); }).find("checksum") != std::string::npos);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK(error_of([&] { decode_dataset(magic); }).find("unrecognized format") != std::string::npos);

  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2));
  CHECK(error_of([&] { decode_dataset(cut); }).find("truncated") != std::string::npos);

  CHECK_THROWS_AS(decode_dataset(std::span<const std::uint8_t>{}), FormatError);
  CHECK_THROWS(load_dataset(scratch("does-not-exist.oscd")));
}

}
