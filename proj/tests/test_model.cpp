#include <doctest.h>

#include <random>

#include "aliascope/nn/model.hpp"
#include "gradcheck.hpp"

using namespace aliascope::nn;

namespace {

std::vector<std::string> names(const std::vector<DownsamplePointId>& points) {
  std::vector<std::string> out;
  for (const auto& p : points) out.push_back(p.name);
  return out;
}

ModelSpec spec_of(Family f, std::size_t width, std::size_t depth, std::size_t classes = 10, std::size_t size = 16) {
  ModelSpec s;
  s.family = f;
  s.base_width = width;
  s.depth = depth;
  s.n_classes = classes;
  s.input_size = size;
  return s;
}

template <typename T>
Tensor<T> random_input(std::size_t n, std::size_t size, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Tensor<T> t({n, 1, size, size});
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("family names") {
  for (Family f : {Family::Fc1h, Family::Fc2h, Family::ResnetC, Family::ResnetW, Family::ResnetD}) {
    CHECK(parse_family(family_name(f)) == f);
  }
  CHECK_THROWS_AS(parse_family("resnet-x"), std::invalid_argument);
}

TEST_CASE("toy resnet has four stride-2 downsample points") {
  const Model<float> m(spec_of(Family::ResnetC, 4, 3), 0);
  CHECK(names(m.downsample_points()) == std::vector<std::string>{"1", "*1", "2", "*2"});
  for (const auto& p : m.downsample_points()) CHECK(p.stage >= 1);
  CHECK(m.stage_widths() == std::vector<std::size_t>{4, 4, 4});
}

TEST_CASE("ImageNet-style stem adds points 0 and m") {
  ModelSpec s = spec_of(Family::ResnetC, 4, 1, 10, 32);
  s.stem_stride = 2;
  s.stem_pool = true;
  const Model<float> m(s, 0);
  CHECK(names(m.downsample_points()) == std::vector<std::string>{"0", "m", "1", "*1", "2", "*2"});
}

TEST_CASE("fc models have no downsample points") {
  CHECK(Model<float>(spec_of(Family::Fc2h, 32, 0), 0).downsample_points().empty());
  CHECK(Model<float>(spec_of(Family::Fc1h, 32, 0), 0).downsample_points().empty());
}

TEST_CASE("parameter counts") {
  const ModelSpec fc = spec_of(Family::Fc1h, 128, 0, 400, 32);
  CHECK(Model<float>(fc, 0).parameter_count() == 1024 * 128 + 128 + 128 * 400 + 400);
  CHECK(analytic_parameter_count(fc) == 1024 * 128 + 128 + 128 * 400 + 400);
  const ModelSpec fc2 = spec_of(Family::Fc2h, 64, 0, 100, 32);
  CHECK(Model<float>(fc2, 0).parameter_count() == 1024 * 64 + 64 + 64 * 64 + 64 + 64 * 100 + 100);

  for (Family f : {Family::ResnetC, Family::ResnetW, Family::ResnetD}) {
    for (std::size_t w : {2u, 8u, 16u}) {
      for (std::size_t d : {1u, 2u, 3u}) {
        const ModelSpec s = spec_of(f, w, d, 100, 32);
        CHECK(Model<float>(s, 0).parameter_count() == analytic_parameter_count(s));
      }
    }
  }
}

TEST_CASE("resnet-w doubles the width at each transition") {
  const Model<float> m(spec_of(Family::ResnetW, 6, 1), 0);
  CHECK(m.stage_widths() == std::vector<std::size_t>{6, 12, 24});
}

TEST_CASE("initialization is seeded") {
  Model<float> a(spec_of(Family::ResnetC, 4, 1), 3), b(spec_of(Family::ResnetC, 4, 1), 3),
      c(spec_of(Family::ResnetC, 4, 1), 4);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  CHECK(*pa[0].value == *pb[0].value);
  CHECK(!(*pa[0].value == *pc[0].value));
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(Model<float>(spec_of(Family::ResnetC, 0, 1), 0), std::invalid_argument);
  CHECK_THROWS_AS(Model<float>(spec_of(Family::ResnetC, 4, 0), 0), std::invalid_argument);
  CHECK_THROWS_AS(Model<float>(spec_of(Family::ResnetC, 4, 1, 0), 0), std::invalid_argument);
}

TEST_CASE("eval before any training batch is refused") {
  Model<float> m(spec_of(Family::ResnetC, 2, 1), 0);
  CHECK(!m.has_running_stats());
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(m.forward(random_input<float>(1, 16, rng), Mode::Eval), std::logic_error);
  m.forward(random_input<float>(2, 16, rng), Mode::Train);
  CHECK(m.has_running_stats());
  CHECK_NOTHROW(m.forward(random_input<float>(1, 16, rng), Mode::Eval));
}

TEST_CASE("whole-model gradient check in double") {
  std::mt19937_64 rng(7);
  // 32x32 keeps a 2x2 grid in the last stage, so batchnorm there sees 12 values per channel.
  ModelSpec pooled = spec_of(Family::ResnetW, 2, 1, 3, 32);
  pooled.stem_stride = 2;
  pooled.stem_pool = true;
  const ModelSpec specs[] = {spec_of(Family::ResnetC, 2, 1, 3, 8), spec_of(Family::Fc2h, 5, 0, 3, 4), pooled};
  for (const ModelSpec& s : specs) {
    Model<double> m(s, 11);
    Tensor<double> x = random_input<double>(3, s.input_size, rng);
    const Tensor<double> r = [&] {
      Tensor<double> t({3, s.n_classes});
      std::normal_distribution<double> d;
      for (auto& v : t.values()) v = d(rng);
      return t;
    }();
    m.zero_grad();
    m.forward(x, Mode::Train);
    const Tensor<double> gx = m.backward(r);
    auto loss = [&] { return gradcheck::dot(m.forward(x, Mode::Train), r); };
    CHECK(gradcheck::relative_error(gradcheck::as_vector(gx), gradcheck::numeric_gradient(x, loss)) <=
          gradcheck::kTolerance);
    for (auto& p : m.parameters()) {
      INFO(p.name);
      const auto analytic = gradcheck::as_vector(*p.grad);
      CHECK(gradcheck::relative_error(analytic, gradcheck::numeric_gradient(*p.value, loss)) <=
            gradcheck::kTolerance);
    }
  }
}

}
