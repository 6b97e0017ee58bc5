#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "aliascope/nn/tensor.hpp"

namespace gradcheck {

using aliascope::nn::Tensor;

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-6;

// ||a - n|| / max(||a||, ||n||), zero when both vanish.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Central differences of `loss` with respect to every element of `t`.
inline std::vector<double> numeric_gradient(Tensor<double>& t, const std::function<double()>& loss) {
  std::vector<double> out(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double saved = t[i];
    t[i] = saved + kStep;
    const double up = loss();
    t[i] = saved - kStep;
    const double down = loss();
    t[i] = saved;
    out[i] = (up - down) / (2.0 * kStep);
  }
  return out;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> as_vector(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace gradcheck
