#pragma once

#include "amtl/data.hpp"

#include <array>
#include <initializer_list>
#include <random>
#include <vector>

namespace amtl::testing {

/// Dataset from {p, v, h, e, y} rows.
inline Dataset rows(std::initializer_list<std::array<double, 5>> r, TaskSpec task = TaskSpec::target()) {
  InputMatrix x(static_cast<Index>(r.size()), kNumInputs);
  Eigen::VectorXd y(static_cast<Index>(r.size()));
  Index i = 0;
  for (const auto& row : r) {
    for (int k = 0; k < kNumInputs; ++k) x(i, k) = row[static_cast<std::size_t>(k)];
    y(i) = row[4];
    ++i;
  }
  return Dataset(std::move(task), std::move(x), std::move(y));
}

/// Inputs uniform in [lo, hi], outputs from `f`, using std::mt19937_64 so the
/// fixture does not share code with the library's generator.
template <typename F>
Dataset random_dataset(int n, std::uint64_t seed, F f, double lo = -1.0, double hi = 1.0,
                       TaskSpec task = TaskSpec::target()) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  InputMatrix x(n, kNumInputs);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < kNumInputs; ++k) x(i, k) = u(gen);
    y(i) = f(InputVector(x.row(i).transpose()));
  }
  return Dataset(std::move(task), std::move(x), std::move(y));
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace amtl::testing
