#pragma once

#include "amtl/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <numeric>
#include <vector>

namespace amtl {

/// Mean of squared residuals. Throws SizeError on empty or mismatched input.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar mse(const Eigen::MatrixBase<DerivedA>& predictions,
                              const Eigen::MatrixBase<DerivedB>& truths) {
  if (predictions.size() != truths.size() || predictions.size() == 0) {
    throw SizeError("mse: length mismatch or empty input");
  }
  return (predictions - truths).squaredNorm() / static_cast<typename DerivedA::Scalar>(predictions.size());
}

/// Median; an even count averages the two middle values.
template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) throw SizeError("median: empty input");
  std::vector<Scalar> v(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) v[static_cast<std::size_t>(i)] = values(i);
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const Scalar upper = v[mid];
  const Scalar lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / Scalar(2);
}

/// Weighted median: the smallest value whose cumulative weight, taken in
/// ascending order of value, reaches half of the total weight.
template <typename DerivedV, typename DerivedW>
typename DerivedV::Scalar weighted_median(const Eigen::DenseBase<DerivedV>& values,
                                          const Eigen::DenseBase<DerivedW>& weights) {
  using Scalar = typename DerivedV::Scalar;
  const Eigen::Index n = values.size();
  if (n == 0 || weights.size() != n) throw SizeError("weighted_median: empty or mismatched input");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  // Sequential sums keep the result independent of vectorization order.
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) total += weights(i);
  const Scalar half = total / Scalar(2);
  Scalar cumulative = 0;
  for (Eigen::Index i : order) {
    cumulative += weights(i);
    if (cumulative >= half) return values(i);
  }
  return values(order.back());
}

}  // namespace amtl
