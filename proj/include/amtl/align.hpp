#pragma once

#include "amtl/boost.hpp"
#include "amtl/data.hpp"
#include "amtl/tree.hpp"

#include <Eigen/Dense>

namespace amtl {

/// Columns of the alignment design matrix: four inputs, the source model's
/// prediction, and an intercept.
inline constexpr int kAlignColumns = kNumInputs + 2;

using AlignVector = Eigen::Matrix<double, kAlignColumns, 1>;

/// Minimum-norm least-squares solution of A h = b via complete orthogonal
/// decomposition. Identical to (A^T A)^-1 A^T b when A has full column rank.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> solve_least_squares(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Matrix = Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return cod.solve(b);
}

/// Linear map from [x, f_s(x), 1] to the target output.
struct AlignmentMap {
  AlignVector h = AlignVector::Zero();
  TreeModel source_model;

  /// The selector that passes source outputs through unchanged.
  static AlignVector selector() {
    AlignVector s = AlignVector::Zero();
    s(kNumInputs) = 1.0;
    return s;
  }
};

/// Rows [x_i, f_s(x_i), 1] for every sample of `data`.
Eigen::MatrixXd alignment_design(const TreeModel& source_model, const Dataset& data);

/// Fits f_s on `source`, then solves for h. Throws SizeError when the target
/// has fewer than six rows and EmptyDatasetError for an empty source.
AlignmentMap fit_alignment(const Dataset& source, const Dataset& target_train, const TreeParams& tree = {});
AlignmentMap fit_alignment(const TreeModel& source_model, const Dataset& target_train);

/// Source inputs paired with outputs [x, y, 1] . h.
Dataset transform_source(const AlignmentMap& map, const Dataset& source);

/// One tree on target rows followed by aligned source rows.
TreeModel fit_sa_dtr(const Dataset& source, const Dataset& target_train, const TreeParams& tree = {});

/// TrAdaBoost with the aligned source in place of the raw source.
BoostEnsemble fit_sa_i_dtr(const Dataset& source, const Dataset& target_train, const BoostParams& params,
                           std::uint64_t seed, const TreeParams& alignment_tree = {});

}  // namespace amtl
