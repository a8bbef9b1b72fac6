#include "amtl/align.hpp"

#include "amtl/errors.hpp"

namespace amtl {

Eigen::MatrixXd alignment_design(const TreeModel& source_model, const Dataset& data) {
  Eigen::MatrixXd a(data.size(), kAlignColumns);
  a.leftCols(kNumInputs) = data.inputs();
  a.col(kNumInputs) = predict_tree(source_model, data.inputs());
  a.col(kNumInputs + 1).setOnes();
  return a;
}

AlignmentMap fit_alignment(const TreeModel& source_model, const Dataset& target_train) {
  if (target_train.size() < kAlignColumns) {
    throw SizeError("alignment: need at least " + std::to_string(kAlignColumns) + " target rows, got " +
                    std::to_string(target_train.size()));
  }
  AlignmentMap map;
  map.source_model = source_model;
  map.h = solve_least_squares(alignment_design(source_model, target_train), target_train.outputs());
  if (!map.h.allFinite()) throw FitError("alignment: non-finite solution");
  return map;
}

AlignmentMap fit_alignment(const Dataset& source, const Dataset& target_train, const TreeParams& tree) {
  if (source.empty()) throw EmptyDatasetError("alignment: empty source");
  if (target_train.size() < kAlignColumns) {
    throw SizeError("alignment: need at least " + std::to_string(kAlignColumns) + " target rows, got " +
                    std::to_string(target_train.size()));
  }
  return fit_alignment(fit_tree(source, tree), target_train);
}

Dataset transform_source(const AlignmentMap& map, const Dataset& source) {
  Eigen::MatrixXd d0(source.size(), kAlignColumns);
  d0.leftCols(kNumInputs) = source.inputs();
  d0.col(kNumInputs) = source.outputs();
  d0.col(kNumInputs + 1).setOnes();
  return source.with_outputs(d0 * map.h);
}

TreeModel fit_sa_dtr(const Dataset& source, const Dataset& target_train, const TreeParams& tree) {
  if (source.empty()) throw EmptyDatasetError("sa-dtr: empty source");
  const AlignmentMap map = fit_alignment(source, target_train, tree);
  return fit_tree(Dataset::concat(target_train, transform_source(map, source)), tree);
}

BoostEnsemble fit_sa_i_dtr(const Dataset& source, const Dataset& target_train, const BoostParams& params,
                           std::uint64_t seed, const TreeParams& alignment_tree) {
  if (source.empty()) throw EmptyDatasetError("sa-i-dtr: empty source");
  const AlignmentMap map = fit_alignment(source, target_train, alignment_tree);
  return fit_tradaboost(transform_source(map, source), target_train, params, seed);
}

}  // namespace amtl
