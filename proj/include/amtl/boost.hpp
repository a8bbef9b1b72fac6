#pragma once

#include "amtl/data.hpp"
#include "amtl/tree.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace amtl {

enum class BoostLoss { linear, square, exponential };

std::string_view to_string(BoostLoss loss);
BoostLoss parse_boost_loss(std::string_view name);

/// Two-stage TrAdaBoost.R2 hyperparameters. The defaults are the first
/// default setting (N = 100, maxJ = 10, K = 5) with depth-4 base trees.
struct BoostParams {
  int max_boost_iterations = 100;  // N
  int max_global_iterations = 10;  // maxJ
  int folds = 5;                   // K
  BoostLoss loss = BoostLoss::linear;
  TreeParams tree{4, 1};

  void validate() const;
};

/// Source rows first, then target rows, with one weight per row.
struct WeightedPool {
  InputMatrix x;
  Eigen::VectorXd y;
  Eigen::VectorXd weights;
  Index n_source = 0;
  Index n_target = 0;

  /// Uniform weights 1 / (n_s + n_t).
  static WeightedPool combine(const Dataset& source, const Dataset& target);

  Index size() const { return y.size(); }
  auto source_weights() { return weights.head(n_source); }
  auto target_weights() { return weights.tail(n_target); }
  auto source_weights() const { return weights.head(n_source); }
  auto target_weights() const { return weights.tail(n_target); }
};

struct BoostStage {
  TreeModel tree;
  double beta = 0.5;  // confidence, in (0, 1)

  /// Weight of this tree in the weighted median.
  double vote() const;
};

struct BoostEnsemble {
  std::vector<BoostStage> stages;
  double error = 0.0;        // cross-validated MSE of the selected stage
  int selected_global = 0;   // 1-based J of the selected stage
  std::vector<double> stage_errors;  // E_J for every global iteration
  BoostParams params;
};

/// Observation of one weight update, for diagnostics and property tests.
struct WeightUpdate {
  enum class Kind { target_boost, source_reweight };
  Kind kind = Kind::target_boost;
  int global_iteration = 0;
  int boost_iteration = 0;
  Index n_source = 0;
  double beta = 1.0;
  Eigen::VectorXd errors;
  Eigen::VectorXd before;
  Eigen::VectorXd after;
};
using UpdateObserver = std::function<void(const WeightUpdate&)>;

/// Confidence clamp applied to every beta.
inline constexpr double kBetaMin = 1e-10;
inline constexpr double kBetaMax = 1.0 - 1e-10;

/// Per-row adjusted error in [0, 1]: residual over the pool's largest
/// residual (linear), its square, or 1 - exp(-ratio). All zeros for a perfect
/// model.
Eigen::VectorXd adjusted_errors(const WeightedPool& pool, const TreeModel& model,
                                BoostLoss loss = BoostLoss::linear);

/// beta = eps / (1 - eps), clamped to [kBetaMin, kBetaMax].
double confidence(double weighted_error);

struct StageResult {
  std::vector<BoostStage> stages;
  double cv_error = 0.0;
};

/// One boosting stage on a copy of the pool weights: target weights move,
/// source weights stay. The returned error is the K-fold cross-validated
/// MSE over the target rows. Throws SizeError/ConfigError on bad input.
StageResult boost_stage(const WeightedPool& pool, const BoostParams& params, std::uint64_t seed,
                        const UpdateObserver& observer = {}, int global_iteration = 1);

/// Source rows scaled by beta^(1 - e), target rows only renormalized.
WeightedPool source_weight_update(const WeightedPool& pool, const TreeModel& model,
                                  BoostLoss loss = BoostLoss::linear, const UpdateObserver& observer = {},
                                  int global_iteration = 1);

/// Runs maxJ global iterations and keeps the stage with the lowest
/// cross-validated error (earliest on ties).
BoostEnsemble fit_tradaboost(const Dataset& source, const Dataset& target_train, const BoostParams& params,
                             std::uint64_t seed, const UpdateObserver& observer = {});

/// Weighted median of the tree predictions with votes ln(1 / beta).
double predict_ensemble(const BoostEnsemble& ensemble, const InputVector& x);
double predict_ensemble(std::span<const BoostStage> stages, const InputVector& x);
Eigen::VectorXd predict_ensemble(const BoostEnsemble& ensemble, const InputMatrix& x);

}  // namespace amtl
