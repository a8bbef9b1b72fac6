#include "amtl/boost.hpp"

#include "amtl/errors.hpp"
#include "amtl/random.hpp"
#include "amtl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace amtl {

std::string_view to_string(BoostLoss loss) {
  switch (loss) {
    case BoostLoss::linear: return "linear";
    case BoostLoss::square: return "square";
    case BoostLoss::exponential: return "exponential";
  }
  return "?";
}

BoostLoss parse_boost_loss(std::string_view name) {
  if (name == "linear") return BoostLoss::linear;
  if (name == "square") return BoostLoss::square;
  if (name == "exponential") return BoostLoss::exponential;
  throw ConfigError("unknown boosting loss '" + std::string(name) + "'");
}

void BoostParams::validate() const {
  if (max_boost_iterations < 1) throw ConfigError("boost: N must be >= 1");
  if (max_global_iterations < 1) throw ConfigError("boost: maxJ must be >= 1");
  if (folds < 2) throw ConfigError("boost: K must be >= 2");
}

WeightedPool WeightedPool::combine(const Dataset& source, const Dataset& target) {
  WeightedPool pool;
  pool.n_source = source.size();
  pool.n_target = target.size();
  pool.x.resize(pool.n_source + pool.n_target, kNumInputs);
  pool.x << source.inputs(), target.inputs();
  pool.y.resize(pool.n_source + pool.n_target);
  pool.y << source.outputs(), target.outputs();
  pool.weights = Eigen::VectorXd::Constant(pool.size(), 1.0 / static_cast<double>(pool.size()));
  return pool;
}

double BoostStage::vote() const { return std::log(1.0 / beta); }

namespace {

Eigen::VectorXd adjusted_errors(const InputMatrix& x, const Eigen::VectorXd& y, const TreeModel& model,
                                BoostLoss loss) {
  Eigen::VectorXd r(y.size());
  for (Index i = 0; i < y.size(); ++i) r(i) = std::abs(model.predict_unchecked(x.row(i).transpose()) - y(i));
  const double d_max = y.size() > 0 ? r.maxCoeff() : 0.0;
  if (!(d_max > 0.0)) return Eigen::VectorXd::Zero(y.size());
  r /= d_max;
  switch (loss) {
    case BoostLoss::linear: break;
    case BoostLoss::square: r = r.cwiseAbs2(); break;
    case BoostLoss::exponential: r = (1.0 - (-r.array()).exp()).matrix(); break;
  }
  return r;
}

void normalize(Eigen::VectorXd& w) { w /= w.sum(); }

// AdaBoost.R2 with the source weights held fixed. `w` is the starting weight
// vector; only the trailing n_target entries are reweighted.
std::vector<BoostStage> run_boosting(const InputMatrix& x, const Eigen::VectorXd& y, Eigen::VectorXd w,
                                     Index n_source, const BoostParams& params, const UpdateObserver& observer,
                                     int global_iteration) {
  const Index n_target = y.size() - n_source;
  normalize(w);
  std::vector<BoostStage> stages;
  for (int j = 1; j <= params.max_boost_iterations; ++j) {
    TreeModel tree = fit_tree(x, y, w, params.tree);
    const Eigen::VectorXd e = adjusted_errors(x, y, tree, params.loss);
    const double eps = w.dot(e);
    if (eps > 0.5) {
      // A worse-than-chance tree is dropped unless it is the only one.
      if (stages.empty()) stages.push_back({std::move(tree), confidence(eps)});
      break;
    }
    const double beta = confidence(eps);
    stages.push_back({std::move(tree), beta});
    if (eps <= 0.0) break;

    WeightUpdate event;
    if (observer) event.before = w;
    for (Index i = n_source; i < n_source + n_target; ++i) w(i) *= std::pow(beta, 1.0 - e(i));
    normalize(w);
    if (observer) {
      event.kind = WeightUpdate::Kind::target_boost;
      event.global_iteration = global_iteration;
      event.boost_iteration = j;
      event.n_source = n_source;
      event.beta = beta;
      event.errors = e;
      event.after = w;
      observer(event);
    }
  }
  return stages;
}

std::vector<std::vector<Index>> make_folds(Index n_target, int k, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n_target));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(seed, "boost/folds"));
  rng.shuffle(std::span<Index>(order));
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % static_cast<std::size_t>(k)].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace

double confidence(double weighted_error) {
  if (!(weighted_error < 1.0)) return kBetaMax;
  return std::clamp(weighted_error / (1.0 - weighted_error), kBetaMin, kBetaMax);
}

Eigen::VectorXd adjusted_errors(const WeightedPool& pool, const TreeModel& model, BoostLoss loss) {
  return adjusted_errors(pool.x, pool.y, model, loss);
}

StageResult boost_stage(const WeightedPool& pool, const BoostParams& params, std::uint64_t seed,
                        const UpdateObserver& observer, int global_iteration) {
  params.validate();
  if (pool.size() == 0) throw EmptyDatasetError("boost: empty pool");
  if (pool.n_target < params.folds) {
    throw SizeError("boost: " + std::to_string(pool.n_target) + " target rows cannot fill " +
                    std::to_string(params.folds) + " folds");
  }

  StageResult result;
  result.stages = run_boosting(pool.x, pool.y, pool.weights, pool.n_source, params, observer, global_iteration);

  // K-fold estimate over the target rows: each fold is held out, the stage is
  // rebuilt on the remaining pool from the same starting weights, and the
  // held-out rows are predicted by its weighted median.
  double sse = 0.0;
  for (const auto& fold : make_folds(pool.n_target, params.folds, seed)) {
    const Index n_keep = pool.size() - static_cast<Index>(fold.size());
    InputMatrix x(n_keep, kNumInputs);
    Eigen::VectorXd y(n_keep);
    Eigen::VectorXd w(n_keep);
    Index at = 0;
    std::size_t held = 0;
    for (Index i = 0; i < pool.size(); ++i) {
      const Index t = i - pool.n_source;
      if (t >= 0 && held < fold.size() && fold[held] == t) {
        ++held;
        continue;
      }
      x.row(at) = pool.x.row(i);
      y(at) = pool.y(i);
      w(at) = pool.weights(i);
      ++at;
    }
    const auto stages = run_boosting(x, y, w, pool.n_source, params, {}, global_iteration);
    for (Index t : fold) {
      const Index i = pool.n_source + t;
      const double r = predict_ensemble(stages, pool.x.row(i).transpose()) - pool.y(i);
      sse += r * r;
    }
  }
  result.cv_error = sse / static_cast<double>(pool.n_target);
  return result;
}

WeightedPool source_weight_update(const WeightedPool& pool, const TreeModel& model, BoostLoss loss,
                                  const UpdateObserver& observer, int global_iteration) {
  const Eigen::VectorXd e = adjusted_errors(pool, model, loss);
  const double eps = pool.weights.dot(e) / pool.weights.sum();
  const double beta = confidence(eps);
  WeightedPool next = pool;
  for (Index i = 0; i < pool.n_source; ++i) next.weights(i) *= std::pow(beta, 1.0 - e(i));
  normalize(next.weights);
  if (observer) {
    WeightUpdate event;
    event.kind = WeightUpdate::Kind::source_reweight;
    event.global_iteration = global_iteration;
    event.n_source = pool.n_source;
    event.beta = beta;
    event.errors = e;
    event.before = pool.weights;
    event.after = next.weights;
    observer(event);
  }
  return next;
}

BoostEnsemble fit_tradaboost(const Dataset& source, const Dataset& target_train, const BoostParams& params,
                             std::uint64_t seed, const UpdateObserver& observer) {
  params.validate();
  if (source.empty() || target_train.empty()) throw EmptyDatasetError("tradaboost: empty dataset");
  WeightedPool pool = WeightedPool::combine(source, target_train);

  BoostEnsemble best;
  best.params = params;
  bool have_best = false;
  for (int J = 1; J <= params.max_global_iterations; ++J) {
    StageResult stage = boost_stage(pool, params, derive_seed(seed, static_cast<std::uint64_t>(J)), observer, J);
    best.stage_errors.push_back(stage.cv_error);
    if (std::isfinite(stage.cv_error) && !stage.stages.empty() && (!have_best || stage.cv_error < best.error)) {
      best.stages = std::move(stage.stages);
      best.error = stage.cv_error;
      best.selected_global = J;
      have_best = true;
    }
    if (J < params.max_global_iterations) {
      const TreeModel model = fit_tree(pool.x, pool.y, pool.weights, params.tree);
      pool = source_weight_update(pool, model, params.loss, observer, J);
    }
  }
  if (!have_best) throw FitError("tradaboost: every stage failed");
  return best;
}

double predict_ensemble(std::span<const BoostStage> stages, const InputVector& x) {
  if (stages.empty()) throw FitError("ensemble: no stages");
  if (stages.size() == 1) return stages.front().tree.predict_unchecked(x);
  Eigen::VectorXd predictions(static_cast<Index>(stages.size()));
  Eigen::VectorXd votes(static_cast<Index>(stages.size()));
  for (std::size_t i = 0; i < stages.size(); ++i) {
    predictions(static_cast<Index>(i)) = stages[i].tree.predict_unchecked(x);
    votes(static_cast<Index>(i)) = stages[i].vote();
  }
  return weighted_median(predictions, votes);
}

double predict_ensemble(const BoostEnsemble& ensemble, const InputVector& x) {
  if (!x.allFinite()) throw InputError("ensemble: non-finite input");
  return predict_ensemble(std::span<const BoostStage>(ensemble.stages), x);
}

Eigen::VectorXd predict_ensemble(const BoostEnsemble& ensemble, const InputMatrix& x) {
  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict_ensemble(ensemble, InputVector(x.row(i).transpose()));
  return out;
}

}  // namespace amtl
