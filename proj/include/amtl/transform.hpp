#pragma once

#include "amtl/data.hpp"
#include "amtl/errors.hpp"
#include "amtl/tree.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace amtl {

/// Source-model reformulation f_t(x) = m1 * f_s(m2 .* x + b2) + b1.
struct TransformParams {
  static constexpr int kSize = 7;
  using Vector = Eigen::Matrix<double, kSize, 1>;

  double m1 = 1.0;  // output scale
  double b1 = 0.0;  // output shift
  double b2 = 0.0;  // input shift, broadcast to every feature
  InputVector m2 = InputVector::Ones();  // per-feature input scale

  static TransformParams identity() { return {}; }

  /// Packed as [m1, b1, b2, m2(0..3)].
  Vector to_vector() const;
  static TransformParams from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);

  friend bool operator==(const TransformParams& a, const TransformParams& b) {
    return a.m1 == b.m1 && a.b1 == b.b1 && a.b2 == b.b2 && a.m2 == b.m2;
  }
};

/// Any model with a free `predict(model, x)`. Throws InputError when the
/// transformed input or the result is not finite.
template <typename Model>
double reformed_predict(const TransformParams& p, const Model& source_model, const InputVector& x) {
  const InputVector z = (p.m2.cwiseProduct(x).array() + p.b2).matrix();
  if (!z.allFinite()) throw InputError("reformed model: non-finite transformed input");
  const double y = p.m1 * predict(source_model, z) + p.b1;
  if (!std::isfinite(y)) throw InputError("reformed model: non-finite output");
  return y;
}

// ---- Genetic algorithm ---------------------------------------------------------

struct GaConfig {
  int max_iterations = 5000;  // generations
  int population_size = 200;
  Eigen::VectorXd lower = Eigen::VectorXd::Constant(TransformParams::kSize, -10.0);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(TransformParams::kSize, 10.0);
  std::uint64_t seed = 0;
  int tournament_size = 3;
  double crossover_probability = 0.9;
  double mutation_probability = 0.1;  // per gene
  double mutation_sigma = 0.5;
  int elitism = 1;
  /// Stop after this many generations without improvement; 0 disables.
  int patience = 0;
  /// Individuals placed in the initial population before random ones.
  std::vector<Eigen::VectorXd> initial_individuals;

  /// Same settings over a [lo, hi]^dim box.
  static GaConfig box(int dim, double lo, double hi);
  int dimension() const { return static_cast<int>(lower.size()); }
  void validate() const;
};

struct GaResult {
  Eigen::VectorXd argmin;
  double value = 0.0;
  /// Best-ever value after the initial population (index 0) and after each
  /// generation.
  std::vector<double> best_history;
  int generations = 0;
  long evaluations = 0;
};

using Objective = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

/// Generational GA: tournament selection, uniform crossover, Gaussian
/// mutation clipped to the box, elitism. Deterministic per seed. Throws
/// ObjectiveError when the objective returns a non-finite value.
GaResult ga_minimize(const Objective& objective, const GaConfig& cfg);

// ---- Re-DTR ------------------------------------------------------------------------

struct ReDtrModel {
  TransformParams params;
  TreeModel source_model;
  double objective = 0.0;           // target-training SSE at `params`
  double identity_objective = 0.0;  // same, at the identity transform
  GaResult search;
};

/// Sum of squared target residuals of the reformed model.
double reformed_sse(const TransformParams& p, const TreeModel& source_model, const Dataset& target);

/// Trains f_s on the source, then searches the seven transform parameters
/// with the identity transform seeded into the initial population.
ReDtrModel fit_re_dtr(const Dataset& source, const Dataset& target_train, const GaConfig& cfg,
                      const TreeParams& tree = {});
ReDtrModel fit_re_dtr(const TreeModel& source_model, const Dataset& target_train, const GaConfig& cfg);

double predict(const ReDtrModel& model, const InputVector& x);
Eigen::VectorXd predict(const ReDtrModel& model, const InputMatrix& x);

}  // namespace amtl
