#include "amtl/transform.hpp"

#include "amtl/random.hpp"

#include <algorithm>
#include <numeric>

namespace amtl {

TransformParams::Vector TransformParams::to_vector() const {
  Vector v;
  v << m1, b1, b2, m2;
  return v;
}

TransformParams TransformParams::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kSize) throw SizeError("transform: expected 7 parameters");
  TransformParams p;
  p.m1 = v(0);
  p.b1 = v(1);
  p.b2 = v(2);
  p.m2 = v.tail<kNumInputs>();
  return p;
}

GaConfig GaConfig::box(int dim, double lo, double hi) {
  GaConfig cfg;
  cfg.lower = Eigen::VectorXd::Constant(dim, lo);
  cfg.upper = Eigen::VectorXd::Constant(dim, hi);
  return cfg;
}

void GaConfig::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) throw ConfigError("ga: bounds have mismatched sizes");
  if (!lower.allFinite() || !upper.allFinite() || !(lower.array() < upper.array()).all()) {
    throw ConfigError("ga: every bound needs lo < hi");
  }
  if (population_size < 2) throw ConfigError("ga: population must be >= 2");
  if (max_iterations < 1) throw ConfigError("ga: max_iterations must be >= 1");
  if (tournament_size < 1) throw ConfigError("ga: tournament size must be >= 1");
  if (elitism < 0 || elitism >= population_size) throw ConfigError("ga: elitism must be in [0, population)");
  if (patience < 0) throw ConfigError("ga: patience must be >= 0");
  if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0) ||
      !(mutation_probability >= 0.0 && mutation_probability <= 1.0) || !(mutation_sigma >= 0.0)) {
    throw ConfigError("ga: rates must be probabilities and sigma nonnegative");
  }
  if (static_cast<int>(initial_individuals.size()) > population_size) {
    throw ConfigError("ga: more initial individuals than population slots");
  }
  for (const auto& ind : initial_individuals) {
    if (ind.size() != lower.size() || !(ind.array() >= lower.array()).all() ||
        !(ind.array() <= upper.array()).all()) {
      throw ConfigError("ga: initial individual outside the search box");
    }
  }
}

GaResult ga_minimize(const Objective& objective, const GaConfig& cfg) {
  cfg.validate();
  const Index dim = cfg.lower.size();
  const int pop_size = cfg.population_size;
  Rng rng(derive_seed(cfg.seed, "ga"));

  // One individual per column.
  Eigen::MatrixXd pop(dim, pop_size);
  Eigen::MatrixXd next(dim, pop_size);
  Eigen::VectorXd fitness(pop_size);
  Eigen::VectorXd next_fitness(pop_size);

  GaResult result;
  auto evaluate = [&](const Eigen::Ref<const Eigen::VectorXd>& ind) {
    const double f = objective(ind);
    ++result.evaluations;
    if (!std::isfinite(f)) throw ObjectiveError("ga: objective returned a non-finite value");
    return f;
  };

  for (int i = 0; i < pop_size; ++i) {
    if (i < static_cast<int>(cfg.initial_individuals.size())) {
      pop.col(i) = cfg.initial_individuals[static_cast<std::size_t>(i)];
    } else {
      for (Index d = 0; d < dim; ++d) pop(d, i) = rng.uniform(cfg.lower(d), cfg.upper(d));
    }
    fitness(i) = evaluate(pop.col(i));
  }

  Index best_index = 0;
  fitness.minCoeff(&best_index);
  result.argmin = pop.col(best_index);
  result.value = fitness(best_index);
  result.best_history.push_back(result.value);

  std::vector<int> order(static_cast<std::size_t>(pop_size));
  auto tournament = [&]() {
    int winner = static_cast<int>(rng.index(static_cast<std::size_t>(pop_size)));
    for (int k = 1; k < cfg.tournament_size; ++k) {
      const int c = static_cast<int>(rng.index(static_cast<std::size_t>(pop_size)));
      if (fitness(c) < fitness(winner) || (fitness(c) == fitness(winner) && c < winner)) winner = c;
    }
    return winner;
  };

  int stale = 0;
  for (int gen = 1; gen <= cfg.max_iterations; ++gen) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + cfg.elitism, order.end(), [&](int a, int b) {
      return fitness(a) < fitness(b) || (fitness(a) == fitness(b) && a < b);
    });
    for (int e = 0; e < cfg.elitism; ++e) {
      next.col(e) = pop.col(order[static_cast<std::size_t>(e)]);
      next_fitness(e) = fitness(order[static_cast<std::size_t>(e)]);
    }
    for (int i = cfg.elitism; i < pop_size; ++i) {
      const int p1 = tournament();
      const int p2 = tournament();
      if (rng.bernoulli(cfg.crossover_probability)) {
        for (Index d = 0; d < dim; ++d) next(d, i) = rng.bernoulli(0.5) ? pop(d, p1) : pop(d, p2);
      } else {
        next.col(i) = pop.col(p1);
      }
      for (Index d = 0; d < dim; ++d) {
        if (rng.bernoulli(cfg.mutation_probability)) {
          next(d, i) = std::clamp(next(d, i) + cfg.mutation_sigma * rng.normal(), cfg.lower(d), cfg.upper(d));
        }
      }
      next_fitness(i) = evaluate(next.col(i));
    }
    pop.swap(next);
    fitness.swap(next_fitness);

    fitness.minCoeff(&best_index);
    if (fitness(best_index) < result.value) {
      result.value = fitness(best_index);
      result.argmin = pop.col(best_index);
      stale = 0;
    } else {
      ++stale;
    }
    result.best_history.push_back(result.value);
    result.generations = gen;
    if (cfg.patience > 0 && stale >= cfg.patience) break;
  }
  return result;
}

double reformed_sse(const TransformParams& p, const TreeModel& source_model, const Dataset& target) {
  double sse = 0.0;
  for (Index i = 0; i < target.size(); ++i) {
    const double r = reformed_predict(p, source_model, target.input(i)) - target.outputs()(i);
    sse += r * r;
  }
  return sse;
}

ReDtrModel fit_re_dtr(const TreeModel& source_model, const Dataset& target_train, const GaConfig& cfg) {
  if (target_train.empty()) throw EmptyDatasetError("re-dtr: empty target");
  if (cfg.dimension() != TransformParams::kSize) throw ConfigError("re-dtr: GA must search 7 variables");

  GaConfig search = cfg;
  search.initial_individuals.insert(search.initial_individuals.begin(),
                                    Eigen::VectorXd(TransformParams::identity().to_vector()));

  const InputMatrix& x = target_train.inputs();
  const Eigen::VectorXd& y = target_train.outputs();
  const Objective objective = [&](const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m1 = v(0);
    const double b1 = v(1);
    const double b2 = v(2);
    const InputVector m2 = v.tail<kNumInputs>();
    double sse = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
      const InputVector z = (m2.cwiseProduct(x.row(i).transpose()).array() + b2).matrix();
      const double r = m1 * source_model.predict_unchecked(z) + b1 - y(i);
      sse += r * r;
    }
    return sse;
  };

  ReDtrModel model;
  model.source_model = source_model;
  model.search = ga_minimize(objective, search);
  model.params = TransformParams::from_vector(model.search.argmin);
  model.objective = model.search.value;
  model.identity_objective = reformed_sse(TransformParams::identity(), source_model, target_train);
  return model;
}

ReDtrModel fit_re_dtr(const Dataset& source, const Dataset& target_train, const GaConfig& cfg,
                      const TreeParams& tree) {
  if (source.empty()) throw EmptyDatasetError("re-dtr: empty source");
  return fit_re_dtr(fit_tree(source, tree), target_train, cfg);
}

double predict(const ReDtrModel& model, const InputVector& x) {
  return reformed_predict(model.params, model.source_model, x);
}

Eigen::VectorXd predict(const ReDtrModel& model, const InputMatrix& x) {
  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict(model, InputVector(x.row(i).transpose()));
  return out;
}

}  // namespace amtl
