#include "amtl/boost.hpp"
#include "amtl/errors.hpp"
#include "amtl/random.hpp"
#include "amtl/stats.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace amtl;
using amtl::testing::rows;

namespace {

TreeModel constant_tree(double value) {
  TreeModel::Node leaf;
  leaf.value = value;
  return TreeModel({leaf}, {});
}

WeightedPool pool_of(const Dataset& source, const Dataset& target) { return WeightedPool::combine(source, target); }

Dataset law_data(int n, std::uint64_t seed, double noise_seed_offset = 0.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  return amtl::testing::random_dataset(n, seed + 1, [&](const InputVector& x) {
    return std::sin(2.0 * x(0)) + x(1) * x(1) - 0.5 * x(2) + noise_seed_offset + noise(gen);
  });
}

}  // namespace

TEST_CASE("adjusted errors") {
  const Dataset d = rows({{0, 0, 0, 0, 1}, {1, 0, 0, 0, 2}, {2, 0, 0, 0, 4}});
  const Dataset empty_source(TaskSpec::source1(), InputMatrix(0, 4), Eigen::VectorXd(0));
  const WeightedPool pool = pool_of(empty_source, d);

  SUBCASE("residuals {1, 2, 4}") {
    const Eigen::VectorXd e = adjusted_errors(pool, constant_tree(0.0));
    CHECK(e == Eigen::Vector3d(0.25, 0.5, 1.0));
    CHECK(e.maxCoeff() == 1.0);
  }
  SUBCASE("perfect model") {
    const Dataset flat = rows({{0, 0, 0, 0, 3}, {1, 0, 0, 0, 3}});
    CHECK(adjusted_errors(pool_of(empty_source, flat), constant_tree(3.0)).isZero(0.0));
  }
  SUBCASE("other losses") {
    const Eigen::VectorXd sq = adjusted_errors(pool, constant_tree(0.0), BoostLoss::square);
    CHECK(sq == Eigen::Vector3d(0.0625, 0.25, 1.0));
    const Eigen::VectorXd ex = adjusted_errors(pool, constant_tree(0.0), BoostLoss::exponential);
    CHECK(ex(0) == doctest::Approx(1.0 - std::exp(-0.25)));
    CHECK(ex.maxCoeff() <= 1.0);
    CHECK(parse_boost_loss(to_string(BoostLoss::square)) == BoostLoss::square);
    CHECK_THROWS_AS(parse_boost_loss("huber"), ConfigError);
  }
}

TEST_CASE("confidence and votes") {
  CHECK(confidence(0.2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(confidence(0.0) == kBetaMin);
  CHECK(confidence(0.5) == kBetaMax);
  CHECK(confidence(0.9) == kBetaMax);
  // At eps = 0.5 every multiplier beta^(1-e) is 1 up to the clamp.
  CHECK(std::abs(std::pow(confidence(0.5), 0.5) - 1.0) < 1e-10);
  BoostStage s{constant_tree(1.0), 0.25};
  CHECK(s.vote() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("parameter defaults follow the first setting") {
  const BoostParams p;
  CHECK(p.max_boost_iterations == 100);
  CHECK(p.max_global_iterations == 10);
  CHECK(p.folds == 5);
  CHECK(p.loss == BoostLoss::linear);
  BoostParams bad;
  bad.folds = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("boosting stage") {
  SUBCASE("a perfect first tree stops the stage") {
    const Dataset s = law_data(10, 1);
    const Dataset t = law_data(6, 2);
    BoostParams p;
    p.tree = TreeParams{};  // unlimited depth interpolates the pool
    p.folds = 3;
    const StageResult r = boost_stage(pool_of(s, t), p, 5);
    REQUIRE(r.stages.size() == 1);
    CHECK(r.stages[0].beta == kBetaMin);
  }
  SUBCASE("highest-error target sample gains weight, by hand on five samples") {
    // Depth-0 trees predict the weighted mean; the update is w * beta^(1-e).
    const Dataset s = rows({{0, 0, 0, 0, 2.0}, {1, 0, 0, 0, 2.0}, {5, 0, 0, 0, 2.0}});
    const Dataset t = rows({{2, 0, 0, 0, 1.75}, {3, 0, 0, 0, 3.0}});
    BoostParams p;
    p.tree = TreeParams{0, 1};
    p.max_boost_iterations = 1;
    p.folds = 2;
    std::vector<WeightUpdate> seen;
    (void)boost_stage(pool_of(s, t), p, 1, [&](const WeightUpdate& u) { seen.push_back(u); });
    REQUIRE(seen.size() == 1);
    const WeightUpdate& u = seen.front();
    // mean 2.15; residuals 0.15 (x3), 0.4, 0.85
    Eigen::VectorXd e(5);
    e << 0.15 / 0.85, 0.15 / 0.85, 0.15 / 0.85, 0.4 / 0.85, 1.0;
    CHECK((u.errors - e).cwiseAbs().maxCoeff() < 1e-14);
    const double eps = 0.2 * e.sum();
    const double beta = eps / (1 - eps);
    CHECK(u.beta == doctest::Approx(beta).epsilon(1e-13));
    Eigen::VectorXd w(5);
    w << 0.2, 0.2, 0.2, 0.2 * std::pow(beta, 1 - e(3)), 0.2;
    w /= w.sum();
    CHECK((u.after - w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(u.after(4) > u.before(4));
    CHECK(u.after(0) == u.after(1));
  }
  SUBCASE("errors") {
    const Dataset s = law_data(10, 1);
    const Dataset t = law_data(4, 2);
    CHECK_THROWS_AS(boost_stage(pool_of(s, t), BoostParams{}, 1), SizeError);
    const Dataset none(TaskSpec::target(), InputMatrix(0, 4), Eigen::VectorXd(0));
    CHECK_THROWS_AS(fit_tradaboost(none, t, BoostParams{}, 1), EmptyDatasetError);
  }
}

TEST_CASE("source reweighting") {
  SUBCASE("two source points with e = {0, 1}, beta = 0.25") {
    // Constant prediction 1: source residuals {0, 2}, targets exact, eps = 1/5.
    const Dataset s = rows({{0, 0, 0, 0, 1.0}, {1, 0, 0, 0, 3.0}});
    const Dataset t = rows({{2, 0, 0, 0, 1.0}, {3, 0, 0, 0, 1.0}, {4, 0, 0, 0, 1.0}});
    const WeightedPool pool = pool_of(s, t);
    const WeightedPool next = source_weight_update(pool, constant_tree(1.0), BoostLoss::linear, [&](const WeightUpdate& u) {
      CHECK(u.beta == doctest::Approx(0.25).epsilon(1e-15));
      CHECK(u.kind == WeightUpdate::Kind::source_reweight);
    });
    CHECK(next.weights(0) / next.weights(1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(next.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(next.weights(2) == next.weights(3));
    CHECK(next.weights(3) == next.weights(4));
  }
  SUBCASE("equal source residuals keep source ratios; target ratios never move") {
    const Dataset s = rows({{0, 0, 0, 0, 2.0}, {1, 0, 0, 0, 2.0}, {5, 0, 0, 0, 2.0}});
    const Dataset t = rows({{2, 0, 0, 0, 1.0}, {3, 0, 0, 0, 4.0}});
    WeightedPool pool = pool_of(s, t);
    pool.weights << 0.1, 0.3, 0.2, 0.15, 0.25;
    const WeightedPool next = source_weight_update(pool, constant_tree(1.5), BoostLoss::linear);
    CHECK(next.weights(0) / next.weights(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(next.weights(1) / next.weights(2) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(next.weights(3) / next.weights(4) == doctest::Approx(0.6).epsilon(1e-14));
  }
}

TEST_CASE("weight laws across many seeded runs") {
  BoostParams p;
  p.max_boost_iterations = 10;
  p.max_global_iterations = 3;
  p.folds = 3;
  int events = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset s = law_data(15, 100 + seed, 0.3);
    const Dataset t = law_data(8, 200 + seed);
    (void)fit_tradaboost(s, t, p, seed, [&](const WeightUpdate& u) {
      ++events;
      CHECK(std::abs(u.after.sum() - 1.0) <= 1e-12);
      CHECK(u.after.minCoeff() >= 0.0);
      if (u.kind == WeightUpdate::Kind::target_boost && u.beta < 1.0) {
        // The max-error target row has the largest multiplier among target
        // rows, so its share of the target mass cannot shrink. When it also
        // holds the pool's largest error its multiplier is 1 and its share of
        // the whole pool cannot shrink either.
        const Index nt = u.after.size() - u.n_source;
        Index k = 0;
        u.errors.tail(nt).maxCoeff(&k);
        const Index i = u.n_source + k;
        const double share_before = u.before(i) / u.before.tail(nt).sum();
        const double share_after = u.after(i) / u.after.tail(nt).sum();
        CHECK(share_after >= share_before * (1.0 - 1e-12));
        if (u.errors(i) == 1.0) CHECK(u.after(i) >= u.before(i) / u.before.sum() * (1.0 - 1e-12));
      }
    });
  }
  CHECK(events > 100);
}

TEST_CASE("two-stage fit") {
  const Dataset s = law_data(30, 7, 0.1);
  const Dataset t = law_data(10, 8);

  SUBCASE("maxJ = 1 returns the single stage") {
    BoostParams p;
    p.max_global_iterations = 1;
    p.max_boost_iterations = 20;
    const BoostEnsemble e = fit_tradaboost(s, t, p, 3);
    const StageResult stage = boost_stage(WeightedPool::combine(s, t), p, derive_seed(3, std::uint64_t{1}));
    REQUIRE(e.stages.size() == stage.stages.size());
    CHECK(e.selected_global == 1);
    CHECK(e.error == stage.cv_error);
    for (Index i = 0; i < t.size(); ++i) {
      CHECK(predict_ensemble(e, t.input(i)) == predict_ensemble(stage.stages, t.input(i)));
    }
  }
  SUBCASE("selection picks the minimum error, earliest on ties") {
    BoostParams p;
    p.max_boost_iterations = 15;
    const BoostEnsemble e = fit_tradaboost(s, t, p, 9);
    REQUIRE(e.stage_errors.size() == 10);
    const auto it = std::min_element(e.stage_errors.begin(), e.stage_errors.end());
    CHECK(e.selected_global == 1 + static_cast<int>(it - e.stage_errors.begin()));
    CHECK(e.error == *it);
    CHECK_FALSE(e.stages.empty());
    for (const auto& st : e.stages) {
      CHECK(st.beta > 0.0);
      CHECK(st.beta < 1.0);
    }
  }
  SUBCASE("deterministic per seed") {
    BoostParams p;
    p.max_boost_iterations = 15;
    p.max_global_iterations = 3;
    const BoostEnsemble a = fit_tradaboost(s, t, p, 4);
    const BoostEnsemble b = fit_tradaboost(s, t, p, 4);
    CHECK(a.stage_errors == b.stage_errors);
    CHECK(predict_ensemble(a, t.inputs()) == predict_ensemble(b, t.inputs()));
  }
}

TEST_CASE("same-law source beats the target-only tree on most trials") {
  // Eight training rows as in the smallest grid cell; the other 16 target
  // rows validate.
  int wins = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);
    const Dataset source = generate_synthetic(TaskSpec::target(), 40, seed);
    const Dataset target = generate_synthetic(TaskSpec::target(), 24, seed + 500);
    std::vector<Index> train(8), val(16);
    std::iota(train.begin(), train.end(), Index{0});
    std::iota(val.begin(), val.end(), Index{8});
    const Dataset tr = target.subset(train);
    const Dataset va = target.subset(val);
    const double base = mse(predict_tree(fit_tree(tr), va.inputs()), va.outputs());
    const double boosted = mse(predict_ensemble(fit_tradaboost(source, tr, BoostParams{}, seed), va.inputs()), va.outputs());
    if (boosted <= base) ++wins;
  }
  MESSAGE("I-DTR wins " << wins << " of " << trials);
  CHECK(wins >= 40);
}

TEST_CASE("ensemble prediction") {
  auto stage = [](double prediction, double vote) { return BoostStage{constant_tree(prediction), std::exp(-vote)}; };
  const InputVector x = InputVector::Zero();

  SUBCASE("one tree") {
    const std::vector<BoostStage> one = {stage(4.5, 0.3)};
    CHECK(predict_ensemble(one, x) == 4.5);
  }
  SUBCASE("equal votes give the plain median") {
    const std::vector<BoostStage> st = {stage(3, 1), stage(1, 1), stage(2, 1)};
    CHECK(predict_ensemble(st, x) == 2);
  }
  SUBCASE("votes {0.7, 0.2, 0.1}") {
    const std::vector<BoostStage> st = {stage(1, 0.7), stage(2, 0.2), stage(3, 0.1)};
    CHECK(predict_ensemble(st, x) == 1);
  }
  SUBCASE("equal betas reduce to the unweighted median, odd sizes") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int n = 1; n < 40; n += 2) {
      std::vector<BoostStage> st;
      Eigen::VectorXd preds(n);
      for (int i = 0; i < n; ++i) {
        preds(i) = u(gen);
        st.push_back(BoostStage{constant_tree(preds(i)), 0.3});
      }
      CHECK(predict_ensemble(st, x) == median(preds));
    }
  }
  SUBCASE("empty ensemble") { CHECK_THROWS_AS(predict_ensemble(std::span<const BoostStage>(), x), FitError); }
}
