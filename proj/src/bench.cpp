#include "amtl/bench.hpp"

#include "amtl/align.hpp"
#include "amtl/random.hpp"
#include "amtl/stats.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

namespace amtl {

namespace {

constexpr std::array<std::string_view, 8> kModelNames = {"DTR",      "ANN",    "I-DTR",  "SA-DTR",
                                                         "SA-I-DTR", "Re-DTR", "FT-ANN", "MTL-ANN"};

}  // namespace

std::string_view to_string(ModelKind m) { return kModelNames[static_cast<std::size_t>(m)]; }

ModelKind parse_model_kind(std::string_view name) {
  for (std::size_t i = 0; i < kModelNames.size(); ++i) {
    if (kModelNames[i] == name) return static_cast<ModelKind>(i);
  }
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

bool is_baseline(ModelKind m) { return m == ModelKind::dtr || m == ModelKind::ann; }

ModelKind baseline_of(ModelKind m) {
  switch (m) {
    case ModelKind::ann:
    case ModelKind::ft_ann:
    case ModelKind::mtl_ann:
      return ModelKind::ann;
    default:
      return ModelKind::dtr;
  }
}

ModelSet ModelSet::of(std::initializer_list<ModelKind> models) {
  std::uint8_t bits = 0;
  for (ModelKind m : models) {
    bits |= static_cast<std::uint8_t>(1U << static_cast<unsigned>(m));
    bits |= static_cast<std::uint8_t>(1U << static_cast<unsigned>(baseline_of(m)));
  }
  return ModelSet(bits);
}

ModelSet ModelSet::from_bits(std::uint8_t bits) {
  ModelSet s(bits);
  std::uint8_t closed = bits;
  for (ModelKind m : s.members()) closed |= static_cast<std::uint8_t>(1U << static_cast<unsigned>(baseline_of(m)));
  return ModelSet(closed);
}

std::vector<ModelKind> ModelSet::members() const {
  std::vector<ModelKind> out;
  for (ModelKind m : kAllModels) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

Setting Setting::setting1() { return Setting{"setting1", 100, 10, 5, 0.1, 0.1, 0.1, 10000, 5000, 5000}; }

Setting Setting::setting2() { return Setting{"setting2", 50, 10, 3, 0.05, 0.05, 0.05, 10000, 5000, 5000}; }

Setting Setting::by_name(std::string_view name) {
  if (name == "setting1") return setting1();
  if (name == "setting2") return setting2();
  throw ConfigError("unknown setting '" + std::string(name) + "'");
}

const Dataset& GridData::source(TaskId id) const {
  const auto it = sources.find(id);
  if (it == sources.end()) throw ConfigError("no dataset for source task " + std::string(to_string(id)));
  return it->second;
}

double improvement(double mse_base, double mse_model) {
  if (!(mse_base > 0.0)) throw InputError("improvement: baseline MSE must be positive");
  return (mse_base - mse_model) / mse_base;
}

void aggregate(ModelOutcome& outcome, bool transfer) {
  const auto& values = transfer ? outcome.imp : outcome.mse;
  std::vector<double> done;
  for (const auto& v : values) {
    if (v) done.push_back(*v);
  }
  outcome.failures = static_cast<int>(values.size() - done.size());

  std::vector<double> mses;
  for (const auto& v : outcome.mse) {
    if (v) mses.push_back(*v);
  }
  outcome.median_mse.reset();
  if (!mses.empty()) outcome.median_mse = median(Eigen::Map<const Eigen::VectorXd>(mses.data(), Eigen::Index(mses.size())));

  outcome.median_imp.reset();
  outcome.positive_ratio.reset();
  if (!transfer) return;
  if (!done.empty()) outcome.median_imp = median(Eigen::Map<const Eigen::VectorXd>(done.data(), Eigen::Index(done.size())));
  if (!values.empty()) {
    const auto positives = std::count_if(done.begin(), done.end(), [](double v) { return v > 0.0; });
    outcome.positive_ratio = static_cast<double>(positives) / static_cast<double>(values.size());
  }
}

std::uint64_t iteration_seed(std::uint64_t base_seed, int iteration) {
  return base_seed ^ static_cast<std::uint64_t>(iteration);
}

namespace {

struct IterationData {
  Dataset train;
  Dataset val;
  Dataset source;
};

double validation_mse(const Eigen::VectorXd& predictions, const Dataset& val) {
  return mse(predictions, val.outputs());
}

double build_and_score(ModelKind m, const IterationData& d, const Setting& s, const BenchOptions& opt,
                       std::uint64_t seed) {
  BoostParams bp;
  bp.max_boost_iterations = s.boost_iterations;
  bp.max_global_iterations = s.global_iterations;
  bp.folds = s.folds;
  bp.tree = opt.boost_tree;

  const NetModel init = init_net(derive_seed(seed, "ann"));
  auto cfg = [](double lr, int iterations) {
    TrainConfig c;
    c.learning_rate = lr;
    c.iterations = iterations;
    return c;
  };

  switch (m) {
    case ModelKind::dtr:
      return validation_mse(predict_tree(fit_tree(d.train, opt.tree), d.val.inputs()), d.val);
    case ModelKind::ann: {
      // Same initialization as the source network so the comparison is paired.
      const TrainResult r = train(init, d.train, cfg(s.lr_target, s.iterations_source));
      return validation_mse(forward(r.net, d.val.inputs()), d.val);
    }
    case ModelKind::i_dtr:
      return validation_mse(
          predict_ensemble(fit_tradaboost(d.source, d.train, bp, derive_seed(seed, "i-dtr")), d.val.inputs()),
          d.val);
    case ModelKind::sa_dtr:
      return validation_mse(predict_tree(fit_sa_dtr(d.source, d.train, opt.tree), d.val.inputs()), d.val);
    case ModelKind::sa_i_dtr:
      return validation_mse(
          predict_ensemble(fit_sa_i_dtr(d.source, d.train, bp, derive_seed(seed, "sa-i-dtr"), opt.tree),
                           d.val.inputs()),
          d.val);
    case ModelKind::re_dtr: {
      GaConfig ga;
      ga.max_iterations = opt.ga_iterations;
      ga.population_size = opt.ga_population;
      ga.seed = derive_seed(seed, "re-dtr");
      return validation_mse(predict(fit_re_dtr(d.source, d.train, ga, opt.tree), d.val.inputs()), d.val);
    }
    case ModelKind::ft_ann: {
      const TrainResult src = train(init, d.source, cfg(s.lr_source, s.iterations_source));
      const TrainResult r = fine_tune(src.net, d.train, cfg(s.lr_target, s.iterations_target));
      return validation_mse(forward(r.net, d.val.inputs()), d.val);
    }
    case ModelKind::mtl_ann: {
      const MtlTrainResult r =
          train_mtl(MtlModel::from_network(init), d.source, d.train, cfg(s.lr_mtl, s.iterations_mtl));
      return validation_mse(predict_target(r.model, d.val.inputs()), d.val);
    }
  }
  throw ConfigError("unknown model kind");
}

std::string failure_note(int iteration, const char* what) {
  return "iteration " + std::to_string(iteration) + ": " + what;
}

void validate_cell(const GridCell& cell) {
  if (cell.iterations < 1) throw ConfigError("cell: iterations must be >= 1");
  if (cell.n_s < 1 || cell.n_train_t < 1 || cell.n_val_t < 1) throw ConfigError("cell: sizes must be >= 1");
  if (cell.models.bits() == 0) throw ConfigError("cell: no models selected");
}

}  // namespace

CellResult run_cell(const GridCell& cell, const Dataset& target, const Dataset& source, const BenchOptions& options) {
  validate_cell(cell);
  if (target.task().id != TaskId::target) throw ConfigError("run_cell: first dataset must be the target task");
  if (source.task().id != cell.source_task) {
    throw ConfigError("run_cell: source dataset is " + std::string(to_string(source.task().id)) + ", cell expects " +
                      std::string(to_string(cell.source_task)));
  }
  const Setting setting = options.setting_override ? *options.setting_override : Setting::by_name(cell.setting);
  const std::vector<ModelKind> models = ModelSet::from_bits(cell.models.bits()).members();

  CellResult result;
  result.cell = cell;
  for (ModelKind m : models) {
    ModelOutcome& o = result.models[m];
    o.mse.resize(static_cast<std::size_t>(cell.iterations));
    if (!is_baseline(m)) o.imp.resize(static_cast<std::size_t>(cell.iterations));
  }

  for (int iter = 1; iter <= cell.iterations; ++iter) {
    const std::size_t slot = static_cast<std::size_t>(iter - 1);
    const std::uint64_t seed = iteration_seed(cell.base_seed, iter);

    IterationData d;
    try {
      const Split split =
          sample_split(target, source, SplitPlan{cell.n_train_t, cell.n_val_t, cell.n_s, derive_seed(seed, "split")});
      // Each domain is scaled by statistics of its own training rows.
      const Preprocessor pt = fit_preprocessor(cell.preprocess, split.train_t);
      const Preprocessor ps = fit_preprocessor(cell.preprocess, split.source_sub);
      d = IterationData{pt.apply(split.train_t), pt.apply(split.val_t), ps.apply(split.source_sub)};
    } catch (const SizeError&) {
      throw;
    } catch (const Error& e) {
      for (auto& [m, o] : result.models) o.errors.push_back(failure_note(iter, e.what()));
      continue;
    }

    for (ModelKind m : models) {
      ModelOutcome& o = result.models[m];
      try {
        o.mse[slot] = build_and_score(m, d, setting, options, seed);
      } catch (const Error& e) {
        o.errors.push_back(failure_note(iter, e.what()));
      }
    }
    for (ModelKind m : models) {
      if (is_baseline(m)) continue;
      ModelOutcome& o = result.models[m];
      const auto& base = result.models[baseline_of(m)].mse[slot];
      if (!o.mse[slot] || !base) continue;
      try {
        o.imp[slot] = improvement(*base, *o.mse[slot]);
      } catch (const Error& e) {
        o.errors.push_back(failure_note(iter, e.what()));
      }
    }
  }

  for (auto& [m, o] : result.models) {
    aggregate(o, !is_baseline(m));
    if (o.failures == cell.iterations) result.failed = true;
  }
  return result;
}

RunReport run_grid(const std::vector<GridCell>& plan, const GridData& data, int workers, const BenchOptions& options) {
  if (plan.empty()) throw ConfigError("run_grid: empty plan");
  if (workers < 1) throw ConfigError("run_grid: workers must be >= 1");
  for (const GridCell& cell : plan) {
    validate_cell(cell);
    (void)data.source(cell.source_task);
  }

  RunReport report;
  report.cells.resize(plan.size());
  std::vector<std::exception_ptr> errors(plan.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < plan.size(); i = next.fetch_add(1)) {
      try {
        report.cells[i] = run_cell(plan[i], data.target, data.source(plan[i].source_task), options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const int n = std::min<int>(workers, static_cast<int>(plan.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return report;
}

// ---- Grids ---------------------------------------------------------------------

namespace {

std::vector<GridCell> cross(TaskId source, std::span<const int> sizes, const GridTemplate& t) {
  std::vector<GridCell> cells;
  for (int n_s : sizes) {
    for (int n_train : kTrainSizes) {
      GridCell c;
      c.source_task = source;
      c.n_s = n_s;
      c.n_train_t = n_train;
      c.setting = t.setting;
      c.preprocess = t.preprocess;
      c.iterations = t.iterations;
      c.base_seed = t.base_seed;
      c.models = t.models;
      cells.push_back(c);
    }
  }
  return cells;
}

}  // namespace

std::vector<GridCell> paper_grid(TaskId source, const GridTemplate& t) {
  switch (source) {
    case TaskId::source1:
      return cross(source, kSource1Sizes, t);
    case TaskId::source2:
      return cross(source, kSource2Sizes, t);
    default:
      throw ConfigError("paper grid: source task must be source1 or source2");
  }
}

std::vector<GridCell> similarity_grid(TaskId source, const GridTemplate& t) {
  switch (source) {
    case TaskId::source1:
      return cross(source, kTruncatedSource1Sizes, t);
    case TaskId::source2:
      return cross(source, kSource2Sizes, t);
    default:
      throw ConfigError("similarity grid: source task must be source1 or source2");
  }
}

// ---- Summaries -----------------------------------------------------------------

std::string_view to_string(SummaryAxis axis) {
  switch (axis) {
    case SummaryAxis::ratio:
      return "ratio_ntrain_over_ns";
    case SummaryAxis::similarity:
      return "similarity";
    case SummaryAxis::preprocessing:
      return "preprocessing";
  }
  return "?";
}

SummaryAxis parse_summary_axis(std::string_view name) {
  if (name == "ratio_ntrain_over_ns" || name == "ratio") return SummaryAxis::ratio;
  if (name == "similarity") return SummaryAxis::similarity;
  if (name == "preprocessing") return SummaryAxis::preprocessing;
  throw ConfigError("unknown summary axis '" + std::string(name) + "'");
}

std::vector<SummaryRow> summarize(const RunReport& report, SummaryAxis axis) {
  if (report.cells.empty()) throw ConfigError("summarize: empty report");
  std::vector<SummaryRow> rows;
  rows.reserve(report.cells.size());
  for (const CellResult& c : report.cells) {
    SummaryRow row;
    row.x = c.cell.ratio();
    row.cell = c.cell;
    if (axis == SummaryAxis::similarity) row.group = std::string(to_string(c.cell.source_task));
    if (axis == SummaryAxis::preprocessing) row.group = std::string(to_string(c.cell.preprocess));
    for (const auto& [m, o] : c.models) {
      row.median_imp[m] = o.median_imp;
      row.positive_ratio[m] = o.positive_ratio;
      row.median_mse[m] = o.median_mse;
    }
    rows.push_back(std::move(row));
  }
  auto key = [](const SummaryRow& r) {
    return std::make_tuple(r.group, r.x, static_cast<int>(r.cell.source_task), r.cell.setting,
                           static_cast<int>(r.cell.preprocess), r.cell.n_s);
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const SummaryRow& a, const SummaryRow& b) { return key(a) < key(b); });
  return rows;
}

}  // namespace amtl
