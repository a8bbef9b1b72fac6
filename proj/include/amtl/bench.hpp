#pragma once

#include "amtl/boost.hpp"
#include "amtl/data.hpp"
#include "amtl/nnet.hpp"
#include "amtl/transform.hpp"
#include "amtl/tree.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amtl {

enum class ModelKind : std::uint8_t { dtr, ann, i_dtr, sa_dtr, sa_i_dtr, re_dtr, ft_ann, mtl_ann };

inline constexpr std::array<ModelKind, 8> kAllModels = {
    ModelKind::dtr,      ModelKind::ann,    ModelKind::i_dtr,  ModelKind::sa_dtr,
    ModelKind::sa_i_dtr, ModelKind::re_dtr, ModelKind::ft_ann, ModelKind::mtl_ann};
inline constexpr std::array<ModelKind, 6> kTransferModels = {ModelKind::i_dtr,  ModelKind::sa_dtr,
                                                             ModelKind::sa_i_dtr, ModelKind::re_dtr,
                                                             ModelKind::ft_ann, ModelKind::mtl_ann};
inline constexpr std::array<ModelKind, 4> kTreeTransferModels = {ModelKind::i_dtr, ModelKind::sa_dtr,
                                                                 ModelKind::sa_i_dtr, ModelKind::re_dtr};

std::string_view to_string(ModelKind m);
ModelKind parse_model_kind(std::string_view name);
bool is_baseline(ModelKind m);
/// DTR for the tree family, ANN for the network family.
ModelKind baseline_of(ModelKind m);

/// Subset of models to build. Baselines of requested models are implied.
class ModelSet {
 public:
  constexpr ModelSet() = default;
  static constexpr ModelSet all() { return ModelSet(0xFF); }
  static ModelSet of(std::initializer_list<ModelKind> models);

  bool contains(ModelKind m) const { return (bits_ >> static_cast<unsigned>(m)) & 1U; }
  std::vector<ModelKind> members() const;
  std::uint8_t bits() const { return bits_; }
  static ModelSet from_bits(std::uint8_t bits);

  friend bool operator==(ModelSet, ModelSet) = default;

 private:
  explicit constexpr ModelSet(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_ = 0;
};

/// Hyperparameter setting for the boosted trees and the networks.
struct Setting {
  std::string name;
  int boost_iterations = 100;  // N
  int global_iterations = 10;  // maxJ
  int folds = 5;               // K
  double lr_source = 0.1;
  double lr_target = 0.1;
  double lr_mtl = 0.1;
  int iterations_source = 10000;
  int iterations_target = 5000;
  int iterations_mtl = 5000;

  static Setting setting1();
  static Setting setting2();
  /// "setting1" or "setting2"; throws ConfigError otherwise.
  static Setting by_name(std::string_view name);

  friend bool operator==(const Setting&, const Setting&) = default;
};

struct GridCell {
  TaskId source_task = TaskId::source1;
  int n_s = 49;
  int n_train_t = 8;
  int n_val_t = 8;
  std::string setting = "setting1";
  PreprocessMode preprocess = PreprocessMode::raw;
  int iterations = 30;
  std::uint64_t base_seed = 42;
  ModelSet models = ModelSet::all();

  double ratio() const { return static_cast<double>(n_train_t) / static_cast<double>(n_s); }
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Budgets that are not part of a Setting. Defaults are the full-scale budgets.
struct BenchOptions {
  int ga_iterations = 5000;
  int ga_population = 200;
  TreeParams tree;                 // DTR, SA-DTR, alignment and Re-DTR source trees
  TreeParams boost_tree{4, 1};     // base learner inside TrAdaBoost
  std::optional<Setting> setting_override;
};

struct ModelOutcome {
  std::vector<std::optional<double>> mse;  // per iteration; empty optional = failed
  std::vector<std::optional<double>> imp;  // transfer models only
  std::optional<double> median_imp;
  std::optional<double> positive_ratio;
  std::optional<double> median_mse;
  int failures = 0;  // iterations excluded from this model's aggregates
  std::vector<std::string> errors;

  friend bool operator==(const ModelOutcome&, const ModelOutcome&) = default;
};

struct CellResult {
  GridCell cell;
  std::map<ModelKind, ModelOutcome> models;
  /// Some built model failed on every iteration.
  bool failed = false;

  friend bool operator==(const CellResult&, const CellResult&) = default;
};

struct RunReport {
  std::vector<CellResult> cells;
  friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct GridData {
  Dataset target;
  std::map<TaskId, Dataset> sources;

  const Dataset& source(TaskId id) const;
};

/// (base - model) / base. Throws InputError when base is not positive.
double improvement(double mse_base, double mse_model);

/// Fills median_imp, positive_ratio, median_mse and failures from the
/// per-iteration values. Medians skip failed iterations; the ratio divides by
/// all iterations, so a failure counts as non-positive.
void aggregate(ModelOutcome& outcome, bool transfer);

/// Derived seed for one validation iteration (1-based).
std::uint64_t iteration_seed(std::uint64_t base_seed, int iteration);

/// Validation loop for one grid cell: per iteration a fresh split, per-domain
/// preprocessing, every requested model, then improvements over the
/// matching baseline.
CellResult run_cell(const GridCell& cell, const Dataset& target, const Dataset& source,
                    const BenchOptions& options = {});

/// Runs every cell; results are in plan order and do not depend on `workers`.
RunReport run_grid(const std::vector<GridCell>& plan, const GridData& data, int workers = 1,
                   const BenchOptions& options = {});

// ---- Grids ---------------------------------------------------------------------

inline constexpr std::array<int, 3> kTrainSizes = {8, 12, 16};
inline constexpr std::array<int, 9> kSource1Sizes = {17, 21, 25, 29, 33, 37, 41, 45, 49};
inline constexpr std::array<int, 5> kSource2Sizes = {17, 21, 25, 29, 32};
inline constexpr std::array<int, 5> kTruncatedSource1Sizes = {17, 21, 25, 29, 33};

struct GridTemplate {
  std::string setting = "setting1";
  PreprocessMode preprocess = PreprocessMode::raw;
  int iterations = 30;
  std::uint64_t base_seed = 42;
  ModelSet models = ModelSet::all();
};

/// Every (n_s, n_train_t) pair for one source: 27 cells for source 1, 15 for
/// source 2.
std::vector<GridCell> paper_grid(TaskId source, const GridTemplate& t);
/// Source 1 truncated to n_s <= 33 (15 cells) or source 2 (15 cells).
std::vector<GridCell> similarity_grid(TaskId source, const GridTemplate& t);

// ---- Summaries -----------------------------------------------------------------

enum class SummaryAxis { ratio, similarity, preprocessing };

std::string_view to_string(SummaryAxis axis);
/// Accepts ratio_ntrain_over_ns (or ratio), similarity, preprocessing.
SummaryAxis parse_summary_axis(std::string_view name);

struct SummaryRow {
  std::string group;  // empty, source task, or preprocessing mode
  double x = 0.0;     // n_train_t / n_s
  GridCell cell;
  std::map<ModelKind, std::optional<double>> median_imp;
  std::map<ModelKind, std::optional<double>> positive_ratio;
  std::map<ModelKind, std::optional<double>> median_mse;
};

std::vector<SummaryRow> summarize(const RunReport& report, SummaryAxis axis);

}  // namespace amtl
