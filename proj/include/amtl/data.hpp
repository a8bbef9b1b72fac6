#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace amtl {

/// Number of process inputs per sample: laser power, laser speed, hatch
/// spacing and energy.
inline constexpr int kNumInputs = 4;

using InputVector = Eigen::Matrix<double, kNumInputs, 1>;
using InputMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumInputs, Eigen::RowMajor>;
using Index = Eigen::Index;

/// One LPBF build record.
struct Sample {
  double laser_power = 0.0;       // W
  double laser_speed = 0.0;       // mm/s
  double hatch_spacing = 0.0;     // um
  double energy = 0.0;            // J
  double relative_density = 0.0;  // percent

  InputVector inputs() const { return {laser_power, laser_speed, hatch_spacing, energy}; }
  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class TaskId { source1, source2, target };

std::string_view to_string(TaskId id);
TaskId parse_task_id(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Task metadata. Ranges are configuration: the defaults below carry the
/// manufacturer printer envelopes, the target borrows the SLM 250 HL envelope.
struct TaskSpec {
  TaskId id = TaskId::target;
  std::string printer_label;
  std::array<Interval, kNumInputs> input_ranges{};
  int nominal_size = 0;

  static TaskSpec source1();
  static TaskSpec source2();
  static TaskSpec target();
  static TaskSpec defaults(TaskId id);

  /// Throws ConfigError unless every interval has lo < hi.
  void validate() const;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Ordered, immutable collection of samples for one task.
///
/// Inputs are stored row-major (one sample per row) so a row can be handed to
/// the learners as an InputVector without copying columns around.
class Dataset {
 public:
  Dataset() = default;
  /// Throws InputError on shape mismatch or non-finite values.
  Dataset(TaskSpec task, InputMatrix inputs, Eigen::VectorXd outputs);

  static Dataset from_samples(TaskSpec task, std::span<const Sample> samples);

  const TaskSpec& task() const { return task_; }
  Index size() const { return outputs_.size(); }
  bool empty() const { return outputs_.size() == 0; }
  const InputMatrix& inputs() const { return inputs_; }
  const Eigen::VectorXd& outputs() const { return outputs_; }
  InputVector input(Index i) const { return inputs_.row(i).transpose(); }
  Sample sample(Index i) const;
  std::vector<Sample> samples() const;

  Dataset subset(std::span<const Index> rows) const;
  Dataset with_inputs(InputMatrix inputs) const;
  Dataset with_outputs(Eigen::VectorXd outputs) const;

  /// Rows of `head` followed by rows of `tail`; keeps the task of `head`.
  static Dataset concat(const Dataset& head, const Dataset& tail);

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.task_ == b.task_ && a.inputs_ == b.inputs_ && a.outputs_ == b.outputs_;
  }

 private:
  TaskSpec task_;
  InputMatrix inputs_;
  Eigen::VectorXd outputs_;
};

// ---- CSV -------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "laser_power,laser_speed,hatch_spacing,energy,relative_density";

/// Reads the five-column schema. Throws SchemaError, ParseError (naming the
/// 1-based data row), EmptyDatasetError or IoError.
Dataset load_csv(const std::filesystem::path& path, const TaskSpec& task);
Dataset parse_csv(std::string_view text, const TaskSpec& task);
std::string to_csv(const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

// ---- Synthetic data ----------------------------------------------------------

enum class Response { affine, quadratic };

std::string_view to_string(Response r);
Response parse_response(std::string_view name);

struct SyntheticOptions {
  Response response = Response::quadratic;
  /// Perturbs the response parameters. Two datasets generated with shifts
  /// s1 and s2 follow related laws whose disagreement grows with |s1 - s2|.
  double shift = 0.0;
  /// Half-width of the uniform noise added to relative density (<= 0.5).
  double noise = 0.3;
};

/// Deterministic relative-density law evaluated on raw process inputs.
double synthetic_response(const InputVector& x, Response response, double shift);

/// Inputs uniform over the task ranges, outputs from synthetic_response plus
/// seeded noise, clipped to (0, 100]. Bit-identical for identical arguments.
Dataset generate_synthetic(const TaskSpec& task, int n, std::uint64_t seed,
                           const SyntheticOptions& options = {});
Dataset generate_synthetic(const TaskSpec& task, int n, std::uint64_t seed, Response response);

// ---- Splits ------------------------------------------------------------------

struct SplitPlan {
  int n_train_t = 8;
  int n_val_t = 8;
  int n_s = 0;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train_t;
  Dataset val_t;
  Dataset source_sub;
  std::vector<Index> train_rows;
  std::vector<Index> val_rows;
  std::vector<Index> source_rows;
};

/// Draws train/validation parts of `target` (disjoint, without replacement)
/// and a source subset, all from streams derived from plan.seed.
/// Throws SizeError when the plan does not fit the datasets.
Split sample_split(const Dataset& target, const Dataset& source, const SplitPlan& plan);

// ---- Preprocessing -------------------------------------------------------------

enum class PreprocessMode { raw, minmax, zscore };

std::string_view to_string(PreprocessMode mode);
PreprocessMode parse_preprocess_mode(std::string_view name);

/// Per-feature affine input map x' = (x - shift) / scale. Outputs are never
/// touched.
class Preprocessor {
 public:
  Preprocessor() = default;
  Preprocessor(PreprocessMode mode, InputVector shift, InputVector scale, std::string fitted_on);

  PreprocessMode mode() const { return mode_; }
  const InputVector& shift() const { return shift_; }
  const InputVector& scale() const { return scale_; }
  const std::string& fitted_on() const { return fitted_on_; }

  InputVector apply(const InputVector& x) const;
  InputVector inverse_apply(const InputVector& x) const;
  Dataset apply(const Dataset& data) const;
  Dataset inverse_apply(const Dataset& data) const;

 private:
  PreprocessMode mode_ = PreprocessMode::raw;
  InputVector shift_ = InputVector::Zero();
  InputVector scale_ = InputVector::Ones();
  std::string fitted_on_;
};

/// Statistics come from `data` only. z-score uses the population standard
/// deviation. Throws DegenerateFeatureError for a constant feature and
/// EmptyDatasetError for empty data.
Preprocessor fit_preprocessor(PreprocessMode mode, const Dataset& data);
Dataset apply_preprocessor(const Preprocessor& p, const Dataset& data);

}  // namespace amtl
