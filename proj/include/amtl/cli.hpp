#pragma once

#include "amtl/bench.hpp"
#include "amtl/data.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amtl {

enum class GridKind { paper, similarity, preprocessing, custom };

std::string_view to_string(GridKind g);
GridKind parse_grid_kind(std::string_view name);

/// Synthetic stand-in for the three tasks. Shifts are per source; the target
/// always uses shift 0.
struct SyntheticSpec {
  Response response = Response::quadratic;
  double noise = 0.3;
  double shift_source1 = 1.0;
  double shift_source2 = 0.3;
  std::uint64_t seed = 7;

  /// Nominal sizes: 24 target, 49 source 1, 32 source 2.
  Dataset make(TaskId id) const;
};

struct CustomCell {
  TaskId source_task = TaskId::source1;
  int n_s = 0;
  int n_train_t = 8;
  int n_val_t = 8;
};

struct RunConfig {
  // Data: CSV paths when given, synthetic otherwise.
  std::optional<std::filesystem::path> target_csv;
  std::map<TaskId, std::filesystem::path> source_csv;
  SyntheticSpec synthetic;

  GridKind grid = GridKind::paper;
  std::vector<TaskId> sources = {TaskId::source1};
  std::vector<std::string> settings = {"setting1"};
  std::vector<PreprocessMode> preprocess = {PreprocessMode::raw};
  std::vector<CustomCell> cells;
  int iterations = 30;
  std::uint64_t seed = 42;
  int workers = 1;
  std::filesystem::path out = "results";
};

/// Command-line values; each one set here wins over the file.
struct ConfigOverrides {
  std::optional<std::string> grid;
  std::optional<std::string> source;      // comma-separated list allowed
  std::optional<std::string> setting;     // comma-separated list allowed
  std::optional<std::string> preprocess;  // comma-separated list allowed
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::filesystem::path> out;
};

/// Flat `key = value` lines grouped by `[run]`, `[data]` and repeatable
/// `[cell]` sections; `#` starts a comment. Keys before any section belong
/// to [run]. Throws ConfigError naming the offending key or line.
RunConfig parse_config_text(std::string_view text, const ConfigOverrides& overrides = {});
/// Reads the file (IoError when unreadable), then as above. An empty path
/// means no file.
RunConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Concrete cells for the configuration. Throws ConfigError for a
/// contradictory grid description.
std::vector<GridCell> resolve_plan(const RunConfig& cfg);

/// Target plus every source the plan needs.
GridData load_grid_data(const RunConfig& cfg);

// ---- Report I/O ----------------------------------------------------------------

inline constexpr std::string_view kCellsHeader =
    "source_task,n_s,n_train_t,ratio,setting,preprocess,model,median_imp,positive_ratio,failures";
inline constexpr std::string_view kIterationsHeader =
    "source_task,n_s,n_train_t,setting,preprocess,base_seed,iteration,model,mse,imp";

std::string cells_csv(const RunReport& report);
std::string iterations_csv(const RunReport& report);
nlohmann::json report_to_json(const RunReport& report);
/// Throws ParseError for a payload that does not describe a report.
RunReport report_from_json(const nlohmann::json& j);

/// Writes cells.csv, iterations.csv and report.json into `dir`, creating it
/// when needed. Throws IoError naming the path on failure.
void emit_report(const RunReport& report, const std::filesystem::path& dir);
RunReport read_report(const std::filesystem::path& file);

/// Long-format table: one row per summary row and model.
std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace amtl
