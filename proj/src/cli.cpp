#include "amtl/cli.hpp"

#include "amtl/random.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace amtl {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = s.find(',');
    const std::string_view item = trim(s.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  }
  return out;
}

int parse_positive(std::string_view key, std::string_view value) {
  const int v = parse_number<int>(key, value);
  if (v < 1) throw ConfigError("config key '" + std::string(key) + "': must be >= 1");
  return v;
}

std::vector<TaskId> parse_sources(std::string_view key, std::string_view value) {
  std::vector<TaskId> out;
  for (const auto& name : split_list(value)) {
    const TaskId id = parse_task_id(name);
    if (id == TaskId::target) throw ConfigError("config key '" + std::string(key) + "': target is not a source");
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list");
  return out;
}

std::vector<std::string> parse_settings(std::string_view key, std::string_view value) {
  std::vector<std::string> out;
  for (const auto& name : split_list(value)) {
    (void)Setting::by_name(name);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list");
  return out;
}

std::vector<PreprocessMode> parse_modes(std::string_view key, std::string_view value) {
  std::vector<PreprocessMode> out;
  for (const auto& name : split_list(value)) {
    const PreprocessMode m = parse_preprocess_mode(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list");
  return out;
}

// Names from the data module throw their own error types; surface them as
// configuration problems.
template <typename F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

struct Explicit {
  bool sources = false;
  bool preprocess = false;
};

void apply_run_key(RunConfig& cfg, Explicit& ex, std::string_view key, std::string_view value) {
  if (key == "grid") {
    cfg.grid = parse_grid_kind(value);
  } else if (key == "source") {
    cfg.sources = as_config([&] { return parse_sources(key, value); });
    ex.sources = true;
  } else if (key == "setting") {
    cfg.settings = parse_settings(key, value);
  } else if (key == "preprocess") {
    cfg.preprocess = as_config([&] { return parse_modes(key, value); });
    ex.preprocess = true;
  } else if (key == "iterations") {
    cfg.iterations = parse_positive(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "workers") {
    cfg.workers = parse_positive(key, value);
  } else if (key == "out") {
    cfg.out = std::string(value);
  } else {
    throw ConfigError("unknown config key 'run." + std::string(key) + "'");
  }
}

void apply_data_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "target") {
    cfg.target_csv = std::string(value);
  } else if (key == "source1") {
    cfg.source_csv[TaskId::source1] = std::string(value);
  } else if (key == "source2") {
    cfg.source_csv[TaskId::source2] = std::string(value);
  } else if (key == "response") {
    cfg.synthetic.response = as_config([&] { return parse_response(value); });
  } else if (key == "noise") {
    cfg.synthetic.noise = parse_number<double>(key, value);
  } else if (key == "shift_source1") {
    cfg.synthetic.shift_source1 = parse_number<double>(key, value);
  } else if (key == "shift_source2") {
    cfg.synthetic.shift_source2 = parse_number<double>(key, value);
  } else if (key == "synthetic_seed") {
    cfg.synthetic.seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw ConfigError("unknown config key 'data." + std::string(key) + "'");
  }
}

void apply_cell_key(CustomCell& cell, std::string_view key, std::string_view value) {
  if (key == "source") {
    const auto ids = as_config([&] { return parse_sources(key, value); });
    if (ids.size() != 1) throw ConfigError("config key 'cell.source': exactly one source per cell");
    cell.source_task = ids.front();
  } else if (key == "n_s") {
    cell.n_s = parse_positive(key, value);
  } else if (key == "n_train") {
    cell.n_train_t = parse_positive(key, value);
  } else if (key == "n_val") {
    cell.n_val_t = parse_positive(key, value);
  } else {
    throw ConfigError("unknown config key 'cell." + std::string(key) + "'");
  }
}

void check_grid(const RunConfig& cfg) {
  if (cfg.grid == GridKind::custom && cfg.cells.empty()) {
    throw ConfigError("grid = custom needs at least one [cell] section");
  }
  if (cfg.grid != GridKind::custom && !cfg.cells.empty()) {
    throw ConfigError("[cell] sections given but grid = " + std::string(to_string(cfg.grid)));
  }
  if (cfg.grid == GridKind::similarity && cfg.sources.size() < 2) {
    throw ConfigError("grid = similarity compares both sources; got a single source");
  }
  if (cfg.grid == GridKind::preprocessing && cfg.preprocess.size() < 2) {
    throw ConfigError("grid = preprocessing compares modes; got a single preprocess mode");
  }
  for (const CustomCell& c : cfg.cells) {
    if (c.n_s == 0) throw ConfigError("[cell] needs n_s");
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.close();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json cell_to_json(const GridCell& c) {
  json j;
  j["source_task"] = std::string(to_string(c.source_task));
  j["n_s"] = c.n_s;
  j["n_train_t"] = c.n_train_t;
  j["n_val_t"] = c.n_val_t;
  j["setting"] = c.setting;
  j["preprocess"] = std::string(to_string(c.preprocess));
  j["iterations"] = c.iterations;
  j["base_seed"] = c.base_seed;
  j["model_mask"] = c.models.bits();
  return j;
}

GridCell cell_from_json(const json& j) {
  GridCell c;
  c.source_task = parse_task_id(j.at("source_task").get<std::string>());
  c.n_s = j.at("n_s").get<int>();
  c.n_train_t = j.at("n_train_t").get<int>();
  c.n_val_t = j.at("n_val_t").get<int>();
  c.setting = j.at("setting").get<std::string>();
  c.preprocess = parse_preprocess_mode(j.at("preprocess").get<std::string>());
  c.iterations = j.at("iterations").get<int>();
  c.base_seed = j.at("base_seed").get<std::uint64_t>();
  c.models = ModelSet::from_bits(j.at("model_mask").get<std::uint8_t>());
  return c;
}

json series_to_json(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(optional_to_json(x));
  return a;
}

std::vector<std::optional<double>> series_from_json(const json& j) {
  std::vector<std::optional<double>> out;
  for (const auto& x : j) out.push_back(optional_from_json(x));
  return out;
}

std::string cell_prefix(const GridCell& c) {
  return std::string(to_string(c.source_task)) + ',' + std::to_string(c.n_s) + ',' + std::to_string(c.n_train_t);
}

}  // namespace

std::string_view to_string(GridKind g) {
  switch (g) {
    case GridKind::paper:
      return "paper";
    case GridKind::similarity:
      return "similarity";
    case GridKind::preprocessing:
      return "preprocessing";
    case GridKind::custom:
      return "custom";
  }
  return "?";
}

GridKind parse_grid_kind(std::string_view name) {
  if (name == "paper") return GridKind::paper;
  if (name == "similarity") return GridKind::similarity;
  if (name == "preprocessing") return GridKind::preprocessing;
  if (name == "custom") return GridKind::custom;
  throw ConfigError("unknown grid '" + std::string(name) + "'");
}

Dataset SyntheticSpec::make(TaskId id) const {
  SyntheticOptions opt;
  opt.response = response;
  opt.noise = noise;
  opt.shift = id == TaskId::source1 ? shift_source1 : id == TaskId::source2 ? shift_source2 : 0.0;
  const TaskSpec task = TaskSpec::defaults(id);
  return generate_synthetic(task, task.nominal_size, derive_seed(seed, to_string(id)), opt);
}

RunConfig parse_config_text(std::string_view text, const ConfigOverrides& overrides) {
  RunConfig cfg;
  Explicit ex;
  enum class Section { run, data, cell } section = Section::run;

  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (name == "run") {
        section = Section::run;
      } else if (name == "data") {
        section = Section::data;
      } else if (name == "cell") {
        section = Section::cell;
        cfg.cells.emplace_back();
      } else {
        throw ConfigError("unknown config section '" + std::string(name) + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    switch (section) {
      case Section::run:
        apply_run_key(cfg, ex, key, value);
        break;
      case Section::data:
        apply_data_key(cfg, key, value);
        break;
      case Section::cell:
        apply_cell_key(cfg.cells.back(), key, value);
        break;
    }
  }

  if (overrides.grid) apply_run_key(cfg, ex, "grid", *overrides.grid);
  if (overrides.source) apply_run_key(cfg, ex, "source", *overrides.source);
  if (overrides.setting) apply_run_key(cfg, ex, "setting", *overrides.setting);
  if (overrides.preprocess) apply_run_key(cfg, ex, "preprocess", *overrides.preprocess);
  if (overrides.iterations) apply_run_key(cfg, ex, "iterations", std::to_string(*overrides.iterations));
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.workers) apply_run_key(cfg, ex, "workers", std::to_string(*overrides.workers));
  if (overrides.out) cfg.out = *overrides.out;

  if (cfg.grid == GridKind::similarity && !ex.sources) cfg.sources = {TaskId::source1, TaskId::source2};
  if (cfg.grid == GridKind::preprocessing && !ex.preprocess) {
    cfg.preprocess = {PreprocessMode::raw, PreprocessMode::minmax, PreprocessMode::zscore};
  }
  check_grid(cfg);
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  if (path.empty()) return parse_config_text("", overrides);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), overrides);
}

std::vector<GridCell> resolve_plan(const RunConfig& cfg) {
  check_grid(cfg);
  std::vector<GridCell> plan;
  for (const std::string& setting : cfg.settings) {
    for (PreprocessMode mode : cfg.preprocess) {
      GridTemplate t;
      t.setting = setting;
      t.preprocess = mode;
      t.iterations = cfg.iterations;
      t.base_seed = cfg.seed;
      if (cfg.grid == GridKind::custom) {
        for (const CustomCell& c : cfg.cells) {
          GridCell cell;
          cell.source_task = c.source_task;
          cell.n_s = c.n_s;
          cell.n_train_t = c.n_train_t;
          cell.n_val_t = c.n_val_t;
          cell.setting = setting;
          cell.preprocess = mode;
          cell.iterations = cfg.iterations;
          cell.base_seed = cfg.seed;
          plan.push_back(cell);
        }
        continue;
      }
      for (TaskId source : cfg.sources) {
        const auto cells = cfg.grid == GridKind::similarity ? similarity_grid(source, t) : paper_grid(source, t);
        plan.insert(plan.end(), cells.begin(), cells.end());
      }
    }
  }
  return plan;
}

GridData load_grid_data(const RunConfig& cfg) {
  std::set<TaskId> needed(cfg.sources.begin(), cfg.sources.end());
  for (const CustomCell& c : cfg.cells) needed.insert(c.source_task);
  if (cfg.grid == GridKind::custom) {
    needed.clear();
    for (const CustomCell& c : cfg.cells) needed.insert(c.source_task);
  }

  const bool from_csv = cfg.target_csv.has_value() || !cfg.source_csv.empty();
  GridData data;
  if (!from_csv) {
    data.target = cfg.synthetic.make(TaskId::target);
    for (TaskId id : needed) data.sources.emplace(id, cfg.synthetic.make(id));
    return data;
  }
  if (!cfg.target_csv) throw ConfigError("data: source CSVs given without a target CSV");
  data.target = load_csv(*cfg.target_csv, TaskSpec::target());
  for (TaskId id : needed) {
    const auto it = cfg.source_csv.find(id);
    if (it == cfg.source_csv.end()) {
      throw ConfigError("data: no CSV for " + std::string(to_string(id)) + " (key data." +
                        std::string(to_string(id)) + ")");
    }
    data.sources.emplace(id, load_csv(it->second, TaskSpec::defaults(id)));
  }
  return data;
}

// ---- Report I/O ----------------------------------------------------------------

std::string cells_csv(const RunReport& report) {
  std::string out(kCellsHeader);
  out += '\n';
  for (const CellResult& c : report.cells) {
    const std::string prefix = cell_prefix(c.cell) + ',' + format_double(c.cell.ratio()) + ',' + c.cell.setting +
                               ',' + std::string(to_string(c.cell.preprocess)) + ',';
    for (const auto& [m, o] : c.models) {
      out += prefix;
      out += to_string(m);
      out += ',' + format_optional(o.median_imp) + ',' + format_optional(o.positive_ratio) + ',' +
             std::to_string(o.failures) + '\n';
    }
  }
  return out;
}

std::string iterations_csv(const RunReport& report) {
  std::string out(kIterationsHeader);
  out += '\n';
  for (const CellResult& c : report.cells) {
    const std::string prefix = cell_prefix(c.cell) + ',' + c.cell.setting + ',' +
                               std::string(to_string(c.cell.preprocess)) + ',' + std::to_string(c.cell.base_seed) +
                               ',';
    for (const auto& [m, o] : c.models) {
      for (std::size_t i = 0; i < o.mse.size(); ++i) {
        out += prefix + std::to_string(i + 1) + ',';
        out += to_string(m);
        out += ',' + format_optional(o.mse[i]) + ',';
        if (i < o.imp.size()) out += format_optional(o.imp[i]);
        out += '\n';
      }
    }
  }
  return out;
}

json report_to_json(const RunReport& report) {
  json cells = json::array();
  for (const CellResult& c : report.cells) {
    json models = json::object();
    for (const auto& [m, o] : c.models) {
      json jm;
      jm["mse"] = series_to_json(o.mse);
      jm["imp"] = series_to_json(o.imp);
      jm["median_imp"] = optional_to_json(o.median_imp);
      jm["positive_ratio"] = optional_to_json(o.positive_ratio);
      jm["median_mse"] = optional_to_json(o.median_mse);
      jm["failures"] = o.failures;
      jm["errors"] = o.errors;
      models[std::string(to_string(m))] = std::move(jm);
    }
    json jc;
    jc["cell"] = cell_to_json(c.cell);
    jc["models"] = std::move(models);
    jc["failed"] = c.failed;
    cells.push_back(std::move(jc));
  }
  json j;
  j["format"] = "amtl-report";
  j["version"] = 1;
  j["cells"] = std::move(cells);
  return j;
}

RunReport report_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "amtl-report") throw ParseError("report: unexpected format tag");
    if (j.at("version").get<int>() != 1) throw ParseError("report: unsupported version");
    RunReport report;
    for (const json& jc : j.at("cells")) {
      CellResult c;
      c.cell = cell_from_json(jc.at("cell"));
      c.failed = jc.at("failed").get<bool>();
      for (const auto& [name, jm] : jc.at("models").items()) {
        ModelOutcome o;
        o.mse = series_from_json(jm.at("mse"));
        o.imp = series_from_json(jm.at("imp"));
        o.median_imp = optional_from_json(jm.at("median_imp"));
        o.positive_ratio = optional_from_json(jm.at("positive_ratio"));
        o.median_mse = optional_from_json(jm.at("median_mse"));
        o.failures = jm.at("failures").get<int>();
        o.errors = jm.at("errors").get<std::vector<std::string>>();
        c.models.emplace(parse_model_kind(name), std::move(o));
      }
      report.cells.push_back(std::move(c));
    }
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "cells.csv", cells_csv(report));
  write_file(dir / "iterations.csv", iterations_csv(report));
  write_file(dir / "report.json", report_to_json(report).dump(2) + '\n');
}

RunReport read_report(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read '" + file.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + file.string() + "': " + e.what());
  }
  return report_from_json(j);
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "group,x,source_task,n_s,n_train_t,setting,preprocess,model,median_imp,positive_ratio,median_mse\n";
  for (const SummaryRow& r : rows) {
    const std::string prefix = r.group + ',' + format_double(r.x) + ',' + cell_prefix(r.cell) + ',' + r.cell.setting +
                               ',' + std::string(to_string(r.cell.preprocess)) + ',';
    for (const auto& [m, imp] : r.median_imp) {
      out += prefix;
      out += to_string(m);
      out += ',' + format_optional(imp) + ',' + format_optional(r.positive_ratio.at(m)) + ',' +
             format_optional(r.median_mse.at(m)) + '\n';
    }
  }
  return out;
}

}  // namespace amtl
