#include "amtl/data.hpp"

#include "amtl/errors.hpp"
#include "amtl/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace amtl {

std::string_view to_string(TaskId id) {
  switch (id) {
    case TaskId::source1: return "source1";
    case TaskId::source2: return "source2";
    case TaskId::target: return "target";
  }
  return "?";
}

TaskId parse_task_id(std::string_view name) {
  if (name == "source1") return TaskId::source1;
  if (name == "source2") return TaskId::source2;
  if (name == "target") return TaskId::target;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

TaskSpec TaskSpec::source1() {
  return {TaskId::source1, "EOS M270",
          {{{40.0, 195.0}, {120.0, 1530.0}, {80.0, 100.0}, {17.99, 150.0}}}, 49};
}

TaskSpec TaskSpec::source2() {
  return {TaskId::source2, "SLM 250 HL",
          {{{100.0, 375.0}, {200.0, 1100.0}, {40.0, 120.0}, {50.62, 292.0}}}, 32};
}

TaskSpec TaskSpec::target() {
  TaskSpec t = source2();
  t.id = TaskId::target;
  t.printer_label = "SLM 125 HL";
  t.nominal_size = 24;
  return t;
}

TaskSpec TaskSpec::defaults(TaskId id) {
  switch (id) {
    case TaskId::source1: return source1();
    case TaskId::source2: return source2();
    case TaskId::target: return target();
  }
  return target();
}

void TaskSpec::validate() const {
  for (int k = 0; k < kNumInputs; ++k) {
    const Interval& r = input_ranges[static_cast<std::size_t>(k)];
    if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo < r.hi)) {
      throw ConfigError("task " + std::string(to_string(id)) + ": invalid range for input " +
                        std::to_string(k));
    }
  }
}

// ---- Dataset -------------------------------------------------------------------

Dataset::Dataset(TaskSpec task, InputMatrix inputs, Eigen::VectorXd outputs)
    : task_(std::move(task)), inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
  if (inputs_.rows() != outputs_.size()) {
    throw InputError("dataset: " + std::to_string(inputs_.rows()) + " input rows but " +
                     std::to_string(outputs_.size()) + " outputs");
  }
  if (!inputs_.allFinite() || !outputs_.allFinite()) {
    throw InputError("dataset: non-finite value");
  }
}

Dataset Dataset::from_samples(TaskSpec task, std::span<const Sample> samples) {
  const auto n = static_cast<Index>(samples.size());
  InputMatrix x(n, kNumInputs);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const Sample& s = samples[static_cast<std::size_t>(i)];
    x.row(i) = s.inputs().transpose();
    y(i) = s.relative_density;
  }
  return Dataset(std::move(task), std::move(x), std::move(y));
}

Sample Dataset::sample(Index i) const {
  return {inputs_(i, 0), inputs_(i, 1), inputs_(i, 2), inputs_(i, 3), outputs_(i)};
}

std::vector<Sample> Dataset::samples() const {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) out.push_back(sample(i));
  return out;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  const auto n = static_cast<Index>(rows.size());
  InputMatrix x(n, kNumInputs);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= size()) throw SizeError("dataset subset: row out of range");
    x.row(i) = inputs_.row(r);
    y(i) = outputs_(r);
  }
  return Dataset(task_, std::move(x), std::move(y));
}

Dataset Dataset::with_inputs(InputMatrix inputs) const {
  return Dataset(task_, std::move(inputs), outputs_);
}

Dataset Dataset::with_outputs(Eigen::VectorXd outputs) const {
  return Dataset(task_, inputs_, std::move(outputs));
}

Dataset Dataset::concat(const Dataset& head, const Dataset& tail) {
  InputMatrix x(head.size() + tail.size(), kNumInputs);
  x << head.inputs_, tail.inputs_;
  Eigen::VectorXd y(head.size() + tail.size());
  y << head.outputs_, tail.outputs_;
  return Dataset(head.task_, std::move(x), std::move(y));
}

// ---- CSV -------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

constexpr std::array<std::string_view, 5> kColumns = {"laser_power", "laser_speed", "hatch_spacing",
                                                      "energy", "relative_density"};

void format_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

}  // namespace

Dataset parse_csv(std::string_view text, const TaskSpec& task) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(start, nl - start));
    if (!line.empty()) lines.push_back(line);
    start = nl + 1;
  }
  if (lines.empty()) throw EmptyDatasetError("csv: empty file");

  // Tolerate a UTF-8 byte order mark on the header.
  std::string_view header = lines.front();
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  const auto columns = split_commas(header);
  if (columns.size() != kColumns.size()) {
    throw SchemaError("csv: expected " + std::to_string(kColumns.size()) + " columns, found " +
                      std::to_string(columns.size()));
  }
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    if (columns[c] != kColumns[c]) {
      throw SchemaError("csv: column " + std::to_string(c + 1) + " is '" + std::string(columns[c]) +
                        "', expected '" + std::string(kColumns[c]) + "'");
    }
  }
  if (lines.size() == 1) throw EmptyDatasetError("csv: no data rows");

  std::vector<Sample> samples;
  samples.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_commas(lines[r]);
    if (cells.size() != kColumns.size()) {
      throw SchemaError("csv: row " + std::to_string(r) + " has " + std::to_string(cells.size()) +
                        " cells");
    }
    std::array<double, 5> v{};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      auto [ptr, ec] = std::from_chars(first, last, v[c]);
      if (ec != std::errc{} || ptr != last || !std::isfinite(v[c])) {
        throw ParseError("csv: row " + std::to_string(r) + ", column " + std::string(kColumns[c]) +
                         ": cannot parse '" + std::string(cells[c]) + "'");
      }
    }
    if (!(v[4] > 0.0 && v[4] <= 100.0)) {
      throw ParseError("csv: row " + std::to_string(r) + ": relative_density outside (0, 100]");
    }
    samples.push_back({v[0], v[1], v[2], v[3], v[4]});
  }
  return Dataset::from_samples(task, samples);
}

Dataset load_csv(const std::filesystem::path& path, const TaskSpec& task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), task);
}

std::string to_csv(const Dataset& data) {
  std::string out(kCsvHeader);
  out += '\n';
  for (Index i = 0; i < data.size(); ++i) {
    for (int k = 0; k < kNumInputs; ++k) {
      format_double(out, data.inputs()(i, k));
      out += ',';
    }
    format_double(out, data.outputs()(i));
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv(data);
  if (!out) throw IoError("write failed: " + path.string());
}

// ---- Synthetic -------------------------------------------------------------------

std::string_view to_string(Response r) { return r == Response::affine ? "affine" : "quadratic"; }

Response parse_response(std::string_view name) {
  if (name == "affine") return Response::affine;
  if (name == "quadratic") return Response::quadratic;
  throw ConfigError("unknown synthetic response '" + std::string(name) + "'");
}

double synthetic_response(const InputVector& x, Response response, double shift) {
  // Inputs are normalized against the union of all default printer envelopes,
  // so the law is a function of physical settings shared by every task.
  static const InputVector lo{40.0, 120.0, 40.0, 17.99};
  static const InputVector hi{375.0, 1530.0, 120.0, 292.0};
  const InputVector u = (x - lo).cwiseQuotient(hi - lo);
  const double s = shift;

  if (response == Response::affine) {
    return 94.0 - 0.6 * s + (2.0 + 0.5 * s) * u(0) - (2.5 - 0.4 * s) * u(1) +
           (1.0 + 0.3 * s) * u(2) + (2.5 - 0.5 * s) * u(3);
  }
  const auto sq = [](double v) { return v * v; };
  return 97.5 - 0.6 * s + (1.5 + 0.4 * s) * u(0) -
         (9.0 + 2.0 * s) * sq(u(3) - (0.45 + 0.06 * s)) -
         5.0 * sq(u(1) - (0.35 - 0.05 * s)) -
         (3.0 + s) * sq(u(2) - (0.5 + 0.05 * s));
}

Dataset generate_synthetic(const TaskSpec& task, int n, std::uint64_t seed,
                           const SyntheticOptions& options) {
  task.validate();
  if (n < 1) throw ConfigError("synthetic: n must be >= 1");
  if (!(options.noise >= 0.0 && options.noise <= 0.5)) {
    throw ConfigError("synthetic: noise amplitude must lie in [0, 0.5]");
  }
  Rng rng(derive_seed(seed, "synthetic"));
  InputMatrix x(n, kNumInputs);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < kNumInputs; ++k) {
      const Interval& r = task.input_ranges[static_cast<std::size_t>(k)];
      x(i, k) = rng.uniform(r.lo, r.hi);
    }
    const double noise = options.noise * (2.0 * rng.uniform() - 1.0);
    const double v = synthetic_response(x.row(i).transpose(), options.response, options.shift) + noise;
    y(i) = std::clamp(v, 1e-6, 100.0);
  }
  return Dataset(task, std::move(x), std::move(y));
}

Dataset generate_synthetic(const TaskSpec& task, int n, std::uint64_t seed, Response response) {
  SyntheticOptions options;
  options.response = response;
  return generate_synthetic(task, n, seed, options);
}

// ---- Splits --------------------------------------------------------------------------

Split sample_split(const Dataset& target, const Dataset& source, const SplitPlan& plan) {
  if (plan.n_train_t < 1 || plan.n_val_t < 1 || plan.n_s < 1) {
    throw SizeError("split: sizes must be positive");
  }
  if (plan.n_train_t + plan.n_val_t > target.size()) {
    throw SizeError("split: n_train_t + n_val_t = " + std::to_string(plan.n_train_t + plan.n_val_t) +
                    " exceeds target size " + std::to_string(target.size()));
  }
  if (plan.n_s > source.size()) {
    throw SizeError("split: n_s = " + std::to_string(plan.n_s) + " exceeds source size " +
                    std::to_string(source.size()));
  }

  std::vector<Index> target_rows(static_cast<std::size_t>(target.size()));
  std::iota(target_rows.begin(), target_rows.end(), Index{0});
  Rng target_rng(derive_seed(plan.seed, "split/target"));
  target_rng.shuffle(std::span<Index>(target_rows));

  std::vector<Index> source_rows(static_cast<std::size_t>(source.size()));
  std::iota(source_rows.begin(), source_rows.end(), Index{0});
  Rng source_rng(derive_seed(plan.seed, "split/source"));
  source_rng.shuffle(std::span<Index>(source_rows));

  Split split;
  const auto n_train = static_cast<std::size_t>(plan.n_train_t);
  const auto n_val = static_cast<std::size_t>(plan.n_val_t);
  split.train_rows.assign(target_rows.begin(), target_rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val_rows.assign(target_rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                        target_rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.source_rows.assign(source_rows.begin(), source_rows.begin() + plan.n_s);
  split.train_t = target.subset(split.train_rows);
  split.val_t = target.subset(split.val_rows);
  split.source_sub = source.subset(split.source_rows);
  return split;
}

// ---- Preprocessing -------------------------------------------------------------------

std::string_view to_string(PreprocessMode mode) {
  switch (mode) {
    case PreprocessMode::raw: return "raw";
    case PreprocessMode::minmax: return "minmax";
    case PreprocessMode::zscore: return "zscore";
  }
  return "?";
}

PreprocessMode parse_preprocess_mode(std::string_view name) {
  if (name == "raw") return PreprocessMode::raw;
  if (name == "minmax") return PreprocessMode::minmax;
  if (name == "zscore") return PreprocessMode::zscore;
  throw ConfigError("unknown preprocessing mode '" + std::string(name) + "'");
}

Preprocessor::Preprocessor(PreprocessMode mode, InputVector shift, InputVector scale,
                           std::string fitted_on)
    : mode_(mode), shift_(shift), scale_(scale), fitted_on_(std::move(fitted_on)) {
  if (!(scale_.array() > 0.0).all() || !shift_.allFinite() || !scale_.allFinite()) {
    throw DegenerateFeatureError("preprocessor: scale must be positive and finite");
  }
}

InputVector Preprocessor::apply(const InputVector& x) const {
  if (mode_ == PreprocessMode::raw) return x;
  return (x - shift_).cwiseQuotient(scale_);
}

InputVector Preprocessor::inverse_apply(const InputVector& x) const {
  if (mode_ == PreprocessMode::raw) return x;
  return x.cwiseProduct(scale_) + shift_;
}

Dataset Preprocessor::apply(const Dataset& data) const {
  if (mode_ == PreprocessMode::raw) return data;
  InputMatrix x = (data.inputs().rowwise() - shift_.transpose()).array().rowwise() /
                  scale_.transpose().array();
  return data.with_inputs(std::move(x));
}

Dataset Preprocessor::inverse_apply(const Dataset& data) const {
  if (mode_ == PreprocessMode::raw) return data;
  InputMatrix x = (data.inputs().array().rowwise() * scale_.transpose().array()).matrix().rowwise() +
                  shift_.transpose();
  return data.with_inputs(std::move(x));
}

Preprocessor fit_preprocessor(PreprocessMode mode, const Dataset& data) {
  if (data.empty()) throw EmptyDatasetError("preprocessor: empty dataset");
  std::string tag = std::string(to_string(data.task().id)) + "[" + std::to_string(data.size()) + "]";
  if (mode == PreprocessMode::raw) {
    return Preprocessor(mode, InputVector::Zero(), InputVector::Ones(), std::move(tag));
  }
  const InputMatrix& x = data.inputs();
  const InputVector range = x.colwise().maxCoeff().transpose() - x.colwise().minCoeff().transpose();
  InputVector shift;
  InputVector scale;
  if (mode == PreprocessMode::minmax) {
    shift = x.colwise().minCoeff().transpose();
    scale = x.colwise().maxCoeff().transpose() - shift;
  } else {
    shift = x.colwise().mean().transpose();
    scale = ((x.rowwise() - shift.transpose()).array().square().colwise().sum() /
             static_cast<double>(x.rows()))
                .sqrt()
                .transpose();
  }
  for (int k = 0; k < kNumInputs; ++k) {
    if (!(range(k) > 0.0) || !(scale(k) > 0.0)) {
      throw DegenerateFeatureError("preprocessor: input " + std::to_string(k) + " is constant under " +
                                   std::string(to_string(mode)));
    }
  }
  return Preprocessor(mode, shift, scale, std::move(tag));
}

Dataset apply_preprocessor(const Preprocessor& p, const Dataset& data) { return p.apply(data); }

}  // namespace amtl
