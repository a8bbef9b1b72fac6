// amtl: run transfer-learning benchmark grids and emit plot-ready tables.
//
//   amtl run --grid paper --source source1 --iters 30 --out results
//   amtl synth --out data
//   amtl summarize results/report.json --axis ratio_ntrain_over_ns

#include "amtl/bench.hpp"
#include "amtl/cli.hpp"
#include "amtl/errors.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Flags {
  std::string config;
  amtl::ConfigOverrides overrides;
  std::string report;
  std::string axis = "ratio_ntrain_over_ns";
  std::string table_out;
};

void add_run_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "key = value configuration file");
  cmd.add_option("--grid", f.overrides.grid, "paper | similarity | preprocessing | custom");
  cmd.add_option("--source", f.overrides.source, "source1, source2, or both comma-separated");
  cmd.add_option("--setting", f.overrides.setting, "setting1 | setting2 (comma-separated for both)");
  cmd.add_option("--preprocess", f.overrides.preprocess, "raw | minmax | zscore (comma-separated allowed)");
  cmd.add_option("--iters", f.overrides.iterations, "validation iterations per cell");
  cmd.add_option("--seed", f.overrides.seed, "base seed");
  cmd.add_option("--workers", f.overrides.workers, "worker threads");
  cmd.add_option("--out", f.overrides.out, "output directory");
}

int run(const Flags& f) {
  const amtl::RunConfig cfg = amtl::parse_config(f.config, f.overrides);
  const std::vector<amtl::GridCell> plan = amtl::resolve_plan(cfg);
  const amtl::GridData data = amtl::load_grid_data(cfg);
  std::cerr << "running " << plan.size() << " cells x " << cfg.iterations << " iterations on " << cfg.workers
            << " worker(s)\n";
  const auto start = std::chrono::steady_clock::now();
  const amtl::RunReport report = amtl::run_grid(plan, data, cfg.workers);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  amtl::emit_report(report, cfg.out);
  std::cerr << "done in " << elapsed.count() << " s; wrote " << cfg.out.string() << "\n";
  for (const auto& c : report.cells) {
    if (c.failed) std::cerr << "warning: a model failed on every iteration of a " << amtl::to_string(c.cell.source_task)
                            << " cell (n_s=" << c.cell.n_s << ", n_train_t=" << c.cell.n_train_t << ")\n";
  }
  return 0;
}

int synth(const Flags& f) {
  const amtl::RunConfig cfg = amtl::parse_config(f.config, f.overrides);
  std::filesystem::create_directories(cfg.out);
  for (amtl::TaskId id : {amtl::TaskId::target, amtl::TaskId::source1, amtl::TaskId::source2}) {
    const auto path = cfg.out / (std::string(amtl::to_string(id)) + ".csv");
    amtl::write_csv(path, cfg.synthetic.make(id));
    std::cerr << "wrote " << path.string() << "\n";
  }
  return 0;
}

int summarize(const Flags& f) {
  const amtl::SummaryAxis axis = amtl::parse_summary_axis(f.axis);
  const amtl::RunReport report = amtl::read_report(f.report);
  const std::string table = amtl::summary_csv(amtl::summarize(report, axis));
  if (f.table_out.empty()) {
    std::cout << table;
    return 0;
  }
  std::ofstream out(f.table_out, std::ios::binary);
  if (!out) throw amtl::IoError("cannot open '" + f.table_out + "' for writing");
  out << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-learning benchmark for small tabular regression data"};
  app.require_subcommand(1);

  Flags flags;
  CLI::App* run_cmd = app.add_subcommand("run", "execute a grid and write cells.csv, iterations.csv, report.json");
  add_run_flags(*run_cmd, flags);
  CLI::App* synth_cmd = app.add_subcommand("synth", "write synthetic target/source CSVs");
  synth_cmd->add_option("--config", flags.config, "key = value configuration file");
  synth_cmd->add_option("--out", flags.overrides.out, "output directory");
  CLI::App* sum_cmd = app.add_subcommand("summarize", "re-derive plot tables from report.json");
  sum_cmd->add_option("report", flags.report, "report.json")->required();
  sum_cmd->add_option("--axis", flags.axis, "ratio_ntrain_over_ns | similarity | preprocessing");
  sum_cmd->add_option("--out", flags.table_out, "CSV file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return run(flags);
    if (*synth_cmd) return synth(flags);
    return summarize(flags);
  } catch (const amtl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
