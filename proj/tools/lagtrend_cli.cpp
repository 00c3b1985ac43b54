// lagtrend command line: run experiments, generate synthetic panels, and
// convert reports.
//
//   lagtrend run --config exp.ini [--mode cross|crisis|bottleneck] [--step-size N]
//                [--seed N] [--out DIR] [--jobs N]
//   lagtrend synth --config exp.ini --out panel.csv [--format ticks|prices]
//   lagtrend report --in report.json --format csv [--out DIR]
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lagtrend/lagtrend.hpp"

namespace fs = std::filesystem;
using namespace lagtrend;

namespace {

int cmd_run(const fs::path& config_path, const std::optional<std::string>& mode,
            const std::optional<std::size_t>& step_size, const std::optional<std::uint64_t>& seed,
            const std::optional<fs::path>& out, const std::optional<std::size_t>& jobs) {
  auto config = load_config(config_path);
  if (mode) config.mode = parse_mode(*mode);
  if (step_size) config.step_size = *step_size;
  if (seed) config.seed = *seed;
  if (out) config.out = *out;
  if (jobs) config.jobs = *jobs;
  config.validate();

  const auto reports = run_experiment(config);
  emit_report(reports, ReportFormat::json, config.out);
  emit_report(reports, ReportFormat::csv, config.out);
  for (const auto& r : reports) {
    std::cout << r.label() << "  step_size=" << r.step_size << "  stocks=" << r.evaluated_stocks << '/'
              << r.stocks.size() << '\n';
    for (const auto& s : r.series) std::cout << "  mean " << s.series << " = " << csv::format_double(s.mean) << '\n';
    for (const auto& t : r.tests)
      std::cout << "  model vs " << t.baseline << ": t=" << csv::format_double(t.welch.t_statistic)
                << " p=" << csv::format_double(t.welch.p_value) << '\n';
    for (const auto& s : r.stocks)
      if (s.skipped) std::cout << "  skipped " << s.stock_id << ": " << s.annotation << '\n';
  }
  std::cout << "wrote " << (config.out / "report.json").string() << '\n';
  return 0;
}

int cmd_synth(const fs::path& config_path, const fs::path& out_path, const std::string& format) {
  const auto config = load_config(config_path);
  if (config.data.kind != SourceKind::synthetic) throw ConfigError("synth: config has no synthetic data source");
  const auto matrix = generate(config.data.synthetic);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + out_path.string() + "'");
  if (format == "ticks")
    write_ticks(out, to_ticks(matrix));
  else
    write_price_csv(out, matrix);
  if (!out) throw RuntimeError("write failed for '" + out_path.string() + "'");
  std::cout << "wrote " << matrix.cols() << " stocks x " << matrix.rows() << " rows to " << out_path.string() << '\n';
  return 0;
}

int cmd_report(const fs::path& in_path, const std::string& format, const std::optional<fs::path>& out_dir) {
  std::ifstream in(in_path);
  if (!in) throw DataError("cannot open report '" + in_path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report '" + in_path.string() + "': " + e.what());
  }
  const auto reports = reports_from_json(doc);
  const auto dir = out_dir ? *out_dir : (in_path.has_parent_path() ? in_path.parent_path() : fs::path("."));
  for (const auto& p : emit_report(reports, format == "json" ? ReportFormat::json : ReportFormat::csv, dir))
    std::cout << "wrote " << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagged cross-stock trend prediction experiments"};
  app.require_subcommand(1);

  fs::path run_config;
  std::optional<std::string> run_mode;
  std::optional<std::size_t> run_step;
  std::optional<std::uint64_t> run_seed;
  std::optional<fs::path> run_out;
  std::optional<std::size_t> run_jobs;
  auto* run = app.add_subcommand("run", "Run an experiment and write report.json, accuracy.csv and boxplot.csv");
  run->add_option("--config", run_config, "Experiment config file")->required();
  run->add_option("--mode", run_mode, "Override the mode")->check(CLI::IsMember({"cross", "crisis", "bottleneck"}));
  run->add_option("--step-size", run_step, "Override the gradient interval length in grid rows");
  run->add_option("--seed", run_seed, "Override the master seed");
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--jobs", run_jobs, "Parallel per-stock tasks");

  fs::path synth_config, synth_out;
  std::string synth_format = "ticks";
  auto* synth = app.add_subcommand("synth", "Write a synthetic panel as CSV");
  synth->add_option("--config", synth_config, "Config file with a [synthetic] section")->required();
  synth->add_option("--out", synth_out, "Output CSV")->required();
  synth->add_option("--format", synth_format, "ticks or prices")->check(CLI::IsMember({"ticks", "prices"}));

  fs::path report_in;
  std::string report_format = "csv";
  std::optional<fs::path> report_out;
  auto* report = app.add_subcommand("report", "Convert a report.json");
  report->add_option("--in", report_in, "report.json written by run")->required();
  report->add_option("--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", report_out, "Output directory (default: next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    if (*run) return cmd_run(run_config, run_mode, run_step, run_seed, run_out, run_jobs);
    if (*synth) return cmd_synth(synth_config, synth_out, synth_format);
    if (*report) return cmd_report(report_in, report_format, report_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::runtime);
  }
  return exit_code(ErrorKind::runtime);
}
