#include "rydsim/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "rydsim/config.hpp"
#include "rydsim/errors.hpp"
#include "rydsim/experiments.hpp"

namespace rydsim::cli {

namespace {

// RYDSIM_THREADS caps ensemble parallelism; unset means all hardware
// threads. Results are seed-deterministic either way.
int thread_budget() {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("RYDSIM_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed >= 1) {
      threads = std::min<long>(threads, parsed);
    }
  }
  return threads;
}

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> shots;
};

void add_common(CLI::App* sub, CommonArgs* args) {
  sub->add_option("--config", args->config_path, "Config file (JSON)")
      ->required();
  sub->add_option("--out", args->out_path, "Output path");
  sub->add_option("--seed", args->seed, "Override the config seed");
  sub->add_option("--shots", args->shots, "Override the config shot count");
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_config_file(args.config_path);
  if (args.seed.has_value()) cfg.seed = *args.seed;
  if (args.shots.has_value()) {
    if (*args.shots < 1) throw ConfigError("--shots must be >= 1");
    cfg.shots = *args.shots;
  }
  return cfg;
}

int do_run(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  if (cfg.experiment == ExperimentKind::Calibrate) {
    throw ConfigError("experiment 'calibrate' runs via the calibrate subcommand");
  }
  std::string out = !args.out_path.empty() ? args.out_path : cfg.output_path;
  if (out.empty()) {
    throw ConfigError("no output path: set run.output or pass --out");
  }
  const ScanTable table = run_experiment(cfg, thread_budget());
  write_scan_csv(table, out);
  std::cout << "wrote " << table.rows.size() << " rows to " << out << "\n";
  return 0;
}

int do_fit(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  if (cfg.output_path.empty()) {
    throw ConfigError("fit reads the scan from run.output, which is not set");
  }
  const ScanTable table = read_scan_csv(cfg.output_path);
  const FitReport report = fit_scan(cfg, table);
  const std::string out =
      !args.out_path.empty() ? args.out_path : cfg.output_path + ".fit.json";
  std::ofstream file(out, std::ios::binary);
  if (!file) throw Error("cannot open '" + out + "'");
  file << report.to_json();

  if (report.rabi.has_value()) {
    std::cout << "frequency_hz "
              << report.rabi->frequency_rad_per_s / (2.0 * std::numbers::pi)
              << "\ncontrast " << report.rabi->contrast << "\n";
  }
  if (report.fidelity.has_value()) {
    std::cout << "F " << report.fidelity->fidelity << "\nF_renormalized "
              << report.fidelity->fidelity_renormalized << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int do_calibrate(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  if (cfg.experiment != ExperimentKind::Calibrate) {
    throw ConfigError("calibrate needs a config with experiment = calibrate");
  }
  const CalibrationResult result = run_calibration(cfg, thread_budget());
  std::string out = !args.out_path.empty() ? args.out_path : cfg.output_path;
  if (out.empty()) out = "calibration.json";
  std::ofstream file(out, std::ios::binary);
  if (!file) throw Error("cannot open '" + out + "'");
  file << result.to_json();
  std::cout << "objective " << result.objective << " after "
            << result.evaluations << " evaluations\n"
            << "achieved p11 " << result.achieved.p11 << " p10 "
            << result.achieved.p10 << " p01 " << result.achieved.p01
            << " p00 " << result.achieved.p00 << "\n"
            << "wrote " << out << "\n";
  return 0;
}

int do_report(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  if (!cfg.report.has_value()) {
    throw ConfigError("report needs a 'report' section with p and fidelity");
  }
  const PaperReport report =
      paper_report(cfg.report->loss_probability, cfg.report->fidelity);
  std::cout << report.to_text();
  if (!args.out_path.empty()) {
    std::ofstream file(args.out_path, std::ios::binary);
    if (!file) throw Error("cannot open '" + args.out_path + "'");
    file << report.to_text();
  }
  return 0;
}

}  // namespace

int execute(const std::vector<std::string>& args) {
  CLI::App app{"Two-atom Rydberg-blockade entanglement simulator"};
  app.require_subcommand(1);

  CommonArgs run_args;
  CommonArgs fit_args;
  CommonArgs cal_args;
  CommonArgs report_args;
  CLI::App* run_cmd = app.add_subcommand(
      "run", "Simulate the configured experiment over its scan grid");
  add_common(run_cmd, &run_args);
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Fit a scan CSV produced by run (read from run.output)");
  add_common(fit_cmd, &fit_args);
  CLI::App* cal_cmd = app.add_subcommand(
      "calibrate", "Search noise parameters matching target probabilities");
  add_common(cal_cmd, &cal_args);
  CLI::App* report_cmd = app.add_subcommand(
      "report", "Loss-accounting arithmetic from the report section");
  add_common(report_cmd, &report_args);

  // CLI11 parses argv-style reversed vectors.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) return do_run(run_args);
    if (fit_cmd->parsed()) return do_fit(fit_args);
    if (cal_cmd->parsed()) return do_calibrate(cal_args);
    if (report_cmd->parsed()) return do_report(report_args);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int execute(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return execute(args);
}

}  // namespace rydsim::cli
