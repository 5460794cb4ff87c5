// Experiment runner for online learning-to-defer: run experiments from a
// config file, verify the library's property suites, re-analyze saved logs
// and export plot-ready data.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ol2d/config.hpp"
#include "ol2d/runner.hpp"
#include "ol2d/verify.hpp"

namespace {

// exit codes: 0 ok, 1 internal, 2 config, 3 data, 4 protocol, 5 verification failed
int classify_exit(const std::exception& e) {
  if (dynamic_cast<const ol2d::ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const ol2d::DataError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const ol2d::ProtocolError*>(&e) != nullptr) return 4;
  return 1;
}

int cmd_run(const std::string& config_path, const std::string& output_dir, int threads) {
  ol2d::ExperimentConfig config = ol2d::load_config_file(config_path);
  if (!output_dir.empty()) config.output_dir = output_dir;
  if (threads > 0) config.threads = threads;
  const ol2d::RunSummary summary = ol2d::run_experiment(config);
  std::cout << "run dir:   " << summary.run_dir << "\n";
  std::cout << "window:    " << summary.window << "\n";
  std::cout << "checksum:  " << summary.aggregate_checksum << "\n";
  for (const auto& seed : summary.seeds) {
    std::cout << "seed " << seed.seed << ": rounds=" << seed.rounds
              << " mean_true_loss=" << seed.mean_true_loss;
    if (!std::isnan(seed.final_regret)) std::cout << " regret=" << seed.final_regret;
    if (!std::isnan(seed.baseline_mean_loss)) {
      std::cout << " baseline_mean_loss=" << seed.baseline_mean_loss;
    }
    if (seed.truncated) std::cout << " (truncated)";
    std::cout << "\n";
  }
  return summary.any_truncated ? 1 : 0;
}

int cmd_verify(const std::string& report_path, double scale, bool skip_run_level,
               std::uint64_t seed) {
  ol2d::VerifyOptions options;
  options.scale = scale;
  options.run_level = !skip_run_level;
  if (seed != 0) options.seed = seed;
  const ol2d::VerifyReport report = ol2d::run_verification(options);
  std::cout << report.to_text();
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) {
      std::cerr << "cannot write report to " << report_path << "\n";
      return 3;
    }
    out << report.to_json();
    std::cout << "report: " << report_path << "\n";
  }
  return report.all_passed() ? 0 : 5;
}

int cmd_replay(const std::string& rounds_csv, long window, const std::string& out_path) {
  const ol2d::RegretReport report = ol2d::replay_rounds(rounds_csv, window);
  const std::string target =
      out_path.empty() ? rounds_csv + ".windows.csv" : out_path;
  ol2d::write_windows_csv(report, target);
  const long rounds = report.windows.empty()
                          ? 0
                          : report.windows.back().t_end - report.windows.front().t_begin + 1;
  std::cout << "rounds:      " << rounds << " from " << rounds_csv << "\n";
  std::cout << "windows:     " << report.windows.size() << " x " << report.window << "\n";
  if (rounds > 0) {
    std::cout << "mean loss:   " << report.total_true_loss / rounds << "\n";
  }
  std::cout << "wrote:       " << target << "\n";
  return 0;
}

int cmd_export(const std::string& aggregate, const std::string& out_dir) {
  const auto metrics = ol2d::export_plots_data(aggregate, out_dir);
  std::cout << "wrote " << metrics.size() << " metric files to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online learning-to-defer experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("-o,--out", output_dir, "output directory (overrides the config)");
  run->add_option("-j,--threads", threads, "worker threads for seed dispatch");

  std::string report_path;
  double scale = 1.0;
  bool skip_run_level = false;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "run every property and oracle suite");
  verify->add_option("--report", report_path, "write a machine-readable JSON report");
  verify->add_option("--scale", scale, "instance-count multiplier (default 1.0)");
  verify->add_flag("--skip-run-level", skip_run_level, "skip the multi-seed statistical suite");
  verify->add_option("--seed", verify_seed, "override the suite seed");

  std::string rounds_csv;
  long window = 0;
  std::string replay_out;
  auto* replay = app.add_subcommand("replay", "recompute windowed metrics from a saved log");
  replay->add_option("rounds", rounds_csv, "per-round log (rounds.csv)")->required();
  replay->add_option("-w,--window", window, "window size (default: rounds / 200)");
  replay->add_option("-o,--out", replay_out, "output windows CSV");

  std::string aggregate_csv;
  std::string export_dir = "plots";
  auto* exporter =
      app.add_subcommand("export-plots-data", "split an aggregate into per-metric CSVs");
  exporter->add_option("aggregate", aggregate_csv, "aggregate.csv from a run")->required();
  exporter->add_option("-o,--out", export_dir, "output directory (default ./plots)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, output_dir, threads);
    if (verify->parsed()) return cmd_verify(report_path, scale, skip_run_level, verify_seed);
    if (replay->parsed()) return cmd_replay(rounds_csv, window, replay_out);
    if (exporter->parsed()) return cmd_export(aggregate_csv, export_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_exit(e);
  }
  return 0;
}
