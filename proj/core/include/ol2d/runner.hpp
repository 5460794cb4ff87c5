#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ol2d/analysis.hpp"
#include "ol2d/config.hpp"
#include "ol2d/environment.hpp"
#include "ol2d/learner.hpp"

namespace ol2d {

/// In-memory result of one seed's run; the file layer sits on top.
struct SeedRunResult {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
  std::vector<LoggedRound> log;  ///< kept when the comparator (or caller) needs it
  WeightMatrix final_weights;
  bool truncated = false;
  std::optional<ComparatorResult> comparator;
  std::vector<double> comparator_per_round;
  std::vector<RoundRecord> baseline_records;
  /// Rounds whose largest expected score fell below 1 - 1/sqrt(T); counted
  /// only when the near-realizable schedule runs on a stream that can
  /// report the score (-1 when not applicable).
  long near_realizable_violations = -1;
};

/// Run one seed of the configured experiment. The environment, learner,
/// baseline policy and baseline learner draw from separate streams of the
/// seed, so enabling one never perturbs another.
SeedRunResult run_single_seed(const ExperimentConfig& config, std::uint64_t seed,
                              bool keep_log = false,
                              std::shared_ptr<const SparseDataset> dataset = nullptr);

struct SeedSummary {
  std::uint64_t seed = 0;
  long rounds = 0;
  bool truncated = false;
  double mean_true_loss = 0.0;
  double mean_expected_loss = 0.0;
  double final_regret = 0.0;          ///< NaN without a comparator
  double comparator_objective = 0.0;  ///< NaN without a comparator
  double baseline_mean_loss = 0.0;    ///< NaN without the baseline
  long near_realizable_violations = -1;  ///< -1 when not applicable
};

struct RunSummary {
  std::string run_dir;
  long window = 0;
  std::vector<SeedSummary> seeds;
  std::uint64_t aggregate_checksum = 0;
  bool any_truncated = false;
};

/// Execute every seed (worker pool), write per-seed CSVs, the aggregate
/// (mean +- std over seeds), the resolved config snapshot and a summary.
RunSummary run_experiment(const ExperimentConfig& config);

/// Recompute windowed metrics from a saved per-round log.
RegretReport replay_rounds(const std::string& rounds_csv, long window);

/// Split an aggregate.csv into one plot-ready file per metric
/// (t_end, mean, std). Returns the metric names written.
std::vector<std::string> export_plots_data(const std::string& aggregate_csv,
                                           const std::string& out_dir);

/// $OL2D_OUTPUT_ROOT when set, else ./runs.
std::string default_output_root();

/// FNV-1a 64 over a file's bytes (aggregate checksum in the summary).
std::uint64_t file_checksum(const std::string& path);

}  // namespace ol2d
