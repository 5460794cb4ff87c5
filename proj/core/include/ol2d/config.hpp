#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ol2d/environment.hpp"
#include "ol2d/learner.hpp"
#include "ol2d/types.hpp"

namespace ol2d {

/// Where the input stream comes from.
enum class DataSource { synthetic, sparse_file };

/// Complete description of one experiment; together with the code version
/// it fully determines every output byte. A resolved snapshot is written
/// next to the results. The schema is documented in the README.
struct ExperimentConfig {
  std::string name = "experiment";
  ExperimentSetting setting = ExperimentSetting::fixed;
  DataSource source = DataSource::synthetic;

  // stream geometry
  int classes = 6;
  int experts = 3;
  int dim = 120;
  double radius = 1.0;
  NormPolicy norm_policy = NormPolicy::rescale;

  // synthetic generator
  std::vector<double> noise_init = {0.3, 0.3, 0.3, 0.3, 0.0, 0.0};
  double noise_sigma = 2e-3;

  // experts: per-expert knowledge regions (empty region = uniformly random
  // expert) at the start and, for drifting expertise, at the horizon
  std::vector<std::vector<int>> regions_start = {{1, 2}, {3, 4}, {}};
  std::vector<std::vector<int>> regions_end;
  double bridge_sigma = 0.02;
  double availability_init = 0.7;
  double availability_sigma = 2e-3;

  // dataset source
  std::string dataset_path;
  std::size_t dataset_max_rows = 0;  ///< 0 = all

  // costs (raw; normalized once at run start)
  std::vector<double> cost_alpha = {1.0, 1.0, 1.0};
  std::vector<double> cost_beta = {0.1, 0.1, 0.1};

  // learner
  ScheduleRegime regime = ScheduleRegime::general;
  double frob_bound = 0.0;  ///< 0 = default B = N
  double base_lr = 0.1;
  double lr_power = 0.5;
  double gamma_scale = 10.0;
  double gamma_power = 0.5;
  SurrogateKind surrogate = SurrogateKind::constrained_hinge;

  // run shape
  long horizon = 10000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  long window = 0;  ///< 0 = horizon / 200 (>= 1)

  // analysis
  bool comparator = false;
  int comparator_epochs = 60;
  bool baseline = false;
  double baseline_threshold = 0.5;

  std::string output_dir;  ///< empty = $OL2D_OUTPUT_ROOT/name or ./runs/name
  int threads = 0;         ///< 0 = one per seed up to hardware concurrency

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parse and validate; throws ConfigError listing every offending field.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Serialize with a stable key order; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Collect field-level problems (empty = valid).
std::vector<std::string> validate_config(const ExperimentConfig& config);

// Derived pieces used by the runner.
std::vector<ExpertCost> make_cost_model(const ExperimentConfig& config);
std::vector<ExpertSpec> make_expert_specs(const ExperimentConfig& config);
Schedule make_schedule(const ExperimentConfig& config);

}  // namespace ol2d
