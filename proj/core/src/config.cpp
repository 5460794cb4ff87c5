#include "ol2d/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ol2d {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string setting_name(ExperimentSetting s) {
  switch (s) {
    case ExperimentSetting::fixed: return "fixed";
    case ExperimentSetting::drifting_availability: return "drifting_availability";
    case ExperimentSetting::drifting_both: return "drifting_both";
  }
  return "fixed";
}

ExperimentSetting setting_from(const std::string& s) {
  if (s == "fixed") return ExperimentSetting::fixed;
  if (s == "drifting_availability") return ExperimentSetting::drifting_availability;
  if (s == "drifting_both") return ExperimentSetting::drifting_both;
  throw ConfigError("setting: unknown value '" + s + "'");
}

std::string regime_name(ScheduleRegime r) {
  switch (r) {
    case ScheduleRegime::general: return "general";
    case ScheduleRegime::near_realizable: return "near_realizable";
    case ScheduleRegime::adagrad: return "adagrad";
    case ScheduleRegime::custom: return "custom";
  }
  return "general";
}

ScheduleRegime regime_from(const std::string& s) {
  if (s == "general") return ScheduleRegime::general;
  if (s == "near_realizable") return ScheduleRegime::near_realizable;
  if (s == "adagrad") return ScheduleRegime::adagrad;
  if (s == "custom") return ScheduleRegime::custom;
  throw ConfigError("schedule.regime: unknown value '" + s + "'");
}

const std::set<std::string> kKnownKeys = {
    "name", "setting", "source", "classes", "experts", "dim", "radius", "norm_policy",
    "noise_init", "noise_sigma", "regions_start", "regions_end", "bridge_sigma",
    "availability_init", "availability_sigma", "dataset_path", "dataset_max_rows",
    "cost_alpha", "cost_beta", "schedule", "surrogate", "horizon", "seeds", "window",
    "comparator", "comparator_epochs", "baseline", "baseline_threshold", "output_dir",
    "threads"};

const std::set<std::string> kScheduleKeys = {"regime", "frob_bound", "base_lr", "lr_power",
                                             "gamma_scale", "gamma_power"};

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  std::vector<std::string> problems;
  for (const auto& [key, value] : j.items()) {
    if (kKnownKeys.find(key) == kKnownKeys.end()) problems.push_back("unknown key '" + key + "'");
  }

  ExperimentConfig c;
  try {
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (j.contains("setting")) c.setting = setting_from(j.at("setting").get<std::string>());
    if (j.contains("source")) {
      const std::string s = j.at("source").get<std::string>();
      if (s == "synthetic") {
        c.source = DataSource::synthetic;
      } else if (s == "sparse_file") {
        c.source = DataSource::sparse_file;
      } else {
        problems.push_back("source: unknown value '" + s + "'");
      }
    }
    if (j.contains("classes")) c.classes = j.at("classes").get<int>();
    if (j.contains("experts")) c.experts = j.at("experts").get<int>();
    if (j.contains("dim")) c.dim = j.at("dim").get<int>();
    if (j.contains("radius")) c.radius = j.at("radius").get<double>();
    if (j.contains("norm_policy")) {
      const std::string s = j.at("norm_policy").get<std::string>();
      if (s == "rescale") {
        c.norm_policy = NormPolicy::rescale;
      } else if (s == "reject") {
        c.norm_policy = NormPolicy::reject;
      } else {
        problems.push_back("norm_policy: unknown value '" + s + "'");
      }
    }
    if (j.contains("noise_init")) c.noise_init = j.at("noise_init").get<std::vector<double>>();
    if (j.contains("noise_sigma")) c.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("regions_start")) {
      c.regions_start = j.at("regions_start").get<std::vector<std::vector<int>>>();
    }
    if (j.contains("regions_end")) {
      c.regions_end = j.at("regions_end").get<std::vector<std::vector<int>>>();
    }
    if (j.contains("bridge_sigma")) c.bridge_sigma = j.at("bridge_sigma").get<double>();
    if (j.contains("availability_init")) {
      c.availability_init = j.at("availability_init").get<double>();
    }
    if (j.contains("availability_sigma")) {
      c.availability_sigma = j.at("availability_sigma").get<double>();
    }
    if (j.contains("dataset_path")) c.dataset_path = j.at("dataset_path").get<std::string>();
    if (j.contains("dataset_max_rows")) {
      c.dataset_max_rows = j.at("dataset_max_rows").get<std::size_t>();
    }
    if (j.contains("cost_alpha")) c.cost_alpha = j.at("cost_alpha").get<std::vector<double>>();
    if (j.contains("cost_beta")) c.cost_beta = j.at("cost_beta").get<std::vector<double>>();
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      for (const auto& [key, value] : s.items()) {
        if (kScheduleKeys.find(key) == kScheduleKeys.end()) {
          problems.push_back("unknown key 'schedule." + key + "'");
        }
      }
      if (s.contains("regime")) c.regime = regime_from(s.at("regime").get<std::string>());
      if (s.contains("frob_bound")) c.frob_bound = s.at("frob_bound").get<double>();
      if (s.contains("base_lr")) c.base_lr = s.at("base_lr").get<double>();
      if (s.contains("lr_power")) c.lr_power = s.at("lr_power").get<double>();
      if (s.contains("gamma_scale")) c.gamma_scale = s.at("gamma_scale").get<double>();
      if (s.contains("gamma_power")) c.gamma_power = s.at("gamma_power").get<double>();
    }
    if (j.contains("surrogate")) {
      const std::string s = j.at("surrogate").get<std::string>();
      if (s == "constrained_hinge") {
        c.surrogate = SurrogateKind::constrained_hinge;
      } else if (s == "logistic") {
        c.surrogate = SurrogateKind::logistic;
      } else {
        problems.push_back("surrogate: unknown value '" + s + "'");
      }
    }
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<long>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("window")) c.window = j.at("window").get<long>();
    if (j.contains("comparator")) c.comparator = j.at("comparator").get<bool>();
    if (j.contains("comparator_epochs")) {
      c.comparator_epochs = j.at("comparator_epochs").get<int>();
    }
    if (j.contains("baseline")) c.baseline = j.at("baseline").get<bool>();
    if (j.contains("baseline_threshold")) {
      c.baseline_threshold = j.at("baseline_threshold").get<double>();
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }

  auto more = validate_config(c);
  problems.insert(problems.end(), more.begin(), more.end());
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["setting"] = setting_name(c.setting);
  j["source"] = c.source == DataSource::synthetic ? "synthetic" : "sparse_file";
  j["classes"] = c.classes;
  j["experts"] = c.experts;
  j["dim"] = c.dim;
  j["radius"] = c.radius;
  j["norm_policy"] = c.norm_policy == NormPolicy::rescale ? "rescale" : "reject";
  j["noise_init"] = c.noise_init;
  j["noise_sigma"] = c.noise_sigma;
  j["regions_start"] = c.regions_start;
  j["regions_end"] = c.regions_end;
  j["bridge_sigma"] = c.bridge_sigma;
  j["availability_init"] = c.availability_init;
  j["availability_sigma"] = c.availability_sigma;
  j["dataset_path"] = c.dataset_path;
  j["dataset_max_rows"] = c.dataset_max_rows;
  j["cost_alpha"] = c.cost_alpha;
  j["cost_beta"] = c.cost_beta;
  j["schedule"] = {{"regime", regime_name(c.regime)}, {"frob_bound", c.frob_bound},
                   {"base_lr", c.base_lr},            {"lr_power", c.lr_power},
                   {"gamma_scale", c.gamma_scale},    {"gamma_power", c.gamma_power}};
  j["surrogate"] =
      c.surrogate == SurrogateKind::constrained_hinge ? "constrained_hinge" : "logistic";
  j["horizon"] = c.horizon;
  j["seeds"] = c.seeds;
  j["window"] = c.window;
  j["comparator"] = c.comparator;
  j["comparator_epochs"] = c.comparator_epochs;
  j["baseline"] = c.baseline;
  j["baseline_threshold"] = c.baseline_threshold;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  if (c.name.empty()) problems.push_back("name: must not be empty");
  if (c.classes < 2) problems.push_back("classes: need at least 2");
  if (c.experts < 0) problems.push_back("experts: must be >= 0");
  if (c.horizon < 1) problems.push_back("horizon: must be >= 1");
  if (c.seeds.empty()) problems.push_back("seeds: need at least one seed");
  if (c.radius <= 0.0) problems.push_back("radius: must be positive");
  if (c.window < 0) problems.push_back("window: must be >= 0");
  if (c.frob_bound < 0.0) problems.push_back("schedule.frob_bound: must be >= 0 (0 = default)");
  if (c.base_lr <= 0.0) problems.push_back("schedule.base_lr: must be positive");
  if (c.gamma_scale < 0.0) problems.push_back("schedule.gamma_scale: must be >= 0");
  if (c.baseline_threshold < 0.0 || c.baseline_threshold > 1.0) {
    problems.push_back("baseline_threshold: must lie in [0,1]");
  }
  if (c.comparator_epochs < 1) problems.push_back("comparator_epochs: must be >= 1");
  if (c.threads < 0) problems.push_back("threads: must be >= 0");

  if (c.source == DataSource::synthetic) {
    if (c.dim < c.classes) problems.push_back("dim: must be >= classes for the synthetic stream");
    if (static_cast<int>(c.noise_init.size()) != c.classes) {
      problems.push_back("noise_init: needs one entry per class");
    }
    for (double p : c.noise_init) {
      if (p < 0.0 || p > 1.0) {
        problems.push_back("noise_init: probabilities must lie in [0,1]");
        break;
      }
    }
  } else if (c.dataset_path.empty()) {
    problems.push_back("dataset_path: required when source = sparse_file");
  }

  if (static_cast<int>(c.cost_alpha.size()) != c.experts) {
    problems.push_back("cost_alpha: needs one entry per expert");
  }
  if (static_cast<int>(c.cost_beta.size()) != c.experts) {
    problems.push_back("cost_beta: needs one entry per expert");
  }
  for (double a : c.cost_alpha) {
    if (a < 0.0) {
      problems.push_back("cost_alpha: entries must be >= 0");
      break;
    }
  }
  for (double b : c.cost_beta) {
    if (b < 0.0) {
      problems.push_back("cost_beta: entries must be >= 0");
      break;
    }
  }

  if (static_cast<int>(c.regions_start.size()) != c.experts) {
    problems.push_back("regions_start: needs one region list per expert");
  }
  if (c.setting == ExperimentSetting::drifting_both &&
      static_cast<int>(c.regions_end.size()) != c.experts) {
    problems.push_back("regions_end: required per expert when setting = drifting_both");
  }
  auto check_regions = [&](const std::vector<std::vector<int>>& regions, const char* key) {
    for (const auto& region : regions) {
      for (int y : region) {
        if (y < 1 || y > c.classes) {
          problems.push_back(std::string(key) + ": class index outside 1..classes");
          return;
        }
      }
    }
  };
  check_regions(c.regions_start, "regions_start");
  check_regions(c.regions_end, "regions_end");

  if (c.availability_init < 0.0 || c.availability_init > 1.0) {
    problems.push_back("availability_init: must lie in [0,1]");
  }
  return problems;
}

std::vector<ExpertCost> make_cost_model(const ExperimentConfig& c) {
  std::vector<ExpertCost> raw;
  raw.reserve(static_cast<std::size_t>(c.experts));
  for (int j = 0; j < c.experts; ++j) {
    ExpertCost cost;
    cost.alpha = c.cost_alpha[static_cast<std::size_t>(j)];
    cost.beta = c.cost_beta[static_cast<std::size_t>(j)];
    raw.push_back(cost);
  }
  return normalize_costs(std::move(raw));
}

std::vector<ExpertSpec> make_expert_specs(const ExperimentConfig& c) {
  std::vector<ExpertSpec> specs;
  specs.reserve(static_cast<std::size_t>(c.experts));
  for (int j = 0; j < c.experts; ++j) {
    ExpertSpec spec;
    spec.accuracy_start = region_profile(c.classes, c.regions_start[static_cast<std::size_t>(j)]);
    if (c.setting == ExperimentSetting::drifting_both) {
      spec.accuracy_end = region_profile(c.classes, c.regions_end[static_cast<std::size_t>(j)]);
    }
    spec.bridge_sigma = c.bridge_sigma;
    spec.availability_init = c.availability_init;
    spec.availability_sigma = c.availability_sigma;
    specs.push_back(std::move(spec));
  }
  return specs;
}

Schedule make_schedule(const ExperimentConfig& c) {
  const int total = c.classes + c.experts;
  const double bound = c.frob_bound > 0.0 ? c.frob_bound : static_cast<double>(total);
  switch (c.regime) {
    case ScheduleRegime::general:
      return Schedule::general(bound, c.radius, total);
    case ScheduleRegime::near_realizable:
      return Schedule::near_realizable(bound, c.radius, total);
    case ScheduleRegime::adagrad:
      return Schedule::adagrad(bound, c.radius, total, c.base_lr, c.gamma_scale);
    case ScheduleRegime::custom:
      return Schedule::custom(bound, c.radius, total, c.base_lr, c.lr_power, c.gamma_scale,
                              c.gamma_power);
  }
  return Schedule::general(bound, c.radius, total);
}

}  // namespace ol2d
