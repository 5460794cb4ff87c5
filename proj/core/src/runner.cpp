#include "ol2d/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ol2d {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::unique_ptr<RoundStream> build_stream(const ExperimentConfig& config,
                                          const std::vector<ExpertCost>& costs,
                                          std::uint64_t seed,
                                          std::shared_ptr<const SparseDataset> dataset) {
  if (config.source == DataSource::synthetic) {
    SyntheticConfig syn;
    syn.classes = config.classes;
    syn.experts = config.experts;
    syn.dim = config.dim;
    syn.radius = config.radius;
    syn.noise_init = config.noise_init;
    syn.noise_sigma = config.noise_sigma;
    syn.setting = config.setting;
    syn.expert_specs = make_expert_specs(config);
    syn.horizon = config.horizon;
    return make_synthetic_stream(syn, costs, seed, /*stream=*/0);
  }
  DatasetEnvConfig env;
  env.setting = config.setting;
  env.expert_specs = make_expert_specs(config);
  env.horizon = config.horizon;
  return make_dataset_stream(std::move(dataset), env, costs, seed, /*stream=*/0);
}

/// Confidence-threshold baseline harness: a class-only bandit learner plus
/// the uniform-deferral rule. Deferred rounds consume the feedback but
/// produce no update, since the baseline predictor has no deferral head.
std::vector<RoundRecord> run_baseline(const ExperimentConfig& config,
                                      const std::vector<ExpertCost>& costs, std::uint64_t seed,
                                      std::shared_ptr<const SparseDataset> dataset) {
  auto stream = build_stream(config, costs, seed, std::move(dataset));
  const LabelSpace full_space = stream->space();
  const LabelSpace class_space(full_space.n, 0);

  Schedule schedule = make_schedule(config);
  schedule.total_labels = class_space.total();
  if (config.frob_bound <= 0.0) schedule.frob_bound = static_cast<double>(class_space.total());

  OnlineLearner learner(class_space, stream->feature_dim(), schedule,
                        SurrogateKind::constrained_hinge, seed, /*stream=*/3);
  RngStream defer_rng(seed, /*stream=*/2);

  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(config.horizon));
  for (long t = 1; t <= config.horizon; ++t) {
    auto round = stream->next();
    if (!round.has_value()) break;
    const BanditOracle oracle = stream->make_oracle(*round);

    RoundRecord rec;
    const int decision = baseline_confidence_threshold(learner.weights(), round->input,
                                                       config.baseline_threshold, defer_rng);
    if (full_space.is_class(decision)) {
      AugmentedInput class_input{round->input.x, ExpertSet{}, learner.round()};
      const DeferralOutcome outcome = learner.step(class_input, oracle, &rec);
      rec.t = t;
      rec.incurred_loss = outcome.incurred_loss;
    } else {
      const Feedback fb = oracle(decision);
      rec.t = t;
      rec.action = decision;
      rec.deferred = true;
      rec.expert = full_space.expert_of(decision);
      rec.correct = fb.correct;
      rec.cost = *fb.cost;
      rec.incurred_loss = *fb.cost;
      rec.action_prob = 1.0 / static_cast<double>(round->input.experts.size());
    }
    rec.support = make_label_set(full_space, round->input.experts);
    rec.true_label = round->label;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

SeedRunResult run_single_seed(const ExperimentConfig& config, std::uint64_t seed, bool keep_log,
                              std::shared_ptr<const SparseDataset> dataset) {
  const std::vector<ExpertCost> costs = make_cost_model(config);
  if (config.source == DataSource::sparse_file && dataset == nullptr) {
    dataset = std::make_shared<const SparseDataset>(load_sparse_dataset(
        config.dataset_path, config.radius, config.norm_policy, config.dataset_max_rows));
  }

  auto stream = build_stream(config, costs, seed, dataset);
  const LabelSpace space = stream->space();
  const Schedule schedule = make_schedule(config);

  SeedRunResult result;
  result.seed = seed;
  OnlineLearner learner(space, stream->feature_dim(), schedule, config.surrogate, seed,
                        /*stream=*/1);

  const bool want_log = keep_log || config.comparator;
  result.records.reserve(static_cast<std::size_t>(config.horizon));
  const bool check_nr = config.regime == ScheduleRegime::near_realizable;
  const double nr_floor = 1.0 - 1.0 / std::sqrt(static_cast<double>(config.horizon));

  for (long t = 1; t <= config.horizon; ++t) {
    auto round = stream->next();
    if (!round.has_value()) {
      result.truncated = true;
      std::cerr << "warning: environment exhausted after " << (t - 1) << " of "
                << config.horizon << " rounds; writing partial artifacts\n";
      break;
    }

    // Phi_def of the projected iterate, logged before the step updates it.
    const std::vector<double> raw = active_scores(learner.weights(), round->input);
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(raw.size());
    std::vector<double> centered(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) centered[i] = raw[i] - mean;
    const double surrogate = deferral_surrogate_from_scores(
        centered, space, round->input.experts, round->label, round->costs, config.surrogate);

    RoundRecord rec;
    learner.step(round->input, stream->make_oracle(*round), &rec);
    rec.true_label = round->label;
    rec.surrogate_loss = surrogate;
    rec.expected_loss = expected_deferral_loss(rec.q, round->input, round->label, round->costs);
    result.records.push_back(std::move(rec));

    if (want_log) {
      result.log.push_back(LoggedRound{round->input, round->label, round->costs});
    }
    if (check_nr && round->max_expected_score.has_value()) {
      if (result.near_realizable_violations < 0) result.near_realizable_violations = 0;
      if (*round->max_expected_score < nr_floor) ++result.near_realizable_violations;
    }
  }

  if (result.near_realizable_violations > 0) {
    std::cerr << "warning: near-realizable schedule precondition failed on "
              << result.near_realizable_violations << " of " << result.records.size()
              << " rounds (largest expected score below 1 - 1/sqrt(T))\n";
  }

  if (stream->oracle_answers() != static_cast<long>(result.records.size())) {
    throw ProtocolError("bandit discipline violated: feedback count != round count");
  }

  result.final_weights = learner.weights();

  if (config.comparator && !result.log.empty()) {
    result.comparator = hindsight_comparator(result.log, space, stream->feature_dim(),
                                             schedule.frob_bound, config.surrogate,
                                             config.comparator_epochs);
    result.comparator_per_round.reserve(result.log.size());
    for (const LoggedRound& r : result.log) {
      result.comparator_per_round.push_back(
          true_deferral_loss(result.comparator->weights, r.input, r.label, r.costs));
    }
  }

  if (config.baseline) {
    result.baseline_records = run_baseline(config, costs, seed, dataset);
  }

  if (!keep_log) result.log.clear();
  return result;
}

// ---------------------------------------------------------------------------
// File layer
// ---------------------------------------------------------------------------

namespace {

struct AggregateCell {
  double mean = kNaN;
  double stddev = kNaN;
};

/// Mean and sample standard deviation over the non-NaN seed values.
AggregateCell aggregate_values(const std::vector<double>& values) {
  AggregateCell cell;
  double sum = 0.0;
  long count = 0;
  for (double v : values) {
    if (!std::isnan(v)) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) return cell;
  cell.mean = sum / count;
  if (count == 1) {
    cell.stddev = 0.0;
    return cell;
  }
  double sq = 0.0;
  for (double v : values) {
    if (!std::isnan(v)) sq += (v - cell.mean) * (v - cell.mean);
  }
  cell.stddev = std::sqrt(sq / (count - 1));
  return cell;
}

void write_aggregate_csv(const std::vector<RegretReport>& reports, const std::string& path) {
  if (reports.empty()) return;
  const int experts = reports.front().experts;
  std::vector<std::string> metrics = {"true_loss",      "expected_loss", "surrogate_loss",
                                      "estimated_loss", "accuracy",      "self_ratio"};
  for (int j = 1; j <= experts; ++j) metrics.push_back("deferral_ratio_g" + std::to_string(j));
  for (int j = 1; j <= experts; ++j) metrics.push_back("queried_accuracy_g" + std::to_string(j));
  for (int j = 1; j <= experts; ++j) metrics.push_back("availability_g" + std::to_string(j));
  metrics.push_back("mean_gamma");
  metrics.push_back("mean_eta");
  metrics.push_back("comparator_loss");
  metrics.push_back("cum_regret");

  auto metric_value = [&](const WindowRow& w, const std::string& name) -> double {
    if (name == "true_loss") return w.true_loss;
    if (name == "expected_loss") return w.expected_loss;
    if (name == "surrogate_loss") return w.surrogate_loss;
    if (name == "estimated_loss") return w.estimated_loss;
    if (name == "accuracy") return w.accuracy;
    if (name == "self_ratio") return w.self_ratio;
    if (name == "mean_gamma") return w.mean_gamma;
    if (name == "mean_eta") return w.mean_eta;
    if (name == "comparator_loss") return w.comparator_loss;
    if (name == "cum_regret") return w.cum_regret;
    for (int j = 1; j <= experts; ++j) {
      const std::string suffix = "_g" + std::to_string(j);
      const std::size_t js = static_cast<std::size_t>(j - 1);
      if (name == "deferral_ratio" + suffix) return w.deferral_ratio[js];
      if (name == "queried_accuracy" + suffix) return w.queried_accuracy[js];
      if (name == "availability" + suffix) return w.availability[js];
    }
    return kNaN;
  };

  std::size_t window_count = reports.front().windows.size();
  for (const auto& r : reports) window_count = std::min(window_count, r.windows.size());

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "t_begin,t_end";
  for (const auto& m : metrics) out << ',' << m << "_mean," << m << "_std";
  out << "\n";
  for (std::size_t w = 0; w < window_count; ++w) {
    out << reports.front().windows[w].t_begin << ',' << reports.front().windows[w].t_end;
    for (const auto& m : metrics) {
      std::vector<double> values;
      values.reserve(reports.size());
      for (const auto& r : reports) values.push_back(metric_value(r.windows[w], m));
      const AggregateCell cell = aggregate_values(values);
      out << ',' << fmt_double(cell.mean) << ',' << fmt_double(cell.stddev);
    }
    out << "\n";
  }
}

}  // namespace

std::string default_output_root() {
  const char* root = std::getenv("OL2D_OUTPUT_ROOT");
  if (root != nullptr && root[0] != '\0') return root;
  return "runs";
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001B3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return hash;
}

RunSummary run_experiment(const ExperimentConfig& config) {
  const auto problems = validate_config(config);
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }

  const std::string run_dir = config.output_dir.empty()
                                  ? default_output_root() + "/" + config.name
                                  : config.output_dir;
  fs::create_directories(run_dir);

  ExperimentConfig resolved = config;
  resolved.window = config.window > 0 ? config.window : std::max<long>(1, config.horizon / 200);
  resolved.frob_bound = config.frob_bound > 0.0
                            ? config.frob_bound
                            : static_cast<double>(config.classes + config.experts);
  resolved.output_dir = run_dir;
  {
    std::ofstream out(run_dir + "/config.resolved.json");
    if (!out) throw DataError("cannot write config snapshot in " + run_dir);
    out << serialize_config(resolved);
  }

  std::shared_ptr<const SparseDataset> dataset;
  if (config.source == DataSource::sparse_file) {
    dataset = std::make_shared<const SparseDataset>(load_sparse_dataset(
        config.dataset_path, config.radius, config.norm_policy, config.dataset_max_rows));
  }

  const std::size_t seed_count = config.seeds.size();
  std::vector<SeedRunResult> results(seed_count);
  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seed_count)));

  std::vector<std::thread> pool;
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> errors(seed_count);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= seed_count) return;
        try {
          results[i] = run_single_seed(resolved, config.seeds[i], false, dataset);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunSummary summary;
  summary.run_dir = run_dir;
  summary.window = resolved.window;

  std::vector<RegretReport> reports;
  std::vector<RegretReport> baseline_reports;
  reports.reserve(seed_count);
  for (std::size_t i = 0; i < seed_count; ++i) {
    const SeedRunResult& r = results[i];
    const std::string seed_dir = run_dir + "/seed_" + std::to_string(config.seeds[i]);
    fs::create_directories(seed_dir);
    write_rounds_csv(r.records, config.classes, config.experts, seed_dir + "/rounds.csv");
    const RegretReport report =
        regret_report(r.records, config.classes, config.experts, resolved.window,
                      r.comparator.has_value() ? &r.comparator_per_round : nullptr);
    write_windows_csv(report, seed_dir + "/windows.csv");
    save_weights_binary(r.final_weights, seed_dir + "/weights.bin");
    save_weights_csv(r.final_weights, seed_dir + "/weights.csv");

    SeedSummary s;
    s.seed = config.seeds[i];
    s.rounds = static_cast<long>(r.records.size());
    s.truncated = r.truncated;
    s.mean_true_loss = s.rounds > 0 ? report.total_true_loss / s.rounds : kNaN;
    s.mean_expected_loss = s.rounds > 0 ? report.total_expected_loss / s.rounds : kNaN;
    s.final_regret = report.final_regret;
    s.comparator_objective =
        r.comparator.has_value() ? r.comparator->surrogate_objective : kNaN;
    s.near_realizable_violations = r.near_realizable_violations;
    if (r.comparator.has_value()) {
      nlohmann::ordered_json cj;
      cj["surrogate_objective"] = r.comparator->surrogate_objective;
      cj["true_loss"] = r.comparator->true_loss;
      cj["epochs"] = r.comparator->epochs;
      cj["final_regret"] = report.final_regret;
      std::ofstream out(seed_dir + "/comparator.json");
      out << cj.dump(2) << "\n";
    }
    if (!r.baseline_records.empty()) {
      write_rounds_csv(r.baseline_records, config.classes, config.experts,
                       seed_dir + "/baseline_rounds.csv");
      const RegretReport base_report = regret_report(r.baseline_records, config.classes,
                                                     config.experts, resolved.window);
      write_windows_csv(base_report, seed_dir + "/baseline_windows.csv");
      s.baseline_mean_loss =
          s.rounds > 0 ? base_report.total_true_loss / r.baseline_records.size() : kNaN;
      baseline_reports.push_back(base_report);
    } else {
      s.baseline_mean_loss = kNaN;
    }
    summary.any_truncated = summary.any_truncated || r.truncated;
    summary.seeds.push_back(s);
    reports.push_back(report);
  }

  write_aggregate_csv(reports, run_dir + "/aggregate.csv");
  if (!baseline_reports.empty()) {
    write_aggregate_csv(baseline_reports, run_dir + "/baseline_aggregate.csv");
  }
  summary.aggregate_checksum = file_checksum(run_dir + "/aggregate.csv");

  nlohmann::ordered_json sj;
  sj["run_dir"] = run_dir;
  sj["window"] = summary.window;
  sj["aggregate_checksum"] = summary.aggregate_checksum;
  sj["any_truncated"] = summary.any_truncated;
  sj["seeds"] = nlohmann::ordered_json::array();
  for (const SeedSummary& s : summary.seeds) {
    nlohmann::ordered_json row;
    row["seed"] = s.seed;
    row["rounds"] = s.rounds;
    row["truncated"] = s.truncated;
    row["mean_true_loss"] = s.mean_true_loss;
    row["mean_expected_loss"] = s.mean_expected_loss;
    row["final_regret"] = s.final_regret;
    row["comparator_objective"] = s.comparator_objective;
    row["baseline_mean_loss"] = s.baseline_mean_loss;
    if (s.near_realizable_violations >= 0) {
      row["near_realizable_violations"] = s.near_realizable_violations;
    }
    sj["seeds"].push_back(row);
  }
  std::ofstream out(run_dir + "/summary.json");
  out << sj.dump(2) << "\n";

  return summary;
}

RegretReport replay_rounds(const std::string& rounds_csv, long window) {
  int classes = 0;
  int experts = 0;
  const std::vector<RoundRecord> records = read_rounds_csv(rounds_csv, &classes, &experts);
  if (records.empty()) throw DataError("no rounds in " + rounds_csv);
  if (window < 1) window = std::max<long>(1, static_cast<long>(records.size()) / 200);
  return regret_report(records, classes, experts, window);
}

std::vector<std::string> export_plots_data(const std::string& aggregate_csv,
                                           const std::string& out_dir) {
  std::ifstream in(aggregate_csv);
  if (!in) throw DataError("cannot open: " + aggregate_csv);
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty aggregate: " + aggregate_csv);

  std::vector<std::string> columns;
  {
    std::stringstream ss(header);
    std::string item;
    while (std::getline(ss, item, ',')) columns.push_back(item);
  }
  if (columns.size() < 4 || columns[0] != "t_begin" || columns[1] != "t_end") {
    throw DataError("unrecognized aggregate header in " + aggregate_csv);
  }

  std::vector<std::vector<std::string>> table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (fields.size() != columns.size()) {
      throw DataError("ragged row in aggregate: " + aggregate_csv);
    }
    table.push_back(std::move(fields));
  }

  fs::create_directories(out_dir);
  std::vector<std::string> written;
  for (std::size_t col = 2; col + 1 < columns.size(); col += 2) {
    const std::string& mean_name = columns[col];
    if (mean_name.size() < 5 || mean_name.substr(mean_name.size() - 5) != "_mean") continue;
    const std::string metric = mean_name.substr(0, mean_name.size() - 5);
    std::ofstream out(out_dir + "/" + metric + ".csv");
    if (!out) throw DataError("cannot write into " + out_dir);
    out << "t_end,mean,std\n";
    for (const auto& row : table) {
      out << row[1] << ',' << row[col] << ',' << row[col + 1] << "\n";
    }
    written.push_back(metric);
  }
  return written;
}

}  // namespace ol2d
