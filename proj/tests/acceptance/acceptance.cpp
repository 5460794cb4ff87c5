// Acceptance gate: every release criterion below runs at its stated
// tolerance and prints one PASS/FAIL line. The process exits nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "ol2d/analysis.hpp"
#include "ol2d/config.hpp"
#include "ol2d/environment.hpp"
#include "ol2d/learner.hpp"
#include "ol2d/rng.hpp"
#include "ol2d/runner.hpp"
#include "ol2d/verify.hpp"

using namespace ol2d;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& id, bool passed, const std::string& what,
            const std::string& detail = "") {
  std::printf("%s  %s: %s%s%s\n", passed ? "PASS" : "FAIL", id.c_str(), what.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!passed) ++failures;
}

const CheckResult* find_check(const VerifyReport& rep, const std::string& suite,
                              const std::string& property) {
  for (const auto& r : rep.results) {
    if (r.suite == suite && r.property == property) return &r;
  }
  return nullptr;
}

void property_criterion(const std::string& id, const std::string& what,
                        const VerifyReport& rep, const std::string& suite,
                        const std::string& property, double budget_seconds = 0.0) {
  const CheckResult* r = find_check(rep, suite, property);
  if (r == nullptr) {
    report(id, false, what, "property " + suite + "/" + property + " did not run");
    return;
  }
  std::ostringstream detail;
  detail << r->checks << " checks in " << r->elapsed_seconds << "s";
  bool ok = r->passed;
  if (budget_seconds > 0.0 && r->elapsed_seconds >= budget_seconds) ok = false;
  if (!r->details.empty()) detail << "; " << r->details;
  report(id, ok, what, detail.str());
}

// ---------------------------------------------------------------------------
// shared experiment configs
// ---------------------------------------------------------------------------

ExperimentConfig synthetic_base() {
  ExperimentConfig config;
  config.setting = ExperimentSetting::fixed;
  config.source = DataSource::synthetic;
  config.classes = 6;
  config.experts = 3;
  config.dim = 120;
  config.radius = 4.5;
  config.noise_init = {0.3, 0.3, 0.3, 0.3, 0.0, 0.0};
  config.noise_sigma = 2e-3;
  config.regions_start = {{1, 2}, {3, 4}, {}};
  config.cost_alpha = {1.0, 1.0, 1.0};
  config.cost_beta = {0.1, 0.1, 0.1};
  return config;
}

// ---------------------------------------------------------------------------
// criterion 8: long-run simulated-expert accuracies
// ---------------------------------------------------------------------------

void criterion_expert_accuracy() {
  const long horizon = 100000;
  const std::vector<std::uint64_t> seeds = {101, 102, 103};
  std::vector<double> accuracy(3, 0.0);
  const ExperimentConfig base = synthetic_base();
  const auto costs = make_cost_model(base);

  for (std::uint64_t seed : seeds) {
    SyntheticConfig config;
    config.classes = base.classes;
    config.experts = base.experts;
    config.dim = base.dim;
    config.radius = base.radius;
    config.noise_init = base.noise_init;
    config.noise_sigma = base.noise_sigma;
    config.setting = ExperimentSetting::fixed;
    config.expert_specs = make_expert_specs(base);
    config.horizon = horizon;
    auto stream = make_synthetic_stream(config, costs, seed, 0);
    std::vector<long> correct(3, 0);
    for (long t = 0; t < horizon; ++t) {
      const auto round = stream->next();
      for (int j = 0; j < 3; ++j) {
        if (round->expert_prediction[static_cast<std::size_t>(j)] == round->label) {
          ++correct[static_cast<std::size_t>(j)];
        }
      }
    }
    for (int j = 0; j < 3; ++j) {
      accuracy[static_cast<std::size_t>(j)] +=
          static_cast<double>(correct[static_cast<std::size_t>(j)]) / horizon / seeds.size();
    }
  }

  std::ostringstream detail;
  detail << "g1=" << accuracy[0] << " g2=" << accuracy[1] << " g3=" << accuracy[2];
  const bool ok = std::abs(accuracy[0] - 0.4444) <= 0.03 &&
                  std::abs(accuracy[1] - 0.4444) <= 0.03 &&
                  std::abs(accuracy[2] - 0.1667) <= 0.01;
  report("C08", ok, "simulated-expert long-run accuracies 0.4444/0.4444/0.1667",
         detail.str());
}

// ---------------------------------------------------------------------------
// criterion 9: regret scaling under the general schedule
// ---------------------------------------------------------------------------

void criterion_regret_scaling() {
  ExperimentConfig config = synthetic_base();
  config.name = "planted";
  config.noise_init.assign(6, 0.0);  // planted optimum: always classify correctly
  config.noise_sigma = 0.0;
  config.regime = ScheduleRegime::general;
  config.horizon = 160000;
  config.seeds = {11, 12, 13, 14, 15};

  const std::vector<long> horizons = {10000, 40000, 160000};
  std::vector<double> cum(horizons.size(), 0.0);

  std::vector<std::thread> pool;
  std::vector<std::vector<double>> per_seed(config.seeds.size(),
                                            std::vector<double>(horizons.size(), 0.0));
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    pool.emplace_back([&, s] {
      // the planted optimal policy has zero deferral loss, so the cumulative
      // expected loss is the empirical regret; schedules are horizon-
      // oblivious and the environment is fixed-setting, so the three
      // horizons are prefixes of one trajectory
      const SeedRunResult run = run_single_seed(config, config.seeds[s]);
      double acc = 0.0;
      std::size_t mark = 0;
      for (std::size_t t = 0; t < run.records.size() && mark < horizons.size(); ++t) {
        acc += run.records[t].expected_loss;
        if (static_cast<long>(t + 1) == horizons[mark]) {
          per_seed[s][mark] = acc;
          ++mark;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      cum[h] += per_seed[s][h] / config.seeds.size();
    }
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const double x = std::log(static_cast<double>(horizons[h]));
    const double y = std::log(cum[h]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(horizons.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

  const bool decreasing = cum[0] / horizons[0] > cum[1] / horizons[1] &&
                          cum[1] / horizons[1] > cum[2] / horizons[2];
  std::ostringstream detail;
  detail << "slope=" << slope << " avg regret/round=" << cum[0] / horizons[0] << "/"
         << cum[1] / horizons[1] << "/" << cum[2] / horizons[2];
  report("C09", slope <= 0.85 && decreasing,
         "planted-environment regret scaling (log-log slope <= 0.85, decreasing averages)",
         detail.str());
}

// ---------------------------------------------------------------------------
// criterion 10: setting-1 behavioral reproduction
// ---------------------------------------------------------------------------

void criterion_setting1_behavior() {
  ExperimentConfig config = synthetic_base();
  config.name = "setting1";
  config.regime = ScheduleRegime::custom;
  config.base_lr = 5e-4;
  config.lr_power = 0.5;
  config.gamma_scale = 10.0;
  config.gamma_power = 0.5;
  config.horizon = 100000;
  config.seeds = {1};

  const SeedRunResult run = run_single_seed(config, 1);
  const std::size_t quarter = run.records.size() / 4;
  std::vector<long> queried(3, 0), queried_correct(3, 0);
  long deferred_g3 = 0;
  const std::size_t begin = run.records.size() - quarter;
  for (std::size_t t = begin; t < run.records.size(); ++t) {
    const RoundRecord& r = run.records[t];
    if (!r.deferred) continue;
    const std::size_t j = static_cast<std::size_t>(r.expert - 1);
    ++queried[j];
    if (r.correct) ++queried_correct[j];
    if (r.expert == 3) ++deferred_g3;
  }
  const double acc1 = queried[0] > 0 ? static_cast<double>(queried_correct[0]) / queried[0] : 0;
  const double acc2 = queried[1] > 0 ? static_cast<double>(queried_correct[1]) / queried[1] : 0;
  const double ratio3 = static_cast<double>(deferred_g3) / quarter;
  std::ostringstream detail;
  detail << "queried acc g1=" << acc1 << " g2=" << acc2 << ", g3 deferral ratio=" << ratio3;
  report("C10", acc1 > 0.9 && acc2 > 0.9 && ratio3 < 0.05,
         "setting-1 final quarter: g1/g2 queried accuracy > 0.9, g3 deferral < 0.05",
         detail.str());
}

// ---------------------------------------------------------------------------
// criterion 11: confidence-threshold baseline comparison
// ---------------------------------------------------------------------------

void criterion_baseline_comparison() {
  ExperimentConfig config = synthetic_base();
  config.name = "noisy";
  config.noise_init.assign(6, 0.35);  // heavy label corruption everywhere
  config.regions_start = {{1, 2}, {3, 4}, {5, 6}};
  config.regime = ScheduleRegime::custom;
  config.base_lr = 5e-4;
  config.horizon = 50000;
  config.seeds = {21, 22, 23, 24, 25};
  config.baseline = true;
  config.baseline_threshold = 0.5;

  double learner_loss = 0.0;
  double baseline_loss = 0.0;
  std::vector<std::thread> pool;
  std::vector<std::pair<double, double>> results(config.seeds.size());
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    pool.emplace_back([&, s] {
      const SeedRunResult run = run_single_seed(config, config.seeds[s]);
      double ours = 0.0, theirs = 0.0;
      for (const auto& r : run.records) ours += r.incurred_loss;
      for (const auto& r : run.baseline_records) theirs += r.incurred_loss;
      results[s] = {ours / run.records.size(), theirs / run.baseline_records.size()};
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& [ours, theirs] : results) {
    learner_loss += ours / results.size();
    baseline_loss += theirs / results.size();
  }
  std::ostringstream detail;
  detail << "algorithm=" << learner_loss << " baseline=" << baseline_loss;
  report("C11", learner_loss <= baseline_loss,
         "mean deferral loss <= confidence-threshold baseline over 5 seeds", detail.str());
}

// ---------------------------------------------------------------------------
// criterion 12: bitwise determinism
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism() {
  const std::string root = (fs::temp_directory_path() / "ol2d_acceptance_det").string();
  fs::remove_all(root);
  ExperimentConfig config = synthetic_base();
  config.name = "det";
  config.setting = ExperimentSetting::drifting_both;
  config.regions_end = {{3, 4}, {1, 2}, {}};
  config.regime = ScheduleRegime::custom;
  config.base_lr = 5e-4;
  config.horizon = 2000;
  config.window = 200;
  config.seeds = {5, 6};

  config.output_dir = root + "/a";
  const RunSummary first = run_experiment(config);
  config.output_dir = root + "/b";
  const RunSummary second = run_experiment(config);

  bool ok = first.aggregate_checksum == second.aggregate_checksum;
  ok = ok && slurp(root + "/a/aggregate.csv") == slurp(root + "/b/aggregate.csv");
  for (std::uint64_t seed : {5ULL, 6ULL}) {
    const std::string rel = "/seed_" + std::to_string(seed) + "/rounds.csv";
    ok = ok && slurp(root + "/a" + rel) == slurp(root + "/b" + rel);
    ok = ok && !slurp(root + "/a" + rel).empty();
  }
  report("C12", ok, "identical config+seed produce bitwise-identical CSVs twice",
         "checksum=" + std::to_string(first.aggregate_checksum));
  fs::remove_all(root);
}

// ---------------------------------------------------------------------------
// reduced-scale text-categorization smoke run
// ---------------------------------------------------------------------------

void write_sparse_fixture(const std::string& path, int rows, int dim, int classes,
                          std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::ofstream out(path);
  out << "# d=" << dim << " n=" << classes << "\n";
  char buf[64];
  for (int i = 0; i < rows; ++i) {
    const int label = 1 + static_cast<int>(rng.uniform_below(classes));
    // class-dependent index band plus background indices
    std::vector<std::pair<int, double>> pairs;
    const int base = (label - 1) * 1000;
    int idx = base;
    for (int k = 0; k < 25; ++k) {
      idx += 1 + static_cast<int>(rng.uniform_below(150));
      pairs.emplace_back(idx, 0.1 + 0.9 * rng.uniform());
    }
    idx = 20000;
    for (int k = 0; k < 10; ++k) {
      idx += 1 + static_cast<int>(rng.uniform_below((dim - 20000) / 12));
      if (idx >= dim) break;
      pairs.emplace_back(idx, 0.1 + 0.9 * rng.uniform());
    }
    double norm = 0.0;
    for (const auto& [i2, v] : pairs) norm += v * v;
    norm = std::sqrt(norm);
    out << label;
    for (const auto& [i2, v] : pairs) {
      std::snprintf(buf, sizeof(buf), " %d:%.6f", i2, v / norm);
      out << buf;
    }
    out << "\n";
  }
}

void criterion_sparse_smoke() {
  const std::string root = (fs::temp_directory_path() / "ol2d_acceptance_smoke").string();
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string fixture = root + "/fixture.txt";
  write_sparse_fixture(fixture, 12000, 47236, 4, 77);

  std::ostringstream detail;
  try {
    const SparseDataset head = load_sparse_dataset(fixture, 1.0, NormPolicy::rescale, 10000);
    const bool metadata_ok = head.size() == 10000 && head.dim == 47236 && head.classes == 4;

    ExperimentConfig config;
    config.name = "smoke";
    config.setting = ExperimentSetting::drifting_both;
    config.source = DataSource::sparse_file;
    config.dataset_path = fixture;
    config.dataset_max_rows = 10000;
    config.classes = 4;
    config.experts = 3;
    config.dim = 47236;
    config.radius = 1.0;
    config.noise_init = {0.0, 0.0, 0.0, 0.0};
    config.regions_start = {{1, 2}, {2, 3}, {3, 4}};
    config.regions_end = {{3, 4}, {1, 4}, {1, 2}};
    config.cost_alpha = {1.0, 1.0, 1.0};
    config.cost_beta = {0.1, 0.1, 0.1};
    config.regime = ScheduleRegime::adagrad;
    config.base_lr = 0.1;
    config.gamma_scale = 10.0;
    config.horizon = 10000;
    config.window = 50;
    config.seeds = {31};

    const SeedRunResult run = run_single_seed(config, 31);
    const RegretReport rep = regret_report(run.records, 4, 3, 50);
    double first = 0.0, last = 0.0;
    const std::size_t k = 5;
    for (std::size_t i = 0; i < k; ++i) {
      first += rep.windows[i].true_loss / k;
      last += rep.windows[rep.windows.size() - 1 - i].true_loss / k;
    }
    detail << "rows=10000 d=47236 n=4, windowed loss " << first << " -> " << last;
    report("SMOKE", metadata_ok && !run.truncated && last < first,
           "reduced sparse-text run completes with decreasing windowed deferral loss",
           detail.str());
  } catch (const std::exception& e) {
    report("SMOKE", false, "reduced sparse-text run", e.what());
  }
  fs::remove_all(root);
}

}  // namespace

int main() {
  const auto started = std::chrono::steady_clock::now();
  VerifyOptions options;
  options.scale = 1.0;

  // property criteria 1..7 (suites carry their own instance counts)
  VerifyReport property_report;
  verify_projection_suite(property_report, options);
  verify_estimator_suite(property_report, options);
  verify_gradient_suite(property_report, options);
  verify_losses_suite(property_report, options);
  verify_learner_suite(property_report, options);
  verify_analysis_suite(property_report, options);

  property_criterion("C01", "projection suite (zero sums, idempotence, argmax, rows; < 10 s)",
                     property_report, "projection", "zero_sum_idempotent_maxpreserving", 10.0);
  property_criterion("C02", "estimator unbiasedness, loss and gradient (1e-9; < 30 s)",
                     property_report, "estimator", "loss_and_gradient_unbiasedness", 30.0);
  property_criterion("C03", "projected gradient norm bound and exact identity (1e-10)",
                     property_report, "gradient", "projected_norm_bound_and_identity");
  property_criterion("C04", "closed-form conditional risks equal brute force (1e-12)",
                     property_report, "analysis", "conditional_risk_closed_forms");
  property_criterion("C05", "minimizability-gap value matches and lower-bounds random search",
                     property_report, "analysis", "minimizability_gap_characterization");
  property_criterion("C06", "hinge deferral surrogate majorizes the true loss",
                     property_report, "losses", "surrogate_majorizes_true_loss");
  property_criterion("C07", "full-information iterates match the independent reference (1e-9)",
                     property_report, "learner", "full_information_reference_match");

  criterion_expert_accuracy();
  criterion_regret_scaling();
  criterion_setting1_behavior();
  criterion_baseline_comparison();
  criterion_determinism();
  criterion_sparse_smoke();

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::printf("%s: %d criteria failed (%.1fs total)\n", failures == 0 ? "OK" : "FAILED",
              failures, elapsed);
  return failures == 0 ? 0 : 1;
}
