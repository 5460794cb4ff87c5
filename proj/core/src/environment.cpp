#include "ol2d/environment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>

namespace ol2d {

std::vector<double> region_profile(int classes, const std::vector<int>& region) {
  std::vector<double> acc(static_cast<std::size_t>(classes), 1.0 / classes);
  for (int y : region) {
    if (y < 1 || y > classes) throw ConfigError("region class out of range");
    acc[static_cast<std::size_t>(y - 1)] = 1.0;
  }
  return acc;
}

BanditOracle RoundStream::make_oracle(const EnvRound& round) {
  auto used = std::make_shared<bool>(false);
  const LabelSpace& sp = space();
  // The closure copies the hidden round data; one answer per round.
  return [this, used, sp, label = round.label, preds = round.expert_prediction,
          experts = round.input.experts, costs = round.costs](int action) -> Feedback {
    if (*used) throw ProtocolError("second feedback query in one round");
    *used = true;
    ++oracle_answers_;
    Feedback fb;
    fb.action = action;
    if (sp.is_class(action)) {
      fb.correct = action == label;
      return fb;
    }
    const int j = sp.expert_of(action);
    const int pos = experts.position_of(j);
    if (pos < 0) throw ProtocolError("feedback query for an unavailable expert");
    fb.correct = preds[static_cast<std::size_t>(j - 1)] == label;
    fb.cost = costs.for_position(pos);
    return fb;
  };
}

// ---------------------------------------------------------------------------
// Expert pool shared by both stream kinds
// ---------------------------------------------------------------------------

namespace {

/// Runtime state of the simulated experts: current accuracy profiles,
/// pinned-bridge noise and availability-walk probabilities. The caller
/// drives one fixed draw order per round so runs are reproducible.
class ExpertPool {
 public:
  ExpertPool(std::vector<ExpertSpec> specs, const std::vector<ExpertCost>& costs, int classes,
             ExperimentSetting setting, long horizon)
      : specs_(std::move(specs)),
        costs_(costs),
        classes_(classes),
        setting_(setting),
        horizon_(horizon) {
    if (costs_.size() != specs_.size()) {
      throw ConfigError("expert pool: need one cost per expert");
    }
    for (auto& spec : specs_) {
      if (static_cast<int>(spec.accuracy_start.size()) != classes_) {
        throw ConfigError("expert pool: accuracy profile size != classes");
      }
      if (setting_ == ExperimentSetting::drifting_both &&
          static_cast<int>(spec.accuracy_end.size()) != classes_) {
        throw ConfigError("expert pool: drifting expertise needs an end profile");
      }
    }
    accuracy_.reserve(specs_.size());
    for (const auto& spec : specs_) accuracy_.push_back(spec.accuracy_start);
    bridge_.assign(specs_.size(), std::vector<double>(static_cast<std::size_t>(classes_), 0.0));
    availability_p_.reserve(specs_.size());
    for (const auto& spec : specs_) availability_p_.push_back(spec.availability_init);
  }

  int count() const { return static_cast<int>(specs_.size()); }
  const std::vector<double>& accuracy(int j) const { return accuracy_[static_cast<std::size_t>(j)]; }
  const ExpertCost& cost(int j) const { return costs_[static_cast<std::size_t>(j)]; }

  /// Draw order per round: predictions for every expert, then availability
  /// bits, so RNG consumption does not depend on who is available.
  /// Knowledge regions live in input space: `region` is the class whose
  /// region the input belongs to (the pre-noise cluster for synthetic
  /// streams, the example's label for datasets); a knowledgeable expert
  /// outputs the post-noise label.
  void draw_round(int region, int label, RngStream& rng, std::vector<int>& predictions,
                  std::vector<int>& available) {
    predictions.resize(specs_.size());
    for (std::size_t j = 0; j < specs_.size(); ++j) {
      const double acc = accuracy_[j][static_cast<std::size_t>(region - 1)];
      if (rng.bernoulli(acc)) {
        predictions[j] = label;
      } else {
        int other = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(classes_ - 1)));
        predictions[j] = other + 1 >= label ? other + 2 : other + 1;
      }
    }
    available.clear();
    for (std::size_t j = 0; j < specs_.size(); ++j) {
      const bool present = setting_ == ExperimentSetting::fixed
                               ? true
                               : rng.bernoulli(availability_p_[j]);
      if (present) available.push_back(static_cast<int>(j) + 1);
    }
  }

  /// Advance walks from round t to t+1 (t is 1-based).
  void advance(long t, RngStream& rng) {
    if (setting_ != ExperimentSetting::fixed) {
      for (std::size_t j = 0; j < specs_.size(); ++j) {
        availability_p_[j] = std::clamp(
            availability_p_[j] + specs_[j].availability_sigma * rng.normal(), 0.0, 1.0);
      }
    }
    if (setting_ == ExperimentSetting::drifting_both && horizon_ > 1) {
      const long remaining = horizon_ - t;  // steps left until the pin
      for (std::size_t j = 0; j < specs_.size(); ++j) {
        const double phase = std::min(
            1.0, static_cast<double>(t) / static_cast<double>(horizon_ - 1));  // next round
        for (int y = 0; y < classes_; ++y) {
          double& noise = bridge_[j][static_cast<std::size_t>(y)];
          if (remaining >= 1) {
            const double shrink = static_cast<double>(remaining - 1) / remaining;
            noise = noise * shrink + specs_[j].bridge_sigma * std::sqrt(shrink) * rng.normal();
          }
          const double base = specs_[j].accuracy_start[static_cast<std::size_t>(y)] +
                              phase * (specs_[j].accuracy_end[static_cast<std::size_t>(y)] -
                                       specs_[j].accuracy_start[static_cast<std::size_t>(y)]);
          accuracy_[j][static_cast<std::size_t>(y)] = std::clamp(base + noise, 0.0, 1.0);
        }
      }
    }
  }

  RoundCosts realized_costs(const std::vector<int>& predictions,
                            const std::vector<int>& available, int label) const {
    RoundCosts costs;
    costs.value.reserve(available.size());
    for (int j : available) {
      const bool correct = predictions[static_cast<std::size_t>(j - 1)] == label;
      costs.value.push_back(costs_[static_cast<std::size_t>(j - 1)].cost(correct));
    }
    return costs;
  }

 private:
  std::vector<ExpertSpec> specs_;
  std::vector<ExpertCost> costs_;
  int classes_;
  ExperimentSetting setting_;
  long horizon_;

  std::vector<std::vector<double>> accuracy_;
  std::vector<std::vector<double>> bridge_;
  std::vector<double> availability_p_;
};

// ---------------------------------------------------------------------------
// Synthetic stream
// ---------------------------------------------------------------------------

class SyntheticStream final : public RoundStream {
 public:
  SyntheticStream(const SyntheticConfig& config, const std::vector<ExpertCost>& costs,
                  std::uint64_t seed, std::uint64_t stream)
      : config_(config),
        space_(config.classes, config.experts),
        pool_(config.expert_specs, costs, config.classes, config.setting, config.horizon),
        noise_(config.noise_init),
        rng_(seed, stream) {
    if (config_.dim < config_.classes) throw ConfigError("synthetic: dim < classes");
    if (static_cast<int>(config_.noise_init.size()) != config_.classes) {
      throw ConfigError("synthetic: noise vector size != classes");
    }
    block_ = config_.dim / config_.classes;
  }

  std::optional<EnvRound> next() override {
    EnvRound round;
    const int cluster = static_cast<int>(rng_.uniform_below(config_.classes)) + 1;

    // block-supported positive coordinates, normalized to the radius
    std::vector<std::pair<std::uint32_t, double>> nz;
    nz.reserve(static_cast<std::size_t>(block_));
    const std::uint32_t offset = static_cast<std::uint32_t>((cluster - 1) * block_);
    double norm_sq = 0.0;
    for (int k = 0; k < block_; ++k) {
      const double v = 0.5 + rng_.uniform();
      nz.emplace_back(offset + static_cast<std::uint32_t>(k), v);
      norm_sq += v * v;
    }
    const double scale = config_.radius / std::sqrt(norm_sq);
    for (auto& [idx, v] : nz) v *= scale;
    round.input.x = FeatureVector(std::move(nz), static_cast<std::uint32_t>(config_.dim));

    // label noise: flip to a uniformly random other class
    int label = cluster;
    const double flip_prob = noise_[static_cast<std::size_t>(cluster - 1)];
    if (rng_.bernoulli(flip_prob)) {
      int other = static_cast<int>(rng_.uniform_below(config_.classes - 1));
      label = other + 1 >= cluster ? other + 2 : other + 1;
    }
    round.label = label;
    round.region = cluster;

    std::vector<int> available;
    pool_.draw_round(cluster, label, rng_, round.expert_prediction, available);
    round.input.experts = ExpertSet(std::move(available));
    round.input.round = t_;
    round.costs = pool_.realized_costs(round.expert_prediction, round.input.experts.available,
                                       round.label);

    // largest expected score of the round: class side is 1 - p_flip for the
    // cluster label (p_flip/(n-1) elsewhere), expert side is 1 - E[cost]
    // with correctness probability given by the accuracy on the region
    double best_score = std::max(1.0 - flip_prob, flip_prob / (config_.classes - 1));
    for (int j : round.input.experts.available) {
      const double acc = pool_.accuracy(j - 1)[static_cast<std::size_t>(cluster - 1)];
      const ExpertCost& cost = pool_.cost(j - 1);
      best_score = std::max(best_score, 1.0 - (acc * cost.lower() + (1.0 - acc) * cost.upper()));
    }
    round.max_expected_score = best_score;

    // advance the walks for the next round
    for (double& p : noise_) p = std::clamp(p + config_.noise_sigma * rng_.normal(), 0.0, 1.0);
    pool_.advance(t_, rng_);
    ++t_;
    return round;
  }

  const LabelSpace& space() const override { return space_; }
  int feature_dim() const override { return config_.dim; }
  std::vector<double> expert_accuracy(int j) const override { return pool_.accuracy(j - 1); }


 private:
  SyntheticConfig config_;
  LabelSpace space_;
  ExpertPool pool_;
  std::vector<double> noise_;
  RngStream rng_;
  long t_ = 1;
  int block_ = 1;
};

// ---------------------------------------------------------------------------
// Dataset stream
// ---------------------------------------------------------------------------

class DatasetStream final : public RoundStream {
 public:
  DatasetStream(std::shared_ptr<const SparseDataset> data, const DatasetEnvConfig& config,
                const std::vector<ExpertCost>& costs, std::uint64_t seed, std::uint64_t stream)
      : data_(std::move(data)),
        space_(data_->classes, static_cast<int>(config.expert_specs.size())),
        pool_(config.expert_specs, costs, data_->classes, config.setting,
              config.horizon > 0 ? config.horizon : static_cast<long>(data_->size())),
        setting_(config.setting),
        rng_(seed, stream) {}

  std::optional<EnvRound> next() override {
    if (static_cast<std::size_t>(t_ - 1) >= data_->size()) return std::nullopt;
    EnvRound round;
    round.input.x = data_->rows[static_cast<std::size_t>(t_ - 1)];
    round.label = data_->labels[static_cast<std::size_t>(t_ - 1)];
    round.region = round.label;
    round.input.round = t_;

    std::vector<int> available;
    pool_.draw_round(round.label, round.label, rng_, round.expert_prediction, available);
    round.input.experts = ExpertSet(std::move(available));
    round.costs = pool_.realized_costs(round.expert_prediction, round.input.experts.available,
                                       round.label);
    pool_.advance(t_, rng_);
    ++t_;
    return round;
  }

  const LabelSpace& space() const override { return space_; }
  int feature_dim() const override { return data_->dim; }
  std::vector<double> expert_accuracy(int j) const override { return pool_.accuracy(j - 1); }

 private:
  std::shared_ptr<const SparseDataset> data_;
  LabelSpace space_;
  ExpertPool pool_;
  ExperimentSetting setting_;
  RngStream rng_;
  long t_ = 1;
};

}  // namespace

std::unique_ptr<RoundStream> make_synthetic_stream(const SyntheticConfig& config,
                                                   const std::vector<ExpertCost>& costs,
                                                   std::uint64_t seed, std::uint64_t stream) {
  return std::make_unique<SyntheticStream>(config, costs, seed, stream);
}

std::unique_ptr<RoundStream> make_dataset_stream(std::shared_ptr<const SparseDataset> data,
                                                 const DatasetEnvConfig& config,
                                                 const std::vector<ExpertCost>& costs,
                                                 std::uint64_t seed, std::uint64_t stream) {
  return std::make_unique<DatasetStream>(std::move(data), config, costs, seed, stream);
}

// ---------------------------------------------------------------------------
// Sparse dataset parser
// ---------------------------------------------------------------------------

SparseDataset load_sparse_dataset(const std::string& path, double rescale_radius,
                                  NormPolicy policy, std::size_t max_rows) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);

  SparseDataset data;
  int declared_classes = 0;
  int declared_dim = 0;
  std::string line;
  std::size_t line_no = 0;
  int max_label = 0;
  std::uint32_t max_index = 0;

  auto fail = [&](const std::string& what) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      // optional metadata: "# d=<dim> n=<classes>"
      std::size_t pos = line.find("d=");
      if (pos != std::string::npos) declared_dim = std::atoi(line.c_str() + pos + 2);
      pos = line.find("n=");
      if (pos != std::string::npos) declared_classes = std::atoi(line.c_str() + pos + 2);
      continue;
    }
    if (max_rows > 0 && data.rows.size() >= max_rows) break;

    const char* cursor = line.c_str();
    char* end = nullptr;
    const long label = std::strtol(cursor, &end, 10);
    if (end == cursor || label < 1) fail("expected a positive integer label");
    if (declared_classes > 0 && label > declared_classes) fail("label exceeds declared n");
    cursor = end;

    std::vector<std::pair<std::uint32_t, double>> nz;
    long prev_index = -1;
    for (;;) {
      while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
      if (*cursor == '\0') break;
      const long index = std::strtol(cursor, &end, 10);
      if (end == cursor || *end != ':') fail("expected index:value pair");
      if (index <= prev_index) fail("feature indices must be strictly increasing");
      if (index < 0) fail("negative feature index");
      cursor = end + 1;
      const double value = std::strtod(cursor, &end);
      if (end == cursor) fail("expected a numeric feature value");
      cursor = end;
      nz.emplace_back(static_cast<std::uint32_t>(index), value);
      prev_index = index;
    }
    if (!nz.empty()) max_index = std::max(max_index, nz.back().first);
    max_label = std::max(max_label, static_cast<int>(label));
    data.labels.push_back(static_cast<int>(label));
    data.rows.emplace_back();
    data.rows.back().entries = std::move(nz);
  }

  data.dim = declared_dim > 0 ? declared_dim : static_cast<int>(max_index) + 1;
  data.classes = declared_classes > 0 ? declared_classes : std::max(max_label, 2);
  if (static_cast<std::uint32_t>(data.dim) <= max_index) {
    throw DataError(path + ": declared dim " + std::to_string(data.dim) +
                    " smaller than max feature index " + std::to_string(max_index));
  }
  for (auto& row : data.rows) {
    row.dim = static_cast<std::uint32_t>(data.dim);
    if (rescale_radius > 0.0) enforce_norm_bound(row, rescale_radius, policy);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Confidence-threshold baseline
// ---------------------------------------------------------------------------

int baseline_confidence_threshold(const WeightMatrix& w, const AugmentedInput& input,
                                  double threshold, RngStream& rng) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("baseline threshold must lie in [0,1]");
  }
  const int n = w.space().n;
  std::vector<double> class_scores(static_cast<std::size_t>(n));
  for (int y = 1; y <= n; ++y) {
    class_scores[static_cast<std::size_t>(y - 1)] = w.dot_augmented(y, input.x);
  }
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (class_scores[static_cast<std::size_t>(i)] > class_scores[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    z += std::exp(class_scores[static_cast<std::size_t>(i)] -
                  class_scores[static_cast<std::size_t>(best)]);
  }
  const double confidence = 1.0 / z;

  if (confidence >= threshold || input.experts.empty()) return best + 1;
  const std::size_t pick = rng.uniform_below(input.experts.size());
  return w.space().label_of_expert(input.experts.available[pick]);
}

}  // namespace ol2d
