#include "ol2d/learner.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ol2d {

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

Schedule Schedule::general(double B, double radius, int N) {
  Schedule s;
  s.regime = ScheduleRegime::general;
  s.frob_bound = B;
  s.effective_radius = std::sqrt(radius * radius + 1.0);
  s.total_labels = N;
  return s;
}

Schedule Schedule::near_realizable(double B, double radius, int N) {
  Schedule s = general(B, radius, N);
  s.regime = ScheduleRegime::near_realizable;
  return s;
}

Schedule Schedule::adagrad(double B, double radius, int N, double base_lr, double gamma_scale) {
  Schedule s = general(B, radius, N);
  s.regime = ScheduleRegime::adagrad;
  s.base_lr = base_lr;
  s.gamma_scale = gamma_scale;
  s.gamma_power = 0.5;
  return s;
}

Schedule Schedule::custom(double B, double radius, int N, double base_lr, double lr_power,
                          double gamma_scale, double gamma_power) {
  Schedule s = general(B, radius, N);
  s.regime = ScheduleRegime::custom;
  s.base_lr = base_lr;
  s.lr_power = lr_power;
  s.gamma_scale = gamma_scale;
  s.gamma_power = gamma_power;
  return s;
}

double Schedule::near_realizable_gamma() const {
  const double N = static_cast<double>(total_labels);
  return frob_bound * std::sqrt(effective_radius * std::pow(N, 2.5) * (N + 4.0));
}

double Schedule::eta(long t) const {
  const double td = static_cast<double>(t);
  const double N = static_cast<double>(total_labels);
  switch (regime) {
    case ScheduleRegime::general:
      return frob_bound / (std::sqrt(N) * effective_radius * std::pow(td, 2.0 / 3.0));
    case ScheduleRegime::near_realizable:
      return frob_bound / std::sqrt(4.0 * effective_radius * std::sqrt(N) * (N + 4.0) * td);
    case ScheduleRegime::adagrad:
      return base_lr;  // per-coordinate scaling happens in the update
    case ScheduleRegime::custom:
      return base_lr / std::pow(td, lr_power);
  }
  return 0.0;
}

double Schedule::gamma(long t) const {
  const double td = static_cast<double>(t);
  switch (regime) {
    case ScheduleRegime::general:
      return std::min(0.5, 1.0 / std::cbrt(td));
    case ScheduleRegime::near_realizable:
      return std::min(0.5, near_realizable_gamma() / std::sqrt(td));
    case ScheduleRegime::adagrad:
      return std::min(0.5, gamma_scale / std::sqrt(td));
    case ScheduleRegime::custom:
      return std::min(0.5, gamma_scale / std::pow(td, gamma_power));
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// OnlineLearner
// ---------------------------------------------------------------------------

OnlineLearner::OnlineLearner(LabelSpace space, int feature_dim, Schedule schedule,
                             SurrogateKind kind, std::uint64_t seed, std::uint64_t stream)
    : space_(space),
      schedule_(schedule),
      kind_(kind),
      weights_(space, feature_dim, schedule.frob_bound),
      rng_(seed, stream),
      seed_(seed),
      stream_(stream) {
  if (schedule_.regime == ScheduleRegime::adagrad) {
    adagrad_acc_.assign(weights_.raw().size(), 0.0);
  }
}

OnlineLearner::OnlineLearner(WeightMatrix initial, Schedule schedule, SurrogateKind kind,
                             std::uint64_t seed, std::uint64_t stream)
    : OnlineLearner(initial.space(), initial.feature_dim(), schedule, kind, seed, stream) {
  weights_ = std::move(initial);
  weights_.set_frob_bound(schedule_.frob_bound);
  project_ball_in_place(weights_, schedule_.frob_bound);
  frob_squared_ = weights_.frob_norm_squared();
}

namespace {

std::vector<double> centered_copy(const std::vector<double>& raw) {
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= static_cast<double>(raw.size());
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] - mean;
  return out;
}

}  // namespace

DeferralOutcome OnlineLearner::step(const AugmentedInput& input, const BanditOracle& oracle,
                                    RoundRecord* record) {
  if (kind_ != SurrogateKind::constrained_hinge) {
    throw ConfigError("bandit rounds require the constrained hinge surrogate");
  }
  if (input.round != round_) {
    throw ProtocolError("input round " + std::to_string(input.round) +
                        " does not match learner round " + std::to_string(round_));
  }
  const double gamma = schedule_.gamma(round_);
  const double eta = schedule_.eta(round_);

  // Scores of the projected iterate W|_K differ from the raw scores by the
  // active-set mean, so the projection is never materialized here.
  const std::vector<double> raw = active_scores(weights_, input);
  const std::vector<double> centered = centered_copy(raw);

  const ActionDistribution dist =
      action_distribution_from_scores(centered, space_, input.experts, gamma);
  const int action = sample_action(dist, rng_);

  const Feedback fb = oracle(action);
  if (fb.action != action) throw ProtocolError("oracle answered for a different action");
  if (space_.is_expert_label(action) && !fb.cost.has_value()) {
    throw ProtocolError("deferred feedback is missing the realized cost");
  }

  const double est =
      estimated_loss_from_scores(centered, space_, input.experts, fb, dist, kind_);
  const RankOneGradient grad =
      estimated_subgradient_from_scores(centered, space_, input.experts, fb, dist);
  const RankOneGradient projected = project_gradient(grad, space_, input.experts);

  apply_update(projected, input, raw, eta);

  DeferralOutcome outcome;
  outcome.action = action;
  outcome.correct = fb.correct;
  outcome.incurred_loss =
      space_.is_class(action) ? (fb.correct ? 0.0 : 1.0) : *fb.cost;

  if (record != nullptr) {
    record->t = round_;
    record->support = dist.support;
    record->q = dist.prob;
    record->gamma = gamma;
    record->eta = eta;
    record->greedy_label = dist.greedy_label;
    record->action = action;
    record->action_prob = dist.prob_of(action);
    record->deferred = space_.is_expert_label(action);
    record->expert = record->deferred ? space_.expert_of(action) : 0;
    record->correct = fb.correct;
    record->cost = fb.cost.value_or(std::numeric_limits<double>::quiet_NaN());
    record->estimated_loss = est;
    record->grad_norm_raw = grad.frob_norm(input.x);
    record->grad_norm_projected = projected.frob_norm(input.x);
    record->weight_frob_norm = std::sqrt(std::max(0.0, frob_squared_));
    record->incurred_loss = outcome.incurred_loss;
  }

  ++round_;
  return outcome;
}

void OnlineLearner::step_full_information(const AugmentedInput& input, int y,
                                          const RoundCosts& costs, RoundRecord* record) {
  if (input.round != round_) {
    throw ProtocolError("input round does not match learner round");
  }
  const double eta = schedule_.eta(round_);

  const std::vector<double> raw = active_scores(weights_, input);
  const std::vector<double> centered = centered_copy(raw);

  const ActionDistribution dist =
      action_distribution_from_scores(centered, space_, input.experts, 0.0);
  const int action = dist.greedy_label;

  const double loss =
      deferral_surrogate_from_scores(centered, space_, input.experts, y, costs, kind_);
  const RankOneGradient grad =
      deferral_subgradient_from_scores(centered, space_, input.experts, y, costs, kind_);
  const RankOneGradient projected = project_gradient(grad, space_, input.experts);

  apply_update(projected, input, raw, eta);

  if (record != nullptr) {
    record->t = round_;
    record->support = dist.support;
    record->q = dist.prob;
    record->gamma = 0.0;
    record->eta = eta;
    record->greedy_label = action;
    record->action = action;
    record->action_prob = 1.0;
    record->deferred = space_.is_expert_label(action);
    record->expert = record->deferred ? space_.expert_of(action) : 0;
    record->correct = space_.is_class(action) ? action == y : false;
    record->estimated_loss = loss;
    record->grad_norm_raw = grad.frob_norm(input.x);
    record->grad_norm_projected = projected.frob_norm(input.x);
    record->weight_frob_norm = std::sqrt(std::max(0.0, frob_squared_));
    record->true_label = y;
  }

  ++round_;
}

void OnlineLearner::apply_update(const RankOneGradient& projected, const AugmentedInput& input,
                                 const std::vector<double>& raw_scores, double eta) {
  const std::vector<int> labels = make_label_set(space_, input.experts);
  const int bias_col = weights_.feature_dim();
  const double aug_norm_sq = input.x.squared_norm() + 1.0;

  if (schedule_.regime == ScheduleRegime::adagrad) {
    for (int label : labels) {
      const double c = projected.row_coeff[static_cast<std::size_t>(label - 1)];
      if (c == 0.0) continue;
      auto row = weights_.row(label - 1);
      double* acc = adagrad_acc_.data() + static_cast<std::size_t>(label - 1) * weights_.cols();
      auto coordinate_step = [&](int col, double g) {
        acc[col] += g * g;
        const double step = schedule_.base_lr * g / std::sqrt(acc[col] + schedule_.adagrad_eps);
        frob_squared_ += step * step - 2.0 * row[col] * step;
        row[col] -= step;
      };
      for (const auto& [idx, val] : input.x.entries) coordinate_step(static_cast<int>(idx), c * val);
      coordinate_step(bias_col, c);
    }
  } else {
    for (std::size_t pos = 0; pos < labels.size(); ++pos) {
      const int label = labels[pos];
      const double c = projected.row_coeff[static_cast<std::size_t>(label - 1)];
      if (c == 0.0) continue;
      const double delta = eta * c;
      auto row = weights_.row(label - 1);
      for (const auto& [idx, val] : input.x.entries) row[idx] -= delta * val;
      row[bias_col] -= delta;
      frob_squared_ += delta * delta * aug_norm_sq - 2.0 * delta * raw_scores[pos];
    }
  }

  if (frob_squared_ < 0.0) frob_squared_ = 0.0;
  const double bound = schedule_.frob_bound;
  if (frob_squared_ > bound * bound) {
    const double factor = bound / std::sqrt(frob_squared_);
    for (double& v : weights_.raw()) v *= factor;
    frob_squared_ = bound * bound;
  }

  if (++rounds_since_refresh_ >= 4096) refresh_frob_norm();
}

void OnlineLearner::refresh_frob_norm() {
  frob_squared_ = weights_.frob_norm_squared();
  rounds_since_refresh_ = 0;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[8] = {'O', 'L', '2', 'D', 'C', '0', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}
}  // namespace

void OnlineLearner::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(out, static_cast<std::int32_t>(space_.n));
  write_pod(out, static_cast<std::int32_t>(space_.n_e));
  write_pod(out, static_cast<std::int32_t>(weights_.feature_dim()));
  write_pod(out, static_cast<std::int32_t>(schedule_.regime));
  write_pod(out, schedule_.frob_bound);
  write_pod(out, schedule_.effective_radius);
  write_pod(out, static_cast<std::int32_t>(schedule_.total_labels));
  write_pod(out, schedule_.base_lr);
  write_pod(out, schedule_.lr_power);
  write_pod(out, schedule_.gamma_scale);
  write_pod(out, schedule_.gamma_power);
  write_pod(out, schedule_.adagrad_eps);
  write_pod(out, static_cast<std::int32_t>(kind_));
  write_pod(out, seed_);
  write_pod(out, stream_);
  write_pod(out, round_);
  const auto state = rng_.state();
  for (std::uint64_t word : state) write_pod(out, word);
  write_pod(out, static_cast<std::uint8_t>(rng_.has_cached_normal()));
  write_pod(out, rng_.cached_normal());
  write_pod(out, frob_squared_);
  out.write(reinterpret_cast<const char*>(weights_.raw().data()),
            static_cast<std::streamsize>(weights_.raw().size() * sizeof(double)));
  write_pod(out, static_cast<std::uint8_t>(!adagrad_acc_.empty()));
  if (!adagrad_acc_.empty()) {
    out.write(reinterpret_cast<const char*>(adagrad_acc_.data()),
              static_cast<std::streamsize>(adagrad_acc_.size() * sizeof(double)));
  }
  if (!out) throw DataError("write failed: " + path);
}

OnlineLearner OnlineLearner::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw DataError("not a learner checkpoint: " + path);
  }
  const int n = read_pod<std::int32_t>(in);
  const int n_e = read_pod<std::int32_t>(in);
  const int dim = read_pod<std::int32_t>(in);
  Schedule sched;
  sched.regime = static_cast<ScheduleRegime>(read_pod<std::int32_t>(in));
  sched.frob_bound = read_pod<double>(in);
  sched.effective_radius = read_pod<double>(in);
  sched.total_labels = read_pod<std::int32_t>(in);
  sched.base_lr = read_pod<double>(in);
  sched.lr_power = read_pod<double>(in);
  sched.gamma_scale = read_pod<double>(in);
  sched.gamma_power = read_pod<double>(in);
  sched.adagrad_eps = read_pod<double>(in);
  const auto kind = static_cast<SurrogateKind>(read_pod<std::int32_t>(in));
  const auto seed = read_pod<std::uint64_t>(in);
  const auto stream = read_pod<std::uint64_t>(in);
  const auto round = read_pod<long>(in);
  std::array<std::uint64_t, 4> state{};
  for (auto& word : state) word = read_pod<std::uint64_t>(in);
  const bool has_spare = read_pod<std::uint8_t>(in) != 0;
  const double spare = read_pod<double>(in);
  const double frob_sq = read_pod<double>(in);

  OnlineLearner learner(LabelSpace(n, n_e), dim, sched, kind, seed, stream);
  in.read(reinterpret_cast<char*>(learner.weights_.raw().data()),
          static_cast<std::streamsize>(learner.weights_.raw().size() * sizeof(double)));
  const bool has_acc = read_pod<std::uint8_t>(in) != 0;
  if (has_acc) {
    learner.adagrad_acc_.assign(learner.weights_.raw().size(), 0.0);
    in.read(reinterpret_cast<char*>(learner.adagrad_acc_.data()),
            static_cast<std::streamsize>(learner.adagrad_acc_.size() * sizeof(double)));
  } else {
    learner.adagrad_acc_.clear();
  }
  if (!in) throw DataError("truncated learner checkpoint: " + path);
  learner.round_ = round;
  learner.frob_squared_ = frob_sq;
  learner.rng_.restore(state, has_spare, spare);
  return learner;
}

// ---------------------------------------------------------------------------
// Hindsight comparator
// ---------------------------------------------------------------------------

namespace {

double comparator_objective(const WeightMatrix& w, const std::vector<LoggedRound>& log,
                            SurrogateKind kind) {
  double total = 0.0;
  for (const auto& round : log) {
    const std::vector<double> raw = active_scores(w, round.input);
    const std::vector<double> centered = centered_copy(raw);
    total += deferral_surrogate_from_scores(centered, w.space(), round.input.experts,
                                            round.label, round.costs, kind);
  }
  return total;
}

}  // namespace

ComparatorResult hindsight_comparator(const std::vector<LoggedRound>& log, LabelSpace space,
                                      int feature_dim, double frob_bound, SurrogateKind kind,
                                      int epochs) {
  WeightMatrix current(space, feature_dim, frob_bound);
  WeightMatrix best = current;
  double best_objective = comparator_objective(current, log, kind);
  const double inv_t = log.empty() ? 1.0 : 1.0 / static_cast<double>(log.size());
  double grad_scale = 1e-12;

  for (int epoch = 1; epoch <= epochs && !log.empty(); ++epoch) {
    WeightMatrix gradient(space, feature_dim, frob_bound);
    double objective = 0.0;
    for (const auto& round : log) {
      const std::vector<double> raw = active_scores(current, round.input);
      const std::vector<double> centered = centered_copy(raw);
      objective += deferral_surrogate_from_scores(centered, space, round.input.experts,
                                                  round.label, round.costs, kind);
      const RankOneGradient g = project_gradient(
          deferral_subgradient_from_scores(centered, space, round.input.experts, round.label,
                                           round.costs, kind),
          space, round.input.experts);
      const int bias_col = feature_dim;
      for (int label : make_label_set(space, round.input.experts)) {
        const double c = g.row_coeff[static_cast<std::size_t>(label - 1)];
        if (c == 0.0) continue;
        auto row = gradient.row(label - 1);
        for (const auto& [idx, val] : round.input.x.entries) row[idx] += c * val;
        row[bias_col] += c;
      }
    }
    if (objective < best_objective) {
      best_objective = objective;
      best = current;
    }
    grad_scale = std::max(grad_scale, gradient.frob_norm() * inv_t);
    const double step = frob_bound / (grad_scale * std::sqrt(static_cast<double>(epoch))) * inv_t;
    const auto& g = gradient.raw();
    auto& w = current.raw();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
    project_ball_in_place(current, frob_bound);
  }

  const double final_objective = comparator_objective(current, log, kind);
  if (final_objective < best_objective) {
    best_objective = final_objective;
    best = current;
  }

  ComparatorResult result;
  result.weights = best;
  result.surrogate_objective = best_objective;
  result.epochs = epochs;
  double true_loss = 0.0;
  for (const auto& round : log) {
    true_loss += true_deferral_loss(best, round.input, round.label, round.costs);
  }
  result.true_loss = true_loss;
  return result;
}

}  // namespace ol2d
