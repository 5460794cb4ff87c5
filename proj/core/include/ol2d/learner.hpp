#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ol2d/bandit.hpp"
#include "ol2d/losses.hpp"
#include "ol2d/rng.hpp"
#include "ol2d/types.hpp"
#include "ol2d/weights.hpp"

namespace ol2d {

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

enum class ScheduleRegime { general, near_realizable, adagrad, custom };

/// Learning-rate / exploration-rate schedules. All rates are computed
/// lazily from t (1-based), so runs are horizon-oblivious.
///
///   general:          eta_t = B / (sqrt(N) R' t^{2/3}),
///                     gamma_t = min(1/2, t^{-1/3})
///   near_realizable:  eta_t = B / sqrt(4 R' sqrt(N) (N+4) t),
///                     gamma_t = min(1/2, gamma / sqrt(t)) with
///                     gamma = B sqrt(R' N^{5/2} (N+4))
///   adagrad:          per-coordinate base_lr / sqrt(acc + eps),
///                     gamma_t = min(1/2, gamma_scale / sqrt(t))
///   custom:           eta_t = base_lr / t^{lr_power},
///                     gamma_t = min(1/2, gamma_scale / t^{gamma_power})
///
/// R' = sqrt(R^2 + 1) accounts for the bias coordinate in the gradient
/// norm bound.
struct Schedule {
  ScheduleRegime regime = ScheduleRegime::general;
  double frob_bound = 1.0;      ///< B
  double effective_radius = 1.0;  ///< R' = sqrt(R^2 + 1)
  int total_labels = 2;         ///< N

  // adagrad / custom knobs
  double base_lr = 0.1;
  double lr_power = 0.5;
  double gamma_scale = 10.0;
  double gamma_power = 0.5;
  double adagrad_eps = 1e-8;

  static Schedule general(double B, double radius, int N);
  static Schedule near_realizable(double B, double radius, int N);
  static Schedule adagrad(double B, double radius, int N, double base_lr = 0.1,
                          double gamma_scale = 10.0);
  static Schedule custom(double B, double radius, int N, double base_lr, double lr_power,
                         double gamma_scale, double gamma_power);

  /// The constant gamma of the near-realizable regime.
  double near_realizable_gamma() const;

  double eta(long t) const;
  double gamma(long t) const;
};

// ---------------------------------------------------------------------------
// Round bookkeeping
// ---------------------------------------------------------------------------

/// What the learner's action actually produced this round.
struct DeferralOutcome {
  int action = 0;
  bool correct = false;
  double incurred_loss = 0.0;  ///< 1{wrong} for a class action, c_j when deferred
};

/// Full per-round log entry. The learner fills everything it can know;
/// analysis-time fields (true label, expected loss, comparator loss) are
/// filled by the harness and stay NaN/0 inside the online loop.
struct RoundRecord {
  long t = 0;
  std::vector<int> support;
  std::vector<double> q;
  double gamma = 0.0;
  double eta = 0.0;
  int greedy_label = 0;
  int action = 0;
  double action_prob = 0.0;
  bool deferred = false;
  int expert = 0;  ///< expert index when deferred, else 0
  bool correct = false;
  double cost = std::numeric_limits<double>::quiet_NaN();  ///< NaN for class actions
  double estimated_loss = 0.0;
  double grad_norm_raw = 0.0;
  double grad_norm_projected = 0.0;
  double weight_frob_norm = 0.0;
  double incurred_loss = 0.0;

  // analysis-time only
  int true_label = 0;
  double expected_loss = std::numeric_limits<double>::quiet_NaN();
  double surrogate_loss = std::numeric_limits<double>::quiet_NaN();
};

/// Environment-side feedback callback: answers exactly one query for the
/// sampled action.
using BanditOracle = std::function<Feedback(int action)>;

// ---------------------------------------------------------------------------
// Online learner
// ---------------------------------------------------------------------------

/// Online gradient descent with projected gradients over the augmented
/// label space. Per round: project the iterate onto the zero-sum subspace
/// of the round label set, act from the exploration-mixed distribution,
/// build the importance-weighted loss estimate from bandit feedback, take a
/// projected-gradient step, and clip back to the Frobenius ball.
class OnlineLearner {
 public:
  OnlineLearner(LabelSpace space, int feature_dim, Schedule schedule,
                SurrogateKind kind, std::uint64_t seed, std::uint64_t stream);

  /// Warm start from an existing hypothesis (clipped to the schedule's
  /// Frobenius ball); the round counter still begins at 1.
  OnlineLearner(WeightMatrix initial, Schedule schedule, SurrogateKind kind,
                std::uint64_t seed, std::uint64_t stream);

  /// One bandit round. input.round must equal the learner's round counter.
  DeferralOutcome step(const AugmentedInput& input, const BanditOracle& oracle,
                       RoundRecord* record = nullptr);

  /// Full-information round (gamma = 0, label and all costs revealed);
  /// used by the comparator path and the reference-equivalence tests.
  void step_full_information(const AugmentedInput& input, int y, const RoundCosts& costs,
                             RoundRecord* record = nullptr);

  const WeightMatrix& weights() const { return weights_; }
  long round() const { return round_; }
  const Schedule& schedule() const { return schedule_; }
  SurrogateKind surrogate() const { return kind_; }

  void save_checkpoint(const std::string& path) const;
  static OnlineLearner load_checkpoint(const std::string& path);

 private:
  void apply_update(const RankOneGradient& projected, const AugmentedInput& input,
                    const std::vector<double>& raw_scores, double eta);
  void refresh_frob_norm();

  LabelSpace space_;
  Schedule schedule_;
  SurrogateKind kind_;
  WeightMatrix weights_;
  std::vector<double> adagrad_acc_;  ///< empty unless regime == adagrad
  RngStream rng_;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  long round_ = 1;
  double frob_squared_ = 0.0;
  long rounds_since_refresh_ = 0;
};

// ---------------------------------------------------------------------------
// Hindsight comparator
// ---------------------------------------------------------------------------

/// One logged round, the unit of the analysis-time comparator input.
struct LoggedRound {
  AugmentedInput input;
  int label = 0;
  RoundCosts costs;
};

struct ComparatorResult {
  WeightMatrix weights;
  double surrogate_objective = 0.0;  ///< achieved sum_t Phi_def at the projected iterates
  double true_loss = 0.0;            ///< sum_t l_def of the returned weights
  int epochs = 0;
};

/// Approximate best-in-hindsight hypothesis: multi-epoch full-information
/// projected subgradient descent on sum_t Phi_def(W|_{K_{A_t}}, x_t, y_t)
/// over the Frobenius ball, returning the best iterate by objective. The
/// achieved objective certifies the regret estimate as an upper bound on
/// the comparator's risk.
ComparatorResult hindsight_comparator(const std::vector<LoggedRound>& log, LabelSpace space,
                                      int feature_dim, double frob_bound, SurrogateKind kind,
                                      int epochs);

}  // namespace ol2d
