#pragma once

#include <span>
#include <string>
#include <vector>

#include "ol2d/learner.hpp"
#include "ol2d/losses.hpp"
#include "ol2d/types.hpp"

namespace ol2d {

// ---------------------------------------------------------------------------
// Score profiles and conditional risks
// ---------------------------------------------------------------------------

/// Per-label expected score of one round:
///   s(y)   = p(y)                      for class labels,
///   s(n+j) = 1 - E_y[c_j(x, y)]        for available experts,
/// with S the sum over the round label set, the normalized profile s/S and
/// y_max the highest-scoring label. Analysis-only; the online loop never
/// sees it.
struct ScoreProfile {
  LabelSpace space;
  ExpertSet experts;
  std::vector<double> s;           ///< aligned with make_label_set order
  double total = 0.0;              ///< S
  std::vector<double> normalized;  ///< s / S
  int y_max = 0;                   ///< label; lowest index on ties

  int position_of(int label) const;
};

ScoreProfile score_profile(const LabelSpace& space, std::span<const double> class_dist,
                           std::span<const double> expected_cost, const ExpertSet& experts);

/// Conditional true-deferral risk of a deterministic choice: 1 - s(label).
double conditional_deferral_risk(int chosen_label, const ScoreProfile& profile);

/// Conditional risk of a randomized choice q over the round label set.
double conditional_deferral_risk(std::span<const double> q, const ScoreProfile& profile);

/// Minimal conditional risk over all reachable labels: 1 - max s.
double min_deferral_risk(const ScoreProfile& profile);

/// Conditional surrogate risk sum_y s(y) Phi(scores, y). For the
/// constrained hinge the scores must be zero-sum over the round label set.
double conditional_surrogate_risk(std::span<const double> scores, const ScoreProfile& profile,
                                  SurrogateKind kind);

/// Closed-form minimum of the hinge conditional surrogate risk,
///   m (S - s(y_max)),
/// together with the score assignment achieving it (m-1 at y_max, -1
/// elsewhere; zero-sum by construction).
struct MinSurrogateRisk {
  double value = 0.0;
  std::vector<double> achieving_scores;
};
MinSurrogateRisk min_surrogate_risk_hinge(const ScoreProfile& profile);

/// Minimum of the logistic conditional surrogate risk (softmax can realize
/// any interior distribution, so the optimum is s log(S/s) summed).
double min_surrogate_risk_logistic(const ScoreProfile& profile);

/// Excess conditional risks of a (possibly randomized) decision:
/// target_gap = max s - E_q[s(chosen)], surrogate_gap = C_Phi - C*_Phi.
/// Both are nonnegative; for the hinge (linear calibration) the target gap
/// of the exploration-mixed policy is at most surrogate_gap + c * gamma.
struct CalibrationGaps {
  double target_gap = 0.0;
  double surrogate_gap = 0.0;
};
CalibrationGaps calibration_gaps(std::span<const double> q, std::span<const double> scores,
                                 const ScoreProfile& profile, SurrogateKind kind);

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

/// One aggregation window of a run log.
struct WindowRow {
  long t_begin = 0;
  long t_end = 0;
  double true_loss = 0.0;          ///< mean realized deferral loss
  double expected_loss = 0.0;      ///< mean E_q[l_def] (NaN when unavailable)
  double surrogate_loss = 0.0;     ///< mean Phi_def at the projected iterate
  double estimated_loss = 0.0;     ///< mean importance-weighted estimate
  double accuracy = 0.0;           ///< realized task accuracy
  double self_ratio = 0.0;         ///< share of class actions
  std::vector<double> deferral_ratio;    ///< per expert
  std::vector<double> queried_accuracy;  ///< per expert; NaN if never queried
  std::vector<double> availability;      ///< per expert share of rounds present
  double mean_gamma = 0.0;
  double mean_eta = 0.0;
  double mean_grad_projected = 0.0;
  double comparator_loss = 0.0;  ///< mean comparator deferral loss (NaN if absent)
  double cum_regret = 0.0;       ///< cumulative regret vs comparator up to t_end
};

struct RegretReport {
  long window = 0;
  int classes = 0;
  int experts = 0;
  std::vector<WindowRow> windows;
  double total_true_loss = 0.0;
  double total_expected_loss = 0.0;
  double total_comparator_loss = 0.0;
  double final_regret = 0.0;  ///< cumulative expected loss minus comparator loss
};

/// Windowed and cumulative accounting of a completed run. comparator_loss,
/// when provided, holds the comparator's per-round deferral loss.
RegretReport regret_report(const std::vector<RoundRecord>& records, int classes, int experts,
                           long window, const std::vector<double>* comparator_loss = nullptr);

// CSV export/import. All floating-point values are written with %.17g so
// identical runs produce identical bytes.
void write_rounds_csv(const std::vector<RoundRecord>& records, int classes, int experts,
                      const std::string& path);
std::vector<RoundRecord> read_rounds_csv(const std::string& path, int* classes_out = nullptr,
                                         int* experts_out = nullptr);
void write_windows_csv(const RegretReport& report, const std::string& path);

}  // namespace ol2d
