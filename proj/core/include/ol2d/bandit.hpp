#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ol2d/losses.hpp"
#include "ol2d/rng.hpp"
#include "ol2d/types.hpp"
#include "ol2d/weights.hpp"

namespace ol2d {

/// Exploration-mixed action distribution
///   q = (1 - gamma) e_{argmax} + (gamma / m) * 1
/// over the round label set. Every label keeps probability at least
/// gamma / m, which bounds the importance weights below.
struct ActionDistribution {
  std::vector<int> support;   ///< round label set, ascending
  std::vector<double> prob;   ///< aligned with support
  double gamma = 0.0;
  int greedy_label = 0;       ///< the argmax the mass concentrates on

  int position_of(int label) const;
  double prob_of(int label) const { return prob[static_cast<std::size_t>(position_of(label))]; }
};

/// What the learner observes after acting: the action, a correctness bit
/// (1{y' = y} for a class, 1{g_j(x) = y} for a deferral) and, only when
/// deferred, the realized cost. Never the raw label and nothing about
/// unqueried experts.
struct Feedback {
  int action = 0;
  bool correct = false;
  std::optional<double> cost;  ///< present iff the action was a deferral
};

/// Inverse-propensity weights of the loss estimate:
///   v_0   = 1{y' in [n]} 1{y' = y} / q(y')
///   v_j   = 1{y' = n+j} / q(n+j)   for each available expert j.
/// At most one weight is nonzero per round and it equals 1/q(action).
struct EstimateWeights {
  double v0 = 0.0;
  std::vector<double> vj;  ///< aligned with the round's expert set
};

EstimateWeights estimate_weights(const LabelSpace& space, const ExpertSet& experts,
                                 const Feedback& fb, const ActionDistribution& dist);

ActionDistribution action_distribution(const WeightMatrix& w, const AugmentedInput& input,
                                       double gamma);

/// Distribution from precomputed scores (learner hot path).
ActionDistribution action_distribution_from_scores(std::span<const double> scores,
                                                   const LabelSpace& space,
                                                   const ExpertSet& experts, double gamma);

/// Inverse-CDF draw over the support in label order; deterministic given
/// the stream state.
int sample_action(const ActionDistribution& dist, RngStream& rng);

/// Importance-weighted estimate of the surrogate deferral loss from one
/// observed action:
///   correct class action ->  Phi(., y') / q(y')
///   deferral to j        ->  (1 - c_j) Phi(., n+j) / q(n+j)
///   incorrect class      ->  0
/// Unbiased: the q-expectation over actions equals the full surrogate.
double estimated_loss(const WeightMatrix& w, const AugmentedInput& input, const Feedback& fb,
                      const ActionDistribution& dist, SurrogateKind kind);

double estimated_loss_from_scores(std::span<const double> scores, const LabelSpace& space,
                                  const ExpertSet& experts, const Feedback& fb,
                                  const ActionDistribution& dist, SurrogateKind kind);

/// Subgradient of the loss estimate (constrained hinge only): the single
/// active target's hinge subgradient carrying the same importance weight.
/// Rows outside the round label set are exactly zero.
RankOneGradient estimated_subgradient(const WeightMatrix& w, const AugmentedInput& input,
                                      const Feedback& fb, const ActionDistribution& dist);

RankOneGradient estimated_subgradient_from_scores(std::span<const double> scores,
                                                  const LabelSpace& space,
                                                  const ExpertSet& experts, const Feedback& fb,
                                                  const ActionDistribution& dist);

/// Projection of a rank-one gradient onto the zero-sum subspace: centers
/// the coefficients of the active rows on their mean. Same contract as
/// project_zero_sum applied to the materialized matrix.
RankOneGradient project_gradient(const RankOneGradient& grad, const LabelSpace& space,
                                 const ExpertSet& experts);

}  // namespace ol2d
