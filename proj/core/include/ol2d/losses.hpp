#pragma once

#include <span>
#include <vector>

#include "ol2d/types.hpp"
#include "ol2d/weights.hpp"

namespace ol2d {

/// Base multiclass surrogate plugged into the deferral composition.
/// constrained_hinge is the regret-optimal path and is only meaningful on
/// zero-sum (projected) hypotheses; logistic is provided for loss
/// evaluation and full-information descent.
enum class SurrogateKind { constrained_hinge, logistic };

/// True deferral loss: 1{prediction != y} when the hypothesis predicts a
/// class, the realized expert cost when it defers. Values lie in [0,1].
double true_deferral_loss(const WeightMatrix& w, const AugmentedInput& input, int y,
                          const RoundCosts& costs);

/// Expectation of the true deferral loss under a distribution q over the
/// round label set (aligned with make_label_set order, must sum to 1
/// within 1e-9).
double expected_deferral_loss(std::span<const double> q, const AugmentedInput& input, int y,
                              const RoundCosts& costs);

/// Varying multiclass surrogate: the base surrogate computed over the round
/// label set only, and exactly 0 for labels outside it. Scores of
/// unavailable experts are never read.
double varying_surrogate(const WeightMatrix& w, const AugmentedInput& input, int label,
                         SurrogateKind kind);

/// Surrogate deferral loss: the composition
///   Phi(h, x, y) + sum_{n+j in label set} (1 - c_j) * Phi(h, x, n+j).
/// With the constrained hinge on a zero-sum hypothesis this is the
/// constrained-OCO objective.
double surrogate_deferral_loss(const WeightMatrix& w, const AugmentedInput& input, int y,
                               const RoundCosts& costs, SurrogateKind kind);

// ---------------------------------------------------------------------------
// Score-level computations
// ---------------------------------------------------------------------------
// Every surrogate above depends on the hypothesis only through the scores of
// the round label set. The learner computes those scores once per round, so
// the loss/gradient kernels are exposed at score level as well; the
// WeightMatrix entry points are thin wrappers.

/// Base surrogate at score level. `scores` is aligned with the round label
/// set; `target_pos` indexes into it.
double base_surrogate_from_scores(std::span<const double> scores, int target_pos,
                                  SurrogateKind kind);

/// Deferral surrogate at score level; y is a class label in 1..n.
double deferral_surrogate_from_scores(std::span<const double> scores, const LabelSpace& space,
                                      const ExpertSet& experts, int y, const RoundCosts& costs,
                                      SurrogateKind kind);

// ---------------------------------------------------------------------------
// Hinge subgradients
// ---------------------------------------------------------------------------

/// Rank-one subgradient of a hinge-family surrogate: the full gradient
/// matrix is row_coeff[i] * (x, 1) for every row i, and rows outside the
/// round label set always carry coefficient 0. There is one coefficient per
/// augmented label (size N).
struct RankOneGradient {
  std::vector<double> row_coeff;

  double coeff_norm() const;
  /// Frobenius norm of the materialized matrix given the round's features.
  double frob_norm(const FeatureVector& x) const { return coeff_norm() * x.augmented_norm(); }
  /// Materialize into a dense matrix (test and analysis paths only).
  WeightMatrix to_dense(const LabelSpace& space, const FeatureVector& x, double frob_bound) const;
};

/// Subgradient of the constrained hinge at the given target label:
/// coefficient 1{1 + h(x, i) > 0} on rows i != target of the round label
/// set, 0 elsewhere. At the kink (1 + h == 0) the coefficient is 0.
RankOneGradient hinge_subgradient_from_scores(std::span<const double> scores,
                                              const LabelSpace& space, const ExpertSet& experts,
                                              int target_label);

/// Full-information subgradient of the deferral surrogate (target-label
/// term plus the (1 - c_j)-weighted expert terms). Both surrogate families
/// have gradients of the form coeff x (x, 1), so the result is rank-one.
RankOneGradient deferral_subgradient(const WeightMatrix& w, const AugmentedInput& input, int y,
                                     const RoundCosts& costs, SurrogateKind kind);

/// Same, at score level.
RankOneGradient deferral_subgradient_from_scores(std::span<const double> scores,
                                                 const LabelSpace& space,
                                                 const ExpertSet& experts, int y,
                                                 const RoundCosts& costs, SurrogateKind kind);

}  // namespace ol2d
