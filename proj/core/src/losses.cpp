#include "ol2d/losses.hpp"

#include <cmath>

namespace ol2d {

namespace {

int position_of_label(const LabelSpace& space, const ExpertSet& experts, int label) {
  if (space.is_class(label)) return label - 1;
  const int pos = experts.position_of(space.expert_of(label));
  return pos < 0 ? -1 : space.n + pos;
}

void check_costs(const RoundCosts& costs, const ExpertSet& experts) {
  if (costs.value.size() != experts.size()) {
    throw DomainError("RoundCosts: need one realized cost per available expert");
  }
  for (double c : costs.value) {
    if (c < 0.0 || c > 1.0) throw DomainError("RoundCosts: cost outside [0,1]");
  }
}

}  // namespace

double true_deferral_loss(const WeightMatrix& w, const AugmentedInput& input, int y,
                          const RoundCosts& costs) {
  if (!w.space().is_class(y)) throw DomainError("true_deferral_loss: y must be a class label");
  check_costs(costs, input.experts);
  const int prediction = predict(w, input);
  if (w.space().is_class(prediction)) return prediction == y ? 0.0 : 1.0;
  return costs.for_expert(w.space().expert_of(prediction), input.experts);
}

double expected_deferral_loss(std::span<const double> q, const AugmentedInput& input, int y,
                              const RoundCosts& costs) {
  check_costs(costs, input.experts);
  const std::size_t n = static_cast<std::size_t>(input.experts.size());
  const std::size_t m = q.size();
  if (m < n + 2) throw DomainError("expected_deferral_loss: q shorter than the label set");
  const std::size_t classes = m - n;
  if (y < 1 || static_cast<std::size_t>(y) > classes) {
    throw DomainError("expected_deferral_loss: y outside the class range implied by q");
  }

  double total = 0.0;
  double loss = 0.0;
  for (std::size_t pos = 0; pos < m; ++pos) {
    total += q[pos];
    if (pos < classes) {
      if (static_cast<int>(pos) + 1 != y) loss += q[pos];
    } else {
      loss += q[pos] * costs.for_position(static_cast<int>(pos - classes));
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("expected_deferral_loss: q does not sum to 1");
  }
  return loss;
}

double base_surrogate_from_scores(std::span<const double> scores, int target_pos,
                                  SurrogateKind kind) {
  const int m = static_cast<int>(scores.size());
  if (kind == SurrogateKind::constrained_hinge) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      if (i == target_pos) continue;
      const double v = 1.0 + scores[i];
      if (v > 0.0) s += v;
    }
    return s;
  }
  // logistic: log sum_i exp(h_i - h_target), computed stably.
  double hi = scores[0];
  for (int i = 1; i < m; ++i) hi = std::max(hi, scores[i]);
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += std::exp(scores[i] - hi);
  return std::log(s) + hi - scores[target_pos];
}

double varying_surrogate(const WeightMatrix& w, const AugmentedInput& input, int label,
                         SurrogateKind kind) {
  const int pos = position_of_label(w.space(), input.experts, label);
  if (pos < 0) return 0.0;  // labels outside the round set carry no loss
  const std::vector<double> scores = active_scores(w, input);
  return base_surrogate_from_scores(scores, pos, kind);
}

double deferral_surrogate_from_scores(std::span<const double> scores, const LabelSpace& space,
                                      const ExpertSet& experts, int y, const RoundCosts& costs,
                                      SurrogateKind kind) {
  double total = base_surrogate_from_scores(scores, y - 1, kind);
  for (std::size_t pos = 0; pos < experts.size(); ++pos) {
    const double weight = 1.0 - costs.for_position(static_cast<int>(pos));
    if (weight == 0.0) continue;
    total += weight *
             base_surrogate_from_scores(scores, space.n + static_cast<int>(pos), kind);
  }
  return total;
}

double surrogate_deferral_loss(const WeightMatrix& w, const AugmentedInput& input, int y,
                               const RoundCosts& costs, SurrogateKind kind) {
  if (!w.space().is_class(y)) throw DomainError("surrogate_deferral_loss: y must be a class");
  check_costs(costs, input.experts);
  const std::vector<double> scores = active_scores(w, input);
  return deferral_surrogate_from_scores(scores, w.space(), input.experts, y, costs, kind);
}

double RankOneGradient::coeff_norm() const {
  double s = 0.0;
  for (double c : row_coeff) s += c * c;
  return std::sqrt(s);
}

WeightMatrix RankOneGradient::to_dense(const LabelSpace& space, const FeatureVector& x,
                                       double frob_bound) const {
  WeightMatrix g(space, static_cast<int>(x.dim), frob_bound);
  for (int r = 0; r < g.rows(); ++r) {
    const double c = row_coeff[static_cast<std::size_t>(r)];
    if (c == 0.0) continue;
    auto row = g.row(r);
    for (const auto& [idx, val] : x.entries) row[idx] = c * val;
    row[g.feature_dim()] = c;  // bias coordinate
  }
  return g;
}

RankOneGradient hinge_subgradient_from_scores(std::span<const double> scores,
                                              const LabelSpace& space, const ExpertSet& experts,
                                              int target_label) {
  RankOneGradient g;
  g.row_coeff.assign(static_cast<std::size_t>(space.total()), 0.0);
  const std::vector<int> labels = make_label_set(space, experts);
  for (std::size_t pos = 0; pos < labels.size(); ++pos) {
    const int label = labels[pos];
    if (label == target_label) continue;
    if (1.0 + scores[pos] > 0.0) g.row_coeff[static_cast<std::size_t>(label - 1)] = 1.0;
  }
  return g;
}

RankOneGradient deferral_subgradient_from_scores(std::span<const double> scores,
                                                 const LabelSpace& space,
                                                 const ExpertSet& experts, int y,
                                                 const RoundCosts& costs, SurrogateKind kind) {
  RankOneGradient g;
  g.row_coeff.assign(static_cast<std::size_t>(space.total()), 0.0);
  const std::vector<int> labels = make_label_set(space, experts);

  // total weight = 1 (target term) + sum_j (1 - c_j); weight_at holds the
  // weight of each position's own target term (0 for non-targets)
  double total_weight = 1.0;
  std::vector<double> weight_at(labels.size(), 0.0);
  weight_at[static_cast<std::size_t>(y - 1)] = 1.0;
  for (std::size_t pos = 0; pos < experts.size(); ++pos) {
    const double wgt = 1.0 - costs.for_position(static_cast<int>(pos));
    weight_at[static_cast<std::size_t>(space.n) + pos] = wgt;
    total_weight += wgt;
  }

  if (kind == SurrogateKind::constrained_hinge) {
    // row i collects the weight of every target other than itself whenever
    // its hinge is active
    for (std::size_t pos = 0; pos < labels.size(); ++pos) {
      if (1.0 + scores[pos] > 0.0) {
        g.row_coeff[static_cast<std::size_t>(labels[pos] - 1)] = total_weight - weight_at[pos];
      }
    }
    return g;
  }

  // logistic: d/dh_i of sum_tau u_tau (logsumexp - h_tau) = U p_i - u_i
  double hi = scores[0];
  for (std::size_t i = 1; i < scores.size(); ++i) hi = std::max(hi, scores[i]);
  double z = 0.0;
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - hi);
    z += p[i];
  }
  for (std::size_t pos = 0; pos < labels.size(); ++pos) {
    g.row_coeff[static_cast<std::size_t>(labels[pos] - 1)] =
        total_weight * (p[pos] / z) - weight_at[pos];
  }
  return g;
}

RankOneGradient deferral_subgradient(const WeightMatrix& w, const AugmentedInput& input, int y,
                                     const RoundCosts& costs, SurrogateKind kind) {
  const std::vector<double> scores = active_scores(w, input);
  return deferral_subgradient_from_scores(scores, w.space(), input.experts, y, costs, kind);
}

}  // namespace ol2d
