#include "ol2d/bandit.hpp"

#include <cmath>

namespace ol2d {

int ActionDistribution::position_of(int label) const {
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] == label) return static_cast<int>(i);
  }
  throw DomainError("ActionDistribution: label not in support");
}

ActionDistribution action_distribution_from_scores(std::span<const double> scores,
                                                   const LabelSpace& space,
                                                   const ExpertSet& experts, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw DomainError("action_distribution: gamma outside [0,1]");
  ActionDistribution dist;
  dist.support = make_label_set(space, experts);
  dist.gamma = gamma;
  const std::size_t m = dist.support.size();
  std::vector<double> values(scores.begin(), scores.end());
  dist.greedy_label = argmax_label(dist.support, values);
  dist.prob.assign(m, gamma / static_cast<double>(m));
  dist.prob[static_cast<std::size_t>(dist.position_of(dist.greedy_label))] += 1.0 - gamma;
  return dist;
}

ActionDistribution action_distribution(const WeightMatrix& w, const AugmentedInput& input,
                                       double gamma) {
  const std::vector<double> scores = active_scores(w, input);
  return action_distribution_from_scores(scores, w.space(), input.experts, gamma);
}

int sample_action(const ActionDistribution& dist, RngStream& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    cum += dist.prob[i];
    if (u < cum) return dist.support[i];
  }
  return dist.support.back();  // guards against fp round-off at u ~ 1
}

namespace {

void check_feedback(const LabelSpace& space, const ExpertSet& experts, const Feedback& fb,
                    const ActionDistribution& dist) {
  if (!label_available(space, experts, fb.action)) {
    throw ProtocolError("feedback action outside the round label set");
  }
  if (space.is_expert_label(fb.action) && !fb.cost.has_value()) {
    throw ProtocolError("deferred feedback is missing the realized cost");
  }
  if (dist.support.size() != static_cast<std::size_t>(space.n) + experts.size()) {
    throw ProtocolError("action distribution does not match the round label set");
  }
}

}  // namespace

EstimateWeights estimate_weights(const LabelSpace& space, const ExpertSet& experts,
                                 const Feedback& fb, const ActionDistribution& dist) {
  check_feedback(space, experts, fb, dist);
  EstimateWeights w;
  w.vj.assign(experts.size(), 0.0);
  if (space.is_class(fb.action)) {
    if (fb.correct) w.v0 = 1.0 / dist.prob_of(fb.action);
  } else {
    const int pos = experts.position_of(space.expert_of(fb.action));
    w.vj[static_cast<std::size_t>(pos)] = 1.0 / dist.prob_of(fb.action);
  }
  return w;
}

double estimated_loss_from_scores(std::span<const double> scores, const LabelSpace& space,
                                  const ExpertSet& experts, const Feedback& fb,
                                  const ActionDistribution& dist, SurrogateKind kind) {
  const EstimateWeights w = estimate_weights(space, experts, fb, dist);
  if (w.v0 != 0.0) {
    return w.v0 * base_surrogate_from_scores(scores, fb.action - 1, kind);
  }
  for (std::size_t pos = 0; pos < w.vj.size(); ++pos) {
    if (w.vj[pos] == 0.0) continue;
    const double weight = 1.0 - *fb.cost;
    return weight * w.vj[pos] *
           base_surrogate_from_scores(scores, space.n + static_cast<int>(pos), kind);
  }
  return 0.0;
}

double estimated_loss(const WeightMatrix& w, const AugmentedInput& input, const Feedback& fb,
                      const ActionDistribution& dist, SurrogateKind kind) {
  const std::vector<double> scores = active_scores(w, input);
  return estimated_loss_from_scores(scores, w.space(), input.experts, fb, dist, kind);
}

RankOneGradient estimated_subgradient_from_scores(std::span<const double> scores,
                                                  const LabelSpace& space,
                                                  const ExpertSet& experts, const Feedback& fb,
                                                  const ActionDistribution& dist) {
  const EstimateWeights w = estimate_weights(space, experts, fb, dist);
  RankOneGradient g;
  g.row_coeff.assign(static_cast<std::size_t>(space.total()), 0.0);

  double weight = w.v0;  // zero on incorrect class actions: zero gradient
  if (space.is_expert_label(fb.action)) {
    const int pos = experts.position_of(space.expert_of(fb.action));
    weight = (1.0 - *fb.cost) * w.vj[static_cast<std::size_t>(pos)];
  }
  if (weight == 0.0) return g;

  g = hinge_subgradient_from_scores(scores, space, experts, fb.action);
  for (double& c : g.row_coeff) c *= weight;
  return g;
}

RankOneGradient estimated_subgradient(const WeightMatrix& w, const AugmentedInput& input,
                                      const Feedback& fb, const ActionDistribution& dist) {
  const std::vector<double> scores = active_scores(w, input);
  return estimated_subgradient_from_scores(scores, w.space(), input.experts, fb, dist);
}

RankOneGradient project_gradient(const RankOneGradient& grad, const LabelSpace& space,
                                 const ExpertSet& experts) {
  RankOneGradient out = grad;
  const std::vector<int> labels = make_label_set(space, experts);
  double mean = 0.0;
  for (int label : labels) mean += grad.row_coeff[static_cast<std::size_t>(label - 1)];
  mean /= static_cast<double>(labels.size());
  for (int label : labels) out.row_coeff[static_cast<std::size_t>(label - 1)] -= mean;
  return out;
}

}  // namespace ol2d
