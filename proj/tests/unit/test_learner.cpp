#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "ol2d/learner.hpp"
#include "ol2d/rng.hpp"

using namespace ol2d;

TEST_CASE("schedule values at the first round") {
  const Schedule general = Schedule::general(3.0, 2.0, 3);
  CHECK(general.eta(1) == doctest::Approx(3.0 / (std::sqrt(3.0) * std::sqrt(5.0))));
  CHECK(general.gamma(1) == 0.5);
  CHECK(general.gamma(8) == 0.5);
  CHECK(general.gamma(1000) == doctest::Approx(0.1));

  const Schedule ada = Schedule::adagrad(3.0, 2.0, 3, 0.1, 10.0);
  CHECK(ada.eta(1) == 0.1);
  CHECK(ada.gamma(400) == 0.5);
  CHECK(ada.gamma(402) < 0.5);
}

TEST_CASE("zero-gradient rounds leave the weights untouched") {
  const LabelSpace space(2, 1);
  // gamma identically 0: the greedy class action is deterministic
  Schedule sched = Schedule::custom(3.0, 2.0, 3, 0.5, 0.5, 0.0, 0.5);
  OnlineLearner learner(space, 2, sched, SurrogateKind::constrained_hinge, 1, 0);

  AugmentedInput input{FeatureVector::from_dense({1.0, 0.0}), ExpertSet({1}), 1};
  const BanditOracle oracle = [](int action) {
    Feedback fb;
    fb.action = action;
    fb.correct = false;  // wrong class: zero estimate, zero gradient
    return fb;
  };
  const DeferralOutcome outcome = learner.step(input, oracle);
  CHECK(outcome.action == 1);
  CHECK(outcome.incurred_loss == 1.0);
  for (double v : learner.weights().raw()) CHECK(v == 0.0);
  CHECK(learner.round() == 2);
}

TEST_CASE("single-step hand computation at t = 1") {
  // 2 classes, 1 expert, d = 2, general regime with B = N = 3, R = 2.
  const LabelSpace space(2, 1);
  const double bound = 3.0;
  const double radius = 2.0;
  OnlineLearner learner(space, 2, Schedule::general(bound, radius, 3),
                        SurrogateKind::constrained_hinge, 7, 0);

  AugmentedInput input{FeatureVector::from_dense({1.0, 0.0}), ExpertSet({1}), 1};
  RoundRecord rec;
  const BanditOracle oracle = [](int action) {
    Feedback fb;
    fb.action = action;
    fb.correct = action == 1;  // true label is class 1
    if (action == 3) fb.cost = 0.5;
    return fb;
  };
  learner.step(input, oracle, &rec);

  // reproduce the update by hand for whatever action was sampled
  const double eta = bound / (std::sqrt(3.0) * std::sqrt(radius * radius + 1.0));
  CHECK(rec.eta == doctest::Approx(eta));
  CHECK(rec.gamma == 0.5);

  double weight = 0.0;  // importance weight of the single active target
  if (rec.action == 1) weight = 1.0 / rec.action_prob;
  if (rec.action == 3) weight = (1.0 - 0.5) / rec.action_prob;
  std::vector<double> coeff(3, 0.0);
  if (weight != 0.0) {
    for (int row = 0; row < 3; ++row) {
      if (row + 1 == rec.action) continue;
      coeff[static_cast<std::size_t>(row)] = weight;  // all hinges open at W = 0
    }
  }
  const double mean = (coeff[0] + coeff[1] + coeff[2]) / 3.0;
  for (double& c : coeff) c -= mean;

  const WeightMatrix& w = learner.weights();
  for (int row = 0; row < 3; ++row) {
    CHECK(w.at(row, 0) == doctest::Approx(-eta * coeff[static_cast<std::size_t>(row)]));
    CHECK(w.at(row, 1) == doctest::Approx(0.0));
    CHECK(w.at(row, 2) == doctest::Approx(-eta * coeff[static_cast<std::size_t>(row)]));
  }
  CHECK(w.frob_norm() <= bound + 1e-12);
}

TEST_CASE("the update differentiates at the projected iterate") {
  // Raw and centered scores disagree on which hinges are open here: raw
  // biases (3.3, 0.3, -0.3) have every hinge active, while the centered
  // scores (2.2, -0.8, -1.4) close the expert row. A gradient taken at the
  // unprojected iterate would therefore move the expert row; the correct
  // one must not.
  const LabelSpace space(2, 1);
  const Schedule sched = Schedule::custom(9.0, 1.0, 3, 0.1, 0.0, 0.0, 0.5);  // eta=0.1, gamma=0
  WeightMatrix start(space, 1, 9.0);
  start.at(0, 1) = 3.3;
  start.at(1, 1) = 0.3;
  start.at(2, 1) = -0.3;
  OnlineLearner learner(start, sched, SurrogateKind::constrained_hinge, 3, 0);

  AugmentedInput input{FeatureVector::from_dense({1.0}), ExpertSet({1}), 1};
  RoundRecord rec;
  learner.step(input, [](int a) { return Feedback{a, a == 1, std::nullopt}; }, &rec);
  CHECK(rec.action == 1);  // gamma = 0: greedy class 1, correct
  CHECK(rec.action_prob == 1.0);

  // centered hinge coefficients: alpha = (0, 1, 0); projected (-1/3, 2/3, -1/3)
  const double eta = 0.1;
  const WeightMatrix& w = learner.weights();
  CHECK(w.at(0, 0) == doctest::Approx(eta / 3.0));
  CHECK(w.at(0, 1) == doctest::Approx(3.3 + eta / 3.0));
  CHECK(w.at(1, 0) == doctest::Approx(-eta * 2.0 / 3.0));
  CHECK(w.at(1, 1) == doctest::Approx(0.3 - eta * 2.0 / 3.0));
  CHECK(w.at(2, 0) == doctest::Approx(eta / 3.0));
  CHECK(w.at(2, 1) == doctest::Approx(-0.3 + eta / 3.0));
  // had the gradient been taken at the raw scores, alpha would have been
  // (0, 1, 1) and row 2's weight would move by -eta/3 instead
}

TEST_CASE("round counter is enforced") {
  const LabelSpace space(2, 0);
  OnlineLearner learner(space, 2, Schedule::general(2.0, 1.0, 2),
                        SurrogateKind::constrained_hinge, 1, 0);
  AugmentedInput input{FeatureVector::from_dense({1.0, 0.0}), ExpertSet(), 5};
  CHECK_THROWS_AS(learner.step(input, [](int a) { return Feedback{a, true, std::nullopt}; }),
                  ProtocolError);
}

TEST_CASE("oracles answering a different action abort the run") {
  const LabelSpace space(2, 1);
  OnlineLearner learner(space, 2, Schedule::general(3.0, 1.0, 3),
                        SurrogateKind::constrained_hinge, 1, 0);
  AugmentedInput input{FeatureVector::from_dense({1.0, 0.0}), ExpertSet({1}), 1};
  const BanditOracle lying = [](int action) {
    Feedback fb;
    fb.action = action == 1 ? 2 : 1;
    fb.correct = true;
    return fb;
  };
  CHECK_THROWS_AS(learner.step(input, lying), ProtocolError);
}

TEST_CASE("bandit rounds require the hinge surrogate") {
  const LabelSpace space(2, 0);
  OnlineLearner learner(space, 2, Schedule::general(2.0, 1.0, 2), SurrogateKind::logistic, 1,
                        0);
  AugmentedInput input{FeatureVector::from_dense({1.0, 0.0}), ExpertSet(), 1};
  CHECK_THROWS_AS(learner.step(input, [](int a) { return Feedback{a, true, std::nullopt}; }),
                  ConfigError);
  // the full-information path accepts logistic
  RoundCosts none;
  learner.step_full_information(input, 1, none);
  CHECK(learner.round() == 2);
}

namespace {

struct ScriptedRound {
  AugmentedInput input;
  int label;
  RoundCosts costs;
  std::vector<int> expert_prediction;
};

std::vector<ScriptedRound> scripted_rounds(int count, std::uint64_t seed) {
  RngStream rng(seed, 55);
  std::vector<ScriptedRound> rounds;
  for (int t = 1; t <= count; ++t) {
    ScriptedRound r;
    std::vector<double> x(3);
    for (double& v : x) v = rng.normal();
    double norm = 0.0;
    for (double v : x) norm += v * v;
    for (double& v : x) v /= std::sqrt(norm);
    const bool with_expert = rng.bernoulli(0.8);
    r.input = AugmentedInput{FeatureVector::from_dense(x),
                             ExpertSet(with_expert ? std::vector<int>{1} : std::vector<int>{}),
                             t};
    r.label = 1 + static_cast<int>(rng.uniform_below(2));
    r.expert_prediction = {rng.bernoulli(0.7) ? r.label : 3 - r.label};
    if (with_expert) {
      r.costs.value.push_back(r.expert_prediction[0] == r.label ? 0.0909 : 1.0);
    }
    rounds.push_back(std::move(r));
  }
  return rounds;
}

BanditOracle oracle_for(const ScriptedRound& r) {
  return [&r](int action) {
    Feedback fb;
    fb.action = action;
    if (action <= 2) {
      fb.correct = action == r.label;
    } else {
      fb.correct = r.expert_prediction[0] == r.label;
      fb.cost = r.costs.value.at(0);
    }
    return fb;
  };
}

}  // namespace

TEST_CASE("iterates stay inside the Frobenius ball across a run") {
  const LabelSpace space(2, 1);
  // a large step size forces the ball projection to engage
  const Schedule sched = Schedule::custom(1.0, 1.0, 3, 2.0, 0.1, 5.0, 0.5);
  OnlineLearner learner(space, 3, sched, SurrogateKind::constrained_hinge, 21, 0);
  const auto rounds = scripted_rounds(300, 77);
  for (const auto& r : rounds) {
    RoundRecord rec;
    AugmentedInput input = r.input;
    input.round = learner.round();
    learner.step(input, oracle_for(r), &rec);
    CHECK(rec.weight_frob_norm <= 1.0 + 1e-9);
  }
  CHECK(learner.weights().frob_norm() <= 1.0 + 1e-9);
}

TEST_CASE("checkpoint and resume reproduce the uninterrupted run") {
  const LabelSpace space(2, 1);
  const auto rounds = scripted_rounds(40, 2024);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ol2d_ckpt_test.bin").string();

  for (ScheduleRegime regime : {ScheduleRegime::general, ScheduleRegime::adagrad}) {
    Schedule sched = regime == ScheduleRegime::general
                         ? Schedule::general(3.0, 1.0, 3)
                         : Schedule::adagrad(3.0, 1.0, 3, 0.1, 10.0);

    OnlineLearner straight(space, 3, sched, SurrogateKind::constrained_hinge, 9, 1);
    for (const auto& r : rounds) straight.step(r.input, oracle_for(r));

    OnlineLearner first_half(space, 3, sched, SurrogateKind::constrained_hinge, 9, 1);
    for (int t = 0; t < 20; ++t) first_half.step(rounds[t].input, oracle_for(rounds[t]));
    first_half.save_checkpoint(path);

    OnlineLearner resumed = OnlineLearner::load_checkpoint(path);
    CHECK(resumed.round() == 21);
    for (int t = 20; t < 40; ++t) resumed.step(rounds[t].input, oracle_for(rounds[t]));

    CHECK(resumed.weights().raw() == straight.weights().raw());  // bitwise
    CHECK(resumed.round() == straight.round());
  }
  std::filesystem::remove(path);
}

TEST_CASE("hindsight comparator") {
  const LabelSpace space(2, 1);

  SUBCASE("single separable round beats the zero hypothesis") {
    std::vector<LoggedRound> log;
    LoggedRound r;
    r.input = AugmentedInput{FeatureVector::from_dense({1.0, 0.0, 0.0}), ExpertSet({1}), 1};
    r.label = 1;
    r.costs.value = {0.9};
    log.push_back(r);
    const ComparatorResult result = hindsight_comparator(
        log, space, 3, 3.0, SurrogateKind::constrained_hinge, 200);
    WeightMatrix zero(space, 3, 3.0);
    const double zero_objective = surrogate_deferral_loss(
        zero, log[0].input, log[0].label, log[0].costs, SurrogateKind::constrained_hinge);
    CHECK(result.surrogate_objective < zero_objective);
  }

  SUBCASE("recovers a planted hypothesis's predictions") {
    WeightMatrix planted(space, 4, 3.0);
    planted.at(0, 0) = 2.0;   // class 1 keyed on coordinate 0
    planted.at(1, 1) = 2.0;   // class 2 keyed on coordinate 1
    planted.at(2, 3) = -1.0;  // expert row stays down

    RngStream rng(11, 0);
    std::vector<LoggedRound> log;
    for (int t = 1; t <= 300; ++t) {
      const int cluster = 1 + static_cast<int>(rng.uniform_below(2));
      std::vector<double> x(4, 0.0);
      x[static_cast<std::size_t>(cluster - 1)] = 1.0 + 0.2 * rng.uniform();
      x[2] = 0.05 * rng.normal();
      LoggedRound r;
      r.input = AugmentedInput{FeatureVector::from_dense(x), ExpertSet({1}), t};
      r.label = cluster;  // consistent with the planted argmax
      r.costs.value = {0.6};
      log.push_back(std::move(r));
    }
    const ComparatorResult result = hindsight_comparator(
        log, space, 4, 3.0, SurrogateKind::constrained_hinge, 300);
    long agree = 0;
    for (const auto& r : log) {
      if (predict(result.weights, r.input) == predict(planted, r.input)) ++agree;
    }
    CHECK(static_cast<double>(agree) / log.size() >= 0.99);
    CHECK(result.true_loss / log.size() < 0.05);
  }

  SUBCASE("expert-free logs reduce to multiclass hinge fitting") {
    RngStream rng(13, 0);
    std::vector<LoggedRound> log;
    for (int t = 1; t <= 200; ++t) {
      const int cluster = 1 + static_cast<int>(rng.uniform_below(2));
      std::vector<double> x(3, 0.0);
      x[static_cast<std::size_t>(cluster - 1)] = 1.0;
      x[2] = 0.1 * rng.normal();
      LoggedRound r;
      r.input = AugmentedInput{FeatureVector::from_dense(x), ExpertSet(), t};
      r.label = cluster;
      log.push_back(std::move(r));
    }
    const ComparatorResult result =
        hindsight_comparator(log, LabelSpace(2, 0), 3, 2.0, SurrogateKind::constrained_hinge,
                             300);
    CHECK(result.true_loss / log.size() < 0.02);
  }
}
