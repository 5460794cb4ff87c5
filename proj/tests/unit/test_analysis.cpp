#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ol2d/analysis.hpp"

using namespace ol2d;

namespace {

ScoreProfile example_profile() {
  // n=2 with p=(0.8, 0.2), one expert with expected cost 0.1
  return score_profile(LabelSpace(2, 1), std::vector<double>{0.8, 0.2},
                       std::vector<double>{0.1}, ExpertSet({1}));
}

}  // namespace

TEST_CASE("score profile construction") {
  const ScoreProfile profile = example_profile();
  CHECK(profile.s == std::vector<double>{0.8, 0.2, 0.9});
  CHECK(profile.total == doctest::Approx(1.9));
  CHECK(profile.y_max == 3);
  CHECK(profile.normalized[2] == doctest::Approx(0.9 / 1.9));

  SUBCASE("perfect free expert") {
    const ScoreProfile p = score_profile(LabelSpace(2, 1), std::vector<double>{1.0, 0.0},
                                         std::vector<double>{0.0}, ExpertSet({1}));
    CHECK(p.s[0] == 1.0);
    CHECK(p.s[2] == 1.0);
    CHECK(p.total == doctest::Approx(2.0));
    CHECK(p.y_max == 1);  // ties break to the lowest label
  }
  SUBCASE("cost-one expert scores zero") {
    const ScoreProfile p = score_profile(LabelSpace(2, 1), std::vector<double>{0.5, 0.5},
                                         std::vector<double>{1.0}, ExpertSet({1}));
    CHECK(p.s[2] == 0.0);
  }
  SUBCASE("bad class distributions are rejected") {
    CHECK_THROWS_AS(score_profile(LabelSpace(2, 0), std::vector<double>{0.8, 0.1},
                                  std::vector<double>{}, ExpertSet()),
                    DomainError);
  }
}

TEST_CASE("conditional deferral risk closed forms") {
  const ScoreProfile profile = example_profile();
  CHECK(conditional_deferral_risk(3, profile) == doctest::Approx(0.1));
  CHECK(min_deferral_risk(profile) == doctest::Approx(0.1));

  const ScoreProfile perfect = score_profile(LabelSpace(2, 1), std::vector<double>{1.0, 0.0},
                                             std::vector<double>{0.0}, ExpertSet({1}));
  CHECK(conditional_deferral_risk(1, perfect) == 0.0);

  // randomized choice is the mixture of deterministic risks
  const std::vector<double> q{0.25, 0.25, 0.5};
  CHECK(conditional_deferral_risk(q, profile) ==
        doctest::Approx(0.25 * 0.2 + 0.25 * 0.8 + 0.5 * 0.1));
}

TEST_CASE("conditional surrogate risk at zero scores") {
  const ScoreProfile profile = example_profile();
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(conditional_surrogate_risk(zero, profile, SurrogateKind::constrained_hinge) ==
        doctest::Approx(2.0 * 1.9));
  CHECK(conditional_surrogate_risk(zero, profile, SurrogateKind::logistic) ==
        doctest::Approx(1.9 * std::log(3.0)));
}

TEST_CASE("hinge minimizability closed form") {
  const ScoreProfile profile = example_profile();
  const MinSurrogateRisk minimum = min_surrogate_risk_hinge(profile);
  CHECK(minimum.value == doctest::Approx(3.0 * (1.9 - 0.9)));
  CHECK(minimum.achieving_scores == std::vector<double>{-1.0, -1.0, 2.0});
  CHECK(conditional_surrogate_risk(minimum.achieving_scores, profile,
                                   SurrogateKind::constrained_hinge) ==
        doctest::Approx(minimum.value));

  // deterministic profile realizes a zero minimum
  const ScoreProfile pure = score_profile(LabelSpace(2, 0), std::vector<double>{1.0, 0.0},
                                          std::vector<double>{}, ExpertSet());
  CHECK(min_surrogate_risk_hinge(pure).value == doctest::Approx(2.0 * (1.0 - 1.0)));
}

TEST_CASE("calibration gaps") {
  const ScoreProfile profile = example_profile();
  // deterministic action = class 1 via a point-mass distribution
  const std::vector<double> q{1.0, 0.0, 0.0};
  const std::vector<double> scores{0.5, -0.3, -0.2};  // argmax = class 1, zero-sum
  const CalibrationGaps gaps =
      calibration_gaps(q, scores, profile, SurrogateKind::constrained_hinge);
  CHECK(gaps.target_gap == doctest::Approx(0.9 - 0.8));
  CHECK(gaps.surrogate_gap >= gaps.target_gap);

  // the optimal action has zero target gap
  const std::vector<double> q_opt{0.0, 0.0, 1.0};
  CHECK(calibration_gaps(q_opt, scores, profile, SurrogateKind::constrained_hinge)
            .target_gap == doctest::Approx(0.0));
}

namespace {

std::vector<RoundRecord> fake_records(int rounds) {
  std::vector<RoundRecord> records;
  for (int t = 1; t <= rounds; ++t) {
    RoundRecord r;
    r.t = t;
    r.support = {1, 2, 3};  // n=2, expert 1 available every round
    r.q = {0.25, 0.25, 0.5};
    r.gamma = 0.1;
    r.eta = 0.01;
    r.greedy_label = 1;
    r.action = t % 3 == 0 ? 3 : 1;
    r.action_prob = 0.5;
    r.deferred = r.action == 3;
    r.expert = r.deferred ? 1 : 0;
    r.correct = t % 2 == 0;
    r.cost = r.deferred ? 0.2 : std::numeric_limits<double>::quiet_NaN();
    r.estimated_loss = 1.0;
    r.grad_norm_raw = 2.0;
    r.grad_norm_projected = 1.5;
    r.weight_frob_norm = 3.0;
    r.incurred_loss = r.deferred ? 0.2 : (r.correct ? 0.0 : 1.0);
    r.true_label = 1 + t % 2;
    r.expected_loss = 0.4;
    r.surrogate_loss = 2.5;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

TEST_CASE("regret report windows") {
  const auto records = fake_records(100);

  SUBCASE("ratios partition the actions") {
    const RegretReport report = regret_report(records, 2, 1, 10);
    CHECK(report.windows.size() == 10);
    for (const WindowRow& w : report.windows) {
      double total = w.self_ratio;
      for (double d : w.deferral_ratio) total += d;
      CHECK(total == doctest::Approx(1.0));
      CHECK(w.availability[0] == doctest::Approx(1.0));
    }
  }
  SUBCASE("the learner against itself has zero regret") {
    std::vector<double> self_loss;
    for (const auto& r : records) self_loss.push_back(r.expected_loss);
    const RegretReport report = regret_report(records, 2, 1, 10, &self_loss);
    CHECK(report.final_regret == doctest::Approx(0.0));
    for (const WindowRow& w : report.windows) CHECK(w.cum_regret == doctest::Approx(0.0));
  }
  SUBCASE("window bounds cover all rounds") {
    const RegretReport report = regret_report(records, 2, 1, 33);
    CHECK(report.windows.size() == 4);
    CHECK(report.windows.front().t_begin == 1);
    CHECK(report.windows.back().t_end == 100);
  }
}

TEST_CASE("round logs round-trip through CSV") {
  const auto records = fake_records(25);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "ol2d_csv_test").string();
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/rounds.csv";
  write_rounds_csv(records, 2, 1, path);

  int classes = 0, experts = 0;
  const auto back = read_rounds_csv(path, &classes, &experts);
  CHECK(classes == 2);
  CHECK(experts == 1);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].t == records[i].t);
    CHECK(back[i].support == records[i].support);
    CHECK(back[i].q == records[i].q);
    CHECK(back[i].action == records[i].action);
    CHECK(back[i].incurred_loss == records[i].incurred_loss);
    CHECK(back[i].expected_loss == records[i].expected_loss);
    CHECK(back[i].deferred == records[i].deferred);
  }

  // windows computed from the round-tripped log match the original
  const RegretReport a = regret_report(records, 2, 1, 5);
  const RegretReport b = regret_report(back, 2, 1, 5);
  REQUIRE(a.windows.size() == b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    CHECK(a.windows[i].true_loss == b.windows[i].true_loss);
    CHECK(a.windows[i].accuracy == b.windows[i].accuracy);
  }
  std::filesystem::remove_all(dir);
}
