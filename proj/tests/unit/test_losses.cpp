#include <doctest.h>

#include <cmath>

#include "ol2d/losses.hpp"

using namespace ol2d;

namespace {

// n=2, one expert available, d=2
struct Fixture {
  WeightMatrix w{LabelSpace(2, 1), 2, 5.0};
  AugmentedInput input{FeatureVector::from_dense({1.0, 0.0}), ExpertSet({1}), 0};
};

}  // namespace

TEST_CASE("true deferral loss") {
  Fixture f;
  RoundCosts costs{{0.3}};

  SUBCASE("correct classification costs nothing") {
    f.w.at(0, 2) = 1.0;  // class 1 wins
    CHECK(true_deferral_loss(f.w, f.input, 1, costs) == 0.0);
  }
  SUBCASE("misclassification costs one") {
    f.w.at(0, 2) = 1.0;
    CHECK(true_deferral_loss(f.w, f.input, 2, costs) == 1.0);
  }
  SUBCASE("deferral pays the realized expert cost") {
    f.w.at(2, 2) = 1.0;  // expert label 3 wins
    CHECK(true_deferral_loss(f.w, f.input, 1, costs) == doctest::Approx(0.3));
  }
  SUBCASE("y must be a class label") {
    CHECK_THROWS_AS(true_deferral_loss(f.w, f.input, 3, costs), DomainError);
  }
}

TEST_CASE("expected deferral loss under a distribution") {
  Fixture f;
  RoundCosts costs{{0.5}};

  SUBCASE("uniform over three labels with y=1 and c=0.5") {
    const std::vector<double> q{1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(expected_deferral_loss(q, f.input, 1, costs) == doctest::Approx(0.5));
  }
  SUBCASE("point mass on the true label") {
    const std::vector<double> q{1.0, 0.0, 0.0};
    CHECK(expected_deferral_loss(q, f.input, 1, costs) == 0.0);
  }
  SUBCASE("point mass on a deferral") {
    const std::vector<double> q{0.0, 0.0, 1.0};
    CHECK(expected_deferral_loss(q, f.input, 1, costs) == doctest::Approx(0.5));
  }
  SUBCASE("non-distributions are a contract violation") {
    const std::vector<double> q{0.5, 0.1, 0.1};
    CHECK_THROWS_AS(expected_deferral_loss(q, f.input, 1, costs), DomainError);
  }
}

TEST_CASE("varying multiclass surrogate") {
  Fixture f;

  SUBCASE("labels outside the round set carry exactly zero") {
    AugmentedInput alone{f.input.x, ExpertSet(), 0};
    CHECK(varying_surrogate(f.w, alone, 3, SurrogateKind::constrained_hinge) == 0.0);
    CHECK(varying_surrogate(f.w, alone, 3, SurrogateKind::logistic) == 0.0);
  }
  SUBCASE("hinge at zero weights sums m-1 unit hinges") {
    CHECK(varying_surrogate(f.w, f.input, 1, SurrogateKind::constrained_hinge) ==
          doctest::Approx(2.0));
  }
  SUBCASE("logistic at zero weights is log m") {
    CHECK(varying_surrogate(f.w, f.input, 2, SurrogateKind::logistic) ==
          doctest::Approx(std::log(3.0)));
  }
}

TEST_CASE("surrogate deferral composition") {
  Fixture f;

  SUBCASE("worked hinge example: 2 + 0.9 * 2 = 3.8") {
    RoundCosts costs{{0.1}};
    CHECK(surrogate_deferral_loss(f.w, f.input, 1, costs,
                                  SurrogateKind::constrained_hinge) == doctest::Approx(3.8));
  }
  SUBCASE("no experts reduces to the base surrogate") {
    AugmentedInput alone{f.input.x, ExpertSet(), 0};
    RoundCosts none;
    CHECK(surrogate_deferral_loss(f.w, alone, 1, none, SurrogateKind::constrained_hinge) ==
          varying_surrogate(f.w, alone, 1, SurrogateKind::constrained_hinge));
  }
  SUBCASE("cost-one experts contribute nothing") {
    RoundCosts costs{{1.0}};
    CHECK(surrogate_deferral_loss(f.w, f.input, 1, costs,
                                  SurrogateKind::constrained_hinge) ==
          varying_surrogate(f.w, f.input, 1, SurrogateKind::constrained_hinge));
  }
  SUBCASE("costs outside [0,1] are rejected") {
    RoundCosts costs{{1.5}};
    CHECK_THROWS_AS(
        surrogate_deferral_loss(f.w, f.input, 1, costs, SurrogateKind::constrained_hinge),
        DomainError);
  }
}

TEST_CASE("full-information subgradients materialize as rank-one matrices") {
  Fixture f;
  RoundCosts costs{{0.1}};

  // at zero weights every hinge is active; row i collects the weights of
  // the other targets: total weight 1.9, so rows get 1.9 - own weight
  const RankOneGradient g =
      deferral_subgradient(f.w, f.input, 1, costs, SurrogateKind::constrained_hinge);
  CHECK(g.row_coeff[0] == doctest::Approx(0.9));   // class 1 (target weight 1)
  CHECK(g.row_coeff[1] == doctest::Approx(1.9));   // class 2 (no target term)
  CHECK(g.row_coeff[2] == doctest::Approx(1.0));   // expert (target weight 0.9)

  const WeightMatrix dense = g.to_dense(f.w.space(), f.input.x, 1.0);
  CHECK(dense.at(0, 0) == doctest::Approx(0.9));
  CHECK(dense.at(0, 2) == doctest::Approx(0.9));  // bias column
  CHECK(dense.at(1, 1) == 0.0);                   // x has no second coordinate
  CHECK(g.frob_norm(f.input.x) == doctest::Approx(dense.frob_norm()));

  // logistic gradient sums to zero over the round label set
  const RankOneGradient lg =
      deferral_subgradient(f.w, f.input, 1, costs, SurrogateKind::logistic);
  CHECK(lg.row_coeff[0] + lg.row_coeff[1] + lg.row_coeff[2] == doctest::Approx(0.0));
}
