#include <doctest.h>

#include "ol2d/types.hpp"

using namespace ol2d;

TEST_CASE("label space indexing") {
  LabelSpace space(6, 3);
  CHECK(space.total() == 9);
  CHECK(space.is_class(1));
  CHECK(space.is_class(6));
  CHECK_FALSE(space.is_class(7));
  CHECK(space.is_expert_label(7));
  CHECK(space.is_expert_label(9));
  CHECK_FALSE(space.is_expert_label(10));
  CHECK(space.expert_of(7) == 1);
  CHECK(space.label_of_expert(3) == 9);
  CHECK_THROWS_AS(LabelSpace(1, 0), ConfigError);
}

TEST_CASE("make_label_set materializes the round label set") {
  CHECK(make_label_set(LabelSpace(2, 1), ExpertSet({1})) == std::vector<int>{1, 2, 3});
  CHECK(make_label_set(LabelSpace(4, 0), ExpertSet()) == std::vector<int>{1, 2, 3, 4});
  CHECK(make_label_set(LabelSpace(6, 3), ExpertSet({1, 3})) ==
        std::vector<int>{1, 2, 3, 4, 5, 6, 7, 9});
  CHECK_THROWS_AS(make_label_set(LabelSpace(2, 1), ExpertSet({2})), ConfigError);
  CHECK_THROWS_AS(ExpertSet({1, 1}), ConfigError);
  CHECK_THROWS_AS(ExpertSet({2, 1}), ConfigError);
}

TEST_CASE("feature vectors validate and rescale") {
  CHECK_THROWS_AS(FeatureVector({{1, 1.0}, {0, 1.0}}, 4), DataError);
  CHECK_THROWS_AS(FeatureVector({{4, 1.0}}, 4), DataError);

  FeatureVector x = FeatureVector::from_dense({3.0, 4.0});
  CHECK(x.norm() == doctest::Approx(5.0));
  CHECK(x.augmented_norm() == doctest::Approx(std::sqrt(26.0)));

  enforce_norm_bound(x, 2.0, NormPolicy::rescale);
  CHECK(x.norm() == doctest::Approx(2.0));

  FeatureVector y = FeatureVector::from_dense({3.0, 4.0});
  CHECK_THROWS_AS(enforce_norm_bound(y, 2.0, NormPolicy::reject), DataError);

  FeatureVector small = FeatureVector::from_dense({0.1});
  enforce_norm_bound(small, 2.0, NormPolicy::rescale);  // below 1 is accepted unchanged
  CHECK(small.norm() == doctest::Approx(0.1));
}

TEST_CASE("cost normalization") {
  SUBCASE("experiment cost family") {
    std::vector<ExpertCost> raw{{1.0, 0.1, false, 1.0}};
    const auto norm = normalize_costs(raw);
    CHECK(norm[0].applied_q == doctest::Approx(1.1));
    CHECK(norm[0].lower() == doctest::Approx(0.1 / 1.1));
    CHECK(norm[0].upper() == doctest::Approx(1.0));
    CHECK(max_expert_cost(norm) == doctest::Approx(1.0));
  }
  SUBCASE("zero query costs leave values unchanged") {
    std::vector<ExpertCost> raw{{1.0, 0.0, false, 1.0}, {1.0, 0.0, false, 1.0}};
    const auto norm = normalize_costs(raw);
    CHECK(norm[0].upper() == doctest::Approx(1.0));
    CHECK(norm[0].lower() == doctest::Approx(0.0));
    CHECK(norm[0].applied_q == doctest::Approx(1.0));
  }
  SUBCASE("negative parameters are rejected") {
    std::vector<ExpertCost> raw{{-0.5, 0.0, false, 1.0}};
    CHECK_THROWS_AS(normalize_costs(raw), ConfigError);
  }
  SUBCASE("second application is the identity") {
    std::vector<ExpertCost> raw{{1.0, 0.25, false, 1.0}, {0.5, 0.4, false, 1.0}};
    const auto once = normalize_costs(raw);
    const auto twice = normalize_costs(once);
    for (std::size_t j = 0; j < once.size(); ++j) {
      CHECK(twice[j].alpha == once[j].alpha);
      CHECK(twice[j].beta == once[j].beta);
    }
  }
}

TEST_CASE("round costs lookup") {
  ExpertSet experts({1, 3});
  RoundCosts costs{{0.2, 0.7}};
  CHECK(costs.for_expert(1, experts) == doctest::Approx(0.2));
  CHECK(costs.for_expert(3, experts) == doctest::Approx(0.7));
  CHECK_THROWS_AS(costs.for_expert(2, experts), DomainError);
}
