#include <doctest.h>

#include "ol2d/verify.hpp"
#include "ol2d/weights.hpp"

using namespace ol2d;

TEST_CASE("a fresh checkout passes the reduced verification gate") {
  VerifyOptions options;
  options.scale = 0.02;
  options.run_level = false;
  const VerifyReport report = run_verification(options);
  for (const CheckResult& r : report.results) {
    INFO(r.suite, "/", r.property, ": ", r.details);
    CHECK(r.passed);
  }
  CHECK(report.all_passed());
}

TEST_CASE("an injected sign flip in the projection fails with the invariant named") {
  VerifyOptions options;
  options.scale = 0.02;
  VerifyReport report;
  const ZeroSumProjection flipped = [](const WeightMatrix& w, const ExpertSet& experts) {
    WeightMatrix p = project_zero_sum(w, experts);
    // flip the correction: add the mean back twice
    for (std::size_t k = 0; k < p.raw().size(); ++k) {
      p.raw()[k] = 2.0 * w.raw()[k] - p.raw()[k];
    }
    return p;
  };
  verify_projection_suite(report, options, flipped);
  REQUIRE_FALSE(report.results.empty());
  const CheckResult& r = report.results.front();
  CHECK(r.suite == "projection");
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.details.empty());
  CHECK(r.seed != 0);  // reproducing seed is reported
}

TEST_CASE("the report carries per-suite counts in JSON") {
  VerifyOptions options;
  options.scale = 0.01;
  VerifyReport report;
  verify_core_suite(report, options);
  verify_config_suite(report, options);
  const std::string json = report.to_json();
  CHECK(json.find("\"suites\"") != std::string::npos);
  CHECK(json.find("\"core\"") != std::string::npos);
  CHECK(json.find("\"config\"") != std::string::npos);
  CHECK(json.find("\"checks\"") != std::string::npos);
  CHECK(json.find("\"all_passed\": true") != std::string::npos);
}
