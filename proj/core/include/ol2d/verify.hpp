#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ol2d/types.hpp"
#include "ol2d/weights.hpp"

namespace ol2d {

/// One verified property.
struct CheckResult {
  std::string suite;
  std::string property;
  bool passed = false;
  long checks = 0;          ///< instances exercised
  std::string details;      ///< failure description (empty on pass)
  std::uint64_t seed = 0;   ///< reproducing seed
  double elapsed_seconds = 0.0;
};

struct VerifyReport {
  std::vector<CheckResult> results;

  bool all_passed() const;
  /// Machine-readable JSON (per-suite counts plus every check).
  std::string to_json() const;
  /// One line per check, human-readable.
  std::string to_text() const;
};

/// Instance counts follow the property-suite sizes the project commits to;
/// scale > 1 is for soak testing, scale < 1 for quick unit-test runs.
struct VerifyOptions {
  std::uint64_t seed = 20260809;
  double scale = 1.0;
  bool run_level = true;  ///< include the multi-seed statistical suites
};

using ZeroSumProjection =
    std::function<WeightMatrix(const WeightMatrix&, const ExpertSet&)>;

/// Every suite below appends its checks to the report.
void verify_core_suite(VerifyReport& report, const VerifyOptions& options);
void verify_projection_suite(VerifyReport& report, const VerifyOptions& options,
                             const ZeroSumProjection& projection = {});
void verify_losses_suite(VerifyReport& report, const VerifyOptions& options);
void verify_estimator_suite(VerifyReport& report, const VerifyOptions& options);
void verify_gradient_suite(VerifyReport& report, const VerifyOptions& options);
void verify_learner_suite(VerifyReport& report, const VerifyOptions& options);
void verify_environment_suite(VerifyReport& report, const VerifyOptions& options);
void verify_analysis_suite(VerifyReport& report, const VerifyOptions& options);
void verify_config_suite(VerifyReport& report, const VerifyOptions& options);
void verify_run_level_suite(VerifyReport& report, const VerifyOptions& options);

/// The full release gate: all suites above.
VerifyReport run_verification(const VerifyOptions& options = {});

}  // namespace ol2d
