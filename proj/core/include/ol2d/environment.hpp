#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ol2d/learner.hpp"
#include "ol2d/rng.hpp"
#include "ol2d/types.hpp"
#include "ol2d/weights.hpp"

namespace ol2d {

/// Which axes of the expert pool vary over the horizon.
enum class ExperimentSetting { fixed, drifting_availability, drifting_both };

// ---------------------------------------------------------------------------
// Simulated experts
// ---------------------------------------------------------------------------

/// A simulated expert is a per-class accuracy profile plus an availability
/// process. With probability accuracy[y] it predicts the (post-noise) true
/// label, otherwise a uniformly random other class; profile value 1/n is
/// exactly the uniform-over-all-classes behavior outside a knowledge
/// region. Profiles either stay fixed or follow a Brownian bridge pinned at
/// the configured start and end profiles. Availability is Bernoulli with a
/// clamped random-walk probability.
struct ExpertSpec {
  std::vector<double> accuracy_start;  ///< size n, values in [0,1]
  std::vector<double> accuracy_end;    ///< used by drifting_both
  double bridge_sigma = 0.02;
  double availability_init = 0.7;
  double availability_sigma = 2e-3;
};

/// Profile with accuracy 1 on the region classes and 1/n elsewhere; an
/// empty region gives the uniformly random expert.
std::vector<double> region_profile(int classes, const std::vector<int>& region);

// ---------------------------------------------------------------------------
// Round production
// ---------------------------------------------------------------------------

/// One produced round: the learner-visible input plus the hidden data the
/// oracle and the analysis layer need. Expert predictions are drawn once
/// here, so replaying the oracle for analysis is consistent.
struct EnvRound {
  AugmentedInput input;
  int label = 0;                       ///< hidden post-noise label
  int region = 0;                      ///< knowledge region of the input (hidden)
  std::vector<int> expert_prediction;  ///< per expert 1..n_e
  RoundCosts costs;                    ///< realized, aligned with input.experts

  /// Largest per-label expected score of the round,
  ///   max( max_y p(y | x), max_{n+j available} 1 - E[c_j] ),
  /// filled by streams that know their own label distribution (synthetic
  /// ones). The near-realizable schedule presumes this stays above
  /// 1 - 1/sqrt(T); the runner checks that where the value is present.
  std::optional<double> max_expected_score;
};

class RoundStream {
 public:
  virtual ~RoundStream() = default;

  /// Produce round t (must be called with consecutive t starting at 1);
  /// nullopt when the underlying data is exhausted.
  virtual std::optional<EnvRound> next() = 0;

  virtual const LabelSpace& space() const = 0;
  virtual int feature_dim() const = 0;

  /// Current per-class accuracy profile of expert j (1-based); analysis
  /// and verification use this to trace expertise drift.
  virtual std::vector<double> expert_accuracy(int j) const = 0;

  /// Bandit-discipline counter: total feedback queries answered.
  long oracle_answers() const { return oracle_answers_; }

  /// Single-use feedback callback for one round. A second query within the
  /// round, or a query for an unavailable action, is a protocol error.
  BanditOracle make_oracle(const EnvRound& round);

 protected:
  long oracle_answers_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic stream
// ---------------------------------------------------------------------------

/// Cluster-generator in the SynSep style: each class owns a block of
/// coordinates, inputs are drawn inside their class block (hence linearly
/// separable before label noise), and labels flip to a uniformly random
/// other class with per-class probabilities that follow a clamped random
/// walk.
struct SyntheticConfig {
  int classes = 6;
  int experts = 3;
  int dim = 120;
  double radius = 1.0;  ///< inputs are normalized to this norm
  std::vector<double> noise_init = {0.3, 0.3, 0.3, 0.3, 0.0, 0.0};
  double noise_sigma = 2e-3;
  ExperimentSetting setting = ExperimentSetting::fixed;
  std::vector<ExpertSpec> expert_specs;  ///< size == experts
  long horizon = 0;                      ///< bridge pin for drifting_both
};

std::unique_ptr<RoundStream> make_synthetic_stream(const SyntheticConfig& config,
                                                   const std::vector<ExpertCost>& costs,
                                                   std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Sparse datasets
// ---------------------------------------------------------------------------

/// In-memory sparse dataset: one (features, label) row per example.
struct SparseDataset {
  std::vector<FeatureVector> rows;
  std::vector<int> labels;
  int dim = 0;
  int classes = 0;

  std::size_t size() const { return rows.size(); }
};

/// Streaming parser for the sparse text format (one example per line,
/// label first, then strictly increasing `index:value` pairs; optional
/// `# d=<dim> n=<classes>` header). Malformed lines report their line
/// number. When rescale_radius > 0, rows with a larger norm are rescaled
/// to it (or rejected under NormPolicy::reject).
SparseDataset load_sparse_dataset(const std::string& path, double rescale_radius = 0.0,
                                  NormPolicy policy = NormPolicy::rescale,
                                  std::size_t max_rows = 0);

struct DatasetEnvConfig {
  ExperimentSetting setting = ExperimentSetting::fixed;
  std::vector<ExpertSpec> expert_specs;
  long horizon = 0;  ///< bridge pin; defaults to dataset size when 0
};

std::unique_ptr<RoundStream> make_dataset_stream(std::shared_ptr<const SparseDataset> data,
                                                 const DatasetEnvConfig& config,
                                                 const std::vector<ExpertCost>& costs,
                                                 std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Confidence-threshold baseline
// ---------------------------------------------------------------------------

/// Deferral policy of the confidence baseline: predict the argmax class
/// when the softmax confidence over class scores reaches the threshold (or
/// no expert is available), otherwise defer to a uniformly random
/// available expert. The baseline predictor has no deferral head, so the
/// confidence uses class scores only.
int baseline_confidence_threshold(const WeightMatrix& w, const AugmentedInput& input,
                                  double threshold, RngStream& rng);

}  // namespace ol2d
