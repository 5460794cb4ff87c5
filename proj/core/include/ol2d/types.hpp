#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ol2d {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Invalid configuration or constructor arguments.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract data (dataset rows, file formats).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Violation of the interaction protocol (double feedback query,
/// feedback inconsistent with the sampled action, ...).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller asked for a quantity outside its mathematical domain
/// (e.g. the score of a label not in the round's label set).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Label space
// ---------------------------------------------------------------------------

/// Augmented labels are 1-based: classes are 1..n, deferral to expert j is
/// n+j. Internal arrays are 0-based; the offset is applied exactly once at
/// this API boundary (label l <-> row l-1).
struct LabelSpace {
  int n = 0;    ///< number of classes (>= 2)
  int n_e = 0;  ///< number of distinct experts over the horizon (>= 0)

  LabelSpace() = default;
  LabelSpace(int classes, int experts) : n(classes), n_e(experts) {
    if (n < 2) throw ConfigError("LabelSpace: need at least 2 classes");
    if (n_e < 0) throw ConfigError("LabelSpace: negative expert count");
  }

  /// Size of the augmented label set, N = n + n_e.
  int total() const { return n + n_e; }

  bool is_class(int label) const { return label >= 1 && label <= n; }
  bool is_expert_label(int label) const { return label > n && label <= total(); }
  int expert_of(int label) const { return label - n; }
  int label_of_expert(int j) const { return n + j; }

  bool operator==(const LabelSpace&) const = default;
};

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Sparse feature vector: (index, value) pairs sorted by strictly
/// increasing index, with an explicit dimension. The Reuters-style data has
/// d = 47,236 with a handful of nonzeros per row, so a dense layout would
/// waste both memory and the learner's per-round update time.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::uint32_t dim = 0;

  FeatureVector() = default;
  FeatureVector(std::vector<std::pair<std::uint32_t, double>> nz, std::uint32_t d)
      : entries(std::move(nz)), dim(d) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first >= dim) throw DataError("FeatureVector: index out of range");
      if (i > 0 && entries[i].first <= entries[i - 1].first) {
        throw DataError("FeatureVector: indices must be strictly increasing");
      }
    }
  }

  static FeatureVector from_dense(const std::vector<double>& x) {
    std::vector<std::pair<std::uint32_t, double>> nz;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] != 0.0) nz.emplace_back(static_cast<std::uint32_t>(i), x[i]);
    }
    return FeatureVector(std::move(nz), static_cast<std::uint32_t>(x.size()));
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& [i, v] : entries) s += v * v;
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  /// Norm of the augmented vector (x, 1) used by gradients of hypotheses
  /// with a bias coordinate.
  double augmented_norm() const { return std::sqrt(squared_norm() + 1.0); }

  void scale(double factor) {
    for (auto& [i, v] : entries) v *= factor;
  }

  bool operator==(const FeatureVector&) const = default;
};

/// Policy for inputs whose norm exceeds the radius R.
enum class NormPolicy { rescale, reject };

/// Enforce ||x||_2 <= radius on ingestion. Inputs above the radius are
/// rescaled to it (default) or rejected; inputs below norm 1 are accepted
/// unchanged since the lower bound is an analysis device only.
inline void enforce_norm_bound(FeatureVector& x, double radius, NormPolicy policy) {
  const double nrm = x.norm();
  if (nrm > radius) {
    if (policy == NormPolicy::reject) {
      throw DataError("input norm " + std::to_string(nrm) + " exceeds radius " +
                      std::to_string(radius));
    }
    x.scale(radius / nrm);
  }
}

// ---------------------------------------------------------------------------
// Expert availability
// ---------------------------------------------------------------------------

/// The set A_t of experts present this round; may be empty, in which case
/// the learner chooses among the n classes alone.
struct ExpertSet {
  std::vector<int> available;  ///< ascending expert indices in 1..n_e

  ExpertSet() = default;
  explicit ExpertSet(std::vector<int> experts) : available(std::move(experts)) {
    if (!std::is_sorted(available.begin(), available.end()) ||
        std::adjacent_find(available.begin(), available.end()) != available.end()) {
      throw ConfigError("ExpertSet: expert indices must be strictly ascending");
    }
    if (!available.empty() && available.front() < 1) {
      throw ConfigError("ExpertSet: expert indices start at 1");
    }
  }

  std::size_t size() const { return available.size(); }
  bool empty() const { return available.empty(); }

  bool contains(int j) const {
    return std::binary_search(available.begin(), available.end(), j);
  }

  /// Position of expert j within the ascending available list, -1 if absent.
  int position_of(int j) const {
    auto it = std::lower_bound(available.begin(), available.end(), j);
    if (it == available.end() || *it != j) return -1;
    return static_cast<int>(it - available.begin());
  }

  bool operator==(const ExpertSet&) const = default;
};

/// Materializes the round label set: [1..n] followed by {n+j : j in A},
/// ascending; length m = n + |A|.
inline std::vector<int> make_label_set(const LabelSpace& space, const ExpertSet& experts) {
  if (!experts.empty() && experts.available.back() > space.n_e) {
    throw ConfigError("make_label_set: expert index exceeds n_e");
  }
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(space.n) + experts.size());
  for (int y = 1; y <= space.n; ++y) labels.push_back(y);
  for (int j : experts.available) labels.push_back(space.label_of_expert(j));
  return labels;
}

inline bool label_available(const LabelSpace& space, const ExpertSet& experts, int label) {
  if (space.is_class(label)) return true;
  if (!space.is_expert_label(label)) return false;
  return experts.contains(space.expert_of(label));
}

// ---------------------------------------------------------------------------
// Augmented input
// ---------------------------------------------------------------------------

/// One round's adversary-chosen input: features plus the available expert
/// set, immutable once presented to the learner.
struct AugmentedInput {
  FeatureVector x;
  ExpertSet experts;
  long round = 0;
};

// ---------------------------------------------------------------------------
// Expert costs
// ---------------------------------------------------------------------------

/// Cost parameters of one expert: realized cost is
///   alpha * 1{expert wrong} + beta,
/// after division by the common normalizer Q = 1 + max_j beta_j so that all
/// achievable values lie in [0,1]. Normalization is recorded in the struct:
/// once applied, the parameters already carry Q and a second application is
/// the identity.
struct ExpertCost {
  double alpha = 1.0;  ///< misclassification weight (>= 0)
  double beta = 0.0;   ///< query cost (>= 0)
  bool normalized = false;
  double applied_q = 1.0;

  double cost(bool expert_correct) const { return expert_correct ? beta : alpha + beta; }
  double lower() const { return beta; }
  double upper() const { return alpha + beta; }
};

/// Divides all cost parameters by Q = 1 + max_j beta_j. Relative order of
/// expert costs is preserved; the resulting achievable values lie in [0,1]
/// whenever alpha_j <= 1.
inline std::vector<ExpertCost> normalize_costs(std::vector<ExpertCost> raw) {
  if (raw.empty()) return raw;
  bool all_done = true;
  double max_beta = 0.0;
  for (const auto& c : raw) {
    if (c.alpha < 0.0 || c.beta < 0.0) {
      throw ConfigError("normalize_costs: negative cost parameter");
    }
    all_done = all_done && c.normalized;
    max_beta = std::max(max_beta, c.normalized ? c.beta * c.applied_q : c.beta);
  }
  if (all_done) return raw;  // fixed point: Q already folded in

  const double q = 1.0 + max_beta;
  for (auto& c : raw) {
    if (c.normalized) continue;
    c.alpha /= q;
    c.beta /= q;
    c.normalized = true;
    c.applied_q = q;
  }
  return raw;
}

/// Largest achievable normalized expert cost, the constant c in the
/// exploration penalty term.
inline double max_expert_cost(const std::vector<ExpertCost>& costs) {
  double c = 0.0;
  for (const auto& e : costs) c = std::max(c, e.upper());
  return c;
}

// ---------------------------------------------------------------------------
// Per-round realized costs
// ---------------------------------------------------------------------------

/// Realized costs c_j(x_t, y_t) for the experts available this round,
/// aligned with ExpertSet::available.
struct RoundCosts {
  std::vector<double> value;  ///< same order as the round's expert set

  double for_position(int pos) const { return value.at(static_cast<std::size_t>(pos)); }

  double for_expert(int j, const ExpertSet& experts) const {
    const int pos = experts.position_of(j);
    if (pos < 0) throw DomainError("RoundCosts: expert not available this round");
    return value.at(static_cast<std::size_t>(pos));
  }
};

}  // namespace ol2d
