#pragma once

#include <span>
#include <string>
#include <vector>

#include "ol2d/types.hpp"

namespace ol2d {

/// Linear hypothesis over the augmented label space: N rows of (w_i, b_i)
/// in R^{d+1}, bias stored as the last column. Scores are
/// h(x, y) = <w_y, x> + b_y; the Frobenius norm is kept within frob_bound
/// by the learner (default bound B = N).
class WeightMatrix {
 public:
  WeightMatrix() = default;

  WeightMatrix(LabelSpace space, int feature_dim, double frob_bound)
      : space_(space),
        dim_(feature_dim),
        frob_bound_(frob_bound),
        data_(static_cast<std::size_t>(space.total()) * (feature_dim + 1), 0.0) {
    if (feature_dim < 1) throw ConfigError("WeightMatrix: feature dim must be positive");
    if (frob_bound <= 0.0) throw ConfigError("WeightMatrix: frob bound must be positive");
  }

  const LabelSpace& space() const { return space_; }
  int feature_dim() const { return dim_; }
  int rows() const { return space_.total(); }
  int cols() const { return dim_ + 1; }
  double frob_bound() const { return frob_bound_; }
  void set_frob_bound(double b) { frob_bound_ = b; }

  std::span<double> row(int r) {
    return {data_.data() + static_cast<std::size_t>(r) * cols(), static_cast<std::size_t>(cols())};
  }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols(), static_cast<std::size_t>(cols())};
  }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double frob_norm_squared() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  double frob_norm() const;

  /// <row_label, (x, 1)>: sparse dot against row of label (1-based) plus bias.
  double dot_augmented(int label, const FeatureVector& x) const {
    const double* w = data_.data() + static_cast<std::size_t>(label - 1) * cols();
    double s = w[dim_];  // bias
    for (const auto& [idx, val] : x.entries) s += w[idx] * val;
    return s;
  }

  bool operator==(const WeightMatrix& other) const = default;

 private:
  LabelSpace space_{2, 0};
  int dim_ = 1;
  double frob_bound_ = 1.0;
  std::vector<double> data_;
};

/// Score h(x_bar, label) = <w_label, x> + b_label. The label must belong to
/// the round label set; labels outside it carry no score in the surrogate,
/// so asking for one is a caller bug.
double score(const WeightMatrix& w, const AugmentedInput& input, int label);

/// Raw scores over the round label set, in make_label_set order.
std::vector<double> active_scores(const WeightMatrix& w, const AugmentedInput& input);

/// argmax of the score over the round label set; ties broken towards the
/// lowest augmented label index.
int predict(const WeightMatrix& w, const AugmentedInput& input);

/// Lowest-index argmax over parallel (labels, values) arrays.
int argmax_label(const std::vector<int>& labels, const std::vector<double>& values);

/// Orthogonal projection onto the zero-sum subspace K_A: subtracts the mean
/// of the rows indexed by the round label set from each of those rows and
/// leaves every other row untouched. Column sums over the active rows
/// become 0, the argmax over the active set is unchanged, and the Frobenius
/// norm cannot grow.
WeightMatrix project_zero_sum(const WeightMatrix& w, const ExpertSet& experts);

/// Exact Frobenius-ball projection: rescale radially when the norm exceeds
/// the bound, identity otherwise.
WeightMatrix project_ball(const WeightMatrix& w, double bound);

/// In-place variant used by the learner's update loop.
void project_ball_in_place(WeightMatrix& w, double bound);

// Snapshot formats for checkpoint/resume and inspection. The binary format
// is documented in the README (magic, label space, dim, bound, row-major
// doubles); the CSV variant writes one row per augmented label.
void save_weights_binary(const WeightMatrix& w, const std::string& path);
WeightMatrix load_weights_binary(const std::string& path);
void save_weights_csv(const WeightMatrix& w, const std::string& path);

}  // namespace ol2d
