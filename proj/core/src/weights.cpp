#include "ol2d/weights.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace ol2d {

double WeightMatrix::frob_norm() const { return std::sqrt(frob_norm_squared()); }

double score(const WeightMatrix& w, const AugmentedInput& input, int label) {
  if (!label_available(w.space(), input.experts, label)) {
    throw DomainError("score: label " + std::to_string(label) +
                      " is not in this round's label set");
  }
  return w.dot_augmented(label, input.x);
}

std::vector<double> active_scores(const WeightMatrix& w, const AugmentedInput& input) {
  const LabelSpace& space = w.space();
  if (!input.experts.empty() && input.experts.available.back() > space.n_e) {
    throw ConfigError("active_scores: expert index exceeds the hypothesis's label space");
  }
  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(space.n) + input.experts.size());
  for (int y = 1; y <= space.n; ++y) s.push_back(w.dot_augmented(y, input.x));
  for (int j : input.experts.available) {
    s.push_back(w.dot_augmented(space.label_of_expert(j), input.x));
  }
  return s;
}

int argmax_label(const std::vector<int>& labels, const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;  // strict: ties keep the lowest label
  }
  return labels[best];
}

int predict(const WeightMatrix& w, const AugmentedInput& input) {
  const std::vector<int> labels = make_label_set(w.space(), input.experts);
  const std::vector<double> values = active_scores(w, input);
  return argmax_label(labels, values);
}

WeightMatrix project_zero_sum(const WeightMatrix& w, const ExpertSet& experts) {
  WeightMatrix out = w;
  const std::vector<int> labels = make_label_set(w.space(), experts);
  const int cols = w.cols();

  std::vector<double> mu(static_cast<std::size_t>(cols), 0.0);
  for (int label : labels) {
    const auto r = w.row(label - 1);
    for (int c = 0; c < cols; ++c) mu[c] += r[c];
  }
  const double inv_m = 1.0 / static_cast<double>(labels.size());
  for (double& v : mu) v *= inv_m;

  for (int label : labels) {
    auto r = out.row(label - 1);
    for (int c = 0; c < cols; ++c) r[c] -= mu[c];
  }
  return out;
}

WeightMatrix project_ball(const WeightMatrix& w, double bound) {
  WeightMatrix out = w;
  project_ball_in_place(out, bound);
  return out;
}

void project_ball_in_place(WeightMatrix& w, double bound) {
  if (bound <= 0.0) throw ConfigError("project_ball: bound must be positive");
  const double norm = w.frob_norm();
  if (norm <= bound) return;
  const double factor = bound / norm;
  for (double& v : w.raw()) v *= factor;
}

namespace {
constexpr char kMagic[8] = {'O', 'L', '2', 'D', 'W', '0', '0', '1'};
}  // namespace

void save_weights_binary(const WeightMatrix& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::int32_t header[3] = {w.space().n, w.space().n_e, w.feature_dim()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  const double bound = w.frob_bound();
  out.write(reinterpret_cast<const char*>(&bound), sizeof(bound));
  out.write(reinterpret_cast<const char*>(w.raw().data()),
            static_cast<std::streamsize>(w.raw().size() * sizeof(double)));
  if (!out) throw DataError("write failed: " + path);
}

WeightMatrix load_weights_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a weight snapshot: " + path);
  }
  std::int32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  double bound = 0.0;
  in.read(reinterpret_cast<char*>(&bound), sizeof(bound));
  if (!in) throw DataError("truncated weight snapshot: " + path);
  WeightMatrix w(LabelSpace(header[0], header[1]), header[2], bound);
  in.read(reinterpret_cast<char*>(w.raw().data()),
          static_cast<std::streamsize>(w.raw().size() * sizeof(double)));
  if (!in) throw DataError("truncated weight snapshot: " + path);
  return w;
}

void save_weights_csv(const WeightMatrix& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "# n=" << w.space().n << " n_e=" << w.space().n_e << " d=" << w.feature_dim()
      << " frob_bound=" << w.frob_bound() << "\n";
  char buf[32];
  for (int r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (int c = 0; c < w.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
      out << buf << (c + 1 == w.cols() ? '\n' : ',');
    }
  }
}

}  // namespace ol2d
