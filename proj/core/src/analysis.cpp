#include "ol2d/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace ol2d {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

int ScoreProfile::position_of(int label) const {
  if (space.is_class(label)) return label - 1;
  const int pos = experts.position_of(space.expert_of(label));
  if (pos < 0) throw DomainError("ScoreProfile: label not in the round label set");
  return space.n + pos;
}

ScoreProfile score_profile(const LabelSpace& space, std::span<const double> class_dist,
                           std::span<const double> expected_cost, const ExpertSet& experts) {
  if (static_cast<int>(class_dist.size()) != space.n) {
    throw DomainError("score_profile: class distribution size != n");
  }
  if (expected_cost.size() != experts.size()) {
    throw DomainError("score_profile: need one expected cost per available expert");
  }
  double sum = 0.0;
  for (double p : class_dist) {
    if (p < 0.0) throw DomainError("score_profile: negative class probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("score_profile: p does not sum to 1");

  ScoreProfile profile;
  profile.space = space;
  profile.experts = experts;
  profile.s.assign(class_dist.begin(), class_dist.end());
  for (double c : expected_cost) {
    if (c < 0.0 || c > 1.0) throw DomainError("score_profile: expected cost outside [0,1]");
    profile.s.push_back(1.0 - c);
  }
  profile.total = 0.0;
  for (double v : profile.s) profile.total += v;
  profile.normalized.resize(profile.s.size());
  for (std::size_t i = 0; i < profile.s.size(); ++i) {
    profile.normalized[i] = profile.total > 0.0 ? profile.s[i] / profile.total : 0.0;
  }
  const std::vector<int> labels = make_label_set(space, experts);
  profile.y_max = argmax_label(labels, profile.s);
  return profile;
}

double conditional_deferral_risk(int chosen_label, const ScoreProfile& profile) {
  return 1.0 - profile.s[static_cast<std::size_t>(profile.position_of(chosen_label))];
}

double conditional_deferral_risk(std::span<const double> q, const ScoreProfile& profile) {
  if (q.size() != profile.s.size()) {
    throw DomainError("conditional_deferral_risk: q size != label set size");
  }
  double expected_score = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) expected_score += q[i] * profile.s[i];
  return 1.0 - expected_score;
}

double min_deferral_risk(const ScoreProfile& profile) {
  return conditional_deferral_risk(profile.y_max, profile);
}

double conditional_surrogate_risk(std::span<const double> scores, const ScoreProfile& profile,
                                  SurrogateKind kind) {
  if (scores.size() != profile.s.size()) {
    throw DomainError("conditional_surrogate_risk: scores size != label set size");
  }
  double risk = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    risk += profile.s[i] * base_surrogate_from_scores(scores, static_cast<int>(i), kind);
  }
  return risk;
}

MinSurrogateRisk min_surrogate_risk_hinge(const ScoreProfile& profile) {
  const std::size_t m = profile.s.size();
  if (m < 2) throw DomainError("min_surrogate_risk_hinge: need at least 2 labels");
  MinSurrogateRisk out;
  const double s_max = profile.s[static_cast<std::size_t>(profile.position_of(profile.y_max))];
  out.value = static_cast<double>(m) * (profile.total - s_max);
  out.achieving_scores.assign(m, -1.0);
  out.achieving_scores[static_cast<std::size_t>(profile.position_of(profile.y_max))] =
      static_cast<double>(m) - 1.0;
  return out;
}

double min_surrogate_risk_logistic(const ScoreProfile& profile) {
  // inf over softmax outputs p of sum_i s_i (-log p_i) is attained at
  // p = s / S, giving sum_i s_i log(S / s_i); zero-score entries drop out.
  double risk = 0.0;
  for (double s : profile.s) {
    if (s > 0.0) risk += s * std::log(profile.total / s);
  }
  return risk;
}

CalibrationGaps calibration_gaps(std::span<const double> q, std::span<const double> scores,
                                 const ScoreProfile& profile, SurrogateKind kind) {
  CalibrationGaps gaps;
  gaps.target_gap =
      conditional_deferral_risk(q, profile) - min_deferral_risk(profile);
  const double risk = conditional_surrogate_risk(scores, profile, kind);
  const double min_risk = kind == SurrogateKind::constrained_hinge
                              ? min_surrogate_risk_hinge(profile).value
                              : min_surrogate_risk_logistic(profile);
  gaps.surrogate_gap = risk - min_risk;
  return gaps;
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

RegretReport regret_report(const std::vector<RoundRecord>& records, int classes, int experts,
                           long window, const std::vector<double>* comparator_loss) {
  if (window < 1) throw ConfigError("regret_report: window must be >= 1");
  if (comparator_loss != nullptr && comparator_loss->size() != records.size()) {
    throw ConfigError("regret_report: comparator loss length != record count");
  }
  RegretReport report;
  report.window = window;
  report.classes = classes;
  report.experts = experts;

  double cum_expected = 0.0;
  double cum_comparator = 0.0;
  for (std::size_t begin = 0; begin < records.size(); begin += static_cast<std::size_t>(window)) {
    const std::size_t end = std::min(records.size(), begin + static_cast<std::size_t>(window));
    WindowRow row;
    row.t_begin = records[begin].t;
    row.t_end = records[end - 1].t;
    row.deferral_ratio.assign(static_cast<std::size_t>(experts), 0.0);
    row.queried_accuracy.assign(static_cast<std::size_t>(experts), 0.0);
    row.availability.assign(static_cast<std::size_t>(experts), 0.0);
    std::vector<long> queried(static_cast<std::size_t>(experts), 0);
    std::vector<long> queried_correct(static_cast<std::size_t>(experts), 0);

    double true_sum = 0.0, expected_sum = 0.0, surrogate_sum = 0.0, est_sum = 0.0;
    double gamma_sum = 0.0, eta_sum = 0.0, grad_sum = 0.0;
    long correct_rounds = 0, self_rounds = 0;
    long expected_count = 0, surrogate_count = 0;

    for (std::size_t i = begin; i < end; ++i) {
      const RoundRecord& r = records[i];
      true_sum += r.incurred_loss;
      if (!std::isnan(r.expected_loss)) {
        expected_sum += r.expected_loss;
        ++expected_count;
      }
      if (!std::isnan(r.surrogate_loss)) {
        surrogate_sum += r.surrogate_loss;
        ++surrogate_count;
      }
      est_sum += r.estimated_loss;
      gamma_sum += r.gamma;
      eta_sum += r.eta;
      grad_sum += r.grad_norm_projected;
      if (r.correct) ++correct_rounds;
      if (!r.deferred) {
        ++self_rounds;
      } else if (r.expert >= 1 && r.expert <= experts) {
        const std::size_t j = static_cast<std::size_t>(r.expert - 1);
        ++queried[j];
        if (r.correct) ++queried_correct[j];
      }
      for (int label : r.support) {
        if (label > classes && label <= classes + experts) {
          row.availability[static_cast<std::size_t>(label - classes - 1)] += 1.0;
        }
      }
    }

    const double count = static_cast<double>(end - begin);
    row.true_loss = true_sum / count;
    row.expected_loss = expected_count > 0 ? expected_sum / expected_count : kNaN;
    row.surrogate_loss = surrogate_count > 0 ? surrogate_sum / surrogate_count : kNaN;
    row.estimated_loss = est_sum / count;
    row.accuracy = static_cast<double>(correct_rounds) / count;
    row.self_ratio = static_cast<double>(self_rounds) / count;
    row.mean_gamma = gamma_sum / count;
    row.mean_eta = eta_sum / count;
    row.mean_grad_projected = grad_sum / count;
    for (int j = 0; j < experts; ++j) {
      const std::size_t js = static_cast<std::size_t>(j);
      row.deferral_ratio[js] = static_cast<double>(queried[js]) / count;
      row.queried_accuracy[js] =
          queried[js] > 0 ? static_cast<double>(queried_correct[js]) / queried[js] : kNaN;
      row.availability[js] /= count;
    }

    // cumulative regret tracks the expected loss when logged, the realized
    // loss otherwise
    cum_expected += expected_count > 0 ? expected_sum : true_sum;
    if (comparator_loss != nullptr) {
      double comp_sum = 0.0;
      for (std::size_t i = begin; i < end; ++i) comp_sum += (*comparator_loss)[i];
      row.comparator_loss = comp_sum / count;
      cum_comparator += comp_sum;
      row.cum_regret = cum_expected - cum_comparator;
    } else {
      row.comparator_loss = kNaN;
      row.cum_regret = kNaN;
    }

    report.total_true_loss += true_sum;
    report.total_expected_loss += expected_count > 0 ? expected_sum : true_sum;
    report.windows.push_back(std::move(row));
  }

  report.total_comparator_loss = cum_comparator;
  report.final_regret = comparator_loss != nullptr
                            ? report.total_expected_loss - cum_comparator
                            : kNaN;
  return report;
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

namespace {

std::string join_ints(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ';';
    out += fmt_double(xs[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (!item.empty()) out.push_back(std::strtod(item.c_str(), nullptr));
  }
  return out;
}

}  // namespace

void write_rounds_csv(const std::vector<RoundRecord>& records, int classes, int experts,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "# classes=" << classes << " experts=" << experts << "\n";
  out << "t,support,q,gamma,eta,greedy,action,action_prob,deferred,expert,correct,cost,"
         "estimated_loss,grad_norm_raw,grad_norm_projected,weight_frob,incurred_loss,"
         "true_label,expected_loss,surrogate_loss\n";
  for (const RoundRecord& r : records) {
    out << r.t << ',' << join_ints(r.support) << ',' << join_doubles(r.q) << ','
        << fmt_double(r.gamma) << ',' << fmt_double(r.eta) << ',' << r.greedy_label << ','
        << r.action << ',' << fmt_double(r.action_prob) << ',' << (r.deferred ? 1 : 0) << ','
        << r.expert << ',' << (r.correct ? 1 : 0) << ',' << fmt_double(r.cost) << ','
        << fmt_double(r.estimated_loss) << ',' << fmt_double(r.grad_norm_raw) << ','
        << fmt_double(r.grad_norm_projected) << ',' << fmt_double(r.weight_frob_norm) << ','
        << fmt_double(r.incurred_loss) << ',' << r.true_label << ','
        << fmt_double(r.expected_loss) << ',' << fmt_double(r.surrogate_loss) << "\n";
  }
}

std::vector<RoundRecord> read_rounds_csv(const std::string& path, int* classes_out,
                                         int* experts_out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::vector<RoundRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t pos = line.find("classes=");
      if (pos != std::string::npos && classes_out != nullptr) {
        *classes_out = std::atoi(line.c_str() + pos + 8);
      }
      pos = line.find("experts=");
      if (pos != std::string::npos && experts_out != nullptr) {
        *experts_out = std::atoi(line.c_str() + pos + 8);
      }
      continue;
    }
    if (line.rfind("t,", 0) == 0) continue;  // header
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (fields.size() != 20) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 20 fields");
    }
    RoundRecord r;
    r.t = std::atol(fields[0].c_str());
    r.support = split_ints(fields[1]);
    r.q = split_doubles(fields[2]);
    r.gamma = std::strtod(fields[3].c_str(), nullptr);
    r.eta = std::strtod(fields[4].c_str(), nullptr);
    r.greedy_label = std::atoi(fields[5].c_str());
    r.action = std::atoi(fields[6].c_str());
    r.action_prob = std::strtod(fields[7].c_str(), nullptr);
    r.deferred = fields[8] == "1";
    r.expert = std::atoi(fields[9].c_str());
    r.correct = fields[10] == "1";
    r.cost = std::strtod(fields[11].c_str(), nullptr);
    r.estimated_loss = std::strtod(fields[12].c_str(), nullptr);
    r.grad_norm_raw = std::strtod(fields[13].c_str(), nullptr);
    r.grad_norm_projected = std::strtod(fields[14].c_str(), nullptr);
    r.weight_frob_norm = std::strtod(fields[15].c_str(), nullptr);
    r.incurred_loss = std::strtod(fields[16].c_str(), nullptr);
    r.true_label = std::atoi(fields[17].c_str());
    r.expected_loss = std::strtod(fields[18].c_str(), nullptr);
    r.surrogate_loss = std::strtod(fields[19].c_str(), nullptr);
    records.push_back(std::move(r));
  }
  return records;
}

void write_windows_csv(const RegretReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "t_begin,t_end,true_loss,expected_loss,surrogate_loss,estimated_loss,accuracy,"
         "self_ratio";
  for (int j = 1; j <= report.experts; ++j) out << ",deferral_ratio_g" << j;
  for (int j = 1; j <= report.experts; ++j) out << ",queried_accuracy_g" << j;
  for (int j = 1; j <= report.experts; ++j) out << ",availability_g" << j;
  out << ",mean_gamma,mean_eta,mean_grad_projected,comparator_loss,cum_regret\n";
  for (const WindowRow& w : report.windows) {
    out << w.t_begin << ',' << w.t_end << ',' << fmt_double(w.true_loss) << ','
        << fmt_double(w.expected_loss) << ',' << fmt_double(w.surrogate_loss) << ','
        << fmt_double(w.estimated_loss) << ',' << fmt_double(w.accuracy) << ','
        << fmt_double(w.self_ratio);
    for (double v : w.deferral_ratio) out << ',' << fmt_double(v);
    for (double v : w.queried_accuracy) out << ',' << fmt_double(v);
    for (double v : w.availability) out << ',' << fmt_double(v);
    out << ',' << fmt_double(w.mean_gamma) << ',' << fmt_double(w.mean_eta) << ','
        << fmt_double(w.mean_grad_projected) << ',' << fmt_double(w.comparator_loss) << ','
        << fmt_double(w.cum_regret) << "\n";
  }
}

}  // namespace ol2d
