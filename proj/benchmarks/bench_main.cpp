// Microbenchmarks for the per-round hot path: projections, surrogate
// evaluation, the importance-weighted gradient, full learner steps at both
// experiment scales, and sparse-row parsing.

#include <benchmark/benchmark.h>

#include <fstream>
#include <memory>
#include <sstream>

#include "ol2d/bandit.hpp"
#include "ol2d/environment.hpp"
#include "ol2d/learner.hpp"
#include "ol2d/losses.hpp"
#include "ol2d/rng.hpp"
#include "ol2d/weights.hpp"

namespace {

using namespace ol2d;

WeightMatrix random_matrix(const LabelSpace& space, int dim, std::uint64_t seed) {
  RngStream rng(seed, 0);
  WeightMatrix w(space, dim, space.total());
  for (double& v : w.raw()) v = rng.normal() * 0.3;
  return w;
}

FeatureVector sparse_features(int dim, int nnz, std::uint64_t seed) {
  RngStream rng(seed, 1);
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::uint32_t idx = 0;
  for (int k = 0; k < nnz; ++k) {
    idx += 1 + static_cast<std::uint32_t>(rng.uniform_below(dim / nnz - 1));
    if (idx >= static_cast<std::uint32_t>(dim)) break;
    entries.emplace_back(idx, rng.uniform());
  }
  return FeatureVector(std::move(entries), static_cast<std::uint32_t>(dim));
}

void bm_project_zero_sum(benchmark::State& state) {
  const LabelSpace space(6, 3);
  const int dim = static_cast<int>(state.range(0));
  const WeightMatrix w = random_matrix(space, dim, 1);
  const ExpertSet experts({1, 3});
  for (auto _ : state) {
    benchmark::DoNotOptimize(project_zero_sum(w, experts));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_project_zero_sum)->Arg(120)->Arg(4096);

void bm_surrogate_deferral_loss(benchmark::State& state) {
  const LabelSpace space(6, 3);
  const WeightMatrix w = random_matrix(space, 120, 2);
  const AugmentedInput input{sparse_features(120, 20, 3), ExpertSet({1, 2, 3}), 0};
  const RoundCosts costs{{0.1, 0.5, 0.9}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        surrogate_deferral_loss(w, input, 2, costs, SurrogateKind::constrained_hinge));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_surrogate_deferral_loss);

void bm_estimated_subgradient(benchmark::State& state) {
  const LabelSpace space(6, 3);
  const WeightMatrix w = random_matrix(space, 120, 4);
  const AugmentedInput input{sparse_features(120, 20, 5), ExpertSet({1, 2, 3}), 0};
  const ActionDistribution dist = action_distribution(w, input, 0.1);
  Feedback fb;
  fb.action = dist.greedy_label;
  fb.correct = space.is_class(fb.action);
  if (!fb.correct) fb.cost = 0.1;
  for (auto _ : state) {
    const RankOneGradient g = estimated_subgradient(w, input, fb, dist);
    benchmark::DoNotOptimize(project_gradient(g, space, input.experts));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_estimated_subgradient);

void bm_learner_step(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int nnz = static_cast<int>(state.range(1));
  const LabelSpace space(6, 3);
  OnlineLearner learner(space, dim,
                        Schedule::custom(space.total(), 4.5, space.total(), 5e-4, 0.5, 10, 0.5),
                        SurrogateKind::constrained_hinge, 7, 0);
  RngStream rng(11, 2);
  const ExpertSet experts({1, 2, 3});
  std::vector<FeatureVector> inputs;
  for (int i = 0; i < 64; ++i) inputs.push_back(sparse_features(dim, nnz, 100 + i));
  long t = 0;
  for (auto _ : state) {
    const AugmentedInput input{inputs[t % 64], experts, learner.round()};
    const int label = 1 + static_cast<int>(rng.uniform_below(6));
    learner.step(input, [&](int action) {
      Feedback fb;
      fb.action = action;
      fb.correct = action == label;
      if (action > 6) fb.cost = fb.correct ? 0.09 : 1.0;
      return fb;
    });
    ++t;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_learner_step)->Args({120, 20})->Args({47236, 35});

void bm_sparse_parse(benchmark::State& state) {
  std::ostringstream line;
  line << "3";
  RngStream rng(13, 0);
  std::uint32_t idx = 0;
  for (int k = 0; k < 40; ++k) {
    idx += 1 + static_cast<std::uint32_t>(rng.uniform_below(1000));
    line << ' ' << idx << ':' << rng.uniform();
  }
  const std::string text = "# d=47236 n=4\n" + line.str() + "\n";
  for (auto _ : state) {
    state.PauseTiming();
    const std::string path = "/tmp/ol2d_bench_row.txt";
    {
      std::ofstream out(path);
      out << text;
    }
    state.ResumeTiming();
    benchmark::DoNotOptimize(load_sparse_dataset(path));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_sparse_parse);

}  // namespace

BENCHMARK_MAIN();
