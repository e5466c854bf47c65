#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "rtmc/baselines.hpp"
#include "rtmc/estimator.hpp"
#include "rtmc/synthetic_mdp.hpp"
#include "rtmc/trace_io.hpp"
#include "support.hpp"

namespace {

using namespace rtmc;

ProblemGroup long_group(int rollouts, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StepRecord> prefix;
  for (int k = 0; k < steps / 10; ++k) prefix.push_back(testing::random_step(rng));
  std::vector<Rollout> out;
  for (int i = 0; i < rollouts; ++i) {
    auto s = prefix;
    while (static_cast<int>(s.size()) < steps) s.push_back(testing::random_step(rng));
    out.push_back(testing::make_rollout("r" + std::to_string(i), std::move(s),
                                        i % 2 ? Outcome::success : Outcome::fail));
  }
  return testing::make_group(std::move(out));
}

void BM_Advantages(benchmark::State& state) {
  const auto group = long_group(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 1);
  const SweSignatureScheme scheme;
  for (auto _ : state) benchmark::DoNotOptimize(advantages(group, scheme, EstimatorConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_Advantages)->Args({8, 25})->Args({8, 100})->Args({32, 100})->Args({8, 400});

void BM_GrpoStep(benchmark::State& state) {
  const auto group = long_group(8, static_cast<int>(state.range(0)), 2);
  const SweSignatureScheme scheme;
  for (auto _ : state) {
    benchmark::DoNotOptimize(grpo_step_advantages(group, scheme, GrpoStepOptions{}));
  }
  state.SetItemsProcessed(state.iterations() * 8 * state.range(0));
}
BENCHMARK(BM_GrpoStep)->Arg(100);

void BM_Signatures(benchmark::State& state) {
  const auto group = long_group(1, static_cast<int>(state.range(0)), 3);
  const SweSignatureScheme scheme;
  for (auto _ : state) benchmark::DoNotOptimize(scheme.annotate(group.rollouts[0]));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Signatures)->Arg(100)->Arg(1000);

void BM_ParseRollout(benchmark::State& state) {
  const auto group = long_group(1, 100, 4);
  const std::string line = serialize_rollout(group.rollouts[0]);
  for (auto _ : state) benchmark::DoNotOptimize(parse_rollout(line));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(line.size()));
}
BENCHMARK(BM_ParseRollout);

void BM_SerializeRollout(benchmark::State& state) {
  const auto group = long_group(1, 100, 5);
  for (auto _ : state) benchmark::DoNotOptimize(serialize_rollout(group.rollouts[0]));
}
BENCHMARK(BM_SerializeRollout);

void BM_OracleSolve(benchmark::State& state) {
  const auto mdp = default_validation_mdp();
  const auto policy = default_validation_policy();
  for (auto _ : state) benchmark::DoNotOptimize(solve_policy_values(mdp, policy));
}
BENCHMARK(BM_OracleSolve);

void BM_SampleGroup(benchmark::State& state) {
  const auto mdp = default_validation_mdp();
  const auto policy = default_validation_policy();
  std::uint64_t g = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_group(mdp, policy, 8, stream_seed(7, g++)));
}
BENCHMARK(BM_SampleGroup);

}  // namespace
BENCHMARK_MAIN();
