#include <sstream>

#include <benchmark/benchmark.h>

#include "nfpose/aoa_estimator.hpp"
#include "nfpose/apple.hpp"
#include "nfpose/baseline.hpp"
#include "nfpose/channel.hpp"
#include "nfpose/config.hpp"
#include "nfpose/experiment.hpp"
#include "nfpose/mcrb.hpp"
#include "nfpose/rng.hpp"

namespace {

using namespace nfpose;

ExperimentConfig desk(int num_ms) {
  std::istringstream empty;
  ExperimentConfig c = parse_config(empty);
  c.num_ms = num_ms;
  return c;
}

void BM_AoaEstimator(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Eigen::MatrixXcd y = cd(1e-3, 0.0) * steering_matrix(n, n, Vec2(0.31, -0.47));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += cscg(rng, 1e-8);
  const std::vector<VmPair> pri{{VonMises(0, 0), VonMises(0, 0)}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_aoa_posteriors({y, 1e-8}, pri, 1e-6));
  }
}
BENCHMARK(BM_AoaEstimator)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_RunApple(benchmark::State& state) {
  const ExperimentConfig cfg = desk(static_cast<int>(state.range(0)));
  const ScenarioConfig s = draw_scenario(cfg, scene_seed(7, 0));
  const ReceivedSignal sig = simulate_received(s, 11);
  const EstimationContext ctx = estimation_context(s);
  const PartitionPlan plan = make_plan(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_apple(sig, ctx, plan, cfg.apple));
  }
}
BENCHMARK(BM_RunApple)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_RunBaseline(benchmark::State& state) {
  const ExperimentConfig cfg = desk(1);
  const ScenarioConfig s = draw_scenario(cfg, scene_seed(7, 0));
  const ReceivedSignal sig = simulate_received(s, 11);
  const EstimationContext ctx = estimation_context(s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_baseline(sig, ctx));
  }
}
BENCHMARK(BM_RunBaseline)->Unit(benchmark::kMillisecond);

void BM_ComputeMcrb(benchmark::State& state) {
  const ExperimentConfig cfg = desk(1);
  const ScenarioConfig s = draw_scenario(cfg, scene_seed(7, 0));
  const PartitionPlan plan = make_plan(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_mcrb(s, plan));
  }
}
BENCHMARK(BM_ComputeMcrb)->Unit(benchmark::kMillisecond);

void BM_SimulateReceived(benchmark::State& state) {
  const ExperimentConfig cfg = desk(1);
  const ScenarioConfig s = draw_scenario(cfg, scene_seed(7, 0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_received(s, ++seed));
  }
}
BENCHMARK(BM_SimulateReceived)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
