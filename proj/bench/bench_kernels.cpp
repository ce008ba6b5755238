#include <benchmark/benchmark.h>

#include "evoclim/analytic.hpp"
#include "evoclim/ibm.hpp"
#include "evoclim/ide.hpp"

using namespace evoclim;

namespace {

Policy policy_of(const benchmark::State& state) { return state.range(0) ? Policy::parallel : Policy::serial; }

void BM_IbmReplicates(benchmark::State& state) {
  const ModelParams p;
  const EnvTrajectory lin(traj::Linear{0.0063});
  IbmConfig cfg;
  cfg.N = 1000;
  cfg.T = 100;
  cfg.replicates = 16;
  cfg.record_every = 10;
  cfg.policy = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_replicates(p, lin, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.N * cfg.replicates) * cfg.T);
}

void BM_ReducedPde(benchmark::State& state) {
  const ModelParams p;
  const EnvTrajectory lin(traj::Linear{0.0063});
  const auto init = IdeInit::near_dirac();
  const auto grid = default_grid_reduced(p, lin, 20.0, init, 256, 128);
  IdeOptions opt;
  opt.record_every = 10.0;
  opt.policy = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve_pde_reduced(p, lin, init, 20.0, grid, 0.05, opt));
}

void BM_Ide1d(benchmark::State& state) {
  ModelParams p;
  p.n = 1;
  const EnvTrajectory sn(traj::Sin{0.3, 0.07});
  const auto init = IdeInit::near_dirac();
  const auto grid = default_grid_1d(p, sn, 50.0, init, 4096);
  IdeOptions opt;
  opt.record_every = 10.0;
  opt.policy = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve_ide_1d(p, sn, init, 50.0, grid, 0.05, opt));
}

void BM_AnalyticTrajectory(benchmark::State& state) {
  const ModelParams p;
  const EnvTrajectory sn(traj::Sin{0.39, 0.0745});
  MomentOptions mo;
  mo.skewness = false;
  mo.policy = policy_of(state);
  const auto times = uniform_times(1000.0, 64);
  for (auto _ : state) benchmark::DoNotOptimize(mean_fitness_trajectory(p, sn, InitialCondition::clonal(), times, mo));
}

}  // namespace

BENCHMARK(BM_IbmReplicates)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReducedPde)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ide1d)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnalyticTrajectory)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
