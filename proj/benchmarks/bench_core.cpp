#include <benchmark/benchmark.h>

#include "fsmdp/backup.hpp"
#include "fsmdp/envs.hpp"
#include "fsmdp/features.hpp"
#include "fsmdp/simulate.hpp"
#include "fsmdp/solvers.hpp"

using namespace fsmdp;

namespace {

FastSlowMdp sized_mdp(int n_slow, int n_fast, int n_actions) {
  RandomFastSlowSpec spec;
  spec.n_slow = n_slow;
  spec.n_fast = n_fast;
  spec.n_actions = n_actions;
  spec.alpha = 0.2;
  spec.d_y = 5.0;
  return make_random_fastslow(1, spec);
}

void BM_BackupExact(benchmark::State& state) {
  const FastSlowMdp mdp = sized_mdp(static_cast<int>(state.range(0)), 16, 4);
  ValueTable v(mdp.n_states(), 0.5);
  for (auto _ : state) {
    BackupResult out = backup_exact(v, mdp);
    benchmark::DoNotOptimize(out.values.data());
  }
  state.SetItemsProcessed(state.iterations() * mdp.n_states() * mdp.n_actions());
}
BENCHMARK(BM_BackupExact)->Arg(8)->Arg(32)->Arg(64);

void BM_BackupFrozen(benchmark::State& state) {
  const FastSlowMdp mdp = sized_mdp(static_cast<int>(state.range(0)), 16, 4);
  ValueTable v(mdp.n_states(), 0.5);
  for (auto _ : state) {
    BackupResult out = backup_frozen(v, mdp);
    benchmark::DoNotOptimize(out.values.data());
  }
}
BENCHMARK(BM_BackupFrozen)->Arg(8)->Arg(32)->Arg(64);

void BM_ComposeTStep(benchmark::State& state) {
  const FastSlowMdp mdp = make_queue_env();
  const LowerSolveResult lower = solve_lower_frozen(mdp, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    TStepKernel tk = compose_t_step(mdp, lower.policy, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(tk.period());
  }
}
BENCHMARK(BM_ComposeTStep)->Arg(2)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_SimulateQueue(benchmark::State& state) {
  const FastSlowMdp mdp = make_queue_env();
  const FsviResult fs = fsvi(mdp, 10, 2);
  for (auto _ : state) {
    std::vector<double> r = simulate_returns(mdp, AnyPolicy{fs.policy}, 100, 50, 7);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * 50 * 100);
}
BENCHMARK(BM_SimulateQueue)->Unit(benchmark::kMillisecond);

void BM_FeatureProjection(benchmark::State& state) {
  const FastSlowMdp mdp = make_queue_env();
  const FeatureModel fm = build_state_features(mdp, FeatureSpec{RbfSpec{0.3, 0.02, {}}, 1.0}, 0);
  std::vector<double> values(mdp.n_states(), 1.0);
  for (auto _ : state) {
    std::vector<double> w = fm.project(values);
    benchmark::DoNotOptimize(w.data());
  }
}
BENCHMARK(BM_FeatureProjection);

}  // namespace

BENCHMARK_MAIN();
