#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsmdp/analysis.hpp"
#include "fsmdp/envs.hpp"
#include "fsmdp/math.hpp"
#include "fsmdp/serialize.hpp"
#include "fsmdp/simulate.hpp"
#include "fsmdp/solvers.hpp"
#include "test_support.hpp"

using namespace fsmdp;
using namespace fsmdp::test;

namespace {

RandomFastSlowSpec tiny_spec() {
  RandomFastSlowSpec spec;
  spec.n_slow = 3;
  spec.n_fast = 4;
  spec.n_actions = 2;
  spec.alpha = 0.1;
  spec.d_y = 10.0;
  spec.gamma = 0.9;
  return spec;
}

}  // namespace

TEST_CASE("exact_vi partial geometric sum on the self loop") {
  const FastSlowMdp mdp = self_loop(1.0, 0.9);
  const VIResult out = exact_vi(mdp, 50, ValueTable{0.0});
  CHECK(out.values[0] == doctest::Approx((1.0 - std::pow(0.9, 50)) / 0.1).epsilon(1e-12));
}

TEST_CASE("exact_vi with zero iterations returns the initial table and its greedy policy") {
  TinyBuilder b(1, 1, 2, 0.9);
  b.reward(0, 0, 0, 0.0).reward(0, 0, 1, 1.0);
  b.arc(0, 0, 0, 0, 0, 1.0).arc(0, 0, 1, 0, 0, 1.0);
  const FastSlowMdp mdp = b.build();
  const VIResult out = exact_vi(mdp, 0, ValueTable{3.0});
  CHECK(out.values[0] == doctest::Approx(3.0));
  CHECK(out.policy.actions[0] == 1);
  CHECK(out.trace.total_cost() == 0);
}

TEST_CASE("exact_vi approaches the high-precision fixed point at the known rate") {
  RandomFastSlowSpec spec = tiny_spec();
  const FastSlowMdp mdp = make_random_fastslow(7, spec);
  const OptimalSolution ref = solve_optimal(mdp, 1e-12);
  for (int k : {1, 5, 20, 200}) {
    const VIResult out = exact_vi(mdp, k, ValueTable(mdp.n_states(), 0.0));
    const double gap = max_abs_diff(out.values, ref.values);
    CHECK(gap <= std::pow(mdp.gamma(), k) * mdp.r_max() / (1.0 - mdp.gamma()) + 1e-12);
  }
}

TEST_CASE("exact_vi sweep cost covers every action and successor evaluation") {
  RandomFastSlowSpec spec = tiny_spec();
  const FastSlowMdp mdp = make_random_fastslow(7, spec);
  const VIResult out = exact_vi(mdp, 3, ValueTable(mdp.n_states(), 0.0));
  const std::uint64_t per_sweep =
      static_cast<std::uint64_t>(mdp.n_states()) * mdp.n_actions() * mdp.n_states();
  CHECK(out.trace.total_cost() == 3 * per_sweep);
}

TEST_CASE("solve_lower_frozen degenerate horizons") {
  const FastSlowMdp mdp = make_random_fastslow(9, tiny_spec());
  SUBCASE("period one has no lower policy and zero values") {
    const LowerSolveResult out = solve_lower_frozen(mdp, 1);
    CHECK(out.policy.steps.empty());
    CHECK(sup_norm(out.values.tables.front()) == 0.0);
  }
  SUBCASE("period two is one myopic backup") {
    const LowerSolveResult out = solve_lower_frozen(mdp, 2);
    for (Index x = 0; x < mdp.n_slow(); ++x)
      for (Index y = 0; y < mdp.n_fast(); ++y) {
        double best = -1e300;
        Index best_a = 0;
        for (Index a = 0; a < mdp.n_actions(); ++a) {
          if (mdp.reward(x, y, a) > best) {
            best = mdp.reward(x, y, a);
            best_a = a;
          }
        }
        CHECK(out.values.tables.front()[mdp.state_index(x, y)] == doctest::Approx(best));
        CHECK(out.policy.steps[0].actions[mdp.state_index(x, y)] == best_a);
      }
  }
}

TEST_CASE("solve_lower_frozen matches the frozen tree oracle on the queue env") {
  const FastSlowMdp mdp = make_queue_env();
  const LowerSolveResult out = solve_lower_frozen(mdp, 3);
  // Spot state: highest costs, full queues, idle server.
  Index x_spot = 0;
  for (Index x = 0; x < mdp.n_slow(); ++x)
    if (mdp.slow_coords()[x][0] == 0.2 && mdp.slow_coords()[x][1] == 0.2) x_spot = x;
  Index y_spot = 0;
  for (Index y = 0; y < mdp.n_fast(); ++y) {
    const auto& c = mdp.fast_coords()[y];
    if (c[0] == 3 && c[1] == 3 && c[2] == 0) y_spot = y;
  }
  const double expected = oracle_frozen_tree(mdp, x_spot, y_spot, 2);
  CHECK(out.values.tables.front()[mdp.state_index(x_spot, y_spot)] ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("solve_lower_frozen is identical run jointly or per slow state") {
  const FastSlowMdp mdp = make_random_fastslow(11, tiny_spec());
  SolveOptions serial;
  serial.workers = 1;
  SolveOptions fanout;
  fanout.workers = 4;
  const LowerSolveResult a = solve_lower_frozen(mdp, 5, serial);
  const LowerSolveResult b = solve_lower_frozen(mdp, 5, fanout);
  for (int t = 1; t <= 5; ++t) CHECK(a.values.at(t) == b.values.at(t));
  for (std::size_t i = 0; i < a.policy.steps.size(); ++i)
    CHECK(a.policy.steps[i].actions == b.policy.steps[i].actions);
}

TEST_CASE("fsvi with period one reduces to exact value iteration") {
  const FastSlowMdp mdp = make_random_fastslow(13, tiny_spec());
  const int k = 25;
  const FsviResult fs = fsvi(mdp, 1, k);
  const VIResult vi = exact_vi(mdp, k, ValueTable(mdp.n_states(), 0.0));
  CHECK(max_abs_diff(fs.upper_values, vi.values) <= 1e-12);
  CHECK(fs.policy.mu.actions == vi.policy.actions);
}

TEST_CASE("fsvi fixed point matches exact VI when freezing is harmless") {
  // Static slow state, x-free dynamics and rewards, strong discounting:
  // the end-of-horizon term falls below the tolerance by construction.
  RandomFastSlowSpec spec = tiny_spec();
  spec.alpha = 0.0;
  spec.x_free = true;
  spec.gamma = 0.1;
  const FastSlowMdp mdp = make_random_fastslow(15, spec);
  const int period = 12;
  const FsviResult fs = fsvi(mdp, period, 40);
  const OptimalSolution ref = solve_optimal(mdp, 1e-13);
  CHECK(max_abs_diff(fs.upper_values, ref.values) <= 1e-9);
}

TEST_CASE("fsvi regret is within the theoretical bound on tiny fixtures") {
  for (std::uint64_t seed : {17u, 18u, 19u}) {
    RandomFastSlowSpec spec = tiny_spec();
    spec.alpha = 0.05;
    spec.d_y = 20.0;
    const FastSlowMdp mdp = make_random_fastslow(seed, spec);
    const int period = 3, k = 60;
    const FsviResult fs = fsvi(mdp, period, k);
    const OptimalSolution ref = solve_optimal(mdp, 1e-12);
    const double regret = measured_regret(mdp, fs.policy, ref);
    CHECK(regret >= -1e-9);

    const LipschitzEstimates lips = estimate_lipschitz(mdp);
    const FastSlowConstants fs_const = measure_fast_slow(mdp);
    BoundInputs in;
    in.gamma = mdp.gamma();
    in.alpha = fs_const.alpha;
    in.d_y = fs_const.d_y;
    in.period = period;
    in.iterations = k;
    in.l_r = lips.l_r;
    in.l_f = lips.l_f;
    in.l_u = lips.l_u;
    in.r_max = mdp.r_max();
    CHECK(regret <= regret_bound_fsvi(in));
  }
}

TEST_CASE("nominal lower level is exact for factored rewards with x-free dynamics") {
  RandomFastSlowSpec spec = tiny_spec();
  spec.reward_mode = RandomFastSlowSpec::RewardMode::Factored;
  spec.zeta = 0.0;
  spec.x_free = true;
  spec.alpha = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(21, spec);

  // Recover the additive split from the reward table: h from x = 0, g as the
  // offset (exactly additive by construction).
  std::vector<double> h(static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions());
  for (Index y = 0; y < mdp.n_fast(); ++y)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      h[static_cast<std::size_t>(y) * mdp.n_actions() + a] = mdp.reward(0, y, a);
  std::vector<double> g(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x) g[x] = mdp.reward(x, 0, 0) - mdp.reward(0, 0, 0);
  const NominalDecomposition decomp = make_additive_decomposition(mdp, g, h);
  CHECK(decomp.zeta <= 1e-12);

  const int period = 6;
  const LowerSolveResult nominal = build_nominal_lower(mdp, period, {1}, decomp);
  const LowerSolveResult full = solve_lower_frozen(mdp, period);
  for (int t = 1; t <= period; ++t)
    CHECK(max_abs_diff(nominal.values.at(t), full.values.at(t)) <= 1e-10);
}

TEST_CASE("nominal lower level with period two applies one correction step") {
  RandomFastSlowSpec spec = tiny_spec();
  spec.reward_mode = RandomFastSlowSpec::RewardMode::Factored;
  spec.zeta = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(23, spec);
  std::vector<double> h(static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions());
  for (Index y = 0; y < mdp.n_fast(); ++y)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      h[static_cast<std::size_t>(y) * mdp.n_actions() + a] = mdp.reward(0, y, a);
  std::vector<double> g(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x) g[x] = mdp.reward(x, 0, 0) - mdp.reward(0, 0, 0);
  const NominalDecomposition decomp = make_additive_decomposition(mdp, g, h);

  const LowerSolveResult out = build_nominal_lower(mdp, 2, {0}, decomp);
  for (Index x = 0; x < mdp.n_slow(); ++x)
    for (Index y = 0; y < mdp.n_fast(); ++y) {
      double best_h = -1e300;
      for (Index a = 0; a < mdp.n_actions(); ++a)
        best_h = std::max(best_h, decomp.h_additive(y, a, mdp.n_actions()));
      CHECK(out.values.tables.front()[mdp.state_index(x, y)] ==
            doctest::Approx(decomp.g[x] + best_h).epsilon(1e-12));
    }
}

TEST_CASE("nominal lower gap obeys the factored-error bound") {
  for (std::uint64_t seed : {25u, 26u}) {
    RandomFastSlowSpec spec = tiny_spec();
    spec.reward_mode = RandomFastSlowSpec::RewardMode::Factored;
    spec.zeta = 0.05;
    spec.x_free = true;
    spec.alpha = 0.0;
    const FastSlowMdp mdp = make_random_fastslow(seed, spec);
    const NominalDecomposition decomp = [&] {
      std::vector<double> h(static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions());
      for (Index y = 0; y < mdp.n_fast(); ++y)
        for (Index a = 0; a < mdp.n_actions(); ++a) {
          double acc = 0.0;
          for (Index x = 0; x < mdp.n_slow(); ++x) acc += mdp.reward(x, y, a);
          h[static_cast<std::size_t>(y) * mdp.n_actions() + a] = acc / mdp.n_slow();
        }
      std::vector<double> g(mdp.n_slow(), 0.0);
      for (Index x = 0; x < mdp.n_slow(); ++x) {
        double acc = 0.0;
        for (Index y = 0; y < mdp.n_fast(); ++y)
          for (Index a = 0; a < mdp.n_actions(); ++a)
            acc += mdp.reward(x, y, a) - h[static_cast<std::size_t>(y) * mdp.n_actions() + a];
        g[x] = acc / (static_cast<double>(mdp.n_fast()) * mdp.n_actions());
      }
      return make_additive_decomposition(mdp, std::move(g), std::move(h));
    }();

    const int period = 5;
    const std::vector<Index> nominal{0};
    const LowerSolveResult approx = build_nominal_lower(mdp, period, nominal, decomp);
    const LowerSolveResult full = solve_lower_frozen(mdp, period);
    const LipschitzEstimates lips = estimate_lipschitz(mdp);

    BoundInputs in;
    in.gamma = mdp.gamma();
    in.period = period;
    in.l_r = lips.l_r;
    in.l_f = lips.l_f;
    in.zeta = decomp.zeta;
    for (int t = 1; t <= period; ++t)
      for (Index x = 0; x < mdp.n_slow(); ++x) {
        const double dist =
            std::abs(mdp.slow_coords()[x][0] - mdp.slow_coords()[nominal[0]][0]);
        const double bound = nominal_value_gap_bound(in, t, dist);
        for (Index y = 0; y < mdp.n_fast(); ++y) {
          const Index s = mdp.state_index(x, y);
          CHECK(std::abs(approx.values.at(t)[s] - full.values.at(t)[s]) <= bound + 1e-10);
        }
      }
  }
}

TEST_CASE("nominal_fsvi with every slow state nominal matches fsvi") {
  RandomFastSlowSpec spec = tiny_spec();
  spec.reward_mode = RandomFastSlowSpec::RewardMode::Factored;
  spec.zeta = 0.0;
  spec.x_free = true;
  spec.alpha = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(27, spec);
  std::vector<double> h(static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions());
  for (Index y = 0; y < mdp.n_fast(); ++y)
    for (Index a = 0; a < mdp.n_actions(); ++a)
      h[static_cast<std::size_t>(y) * mdp.n_actions() + a] = mdp.reward(0, y, a);
  std::vector<double> g(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x) g[x] = mdp.reward(x, 0, 0) - mdp.reward(0, 0, 0);
  const NominalDecomposition decomp = make_additive_decomposition(mdp, g, h);

  std::vector<Index> all_x(mdp.n_slow());
  for (Index x = 0; x < mdp.n_slow(); ++x) all_x[x] = x;
  const FsviResult nom = nominal_fsvi(mdp, 4, 30, all_x, decomp);
  const FsviResult ref = fsvi(mdp, 4, 30);
  CHECK(nom.policy.mu.actions == ref.policy.mu.actions);
  for (std::size_t t = 0; t < ref.policy.pi.steps.size(); ++t)
    CHECK(nom.policy.pi.steps[t].actions == ref.policy.pi.steps[t].actions);
}

TEST_CASE("nominal_fsvi on the queue env cuts the lower-level cost by |X| / 9") {
  const FastSlowMdp mdp = make_queue_env();
  const std::vector<Index> nominal = queue_nominal_states(mdp);
  REQUIRE(nominal.size() == 9);
  const NominalDecomposition decomp = queue_nominal_decomposition(mdp, nominal);

  const FsviResult nom = nominal_fsvi(mdp, 10, 2, nominal, decomp);
  const FsviResult ref = fsvi(mdp, 10, 2);
  const std::uint64_t nominal_lower = nom.trace.stage_cost(CostStage::NominalLowerSweep);
  const std::uint64_t full_lower = ref.trace.stage_cost(CostStage::LowerSweep);
  CHECK(nominal_lower * mdp.n_slow() == full_lower * 9);
  CHECK(nominal_lower < full_lower);
}

TEST_CASE("nominal_fsvi runs on the bandit env with five nominal states") {
  const FastSlowMdp mdp = make_bandit_env();
  const std::vector<Index> nominal = bandit_nominal_states(mdp);
  REQUIRE(nominal.size() == 5);
  const NominalDecomposition decomp = bandit_nominal_decomposition(mdp);
  const FsviResult out = nominal_fsvi(mdp, 10, 3, nominal, decomp);
  CHECK(out.trace.total_cost() > 0);
  CHECK(out.policy.pi.steps.size() == 9);
}

TEST_CASE("multiplicative decomposition rejects a zero nominal divisor") {
  RandomFastSlowSpec spec = tiny_spec();
  const FastSlowMdp mdp = make_random_fastslow(29, spec);
  std::vector<double> g(mdp.n_slow(), 1.0);
  g[0] = 0.0;
  CHECK_THROWS_AS(make_multiplicative_decomposition(mdp, {0}, g), std::invalid_argument);
}

TEST_CASE("slow_agnostic_vi with one slow state equals frozen VI over y") {
  RandomFastSlowSpec spec = tiny_spec();
  spec.n_slow = 1;
  spec.alpha = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(31, spec);
  const FastVIResult fast = slow_agnostic_vi(mdp, 40);
  ValueTable v(mdp.n_states(), 0.0);
  for (int i = 0; i < 40; ++i) v = backup_frozen(v, mdp).values;
  CHECK(max_abs_diff(fast.values, v) <= 1e-12);
}

TEST_CASE("slow_agnostic_vi is sound when nothing depends on x") {
  RandomFastSlowSpec spec = tiny_spec();
  spec.x_free = true;
  spec.alpha = 0.0;
  const FastSlowMdp mdp = make_random_fastslow(33, spec);
  const FastVIResult fast = slow_agnostic_vi(mdp, 60);
  const LowerSolveResult frozen = solve_lower_frozen(mdp, 2);
  // With x-free structure both policies act on y alone; the converged
  // slow-agnostic policy dominates the one-step myopic frozen policy.
  const std::vector<double> fast_vals = evaluate_fast_exact(mdp, fast.policy);
  const std::vector<double> frozen_vals =
      evaluate_stationary_exact(mdp, frozen.policy.steps[0]);
  for (Index s = 0; s < mdp.n_states(); ++s) CHECK(fast_vals[s] >= frozen_vals[s] - 1e-9);
}

TEST_CASE("slow_agnostic_vi converges to a fixed point on the queue env") {
  const FastSlowMdp mdp = make_queue_env();
  const FastVIResult out = slow_agnostic_vi(mdp, 450);  // gamma^450 ~ 1e-10
  const FastBackupResult once_more = backup_slow_agnostic(out.values, mdp);
  CHECK(max_abs_diff(once_more.values, out.values) <= 1e-8);
}

TEST_CASE("q_learning converges on the single-state loop") {
  const FastSlowMdp mdp = self_loop(1.0, 0.9);
  const QLearningResult out = q_learning(mdp, 10000, {}, 3);
  CHECK(out.q[0] == doctest::Approx(10.0).epsilon(0.005));
}

TEST_CASE("q_learning with zero budget returns a seed-random policy") {
  RandomFastSlowSpec spec = tiny_spec();
  spec.n_actions = 4;
  const FastSlowMdp mdp = make_random_fastslow(35, spec);
  const QLearningResult a = q_learning(mdp, 0, {}, 3);
  const QLearningResult b = q_learning(mdp, 0, {}, 3);
  const QLearningResult c = q_learning(mdp, 0, {}, 4);
  CHECK(a.policy.actions == b.policy.actions);
  CHECK(a.policy.actions != c.policy.actions);
  bool varied = false;
  for (Index act : a.policy.actions) varied = varied || act != a.policy.actions[0];
  CHECK(varied);
}

TEST_CASE("q_learning finds most of the optimal policy on a small MDP") {
  RandomFastSlowSpec spec;
  spec.n_slow = 2;
  spec.n_fast = 4;
  spec.n_actions = 2;
  spec.alpha = 0.5;
  spec.d_y = 2.0;
  spec.gamma = 0.9;
  const FastSlowMdp mdp = make_random_fastslow(37, spec);
  const OptimalSolution ref = solve_optimal(mdp, 1e-12);
  double match = 0.0;
  const int seeds = 3;
  for (int seed = 0; seed < seeds; ++seed) {
    const QLearningResult out = q_learning(mdp, 500000, {}, static_cast<std::uint64_t>(seed));
    int agree = 0;
    for (Index s = 0; s < mdp.n_states(); ++s)
      if (out.policy.actions[s] == ref.policy.actions[s]) ++agree;
    match += static_cast<double>(agree) / mdp.n_states();
  }
  CHECK(match / seeds >= 0.9);
}

TEST_CASE("solver traces are reproducible and monotone") {
  const FastSlowMdp mdp = make_random_fastslow(39, tiny_spec());
  SolveOptions opt;
  opt.trace.record_snapshots = true;
  opt.trace.shuffle_seed = 77;
  const FsviResult a = fsvi(mdp, 3, 4, opt);
  const FsviResult b = fsvi(mdp, 3, 4, opt);
  CHECK(trace_to_json(a.trace) == trace_to_json(b.trace));
  std::uint64_t prev = 0;
  for (const auto& snap : a.trace.snapshots) {
    CHECK(snap.cost > prev);
    prev = snap.cost;
  }
  CHECK(meter_cost(a.trace.events) == a.trace.total_cost());
}

TEST_CASE("fsvi upper sweeps contract by gamma to the period") {
  const FastSlowMdp mdp = make_random_fastslow(41, tiny_spec());
  const int period = 4;
  const LowerSolveResult lower = solve_lower_frozen(mdp, period);
  const TStepKernel tk = compose_t_step(mdp, lower.policy, period);
  const ValueTable& j1 = lower.values.tables.front();
  ValueTable v(mdp.n_states(), 0.0);
  double prev_gap = -1.0;
  const double rate = std::pow(mdp.gamma(), period);
  for (int i = 0; i < 6; ++i) {
    const ValueTable next = backup_upper(v, j1, tk, mdp, period).values;
    const double gap = max_abs_diff(next, v);
    if (prev_gap >= 0.0) CHECK(gap <= rate * prev_gap + 1e-12);
    prev_gap = gap;
    v = next;
  }
}

TEST_CASE("the optimal stationary policy keeps its value as a periodic policy") {
  for (int period : {2, 3, 5}) {
    const FastSlowMdp mdp = make_random_fastslow(43, tiny_spec());
    CHECK(check_hierarchical_equivalence(mdp, period, 1e-12) < 1e-8);
  }
}
