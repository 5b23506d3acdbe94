#include "fsmdp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fsmdp/rng.hpp"
#include "fsmdp/simulate.hpp"

namespace fsmdp {
namespace {

std::vector<Index> shuffled_order(Index n, std::uint64_t seed, std::uint64_t salt) {
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  const RandomStream stream = RandomStream::from(seed, 0x5u, salt);
  for (Index i = n; i > 1; --i) {
    const Index j = static_cast<Index>(stream.bits(i) % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

// Synchronous Jacobi sweeps with optional mid-sweep policy snapshots: state
// updates run in a seed-shuffled order and a greedy policy is extracted from
// the half-updated table after each prefix batch.
template <class BeginSweep, class StateUpdate, class SnapshotPolicy>
void run_sweeps(Index n, int iterations, std::uint64_t units_per_update, CostStage stage,
                const SolveOptions& opt, std::uint64_t order_salt, ValueTable& values,
                SolveTrace& trace, BeginSweep&& begin_sweep, StateUpdate&& state_update,
                SnapshotPolicy&& snapshot_policy) {
  const bool snaps = opt.trace.record_snapshots && opt.trace.snapshots_per_sweep > 0;
  std::vector<Index> order;
  if (snaps) order = shuffled_order(n, opt.trace.shuffle_seed, order_salt);
  ValueTable next(n);
  for (int it = 0; it < iterations; ++it) {
    begin_sweep(values);
    if (!snaps) {
      parallel_for(0, n, opt.workers, [&](std::size_t s) {
        next[s] = state_update(static_cast<Index>(s), values);
      });
      trace.events.push_back({stage, static_cast<std::uint64_t>(n) * units_per_update});
    } else {
      ValueTable mixed = values;
      const Index batch =
          (n + static_cast<Index>(opt.trace.snapshots_per_sweep) - 1) /
          static_cast<Index>(opt.trace.snapshots_per_sweep);
      for (Index lo = 0; lo < n; lo += batch) {
        const Index hi = std::min(n, lo + batch);
        parallel_for(lo, hi, opt.workers, [&](std::size_t i) {
          const Index s = order[i];
          next[s] = state_update(s, values);
        });
        for (Index i = lo; i < hi; ++i) mixed[order[i]] = next[order[i]];
        trace.events.push_back({stage, static_cast<std::uint64_t>(hi - lo) * units_per_update});
        trace.snapshots.push_back({trace.total_cost(), snapshot_policy(mixed)});
      }
    }
    values.swap(next);
  }
}

}  // namespace

//===========================================================================
// Exact VI
//===========================================================================

VIResult exact_vi(const FastSlowMdp& mdp, int iterations, ValueTable v0, const SolveOptions& opt) {
  if (iterations < 0) throw std::invalid_argument("exact_vi needs iterations >= 0");
  if (v0.size() != mdp.n_states())
    throw std::invalid_argument("initial value table has wrong size");
  const Exec ex{opt.workers};
  VIResult out;
  out.values = std::move(v0);
  const std::uint64_t units = static_cast<std::uint64_t>(mdp.n_actions()) * mdp.n_states();
  run_sweeps(
      mdp.n_states(), iterations, units, CostStage::ExactSweep, opt, 0xE5AC, out.values, out.trace,
      [](const ValueTable&) {},
      [&](Index s, const ValueTable& src) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < mdp.n_actions(); ++a) {
          double exp_v = 0.0;
          for (const auto& e : mdp.joint_row(s, a)) exp_v += e.prob * src[e.succ];
          best = std::max(best, mdp.reward_sa(s, a) + mdp.gamma() * exp_v);
        }
        return best;
      },
      [&](const ValueTable& mixed) { return AnyPolicy{backup_exact(mixed, mdp, ex).policy}; });
  out.policy = backup_exact(out.values, mdp, ex).policy;
  out.trace.final_tables.emplace_back("values", out.values);
  return out;
}

//===========================================================================
// Frozen lower level
//===========================================================================

LowerSolveResult solve_lower_frozen(const FastSlowMdp& mdp, int period, const SolveOptions& opt) {
  if (period < 1) throw std::invalid_argument("solve_lower_frozen needs period >= 1");
  const Exec ex{opt.workers};
  LowerSolveResult out;
  out.values.tables.assign(static_cast<std::size_t>(period),
                           ValueTable(mdp.n_states(), 0.0));
  out.policy.steps.resize(static_cast<std::size_t>(period - 1));
  const std::uint64_t sweep_units = static_cast<std::uint64_t>(mdp.n_states()) *
                                    mdp.n_actions() * mdp.n_fast();
  for (int t = period - 1; t >= 1; --t) {
    BackupResult step = backup_frozen(out.values.tables[static_cast<std::size_t>(t)], mdp, ex);
    out.values.tables[static_cast<std::size_t>(t - 1)] = std::move(step.values);
    out.policy.steps[static_cast<std::size_t>(t - 1)] = std::move(step.policy);
    out.trace.events.push_back({CostStage::LowerSweep, sweep_units});
  }
  out.trace.final_tables.emplace_back("j1", out.values.tables.front());
  return out;
}

//===========================================================================
// FSVI
//===========================================================================

namespace {

// Upper-level VI shared by fsvi and nominal_fsvi.
void run_upper_level(const FastSlowMdp& mdp, int period, int iterations,
                     const FiniteHorizonPolicy& pi, const ValueTable& j1,
                     const SolveOptions& opt, FsviResult& out) {
  const Exec ex{opt.workers};
  const TStepKernel tk = compose_t_step(mdp, pi, period, ex);
  out.trace.events.push_back(
      {CostStage::Compose,
       static_cast<std::uint64_t>(mdp.n_states()) * mdp.n_states() * period});

  out.upper_values.assign(mdp.n_states(), 0.0);
  const double gamma_t = std::pow(mdp.gamma(), period);
  std::vector<double> u;  // Q V from the sweep's base table
  const std::uint64_t units = static_cast<std::uint64_t>(mdp.n_actions()) * mdp.n_states();
  run_sweeps(
      mdp.n_states(), iterations, units, CostStage::UpperSweep, opt, 0x0BBE, out.upper_values,
      out.trace, [&](const ValueTable& base) { u = tk.propagate(base, ex); },
      [&](Index s, const ValueTable&) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < mdp.n_actions(); ++a) {
          double exp_j = 0.0, exp_u = 0.0;
          for (const auto& e : mdp.joint_row(s, a)) {
            exp_j += e.prob * j1[e.succ];
            exp_u += e.prob * u[e.succ];
          }
          best = std::max(best, mdp.reward_sa(s, a) + mdp.gamma() * exp_j + gamma_t * exp_u);
        }
        return best;
      },
      [&](const ValueTable& mixed) {
        TPeriodicPolicy snap{backup_upper(mixed, j1, tk, mdp, period, ex).policy, pi, period};
        return AnyPolicy{std::move(snap)};
      });
  out.policy.mu = backup_upper(out.upper_values, j1, tk, mdp, period, ex).policy;
  out.policy.pi = pi;
  out.policy.period = period;
  out.j1 = j1;
  out.trace.final_tables.emplace_back("upper_values", out.upper_values);
  out.trace.final_tables.emplace_back("j1", j1);
}

}  // namespace

FsviResult fsvi(const FastSlowMdp& mdp, int period, int iterations, const SolveOptions& opt) {
  if (period < 1 || iterations < 1)
    throw std::invalid_argument("fsvi needs period >= 1 and iterations >= 1");
  LowerSolveResult lower = solve_lower_frozen(mdp, period, opt);
  FsviResult out;
  out.trace.events = std::move(lower.trace.events);
  run_upper_level(mdp, period, iterations, lower.policy, lower.values.tables.front(), opt, out);
  return out;
}

//===========================================================================
// Nominal decomposition
//===========================================================================

void NominalDecomposition::validate(const FastSlowMdp& mdp,
                                    const std::vector<Index>& nominal_xs) const {
  if (nominal_xs.empty()) throw std::invalid_argument("nominal state list is empty");
  for (Index x : nominal_xs)
    if (x >= mdp.n_slow())
      throw std::invalid_argument("nominal slow state " + std::to_string(x) + " out of range");
  if (g.size() != mdp.n_slow()) throw std::invalid_argument("decomposition g has wrong size");
  if (mode == Mode::Additive) {
    if (h.size() != static_cast<std::size_t>(mdp.n_fast()) * mdp.n_actions())
      throw std::invalid_argument("additive decomposition h has wrong size");
    for (Index x = 0; x < mdp.n_slow(); ++x)
      for (Index y = 0; y < mdp.n_fast(); ++y)
        for (Index a = 0; a < mdp.n_actions(); ++a) {
          const double err =
              std::abs(g[x] + h_additive(y, a, mdp.n_actions()) - mdp.reward(x, y, a));
          if (err > zeta + 1e-12)
            throw std::invalid_argument(
                "additive decomposition violates zeta at (x=" + std::to_string(x) +
                ",y=" + std::to_string(y) + ",a=" + std::to_string(a) +
                "): error " + std::to_string(err));
        }
  } else {
    if (h.size() != nominal_xs.size() * mdp.n_fast() * mdp.n_actions())
      throw std::invalid_argument("multiplicative decomposition h has wrong size");
    for (Index x : nominal_xs)
      if (g[x] == 0.0)
        throw std::invalid_argument("multiplicative decomposition has g = 0 at nominal state " +
                                    std::to_string(x));
  }
}

NominalDecomposition make_additive_decomposition(const FastSlowMdp& mdp, std::vector<double> g,
                                                 std::vector<double> h) {
  NominalDecomposition d;
  d.mode = NominalDecomposition::Mode::Additive;
  d.g = std::move(g);
  d.h = std::move(h);
  double worst = 0.0;
  for (Index x = 0; x < mdp.n_slow(); ++x)
    for (Index y = 0; y < mdp.n_fast(); ++y)
      for (Index a = 0; a < mdp.n_actions(); ++a)
        worst = std::max(worst, std::abs(d.g[x] + d.h_additive(y, a, mdp.n_actions()) -
                                         mdp.reward(x, y, a)));
  d.zeta = worst;
  return d;
}

NominalDecomposition make_multiplicative_decomposition(const FastSlowMdp& mdp,
                                                       const std::vector<Index>& nominal_xs,
                                                       std::vector<double> g) {
  NominalDecomposition d;
  d.mode = NominalDecomposition::Mode::Multiplicative;
  d.g = std::move(g);
  d.h.resize(nominal_xs.size() * mdp.n_fast() * mdp.n_actions());
  for (std::size_t slot = 0; slot < nominal_xs.size(); ++slot) {
    const Index xs = nominal_xs[slot];
    if (d.g[xs] == 0.0)
      throw std::invalid_argument("multiplicative decomposition has g = 0 at nominal state " +
                                  std::to_string(xs));
    for (Index y = 0; y < mdp.n_fast(); ++y)
      for (Index a = 0; a < mdp.n_actions(); ++a)
        d.h[(slot * mdp.n_fast() + y) * mdp.n_actions() + a] = mdp.reward(xs, y, a) / d.g[xs];
  }
  return d;
}

std::vector<Index> nearest_nominal(const FastSlowMdp& mdp, const std::vector<Index>& nominal_xs) {
  std::vector<Index> assign(mdp.n_slow(), 0);
  for (Index x = 0; x < mdp.n_slow(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    Index best_slot = 0;
    for (std::size_t slot = 0; slot < nominal_xs.size(); ++slot) {
      const auto& a = mdp.slow_coords()[x];
      const auto& b = mdp.slow_coords()[nominal_xs[slot]];
      double d2 = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
      if (d2 < best) {
        best = d2;
        best_slot = static_cast<Index>(slot);
      }
    }
    assign[x] = best_slot;
  }
  return assign;
}

LowerSolveResult build_nominal_lower(const FastSlowMdp& mdp, int period,
                                     const std::vector<Index>& nominal_xs,
                                     const NominalDecomposition& decomp,
                                     const SolveOptions& opt) {
  if (period < 1) throw std::invalid_argument("build_nominal_lower needs period >= 1");
  decomp.validate(mdp, nominal_xs);
  const Index n_fast = mdp.n_fast();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  const bool additive = decomp.mode == NominalDecomposition::Mode::Additive;

  LowerSolveResult out;

  // Backward induction over y only, one subproblem per nominal state, with
  // the model reward in place of r.
  // nominal_values[slot][t-1][y]
  std::vector<std::vector<std::vector<double>>> nominal_values(
      nominal_xs.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(period),
                                                          std::vector<double>(n_fast, 0.0)));
  const std::uint64_t sweep_units =
      static_cast<std::uint64_t>(n_fast) * n_actions * n_fast;
  for (std::size_t slot = 0; slot < nominal_xs.size(); ++slot) {
    const Index xs = nominal_xs[slot];
    for (int t = period - 1; t >= 1; --t) {
      const auto& next = nominal_values[slot][static_cast<std::size_t>(t)];
      auto& cur = nominal_values[slot][static_cast<std::size_t>(t - 1)];
      for (Index y = 0; y < n_fast; ++y) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < n_actions; ++a) {
          double exp_v = 0.0;
          for (const auto& e : mdp.frozen_row(xs, y, a)) exp_v += e.prob * next[e.succ];
          const double model_r =
              additive ? decomp.g[xs] + decomp.h_additive(y, a, n_actions)
                       : decomp.g[xs] * decomp.h_multiplicative(slot, y, a, n_fast, n_actions);
          best = std::max(best, model_r + gamma * exp_v);
        }
        cur[y] = best;
      }
      out.trace.events.push_back({CostStage::NominalLowerSweep, sweep_units});
    }
  }

  // Extension to every slow state by the reward correction.
  const std::vector<Index> assign = nearest_nominal(mdp, nominal_xs);
  out.values.tables.assign(static_cast<std::size_t>(period), ValueTable(mdp.n_states(), 0.0));
  for (int t = 1; t <= period; ++t) {
    auto& table = out.values.tables[static_cast<std::size_t>(t - 1)];
    double geom = 0.0;  // sum_{i=0}^{T-t-1} gamma^i
    double pw = 1.0;
    for (int i = 0; i <= period - t - 1; ++i) {
      geom += pw;
      pw *= gamma;
    }
    for (Index x = 0; x < mdp.n_slow(); ++x) {
      const std::size_t slot = assign[x];
      const Index xs = nominal_xs[slot];
      const auto& base = nominal_values[slot][static_cast<std::size_t>(t - 1)];
      for (Index y = 0; y < n_fast; ++y) {
        const double v = base[y];
        table[mdp.state_index(x, y)] =
            additive ? geom * (decomp.g[x] - decomp.g[xs]) + v : (decomp.g[x] / decomp.g[xs]) * v;
      }
    }
  }

  // Greedy policy with the true rewards and true frozen dynamics against the
  // extended tables; metered as its own stage.
  out.policy.steps.resize(static_cast<std::size_t>(period - 1));
  const Exec ex{opt.workers};
  for (int t = period - 1; t >= 1; --t) {
    BackupResult greedy = backup_frozen(out.values.tables[static_cast<std::size_t>(t)], mdp, ex);
    out.policy.steps[static_cast<std::size_t>(t - 1)] = std::move(greedy.policy);
    out.trace.events.push_back(
        {CostStage::GreedyExtend,
         static_cast<std::uint64_t>(mdp.n_states()) * n_actions * n_fast});
  }
  out.trace.final_tables.emplace_back("j1", out.values.tables.front());
  return out;
}

FsviResult nominal_fsvi(const FastSlowMdp& mdp, int period, int iterations,
                        const std::vector<Index>& nominal_xs, const NominalDecomposition& decomp,
                        const SolveOptions& opt) {
  if (period < 1 || iterations < 1)
    throw std::invalid_argument("nominal_fsvi needs period >= 1 and iterations >= 1");
  LowerSolveResult lower = build_nominal_lower(mdp, period, nominal_xs, decomp, opt);
  FsviResult out;
  out.trace.events = std::move(lower.trace.events);
  run_upper_level(mdp, period, iterations, lower.policy, lower.values.tables.front(), opt, out);
  return out;
}

//===========================================================================
// Slow-agnostic VI
//===========================================================================

FastVIResult slow_agnostic_vi(const FastSlowMdp& mdp, int iterations, const SolveOptions& opt) {
  if (iterations < 1) throw std::invalid_argument("slow_agnostic_vi needs iterations >= 1");
  const Exec ex{opt.workers};
  FastVIResult out;
  out.values.assign(mdp.n_fast(), 0.0);
  const std::uint64_t units = static_cast<std::uint64_t>(mdp.n_actions()) * mdp.n_slow() *
                              mdp.n_fast();
  run_sweeps(
      mdp.n_fast(), iterations, units, CostStage::SlowAgnosticSweep, opt, 0x51A6, out.values,
      out.trace, [](const ValueTable&) {},
      [&](Index y, const ValueTable& src) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < mdp.n_actions(); ++a) {
          double total = 0.0;
          for (Index x = 0; x < mdp.n_slow(); ++x) {
            double exp_v = 0.0;
            for (const auto& e : mdp.frozen_row(x, y, a)) exp_v += e.prob * src[e.succ];
            total += mdp.reward(x, y, a) + mdp.gamma() * exp_v;
          }
          best = std::max(best, total / static_cast<double>(mdp.n_slow()));
        }
        return best;
      },
      [&](const ValueTable& mixed) {
        return AnyPolicy{backup_slow_agnostic(mixed, mdp, ex).policy};
      });
  out.policy = backup_slow_agnostic(out.values, mdp, ex).policy;
  out.trace.final_tables.emplace_back("w", out.values);
  return out;
}

//===========================================================================
// Tabular Q-learning
//===========================================================================

QLearningResult q_learning(const FastSlowMdp& mdp, std::uint64_t step_budget,
                           const QLearningOptions& hyper, std::uint64_t seed,
                           const SolveOptions& opt) {
  const Index n = mdp.n_states();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  QLearningResult out;
  out.q.assign(static_cast<std::size_t>(n) * n_actions, 0.0);
  std::vector<std::uint32_t> visits(out.q.size(), 0);

  // Seed-fixed strict priority per (s,a); exact Q ties resolve to the
  // highest-priority action, so an untrained table yields a uniform-random
  // greedy policy.
  const RandomStream prio_stream = RandomStream::from(seed, 0x9123, 0);
  std::vector<std::uint64_t> prio(out.q.size());
  for (std::size_t i = 0; i < prio.size(); ++i) prio[i] = prio_stream.bits(i);

  auto greedy_at = [&](Index s) {
    const double* qrow = out.q.data() + static_cast<std::size_t>(s) * n_actions;
    const std::uint64_t* prow = prio.data() + static_cast<std::size_t>(s) * n_actions;
    Index best_a = 0;
    for (Index a = 1; a < n_actions; ++a) {
      if (qrow[a] > qrow[best_a] || (qrow[a] == qrow[best_a] && prow[a] < prow[best_a]))
        best_a = a;
    }
    return best_a;
  };
  auto greedy_policy = [&]() {
    StationaryPolicy p;
    p.actions.resize(n);
    for (Index s = 0; s < n; ++s) p.actions[s] = greedy_at(s);
    return p;
  };

  std::uint64_t snapshot_every = opt.trace.snapshot_steps;
  if (snapshot_every == 0) snapshot_every = std::max<std::uint64_t>(1, step_budget / 50);

  const RandomStream stream = RandomStream::from(seed, 0xA0B1, 1);
  const std::uint64_t half = std::max<std::uint64_t>(1, step_budget / 2);
  Index s = 0;
  std::uint64_t pending_units = 0;
  for (std::uint64_t step = 0; step < step_budget; ++step) {
    if (step % static_cast<std::uint64_t>(hyper.episode_length) == 0) {
      s = std::min<Index>(n - 1, static_cast<Index>(stream.uniform(step, 0) * n));
    }
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(half));
    const double eps = hyper.epsilon_start + frac * (hyper.epsilon_end - hyper.epsilon_start);
    Index a;
    if (stream.uniform(step, 1) < eps) {
      a = std::min<Index>(n_actions - 1, static_cast<Index>(stream.uniform(step, 2) * n_actions));
    } else {
      a = greedy_at(s);
    }
    const Index sp = mdp.sample_joint(s, a, stream.uniform(step, 3));
    const double* qnext = out.q.data() + static_cast<std::size_t>(sp) * n_actions;
    double best_next = qnext[0];
    for (Index ap = 1; ap < n_actions; ++ap) best_next = std::max(best_next, qnext[ap]);
    const std::size_t idx = static_cast<std::size_t>(s) * n_actions + a;
    visits[idx] += 1;
    const double lr = std::pow(static_cast<double>(visits[idx]), -hyper.learning_rate_power);
    out.q[idx] += lr * (mdp.reward_sa(s, a) + gamma * best_next - out.q[idx]);
    s = sp;

    pending_units += 1;  // one observed successor per update
    if ((step + 1) % snapshot_every == 0 || step + 1 == step_budget) {
      out.trace.events.push_back({CostStage::QLearningSteps, pending_units});
      pending_units = 0;
      if (opt.trace.record_snapshots)
        out.trace.snapshots.push_back({out.trace.total_cost(), AnyPolicy{greedy_policy()}});
    }
  }
  out.policy = greedy_policy();
  out.trace.final_tables.emplace_back("q", out.q);
  return out;
}

}  // namespace fsmdp
