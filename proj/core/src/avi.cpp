#include "fsmdp/avi.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "fsmdp/rng.hpp"
#include "fsmdp/simulate.hpp"

namespace fsmdp {
namespace {

std::vector<double> project_anchor_values(const FeatureModel& fm,
                                          const std::vector<double>& anchor_vals) {
  // Alg-style projection: non-anchor entries zeroed, then Phi-dagger.
  std::vector<double> full(fm.num_states(), 0.0);
  for (Index j = 0; j < fm.num_features(); ++j) full[fm.anchors()[j]] = anchor_vals[j];
  return fm.project(full);
}

// Sampled or exact expectation of a state-value estimate over the joint
// kernel. Draws are common random numbers keyed by (block, sample): shared
// across actions and across iterations, so sampled AVI iterates a fixed
// empirical Bellman operator and converges like its exact counterpart.
class JointExpectation {
 public:
  JointExpectation(const FastSlowMdp& mdp, int samples, RandomStream stream)
      : mdp_(&mdp), samples_(samples), stream_(stream) {}

  template <class ValueFn>
  double value(Index s, Index a, std::uint64_t draw_block, ValueFn&& value_of) const {
    if (samples_ <= 0) {
      double acc = 0.0;
      for (const auto& e : mdp_->joint_row(s, a)) acc += e.prob * value_of(e.succ);
      return acc;
    }
    double acc = 0.0;
    for (int i = 0; i < samples_; ++i)
      acc += value_of(mdp_->sample_joint(s, a, stream_.uniform(draw_block, i)));
    return acc / samples_;
  }

 private:
  const FastSlowMdp* mdp_;
  int samples_;
  RandomStream stream_;
};

}  // namespace

//===========================================================================
// Base AVI
//===========================================================================

AviResult avi_base(const FastSlowMdp& mdp, const FeatureModel& fm, int iterations,
                   const AviOptions& opt, std::uint64_t seed) {
  if (iterations < 0) throw std::invalid_argument("avi_base needs iterations >= 0");
  if (fm.num_states() != mdp.n_states())
    throw std::invalid_argument("feature model does not match the state space");
  const Index m = fm.num_features();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  const int samples = opt.succ_samples;
  const std::uint64_t units_per_anchor =
      static_cast<std::uint64_t>(n_actions) * (samples <= 0 ? mdp.n_states() : samples);

  AviResult out;
  out.weights.assign(m, 0.0);

  auto greedy_everywhere = [&](const std::vector<double>& beta, std::uint64_t tag) {
    const JointExpectation expect(mdp, samples, RandomStream::from(seed, 0xF1A5, tag));
    StationaryPolicy pol;
    pol.actions.resize(mdp.n_states());
    parallel_for(0, mdp.n_states(), opt.solve.workers, [&](std::size_t s) {
      double best = -std::numeric_limits<double>::infinity();
      Index best_a = 0;
      for (Index a = 0; a < n_actions; ++a) {
        const double q = mdp.reward_sa(static_cast<Index>(s), a) +
                         gamma * expect.value(static_cast<Index>(s), a, s,
                                              [&](Index succ) { return fm.value_at(succ, beta); });
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      pol.actions[s] = best_a;
    });
    return pol;
  };

  const JointExpectation expect(mdp, samples, RandomStream::from(seed, 0xBA5E, 0));
  for (int it = 1; it <= iterations; ++it) {
    std::vector<double> anchor_vals(m, 0.0);
    parallel_for(0, m, opt.solve.workers, [&](std::size_t j) {
      const Index s = fm.anchors()[j];
      double best = -std::numeric_limits<double>::infinity();
      for (Index a = 0; a < n_actions; ++a) {
        const double q =
            mdp.reward_sa(s, a) + gamma * expect.value(s, a, j, [&](Index succ) {
              return fm.value_at(succ, out.weights);
            });
        best = std::max(best, q);
      }
      anchor_vals[j] = best;
    });
    out.weights = project_anchor_values(fm, anchor_vals);
    out.trace.events.push_back({CostStage::AviIteration, static_cast<std::uint64_t>(m) * units_per_anchor});
    if (opt.solve.trace.record_snapshots)
      out.trace.snapshots.push_back(
          {out.trace.total_cost(),
           AnyPolicy{greedy_everywhere(out.weights, 0x900D + static_cast<std::uint64_t>(it))}});
  }
  out.policy = greedy_everywhere(out.weights, 0xF17A);
  out.trace.final_tables.emplace_back("beta", out.weights);
  return out;
}

//===========================================================================
// Slow-agnostic AVI
//===========================================================================

FastAviResult avi_slow_agnostic(const FastSlowMdp& mdp, const FeatureModel& fm_y, int iterations,
                                const AviOptions& opt, std::uint64_t seed) {
  if (iterations < 0) throw std::invalid_argument("avi_slow_agnostic needs iterations >= 0");
  if (fm_y.num_states() != mdp.n_fast())
    throw std::invalid_argument("feature model does not match the fast state space");
  const Index m = fm_y.num_features();
  const Index n_actions = mdp.n_actions();
  const Index n_slow = mdp.n_slow();
  const double gamma = mdp.gamma();
  const int samples = opt.succ_samples;
  const std::uint64_t units_per_anchor =
      static_cast<std::uint64_t>(n_actions) *
      (samples <= 0 ? static_cast<std::uint64_t>(n_slow) * mdp.n_fast() : samples);

  FastAviResult out;
  out.weights.assign(m, 0.0);

  // Sampled target: draw (x_i, y'_i) pairs, x uniform, y' from the frozen
  // row at x; exact mode averages the frozen expectation over every x.
  auto target = [&](Index y, Index a, const std::vector<double>& beta, const RandomStream& stream,
                    std::uint64_t block) {
    if (samples <= 0) {
      double acc = 0.0;
      for (Index x = 0; x < n_slow; ++x) {
        double exp_v = 0.0;
        for (const auto& e : mdp.frozen_row(x, y, a)) exp_v += e.prob * fm_y.value_at(e.succ, beta);
        acc += mdp.reward(x, y, a) + gamma * exp_v;
      }
      return acc / static_cast<double>(n_slow);
    }
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
      const Index x =
          std::min<Index>(n_slow - 1, static_cast<Index>(stream.uniform(block, i, 0) * n_slow));
      const Index yp = sample_row(mdp.frozen_row(x, y, a), stream.uniform(block, i, 1));
      acc += mdp.reward(x, y, a) + gamma * fm_y.value_at(yp, beta);
    }
    return acc / samples;
  };

  auto greedy_everywhere = [&](const std::vector<double>& beta, std::uint64_t tag) {
    const RandomStream stream = RandomStream::from(seed, 0xFA57A, tag);
    FastPolicy pol;
    pol.actions.resize(mdp.n_fast());
    for (Index y = 0; y < mdp.n_fast(); ++y) {
      double best = -std::numeric_limits<double>::infinity();
      Index best_a = 0;
      for (Index a = 0; a < n_actions; ++a) {
        const double q = target(y, a, beta, stream, y);
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      pol.actions[y] = best_a;
    }
    return pol;
  };

  const RandomStream train_stream = RandomStream::from(seed, 0x51AA, 0);
  for (int it = 1; it <= iterations; ++it) {
    std::vector<double> anchor_vals(m, 0.0);
    parallel_for(0, m, opt.solve.workers, [&](std::size_t j) {
      const Index y = fm_y.anchors()[j];
      double best = -std::numeric_limits<double>::infinity();
      for (Index a = 0; a < n_actions; ++a)
        best = std::max(best, target(y, a, out.weights, train_stream, j));
      anchor_vals[j] = best;
    });
    out.weights = project_anchor_values(fm_y, anchor_vals);
    out.trace.events.push_back({CostStage::AviIteration, static_cast<std::uint64_t>(m) * units_per_anchor});
    if (opt.solve.trace.record_snapshots)
      out.trace.snapshots.push_back(
          {out.trace.total_cost(),
           AnyPolicy{greedy_everywhere(out.weights, 0x900D + static_cast<std::uint64_t>(it))}});
  }
  out.policy = greedy_everywhere(out.weights, 0xF17A);
  out.trace.final_tables.emplace_back("beta", out.weights);
  return out;
}

//===========================================================================
// FSAVI and Nominal FSAVI
//===========================================================================

namespace {

// Lazy greedy policy for the lower level against a value oracle
// j_next(t+1, state). Two caches keep metered simulation work separate from
// unmetered snapshot/final extraction.
class LazyLowerPolicy {
 public:
  LazyLowerPolicy(const FastSlowMdp& mdp, int period,
                  std::function<double(int, Index)> value_of)
      : mdp_(&mdp), period_(period), value_of_(std::move(value_of)) {
    metered_.assign(static_cast<std::size_t>(period - 1),
                    std::vector<Index>(mdp.n_states(), kUnset));
    extraction_.assign(static_cast<std::size_t>(period - 1),
                       std::vector<Index>(mdp.n_states(), kUnset));
  }

  Index action_metered(int t, Index s, std::uint64_t& miss_units) {
    Index& slot = metered_[static_cast<std::size_t>(t - 1)][s];
    if (slot == kUnset) {
      slot = greedy(t, s);
      miss_units += static_cast<std::uint64_t>(mdp_->n_actions()) * mdp_->n_fast();
    }
    return slot;
  }

  Index action(int t, Index s) {
    Index& slot = extraction_[static_cast<std::size_t>(t - 1)][s];
    if (slot == kUnset) slot = greedy(t, s);
    return slot;
  }

  FiniteHorizonPolicy materialize() {
    FiniteHorizonPolicy pi;
    pi.steps.resize(static_cast<std::size_t>(period_ - 1));
    for (int t = 1; t <= period_ - 1; ++t) {
      auto& step = pi.steps[static_cast<std::size_t>(t - 1)];
      step.actions.resize(mdp_->n_states());
      for (Index s = 0; s < mdp_->n_states(); ++s) step.actions[s] = action(t, s);
    }
    return pi;
  }

 private:
  static constexpr Index kUnset = std::numeric_limits<Index>::max();

  Index greedy(int t, Index s) const {
    const Index x = mdp_->slow_of(s), y = mdp_->fast_of(s);
    const std::size_t base = static_cast<std::size_t>(x) * mdp_->n_fast();
    double best = -std::numeric_limits<double>::infinity();
    Index best_a = 0;
    for (Index a = 0; a < mdp_->n_actions(); ++a) {
      double exp_v = 0.0;
      for (const auto& e : mdp_->frozen_row(x, y, a))
        exp_v += e.prob * value_of_(t + 1, static_cast<Index>(base + e.succ));
      const double q = mdp_->reward(x, y, a) + mdp_->gamma() * exp_v;
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    return best_a;
  }

  const FastSlowMdp* mdp_;
  int period_;
  std::function<double(int, Index)> value_of_;
  std::vector<std::vector<Index>> metered_;
  std::vector<std::vector<Index>> extraction_;
};

// Shared upper level: simulated T-step returns of the lazy lower policy
// (sampled mode) or exact composed expectations (paths == 0).
struct UpperLevelInputs {
  const FastSlowMdp* mdp;
  const FeatureModel* fm_upper;
  int period;
  int iterations;
  SimSpec sim;
  std::uint64_t seed;
  const SolveOptions* opt;
  std::function<double(Index)> j1_value;
};

void run_fsavi_upper(const UpperLevelInputs& in, LazyLowerPolicy& lower, FsaviResult& out) {
  const FastSlowMdp& mdp = *in.mdp;
  const FeatureModel& fm = *in.fm_upper;
  const Index m = fm.num_features();
  const Index n = mdp.n_states();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  const double gamma_t = std::pow(gamma, in.period);

  out.weights.beta.assign(m, 0.0);

  if (in.sim.paths <= 0) {
    // Exact mode: compose the T-step kernel of the materialized lower policy.
    const FiniteHorizonPolicy pi = lower.materialize();
    const Exec ex{in.opt->workers};
    const TStepKernel tk = compose_t_step(mdp, pi, in.period, ex);
    out.trace.events.push_back(
        {CostStage::Compose, static_cast<std::uint64_t>(n) * n * in.period});
    std::vector<double> j1_full(n);
    for (Index s = 0; s < n; ++s) j1_full[s] = in.j1_value(s);

    for (int it = 1; it <= in.iterations; ++it) {
      const std::vector<double> v_full = fm.expand(out.weights.beta);
      const std::vector<double> u = tk.propagate(v_full, ex);
      std::vector<double> anchor_vals(m, 0.0);
      parallel_for(0, m, in.opt->workers, [&](std::size_t j) {
        const Index s = fm.anchors()[j];
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < n_actions; ++a) {
          double exp_j = 0.0, exp_u = 0.0;
          for (const auto& e : mdp.joint_row(s, a)) {
            exp_j += e.prob * j1_full[e.succ];
            exp_u += e.prob * u[e.succ];
          }
          best = std::max(best, mdp.reward_sa(s, a) + gamma * exp_j + gamma_t * exp_u);
        }
        anchor_vals[j] = best;
      });
      out.weights.beta = project_anchor_values(fm, anchor_vals);
      out.trace.events.push_back(
          {CostStage::FsaviUpper, static_cast<std::uint64_t>(m) * n_actions * n});
      if (in.opt->trace.record_snapshots) {
        const std::vector<double> v_snap = fm.expand(out.weights.beta);
        TPeriodicPolicy snap{backup_upper(v_snap, j1_full, tk, mdp, in.period, ex).policy, pi,
                             in.period};
        out.trace.snapshots.push_back({out.trace.total_cost(), AnyPolicy{std::move(snap)}});
      }
    }
    const std::vector<double> v_final = fm.expand(out.weights.beta);
    out.policy.mu = backup_upper(v_final, j1_full, tk, mdp, in.period, Exec{in.opt->workers}).policy;
    out.policy.pi = pi;
    out.policy.period = in.period;
    return;
  }

  // Sampled mode. The anchor loop is serial so that lower-policy cache
  // misses are metered identically for any worker count.
  const int paths = in.sim.paths;
  auto simulated_q = [&](Index s0, Index a, const std::vector<double>& beta,
                         const RandomStream& stream, std::uint64_t block,
                         std::uint64_t& miss_units) {
    double acc = 0.0;
    for (int p = 0; p < paths; ++p) {
      Index s = mdp.sample_joint(s0, a, stream.uniform(block, static_cast<std::uint64_t>(p), 0));
      double val = mdp.reward_sa(s0, a) + gamma * in.j1_value(s);
      for (int t = 1; t <= in.period - 1; ++t) {
        const Index at = lower.action_metered(t, s, miss_units);
        s = mdp.sample_joint(s, at,
                             stream.uniform(block, static_cast<std::uint64_t>(p),
                                            static_cast<std::uint64_t>(t)));
      }
      val += gamma_t * fm.value_at(s, beta);
      acc += val;
    }
    return acc / paths;
  };

  auto greedy_everywhere = [&](const std::vector<double>& beta, std::uint64_t tag) {
    const RandomStream stream = RandomStream::from(in.seed, 0xF5A1, tag);
    StationaryPolicy pol;
    pol.actions.resize(n);
    for (Index s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      Index best_a = 0;
      for (Index a = 0; a < n_actions; ++a) {
        // Extraction uses the unmetered cache path for lower actions; the
        // draws are common across actions.
        double acc = 0.0;
        for (int p = 0; p < paths; ++p) {
          Index sp = mdp.sample_joint(s, a, stream.uniform(s, static_cast<std::uint64_t>(p), 0));
          double val = mdp.reward_sa(s, a) + gamma * in.j1_value(sp);
          for (int t = 1; t <= in.period - 1; ++t) {
            const Index at = lower.action(t, sp);
            sp = mdp.sample_joint(sp, at,
                                  stream.uniform(s, static_cast<std::uint64_t>(p),
                                                 static_cast<std::uint64_t>(t)));
          }
          val += gamma_t * fm.value_at(sp, beta);
          acc += val;
        }
        const double q = acc / paths;
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      pol.actions[s] = best_a;
    }
    return pol;
  };

  const RandomStream train_stream = RandomStream::from(in.seed, 0xF5B2, 0);
  for (int it = 1; it <= in.iterations; ++it) {
    std::vector<double> anchor_vals(m, 0.0);
    std::uint64_t miss_units = 0;
    for (Index j = 0; j < m; ++j) {
      const Index s0 = fm.anchors()[j];
      double best = -std::numeric_limits<double>::infinity();
      for (Index a = 0; a < n_actions; ++a)
        best = std::max(best, simulated_q(s0, a, out.weights.beta, train_stream,
                                          static_cast<std::uint64_t>(j), miss_units));
      anchor_vals[j] = best;
    }
    out.weights.beta = project_anchor_values(fm, anchor_vals);
    out.trace.events.push_back(
        {CostStage::FsaviUpper,
         static_cast<std::uint64_t>(m) * n_actions * static_cast<std::uint64_t>(paths) *
             static_cast<std::uint64_t>(in.period)});
    if (miss_units > 0) out.trace.events.push_back({CostStage::PolicyEval, miss_units});
    if (in.opt->trace.record_snapshots) {
      TPeriodicPolicy snap{greedy_everywhere(out.weights.beta,
                                             0x5AA9 + static_cast<std::uint64_t>(it)),
                           lower.materialize(), in.period};
      out.trace.snapshots.push_back({out.trace.total_cost(), AnyPolicy{std::move(snap)}});
    }
  }
  out.policy.mu = greedy_everywhere(out.weights.beta, 0xF17A);
  out.policy.pi = lower.materialize();
  out.policy.period = in.period;
}

}  // namespace

FsaviResult fsavi(const FastSlowMdp& mdp, const FeatureModel& fm, int period, int iterations,
                  const SimSpec& sim, std::uint64_t seed, const SolveOptions& opt) {
  if (period < 1 || iterations < 1)
    throw std::invalid_argument("fsavi needs period >= 1 and iterations >= 1");
  if (fm.num_states() != mdp.n_states())
    throw std::invalid_argument("feature model does not match the state space");
  const Index m = fm.num_features();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();

  FsaviResult out;
  // Lower-level anchored backward induction with exact frozen expectations.
  out.weights.omega.assign(static_cast<std::size_t>(period), std::vector<double>(m, 0.0));
  for (int t = period - 1; t >= 1; --t) {
    const std::vector<double>& w_next = out.weights.omega[static_cast<std::size_t>(t)];
    std::vector<double> anchor_vals(m, 0.0);
    parallel_for(0, m, opt.workers, [&](std::size_t j) {
      const Index s = fm.anchors()[j];
      const Index x = mdp.slow_of(s), y = mdp.fast_of(s);
      const std::size_t base = static_cast<std::size_t>(x) * mdp.n_fast();
      double best = -std::numeric_limits<double>::infinity();
      for (Index a = 0; a < n_actions; ++a) {
        double exp_v = 0.0;
        for (const auto& e : mdp.frozen_row(x, y, a))
          exp_v += e.prob * fm.value_at(static_cast<Index>(base + e.succ), w_next);
        best = std::max(best, mdp.reward(x, y, a) + gamma * exp_v);
      }
      anchor_vals[j] = best;
    });
    out.weights.omega[static_cast<std::size_t>(t - 1)] = project_anchor_values(fm, anchor_vals);
    out.trace.events.push_back(
        {CostStage::FsaviLower, static_cast<std::uint64_t>(m) * n_actions * mdp.n_fast()});
  }

  LazyLowerPolicy lower(mdp, period, [&out, &fm, period](int t, Index s) {
    if (t >= period + 1) return 0.0;
    return fm.value_at(s, out.weights.omega[static_cast<std::size_t>(t - 1)]);
  });

  UpperLevelInputs up{&mdp,  &fm,  period, iterations, sim,
                      seed,  &opt, [&](Index s) {
                        return fm.value_at(s, out.weights.omega.front());
                      }};
  run_fsavi_upper(up, lower, out);
  out.trace.final_tables.emplace_back("beta", out.weights.beta);
  out.trace.final_tables.emplace_back("omega1", out.weights.omega.front());
  return out;
}

FsaviResult nominal_fsavi(const FastSlowMdp& mdp, const FeatureModel& fm_upper,
                          const FeatureModel& fm_y, int period, int iterations,
                          const std::vector<Index>& nominal_xs,
                          const NominalDecomposition& decomp, const SimSpec& sim,
                          std::uint64_t seed, const SolveOptions& opt) {
  if (period < 1 || iterations < 1)
    throw std::invalid_argument("nominal_fsavi needs period >= 1 and iterations >= 1");
  if (fm_upper.num_states() != mdp.n_states() || fm_y.num_states() != mdp.n_fast())
    throw std::invalid_argument("feature models do not match the state spaces");
  decomp.validate(mdp, nominal_xs);
  const Index m_y = fm_y.num_features();
  const Index n_actions = mdp.n_actions();
  const Index n_fast = mdp.n_fast();
  const double gamma = mdp.gamma();
  const bool additive = decomp.mode == NominalDecomposition::Mode::Additive;

  FsaviResult out;
  // Per-nominal lower weights over y-features.
  std::vector<std::vector<std::vector<double>>> omega(
      nominal_xs.size(),
      std::vector<std::vector<double>>(static_cast<std::size_t>(period),
                                       std::vector<double>(m_y, 0.0)));
  for (std::size_t slot = 0; slot < nominal_xs.size(); ++slot) {
    const Index xs = nominal_xs[slot];
    for (int t = period - 1; t >= 1; --t) {
      const std::vector<double>& w_next = omega[slot][static_cast<std::size_t>(t)];
      std::vector<double> anchor_vals(m_y, 0.0);
      parallel_for(0, m_y, opt.workers, [&](std::size_t j) {
        const Index y = fm_y.anchors()[j];
        double best = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < n_actions; ++a) {
          double exp_v = 0.0;
          for (const auto& e : mdp.frozen_row(xs, y, a))
            exp_v += e.prob * fm_y.value_at(e.succ, w_next);
          const double model_r =
              additive ? decomp.g[xs] + decomp.h_additive(y, a, n_actions)
                       : decomp.g[xs] * decomp.h_multiplicative(slot, y, a, n_fast, n_actions);
          best = std::max(best, model_r + gamma * exp_v);
        }
        anchor_vals[j] = best;
      });
      omega[slot][static_cast<std::size_t>(t - 1)] = project_anchor_values(fm_y, anchor_vals);
      out.trace.events.push_back(
          {CostStage::FsaviLower, static_cast<std::uint64_t>(m_y) * n_actions * n_fast});
    }
  }

  // Extended lower value at any (t, state) via the decomposition correction.
  const std::vector<Index> assign = nearest_nominal(mdp, nominal_xs);
  auto geom = [&](int t) {
    double acc = 0.0, pw = 1.0;
    for (int i = 0; i <= period - t - 1; ++i) {
      acc += pw;
      pw *= gamma;
    }
    return acc;
  };
  std::vector<double> geom_by_t(static_cast<std::size_t>(period + 2), 0.0);
  for (int t = 1; t <= period; ++t) geom_by_t[static_cast<std::size_t>(t)] = geom(t);
  auto j_value = [&, assign](int t, Index s) {
    if (t > period) return 0.0;
    const Index x = mdp.slow_of(s), y = mdp.fast_of(s);
    const std::size_t slot = assign[x];
    const Index xs = nominal_xs[slot];
    const double base = fm_y.value_at(y, omega[slot][static_cast<std::size_t>(t - 1)]);
    return additive ? geom_by_t[static_cast<std::size_t>(t)] * (decomp.g[x] - decomp.g[xs]) + base
                    : (decomp.g[x] / decomp.g[xs]) * base;
  };

  LazyLowerPolicy lower(mdp, period, j_value);
  UpperLevelInputs up{&mdp, &fm_upper, period,
                      iterations, sim, seed, &opt,
                      [&](Index s) { return j_value(1, s); }};
  run_fsavi_upper(up, lower, out);
  out.weights.omega = omega.front();  // weights of the first nominal slot
  out.trace.final_tables.emplace_back("beta", out.weights.beta);
  return out;
}

}  // namespace fsmdp
