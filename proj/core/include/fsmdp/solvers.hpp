#pragma once

#include <cstdint>
#include <vector>

#include "fsmdp/backup.hpp"
#include "fsmdp/mdp.hpp"
#include "fsmdp/trace.hpp"

namespace fsmdp {

struct VIResult {
  ValueTable values;
  StationaryPolicy policy;
  SolveTrace trace;
};

/// k synchronous sweeps of the base Bellman operator from v0.
VIResult exact_vi(const FastSlowMdp& mdp, int iterations, ValueTable v0,
                  const SolveOptions& opt = {});

struct LowerSolveResult {
  LowerValueSeq values;          // J_1..J_T, J_T == 0
  FiniteHorizonPolicy policy;    // greedy pi_1..pi_{T-1}
  SolveTrace trace;
};

/// Backward induction of the frozen lower level from J_T == 0. Slow states
/// are independent subproblems; output does not depend on worker count.
LowerSolveResult solve_lower_frozen(const FastSlowMdp& mdp, int period,
                                    const SolveOptions& opt = {});

struct FsviResult {
  TPeriodicPolicy policy;
  ValueTable upper_values;
  ValueTable j1;
  SolveTrace trace;
};

/// Frozen-state value iteration: lower solve, T-step composition, then k
/// upper sweeps from V == 0.
FsviResult fsvi(const FastSlowMdp& mdp, int period, int iterations,
                const SolveOptions& opt = {});

/// Reward decomposition r(x,y,a) ~ g(x) + h(y,a) (additive) or
/// r(x,y,a) ~ g(x) * h(x*,y,a) (multiplicative, h per nominal slot).
struct NominalDecomposition {
  enum class Mode { Additive, Multiplicative };
  Mode mode = Mode::Additive;
  std::vector<double> g;  // over x
  std::vector<double> h;  // additive: (y,a); multiplicative: (slot,y,a)
  double zeta = 0.0;

  double h_additive(Index y, Index a, Index n_actions) const {
    return h[static_cast<std::size_t>(y) * n_actions + a];
  }
  double h_multiplicative(std::size_t slot, Index y, Index a, Index n_fast,
                          Index n_actions) const {
    return h[(slot * n_fast + y) * n_actions + a];
  }

  /// Additive mode verifies |g+h-r| <= zeta everywhere; multiplicative mode
  /// requires g(x*) != 0 for every nominal state.
  void validate(const FastSlowMdp& mdp, const std::vector<Index>& nominal_xs) const;
};

NominalDecomposition make_additive_decomposition(const FastSlowMdp& mdp,
                                                 std::vector<double> g,
                                                 std::vector<double> h);

/// h(x*,y,a) = r(x*,y,a) / g(x*) so that the model is exact at each nominal.
NominalDecomposition make_multiplicative_decomposition(const FastSlowMdp& mdp,
                                                       const std::vector<Index>& nominal_xs,
                                                       std::vector<double> g);

/// Index of the nominal state nearest to each slow state (Euclidean,
/// ties to the lower slot).
std::vector<Index> nearest_nominal(const FastSlowMdp& mdp, const std::vector<Index>& nominal_xs);

/// Lower level solved only at the nominal slow states, then extended to all
/// x by the decomposition correction. The returned tables cover every state.
LowerSolveResult build_nominal_lower(const FastSlowMdp& mdp, int period,
                                     const std::vector<Index>& nominal_xs,
                                     const NominalDecomposition& decomp,
                                     const SolveOptions& opt = {});

FsviResult nominal_fsvi(const FastSlowMdp& mdp, int period, int iterations,
                        const std::vector<Index>& nominal_xs, const NominalDecomposition& decomp,
                        const SolveOptions& opt = {});

struct FastVIResult {
  std::vector<double> values;  // over y
  FastPolicy policy;
  SolveTrace trace;
};

/// k sweeps of the slow-agnostic operator from W == 0.
FastVIResult slow_agnostic_vi(const FastSlowMdp& mdp, int iterations,
                              const SolveOptions& opt = {});

struct QLearningOptions {
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;    // reached after half the budget
  double learning_rate_power = 0.6;  // step size n^-p on the (s,a) visit count
  int episode_length = 100;     // restart from a uniform state this often
};

struct QLearningResult {
  StationaryPolicy policy;
  std::vector<double> q;  // (s,a) row-major
  SolveTrace trace;
};

/// Tabular Q-learning on transitions simulated from the true kernel.
/// Exact Q ties are broken by a seed-fixed per-state preference order, so a
/// zero-step budget returns a uniform-random policy.
QLearningResult q_learning(const FastSlowMdp& mdp, std::uint64_t step_budget,
                           const QLearningOptions& hyper, std::uint64_t seed,
                           const SolveOptions& opt = {});

}  // namespace fsmdp
