#pragma once

#include <cstdint>
#include <vector>

#include "fsmdp/features.hpp"
#include "fsmdp/mdp.hpp"
#include "fsmdp/solvers.hpp"
#include "fsmdp/trace.hpp"

namespace fsmdp {

/// Expectation handling for the sampled Bellman updates. succ_samples == 0
/// switches to exact expectations over the full kernel row. Sampling uses
/// common random numbers across actions at the same (state, iteration).
struct AviOptions {
  int succ_samples = 40;
  SolveOptions solve;
};

struct AviResult {
  StationaryPolicy policy;
  std::vector<double> weights;  // beta
  SolveTrace trace;
};

/// Approximate VI on the base model: the Bellman maximization is evaluated
/// at anchors only and projected back to weights each iteration.
AviResult avi_base(const FastSlowMdp& mdp, const FeatureModel& fm, int iterations,
                   const AviOptions& opt, std::uint64_t seed);

struct FastAviResult {
  FastPolicy policy;
  std::vector<double> weights;
  SolveTrace trace;
};

/// Approximate VI on the slow-agnostic operator with features over Y only.
FastAviResult avi_slow_agnostic(const FastSlowMdp& mdp, const FeatureModel& fm_y, int iterations,
                                const AviOptions& opt, std::uint64_t seed);

/// Upper-level simulation budget: `paths` lower-policy rollouts of length T
/// per (anchor, action). paths == 0 requests exact expectations through the
/// composed T-step kernel (small instances only).
struct SimSpec {
  int paths = 25;
};

struct WeightSeq {
  std::vector<std::vector<double>> omega;  // omega_1..omega_T, omega_T == 0
  std::vector<double> beta;
};

struct FsaviResult {
  TPeriodicPolicy policy;
  WeightSeq weights;
  SolveTrace trace;
};

/// Frozen-state approximate value iteration: lower weights by anchored
/// backward induction with exact frozen expectations, upper weights by
/// simulated T-step returns of the greedy lower policy.
FsaviResult fsavi(const FastSlowMdp& mdp, const FeatureModel& fm, int period, int iterations,
                  const SimSpec& sim, std::uint64_t seed, const SolveOptions& opt = {});

/// Nominal FSAVI: the lower level is approximated per nominal slow state
/// over y-features only and extended by the decomposition correction; the
/// upper level runs exactly like fsavi on `fm_upper`.
FsaviResult nominal_fsavi(const FastSlowMdp& mdp, const FeatureModel& fm_upper,
                          const FeatureModel& fm_y, int period, int iterations,
                          const std::vector<Index>& nominal_xs,
                          const NominalDecomposition& decomp, const SimSpec& sim,
                          std::uint64_t seed, const SolveOptions& opt = {});

}  // namespace fsmdp
