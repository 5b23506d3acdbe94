#pragma once

#include <cstdint>
#include <vector>

#include "fsmdp/mdp.hpp"
#include "fsmdp/parallel.hpp"
#include "fsmdp/rng.hpp"

namespace fsmdp {

/// Action chosen by any policy kind at a given step of an episode.
Index policy_action(const AnyPolicy& policy, const FastSlowMdp& mdp, Index state,
                    std::uint64_t step);

/// Samples one successor from a sparse row given a uniform draw.
Index sample_row(const KernelRow& row, double u);

/// Per-episode discounted returns under the true joint dynamics. Start states
/// are uniform; episode e, step t consume draws keyed by (seed, e, t), so the
/// result is independent of evaluation order and worker count.
std::vector<double> simulate_returns(const FastSlowMdp& mdp, const AnyPolicy& policy, int horizon,
                                     int episodes, std::uint64_t seed, const Exec& ex = {});

/// Mean discounted return per seed; seed i uses stream (seed0, i).
std::vector<double> evaluate_policy(const FastSlowMdp& mdp, const AnyPolicy& policy, int horizon,
                                    int episodes_per_seed, int n_seeds, std::uint64_t seed0,
                                    const Exec& ex = {});

}  // namespace fsmdp
