#pragma once

#include <cstdint>
#include <vector>

#include "fsmdp/mdp.hpp"
#include "fsmdp/solvers.hpp"

namespace fsmdp {

//===========================================================================
// Two-class service allocation with stochastic holding costs
//===========================================================================

struct QueueParams {
  double arrival_rate_1 = 0.2;
  double arrival_rate_2 = 0.2;
  double service_rate_1 = 0.3;
  double service_rate_2 = 0.3;
  int capacity_1 = 3;
  int capacity_2 = 3;
  int cost_levels = 6;
  double cost_low = 0.01;
  double cost_high = 0.2;
  double cost_stay = 0.9;
  double cost_up = 0.05;
  double cost_down = 0.05;
  double gamma = 0.95;

  void validate() const;
  std::vector<double> cost_ladder() const;
};

/// Slow state (x1,x2): per-queue holding costs on the ladder. Fast state
/// (y1,y2,z): queue lengths and the class in service (0 = idle). The action
/// is read only at completion or idle epochs.
FastSlowMdp make_queue_env(const QueueParams& p = {});

/// 3 ladder levels per dimension, equally spaced: 9 nominal slow states.
std::vector<Index> queue_nominal_states(const FastSlowMdp& mdp, int per_dimension = 3);

/// Multiplicative decomposition g(x) = x1 + x2, h(x*,y,a) = r(x*,y,a)/g(x*).
NominalDecomposition queue_nominal_decomposition(const FastSlowMdp& mdp,
                                                 const std::vector<Index>& nominal_xs);

//===========================================================================
// Restless two-armed bandit with an environmental state
//===========================================================================

struct BanditParams {
  int env_levels = 25;
  // P(env moves by -2,-1,0,+1,+2); exiting mass folds onto the boundary.
  double walk_probs[5] = {0.05, 0.15, 0.6, 0.15, 0.05};
  // P(arm is non-operational next period), by (current y, action), at the
  // two extreme environment states; linear interpolation in between.
  double stay_bad_no_int_at_0 = 0.99, stay_bad_no_int_at_max = 0.95;
  double stay_bad_int_at_0 = 0.5, stay_bad_int_at_max = 0.01;
  double break_no_int_at_0 = 0.7, break_no_int_at_max = 0.1;
  double break_int_at_0 = 0.2, break_int_at_max = 0.01;
  double operational_reward = 2.0;
  double intervention_cost = 1.0;
  double gamma = 0.95;

  void validate() const;
};

/// Slow state: environment level 0..24. Fast state: (y1,y2) in {0,1}^2.
/// Actions: (a1,a2) in {0,1}^2. Arms conditionally independent given x.
FastSlowMdp make_bandit_env(const BanditParams& p = {});

std::vector<Index> bandit_nominal_states(const FastSlowMdp& mdp, int count = 5);

/// Additive with g == 0: the reward is slow-state free, so zeta = 0.
NominalDecomposition bandit_nominal_decomposition(const FastSlowMdp& mdp);

//===========================================================================
// Energy demand response
//===========================================================================

struct DemandResponseParams {
  double ou_c1 = 0.2237;
  double ou_c2 = 21.4095;
  double price_low = 10.0;
  double price_high = 30.0;
  double price_step = 0.1;
  double da_noise_std = 1.0;
  int rt_levels = 10;
  double rt_under_low = 0.5, rt_under_high = 0.8;    // y- (shortage factor)
  double rt_over_low = 1.05, rt_over_high = 1.25;    // y+ (overage factor)
  std::vector<double> bids = {10, 12, 14, 16, 18, 20};
  std::vector<double> alphas = {0.1, 0.275, 0.45, 0.625, 0.8};
  double b11 = 1.72, b12 = 0.55, b21 = 5.87, b22 = 0.26;
  double demand_noise_std = 0.5;
  int demand_noise_cells = 21;  // equiprobable cells per customer
  double gamma = 0.95;

  void validate() const;
  int price_levels() const;
  std::vector<double> price_grid() const;
  std::vector<double> rt_under_grid() const;
  std::vector<double> rt_over_grid() const;
};

/// Slow state: day-ahead price on a 0.1 grid (mean-reverting, clipped
/// discretized normal noise). Fast state: (y-, y+) indices, redrawn
/// uniformly each period. Action: (bid, alpha1, alpha2). The reward's
/// expectations over demand noise are summed exactly over the discretized
/// product grid.
FastSlowMdp make_demand_response_env(const DemandResponseParams& p = {});

std::vector<Index> demand_response_nominal_states(const FastSlowMdp& mdp, int count = 5);

/// Multiplicative decomposition with g(x) = x.
NominalDecomposition demand_response_nominal_decomposition(const FastSlowMdp& mdp,
                                                           const std::vector<Index>& nominal_xs);

/// Reward recomputed for one (x,y,a) by Monte Carlo over continuous demand
/// noise; returns (mean, standard error). Oracle for the tabulated reward.
std::pair<double, double> demand_response_reward_mc(const DemandResponseParams& p, double price,
                                                    double rt_under, double rt_over, double bid,
                                                    double alpha1, double alpha2, int draws,
                                                    std::uint64_t seed);

//===========================================================================
// Random fast-slow fixtures
//===========================================================================

struct RandomFastSlowSpec {
  int n_slow = 3;
  int n_fast = 4;
  int n_actions = 2;
  double alpha = 0.1;   // slow jump bound, as a fraction of d_y
  double d_y = 10.0;    // fast jump bound (integer grid units)
  enum class RewardMode { Generic, Factored } reward_mode = RewardMode::Generic;
  double zeta = 0.0;    // factored-mode reward perturbation magnitude
  bool x_free = false;  // dynamics and rewards independent of the slow state
  double gamma = 0.9;
};

/// States live on integer grids; one-step slow jumps are bounded by
/// alpha*d_y and fast jumps by d_y in Euclidean norm. Factored mode draws
/// r = g(x) + h(y,a) + uniform noise within [-zeta, zeta].
FastSlowMdp make_random_fastslow(std::uint64_t seed, const RandomFastSlowSpec& spec);

}  // namespace fsmdp
