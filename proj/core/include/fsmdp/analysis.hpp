#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsmdp/mdp.hpp"
#include "fsmdp/solvers.hpp"

namespace fsmdp {

//===========================================================================
// Lipschitz and fast-slow constant estimation
//===========================================================================

struct LipschitzEstimates {
  double l_r = 0.0;
  double l_f = 0.0;
  double l_u = 0.0;
  std::string method;      // "empirical", "prop_bound", "declared"
  std::string l_f_mode;    // "w1_exact_1d" or "w1_greedy_bound"
  std::size_t pairs_used = 0;
};

struct LipschitzOptions {
  std::size_t max_pairs = 200000;  // sample beyond this many pairs
  std::uint64_t seed = 0;
  bool prefer_value_bound = true;  // use L_r/(1 - gamma L_f) when it applies
};

/// Empirical L_r maximizes |dr| / ||d(s,a)||. L_f is a transport surrogate:
/// the W1 distance between successor distributions over state coordinates
/// divided by ||d(s,a)|| (exact quantile coupling in 1-D, a feasible greedy
/// plan otherwise, which upper-bounds W1). L_U uses L_r/(1 - gamma L_f)
/// when gamma L_f < 1, else the spread of a converged value table.
LipschitzEstimates estimate_lipschitz(const FastSlowMdp& mdp, const LipschitzOptions& opt = {});

/// Lipschitz constant of the optimal value when gamma * l_f < 1.
double value_lipschitz_bound(double l_r, double l_f, double gamma);

struct FastSlowConstants {
  double alpha = 0.0;
  double d_y = 0.0;
};

/// Largest one-step jumps realized by the kernel support.
FastSlowConstants measure_fast_slow(const FastSlowMdp& mdp);

//===========================================================================
// Bound calculators
//===========================================================================

struct BoundInputs {
  double gamma = 0.9;
  double alpha = 0.0;
  double d_y = 0.0;
  int period = 1;  // T
  long iterations = 0;  // k
  double l_r = 0.0, l_f = 0.0, l_u = 0.0;
  double r_max = 0.0;
  double zeta = 0.0;
  double max_nominal_distance = 0.0;  // max_x ||x* - x||
  double kappa = 1.0;
  double eps_low = 0.0, eps_up = 0.0;

  void validate() const;
};

struct BoundReport {
  std::vector<std::pair<std::string, double>> terms;
  double value = 0.0;
};

/// Reward approximation error of freezing for T periods.
double reward_gap_bound(const BoundInputs& in);
/// End-of-horizon state discrepancy d(alpha, d_y, T) = 2 d_y (alpha+1)(T-1).
double end_horizon_distance(const BoundInputs& in);

double regret_bound_fsvi(const BoundInputs& in);
double regret_bound_nominal(const BoundInputs& in);
double regret_bound_fsavi(const BoundInputs& in);

BoundReport regret_bound_fsvi_report(const BoundInputs& in);
BoundReport regret_bound_nominal_report(const BoundInputs& in);
BoundReport regret_bound_fsavi_report(const BoundInputs& in);

/// ||V^k - V*|| <= gamma^k r_max / (1 - gamma).
double vi_value_gap_bound(double gamma, double r_max, long k);
/// Regret of the policy greedy after k sweeps: 2 r_max gamma^{k+1}/(1-gamma)^2.
double vi_policy_regret_bound(double gamma, double r_max, long k);

/// Nominal lower-level value gap |J-bar_t - J*_t| at lag T - t, evaluated at
/// the same state (optional extra distances cover the general statement).
double nominal_value_gap_bound(const BoundInputs& in, int t, double dist_x_nominal,
                               double dist_x = 0.0, double dist_y = 0.0);

//===========================================================================
// Exact policy evaluation and regret
//===========================================================================

/// Solves (I - gamma P_pi) U = r_pi directly.
std::vector<double> evaluate_stationary_exact(const FastSlowMdp& mdp,
                                              const StationaryPolicy& policy);
std::vector<double> evaluate_fast_exact(const FastSlowMdp& mdp, const FastPolicy& policy);
/// Period-start value of the T-periodic policy via the T-block linear system.
std::vector<double> evaluate_t_periodic_exact(const FastSlowMdp& mdp,
                                              const TPeriodicPolicy& policy);
std::vector<double> evaluate_policy_exact(const FastSlowMdp& mdp, const AnyPolicy& policy);

struct OptimalSolution {
  ValueTable values;          // fixed point to the requested residual
  StationaryPolicy policy;    // greedy policy
  ValueTable policy_values;   // exact evaluation of that policy
  double residual = 0.0;
  int iterations = 0;
};

OptimalSolution solve_optimal(const FastSlowMdp& mdp, double residual = 1e-12,
                              int max_iterations = 1000000);

/// max_s U^{nu*}(s) - U^{policy}(s), both sides exact.
double measured_regret(const FastSlowMdp& mdp, const AnyPolicy& policy,
                       const OptimalSolution& reference);

/// ||U* - Ubar^{nu*}||_inf: the stationary optimum re-evaluated T-periodically.
double check_hierarchical_equivalence(const FastSlowMdp& mdp, int period,
                                      double residual = 1e-12);

}  // namespace fsmdp
