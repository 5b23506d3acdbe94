#include "fsmdp/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fsmdp/backup.hpp"
#include "fsmdp/rng.hpp"

namespace fsmdp {
namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d2);
}

struct WeightedPoint {
  const std::vector<double>* coords;
  double mass;
};

// Feasible transport cost between two successor distributions over state
// coordinates. Exact (quantile coupling) when coordinates are scalar; a
// sorted greedy plan otherwise, which upper-bounds W1.
double transport_cost(std::vector<WeightedPoint> a, std::vector<WeightedPoint> b) {
  auto by_coords = [](const WeightedPoint& l, const WeightedPoint& r) {
    return *l.coords < *r.coords;
  };
  std::sort(a.begin(), a.end(), by_coords);
  std::sort(b.begin(), b.end(), by_coords);
  double cost = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(a[i].mass, b[j].mass);
    cost += m * euclid(*a[i].coords, *b[j].coords);
    a[i].mass -= m;
    b[j].mass -= m;
    if (a[i].mass <= 1e-15) ++i;
    if (b[j].mass <= 1e-15) ++j;
  }
  return cost;
}

Eigen::MatrixXd policy_matrix(const FastSlowMdp& mdp, const StationaryPolicy& policy) {
  const Index n = mdp.n_states();
  Eigen::MatrixXd pmat = Eigen::MatrixXd::Zero(n, n);
  for (Index s = 0; s < n; ++s)
    for (const auto& e : mdp.joint_row(s, policy.actions[s])) pmat(s, e.succ) += e.prob;
  return pmat;
}

Eigen::VectorXd policy_reward(const FastSlowMdp& mdp, const StationaryPolicy& policy) {
  const Index n = mdp.n_states();
  Eigen::VectorXd r(n);
  for (Index s = 0; s < n; ++s) r(s) = mdp.reward_sa(s, policy.actions[s]);
  return r;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

StationaryPolicy lift_fast_policy(const FastSlowMdp& mdp, const FastPolicy& policy) {
  StationaryPolicy out;
  out.actions.resize(mdp.n_states());
  for (Index s = 0; s < mdp.n_states(); ++s) out.actions[s] = policy.actions[mdp.fast_of(s)];
  return out;
}

}  // namespace

//===========================================================================
// Lipschitz estimation
//===========================================================================

double value_lipschitz_bound(double l_r, double l_f, double gamma) {
  if (gamma * l_f >= 1.0)
    throw std::invalid_argument("value Lipschitz bound needs gamma * L_f < 1, got " +
                                std::to_string(gamma * l_f));
  return l_r / (1.0 - gamma * l_f);
}

LipschitzEstimates estimate_lipschitz(const FastSlowMdp& mdp, const LipschitzOptions& opt) {
  const Index n = mdp.n_states();
  const Index n_actions = mdp.n_actions();
  const std::size_t n_sa = static_cast<std::size_t>(n) * n_actions;

  std::vector<std::vector<double>> state_coords(n);
  for (Index s = 0; s < n; ++s) state_coords[s] = mdp.state_coords(s);
  const std::size_t coord_dim = state_coords.front().size();

  auto pair_coords = [&](std::size_t sa) {
    const Index s = static_cast<Index>(sa / n_actions);
    const Index a = static_cast<Index>(sa % n_actions);
    std::vector<double> c = state_coords[s];
    const auto& ac = mdp.action_coords()[a];
    c.insert(c.end(), ac.begin(), ac.end());
    return c;
  };

  LipschitzEstimates out;
  out.method = "empirical";
  out.l_f_mode = coord_dim == 1 ? "w1_exact_1d" : "w1_greedy_bound";

  auto successor_points = [&](std::size_t sa) {
    const Index s = static_cast<Index>(sa / n_actions);
    const Index a = static_cast<Index>(sa % n_actions);
    std::vector<WeightedPoint> pts;
    for (const auto& e : mdp.joint_row(s, a)) pts.push_back({&state_coords[e.succ], e.prob});
    return pts;
  };

  auto consider = [&](std::size_t sa1, std::size_t sa2) {
    if (sa1 == sa2) return;
    const std::vector<double> c1 = pair_coords(sa1);
    const std::vector<double> c2 = pair_coords(sa2);
    const double dist = euclid(c1, c2);
    if (dist <= 0.0) return;
    const Index s1 = static_cast<Index>(sa1 / n_actions), a1 = static_cast<Index>(sa1 % n_actions);
    const Index s2 = static_cast<Index>(sa2 / n_actions), a2 = static_cast<Index>(sa2 % n_actions);
    const double dr = std::abs(mdp.reward_sa(s1, a1) - mdp.reward_sa(s2, a2));
    out.l_r = std::max(out.l_r, dr / dist);
    const double w1 = transport_cost(successor_points(sa1), successor_points(sa2));
    out.l_f = std::max(out.l_f, w1 / dist);
    ++out.pairs_used;
  };

  if (n_sa * n_sa <= opt.max_pairs) {
    for (std::size_t i = 0; i < n_sa; ++i)
      for (std::size_t j = i + 1; j < n_sa; ++j) consider(i, j);
  } else {
    const RandomStream stream = RandomStream::from(opt.seed, 0x11F5, 6);
    for (std::size_t k = 0; k < opt.max_pairs; ++k) {
      const std::size_t i = static_cast<std::size_t>(stream.uniform(k, 0) * n_sa);
      const std::size_t j = static_cast<std::size_t>(stream.uniform(k, 1) * n_sa);
      consider(std::min(i, n_sa - 1), std::min(j, n_sa - 1));
    }
  }

  if (opt.prefer_value_bound && mdp.gamma() * out.l_f < 1.0) {
    out.l_u = value_lipschitz_bound(out.l_r, out.l_f, mdp.gamma());
    out.method = "prop_bound";
  } else {
    const OptimalSolution ref = solve_optimal(mdp, 1e-10);
    double worst = 0.0;
    for (Index s1 = 0; s1 < n; ++s1)
      for (Index s2 = s1 + 1; s2 < n; ++s2) {
        const double dist = euclid(state_coords[s1], state_coords[s2]);
        if (dist <= 0.0) continue;
        worst = std::max(worst, std::abs(ref.values[s1] - ref.values[s2]) / dist);
      }
    out.l_u = worst;
    out.method = "empirical";
  }
  return out;
}

FastSlowConstants measure_fast_slow(const FastSlowMdp& mdp) {
  FastSlowConstants out;
  double max_slow = 0.0, max_fast = 0.0;
  for (Index s = 0; s < mdp.n_states(); ++s) {
    const auto& xs = mdp.slow_coords()[mdp.slow_of(s)];
    const auto& ys = mdp.fast_coords()[mdp.fast_of(s)];
    for (Index a = 0; a < mdp.n_actions(); ++a) {
      for (const auto& e : mdp.joint_row(s, a)) {
        max_slow = std::max(max_slow, euclid(xs, mdp.slow_coords()[mdp.slow_of(e.succ)]));
        max_fast = std::max(max_fast, euclid(ys, mdp.fast_coords()[mdp.fast_of(e.succ)]));
      }
    }
  }
  out.d_y = max_fast;
  out.alpha = max_fast > 0.0 ? max_slow / max_fast : 0.0;
  return out;
}

//===========================================================================
// Bound calculators
//===========================================================================

void BoundInputs::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("bound inputs: gamma outside [0,1)");
  if (period < 1) throw std::invalid_argument("bound inputs: period must be >= 1");
  if (iterations < 0) throw std::invalid_argument("bound inputs: iterations must be >= 0");
}

double reward_gap_bound(const BoundInputs& in) {
  in.validate();
  const int t = in.period;
  double outer = 0.0;  // sum_{i=1}^{T-2} gamma^i sum_{j=0}^{i-1} l_f^j
  {
    double inner = 0.0, lf_pow = 1.0, g_pow = in.gamma;
    for (int i = 1; i <= t - 2; ++i) {
      inner += lf_pow;  // after this, inner = sum_{j=0}^{i-1} l_f^j
      lf_pow *= in.l_f;
      outer += g_pow * inner;
      g_pow *= in.gamma;
    }
  }
  double lf_sum = 0.0;  // sum_{j=0}^{T-2} l_f^j
  {
    double lf_pow = 1.0;
    for (int j = 0; j <= t - 2; ++j) {
      lf_sum += lf_pow;
      lf_pow *= in.l_f;
    }
  }
  const double head = in.alpha * in.d_y * in.l_r * outer;
  const double tail = std::pow(in.gamma, t - 1) * in.l_u *
                      (in.alpha * in.d_y * lf_sum +
                       in.gamma * in.d_y * (in.alpha + 2.0) * (t - 1));
  return head + tail;
}

double end_horizon_distance(const BoundInputs& in) {
  return 2.0 * in.d_y * (in.alpha + 1.0) * (in.period - 1);
}

namespace {

void append_regret_core(const BoundInputs& in, double eps_r, BoundReport& rep) {
  const double gt = std::pow(in.gamma, in.period);
  const double a_coef = 2.0 * gt / ((1.0 - gt) * (1.0 - gt)) + 2.0 / (1.0 - gt);
  const double b_coef = 2.0 * gt * gt / ((1.0 - gt) * (1.0 - gt)) + 2.0 * gt / (1.0 - gt);
  const double d = end_horizon_distance(in);
  rep.terms.emplace_back("reward_error", a_coef * eps_r);
  rep.terms.emplace_back("end_of_horizon", b_coef * in.l_u * d);
}

double vi_tail_term(const BoundInputs& in) {
  const double gt = std::pow(in.gamma, in.period);
  return 2.0 * in.r_max * std::pow(in.gamma, static_cast<double>(in.iterations + 1) * in.period) /
         ((1.0 - in.gamma) * (1.0 - gt));
}

double finish(BoundReport& rep) {
  double total = 0.0;
  for (const auto& [name, v] : rep.terms) total += v;
  rep.value = total;
  return total;
}

}  // namespace

BoundReport regret_bound_fsvi_report(const BoundInputs& in) {
  in.validate();
  BoundReport rep;
  append_regret_core(in, reward_gap_bound(in), rep);
  rep.terms.emplace_back("value_iteration", vi_tail_term(in));
  finish(rep);
  return rep;
}

double regret_bound_fsvi(const BoundInputs& in) { return regret_bound_fsvi_report(in).value; }

namespace {

double nominal_reward_gap(const BoundInputs& in) {
  double eps = reward_gap_bound(in);
  double g_pow = in.gamma;
  for (int i = 1; i <= in.period - 1; ++i) {
    eps += g_pow * in.zeta;
    g_pow *= in.gamma;
  }
  // sum_{i=1}^{T-2} l_f^i sum_{j=i+1}^{T-1} gamma^j
  double coupling = 0.0, lf_pow = in.l_f;
  for (int i = 1; i <= in.period - 2; ++i) {
    double g_sum = 0.0, gp = std::pow(in.gamma, i + 1);
    for (int j = i + 1; j <= in.period - 1; ++j) {
      g_sum += gp;
      gp *= in.gamma;
    }
    coupling += lf_pow * g_sum;
    lf_pow *= in.l_f;
  }
  return eps + coupling * in.l_r * in.max_nominal_distance;
}

}  // namespace

BoundReport regret_bound_nominal_report(const BoundInputs& in) {
  in.validate();
  BoundReport rep;
  append_regret_core(in, nominal_reward_gap(in), rep);
  rep.terms.emplace_back("value_iteration", vi_tail_term(in));
  finish(rep);
  return rep;
}

double regret_bound_nominal(const BoundInputs& in) { return regret_bound_nominal_report(in).value; }

BoundReport regret_bound_fsavi_report(const BoundInputs& in) {
  in.validate();
  const double kg = in.kappa * in.gamma;
  const double kgt = in.kappa * std::pow(in.gamma, in.period);
  if (kg >= 1.0 || kgt >= 1.0)
    throw std::invalid_argument("fsavi bound needs kappa*gamma < 1 and kappa*gamma^T < 1");

  BoundReport rep;
  // Reward block with the architecture error folded into eps_r.
  double eps_low_amp = (1.0 + in.kappa) / (1.0 - kg);
  if (in.gamma > 0.0)
    eps_low_amp -= std::pow(kg, in.period) * (1.0 + in.gamma) / (in.gamma * (1.0 - kg));
  const double eps_avi = reward_gap_bound(in) + eps_low_amp * in.eps_low;
  append_regret_core(in, eps_avi, rep);

  rep.terms.emplace_back("upper_architecture",
                         (1.0 + in.kappa) / (1.0 - kgt) * in.eps_up);
  const double expansion = (in.kappa * in.kappa -
                            in.kappa * in.kappa * std::pow(kg, in.period + 1)) /
                           ((1.0 - kgt) * (1.0 - kg));
  rep.terms.emplace_back("value_iteration",
                         std::pow(kgt, static_cast<double>(in.iterations)) * expansion * in.r_max);
  finish(rep);
  return rep;
}

double regret_bound_fsavi(const BoundInputs& in) { return regret_bound_fsavi_report(in).value; }

double vi_value_gap_bound(double gamma, double r_max, long k) {
  return std::pow(gamma, static_cast<double>(k)) * r_max / (1.0 - gamma);
}

double vi_policy_regret_bound(double gamma, double r_max, long k) {
  return 2.0 * r_max * std::pow(gamma, static_cast<double>(k + 1)) / ((1.0 - gamma) * (1.0 - gamma));
}

double nominal_value_gap_bound(const BoundInputs& in, int t, double dist_x_nominal, double dist_x,
                               double dist_y) {
  const int lag = in.period - t;  // number of remaining backups
  double geom = 0.0, geom_lf = 0.0;
  {
    double gp = 1.0, glf = 1.0;
    for (int i = 0; i <= lag - 1; ++i) {
      geom += gp;
      geom_lf += glf;
      gp *= in.gamma;
      glf *= in.gamma * in.l_f;
    }
  }
  double coupling = 0.0;
  {
    double lf_pow = in.l_f;
    for (int i = 1; i <= lag - 1; ++i) {
      double g_sum = 0.0, gp = std::pow(in.gamma, i);
      for (int j = i; j <= lag - 1; ++j) {
        g_sum += gp;
        gp *= in.gamma;
      }
      coupling += lf_pow * g_sum;
      lf_pow *= in.l_f;
    }
  }
  return geom * (in.zeta + in.l_r * dist_x) + geom_lf * in.l_r * dist_y +
         coupling * in.l_r * dist_x_nominal;
}

//===========================================================================
// Exact evaluation, optimal reference, regret
//===========================================================================

std::vector<double> evaluate_stationary_exact(const FastSlowMdp& mdp,
                                              const StationaryPolicy& policy) {
  const Index n = mdp.n_states();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * policy_matrix(mdp, policy);
  return to_std(a.partialPivLu().solve(policy_reward(mdp, policy)));
}

std::vector<double> evaluate_fast_exact(const FastSlowMdp& mdp, const FastPolicy& policy) {
  return evaluate_stationary_exact(mdp, lift_fast_policy(mdp, policy));
}

std::vector<double> evaluate_t_periodic_exact(const FastSlowMdp& mdp,
                                              const TPeriodicPolicy& policy) {
  const Index n = mdp.n_states();
  Eigen::VectorXd rew = policy_reward(mdp, policy.mu);
  Eigen::MatrixXd d = policy_matrix(mdp, policy.mu);
  double disc = mdp.gamma();
  for (int t = 1; t <= policy.period - 1; ++t) {
    const StationaryPolicy& step = policy.pi.steps[static_cast<std::size_t>(t - 1)];
    rew += disc * (d * policy_reward(mdp, step));
    d = d * policy_matrix(mdp, step);
    disc *= mdp.gamma();
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - disc * d;
  return to_std(a.partialPivLu().solve(rew));
}

std::vector<double> evaluate_policy_exact(const FastSlowMdp& mdp, const AnyPolicy& policy) {
  if (const auto* sp = std::get_if<StationaryPolicy>(&policy))
    return evaluate_stationary_exact(mdp, *sp);
  if (const auto* fp = std::get_if<FastPolicy>(&policy)) return evaluate_fast_exact(mdp, *fp);
  return evaluate_t_periodic_exact(mdp, std::get<TPeriodicPolicy>(policy));
}

OptimalSolution solve_optimal(const FastSlowMdp& mdp, double residual, int max_iterations) {
  OptimalSolution out;
  out.values.assign(mdp.n_states(), 0.0);
  double gap = std::numeric_limits<double>::infinity();
  int it = 0;
  while (gap > residual && it < max_iterations) {
    BackupResult next = backup_exact(out.values, mdp);
    gap = 0.0;
    for (Index s = 0; s < mdp.n_states(); ++s)
      gap = std::max(gap, std::abs(next.values[s] - out.values[s]));
    out.values.swap(next.values);
    ++it;
  }
  if (gap > residual)
    throw std::runtime_error("solve_optimal did not reach residual " + std::to_string(residual));
  out.residual = gap;
  out.iterations = it;
  out.policy = backup_exact(out.values, mdp).policy;
  out.policy_values = evaluate_stationary_exact(mdp, out.policy);
  return out;
}

double measured_regret(const FastSlowMdp& mdp, const AnyPolicy& policy,
                       const OptimalSolution& reference) {
  const std::vector<double> candidate = evaluate_policy_exact(mdp, policy);
  double worst = -std::numeric_limits<double>::infinity();
  for (Index s = 0; s < mdp.n_states(); ++s)
    worst = std::max(worst, reference.policy_values[s] - candidate[s]);
  return worst;
}

double check_hierarchical_equivalence(const FastSlowMdp& mdp, int period, double residual) {
  const OptimalSolution ref = solve_optimal(mdp, residual);
  TPeriodicPolicy periodic;
  periodic.mu = ref.policy;
  periodic.period = period;
  periodic.pi.steps.assign(static_cast<std::size_t>(period - 1), ref.policy);
  const std::vector<double> t_periodic = evaluate_t_periodic_exact(mdp, periodic);
  double worst = 0.0;
  for (Index s = 0; s < mdp.n_states(); ++s)
    worst = std::max(worst, std::abs(ref.policy_values[s] - t_periodic[s]));
  return worst;
}

}  // namespace fsmdp
