#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// recompute expectations by direct enumeration over dense representations,
// on purpose not sharing code with the library paths they check.

#include <cmath>
#include <map>
#include <vector>

#include "fsmdp/mdp.hpp"
#include "fsmdp/rng.hpp"

namespace fsmdp::test {

struct DenseMdp {
  int n = 0, na = 0;
  std::vector<std::vector<double>> p;  // p[s*na+a][s']
  std::vector<double> r;               // r[s*na+a]
  double gamma = 0.0;
};

inline DenseMdp densify(const FastSlowMdp& mdp) {
  DenseMdp d;
  d.n = static_cast<int>(mdp.n_states());
  d.na = static_cast<int>(mdp.n_actions());
  d.gamma = mdp.gamma();
  d.p.assign(static_cast<std::size_t>(d.n) * d.na, std::vector<double>(d.n, 0.0));
  d.r.resize(static_cast<std::size_t>(d.n) * d.na);
  for (Index s = 0; s < mdp.n_states(); ++s)
    for (Index a = 0; a < mdp.n_actions(); ++a) {
      const std::size_t row = static_cast<std::size_t>(s) * d.na + a;
      d.r[row] = mdp.reward_sa(s, a);
      for (const auto& e : mdp.joint_row(s, a)) d.p[row][e.succ] += e.prob;
    }
  return d;
}

// One Bellman maximization by dense summation.
inline std::vector<double> oracle_backup(const DenseMdp& d, const std::vector<double>& v) {
  std::vector<double> out(static_cast<std::size_t>(d.n));
  for (int s = 0; s < d.n; ++s) {
    double best = -1e300;
    for (int a = 0; a < d.na; ++a) {
      const std::size_t row = static_cast<std::size_t>(s) * d.na + a;
      double acc = d.r[row];
      for (int sp = 0; sp < d.n; ++sp) acc += d.gamma * d.p[row][sp] * v[static_cast<std::size_t>(sp)];
      best = std::max(best, acc);
    }
    out[static_cast<std::size_t>(s)] = best;
  }
  return out;
}

// Optimal depth-limited expected reward over the frozen kernel starting at
// (x, y) with zero terminal value: a brute-force expectimax tree.
inline double oracle_frozen_tree(const FastSlowMdp& mdp, Index x, Index y, int depth) {
  if (depth == 0) return 0.0;
  double best = -1e300;
  for (Index a = 0; a < mdp.n_actions(); ++a) {
    double acc = mdp.reward(x, y, a);
    for (const auto& e : mdp.frozen_row(x, y, a))
      acc += mdp.gamma() * e.prob * oracle_frozen_tree(mdp, x, e.succ, depth - 1);
    best = std::max(best, acc);
  }
  return best;
}

// Exact distribution over states after: action a, then policy steps, all
// under the true joint kernel; dense forward pass.
inline std::vector<double> oracle_t_step_distribution(const FastSlowMdp& mdp, Index s0, Index a,
                                                      const FiniteHorizonPolicy& pi) {
  std::vector<double> dist(mdp.n_states(), 0.0);
  for (const auto& e : mdp.joint_row(s0, a)) dist[e.succ] += e.prob;
  for (const auto& step : pi.steps) {
    std::vector<double> next(mdp.n_states(), 0.0);
    for (Index s = 0; s < mdp.n_states(); ++s) {
      if (dist[s] == 0.0) continue;
      for (const auto& e : mdp.joint_row(s, step.actions[s])) next[e.succ] += dist[s] * e.prob;
    }
    dist.swap(next);
  }
  return dist;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Hand-built MDP tables for tiny deterministic cases.
struct TinyBuilder {
  MdpTables t;

  TinyBuilder(int nx, int ny, int na, double gamma) {
    for (int x = 0; x < nx; ++x) t.slow_states.push_back({static_cast<double>(x)});
    for (int y = 0; y < ny; ++y) t.fast_states.push_back({static_cast<double>(y)});
    for (int a = 0; a < na; ++a) t.actions.push_back({static_cast<double>(a)});
    t.gamma = gamma;
    t.reward.assign(static_cast<std::size_t>(nx) * ny * na, 0.0);
    t.kernel_rows.assign(t.reward.size(), {});
  }

  std::size_t flat(int x, int y, int a) const {
    return (static_cast<std::size_t>(x) * t.fast_states.size() + y) * t.actions.size() + a;
  }
  TinyBuilder& reward(int x, int y, int a, double value) {
    t.reward[flat(x, y, a)] = value;
    return *this;
  }
  TinyBuilder& arc(int x, int y, int a, int xp, int yp, double prob) {
    t.kernel_rows[flat(x, y, a)].push_back(
        {static_cast<Index>(xp * t.fast_states.size() + yp), prob});
    return *this;
  }
  FastSlowMdp build() { return FastSlowMdp::build(std::move(t)); }
};

// Single state, single action self-loop with reward r.
inline FastSlowMdp self_loop(double reward, double gamma) {
  TinyBuilder b(1, 1, 1, gamma);
  b.reward(0, 0, 0, reward).arc(0, 0, 0, 0, 0, 1.0);
  return b.build();
}

}  // namespace fsmdp::test
