#include "fsmdp/backup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fsmdp {

BackupResult backup_exact(const ValueTable& v, const FastSlowMdp& mdp, const Exec& ex) {
  const Index n = mdp.n_states();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  BackupResult out;
  out.values.resize(n);
  out.policy.actions.resize(n);
  parallel_for(0, n, ex.workers, [&](std::size_t s) {
    double best = -std::numeric_limits<double>::infinity();
    Index best_a = 0;
    for (Index a = 0; a < n_actions; ++a) {
      double exp_v = 0.0;
      for (const auto& e : mdp.joint_row(static_cast<Index>(s), a)) exp_v += e.prob * v[e.succ];
      const double q = mdp.reward_sa(static_cast<Index>(s), a) + gamma * exp_v;
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.values[s] = best;
    out.policy.actions[s] = best_a;
  });
  return out;
}

BackupResult backup_frozen(const ValueTable& j_next, const FastSlowMdp& mdp, const Exec& ex) {
  const Index n = mdp.n_states();
  const Index n_fast = mdp.n_fast();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  BackupResult out;
  out.values.resize(n);
  out.policy.actions.resize(n);
  parallel_for(0, n, ex.workers, [&](std::size_t s) {
    const Index x = static_cast<Index>(s) / n_fast;
    const Index y = static_cast<Index>(s) % n_fast;
    const std::size_t base = static_cast<std::size_t>(x) * n_fast;
    double best = -std::numeric_limits<double>::infinity();
    Index best_a = 0;
    for (Index a = 0; a < n_actions; ++a) {
      double exp_v = 0.0;
      for (const auto& e : mdp.frozen_row(x, y, a)) exp_v += e.prob * j_next[base + e.succ];
      const double q = mdp.reward(x, y, a) + gamma * exp_v;
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.values[s] = best;
    out.policy.actions[s] = best_a;
  });
  return out;
}

FastBackupResult backup_slow_agnostic(const std::vector<double>& w, const FastSlowMdp& mdp,
                                      const Exec& ex) {
  const Index n_fast = mdp.n_fast();
  const Index n_slow = mdp.n_slow();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  FastBackupResult out;
  out.values.resize(n_fast);
  out.policy.actions.resize(n_fast);
  parallel_for(0, n_fast, ex.workers, [&](std::size_t yi) {
    const Index y = static_cast<Index>(yi);
    double best = -std::numeric_limits<double>::infinity();
    Index best_a = 0;
    for (Index a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (Index x = 0; x < n_slow; ++x) {
        double exp_v = 0.0;
        for (const auto& e : mdp.frozen_row(x, y, a)) exp_v += e.prob * w[e.succ];
        total += mdp.reward(x, y, a) + gamma * exp_v;
      }
      const double q = total / static_cast<double>(n_slow);
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.values[yi] = best;
    out.policy.actions[yi] = best_a;
  });
  return out;
}

TStepKernel::TStepKernel(const FastSlowMdp& mdp, std::vector<double> policy_product, int period)
    : mdp_(&mdp), product_(std::move(policy_product)), period_(period), n_(mdp.n_states()) {}

KernelRow TStepKernel::row(Index s, Index a) const {
  const KernelRow& first = mdp_->joint_row(s, a);
  if (period_ == 1) return first;
  std::vector<double> dist(n_, 0.0);
  for (const auto& e : first) {
    const double* q = product_.data() + static_cast<std::size_t>(e.succ) * n_;
    for (Index j = 0; j < n_; ++j) dist[j] += e.prob * q[j];
  }
  KernelRow out;
  for (Index j = 0; j < n_; ++j)
    if (dist[j] > 0.0) out.push_back({j, dist[j]});
  return out;
}

std::vector<double> TStepKernel::propagate(const std::vector<double>& v, const Exec& ex) const {
  if (period_ == 1) return v;
  std::vector<double> u(n_, 0.0);
  parallel_for(0, n_, ex.workers, [&](std::size_t i) {
    const double* q = product_.data() + i * n_;
    double acc = 0.0;
    for (Index j = 0; j < n_; ++j) acc += q[j] * v[j];
    u[i] = acc;
  });
  return u;
}

double TStepKernel::row_sum(Index s, Index a) const {
  double sum = 0.0;
  for (const auto& e : row(s, a)) sum += e.prob;
  return sum;
}

TStepKernel compose_t_step(const FastSlowMdp& mdp, const FiniteHorizonPolicy& pi, int period,
                           const Exec& ex) {
  if (period < 1) throw std::invalid_argument("compose_t_step needs period >= 1");
  if (static_cast<int>(pi.steps.size()) != period - 1)
    throw std::invalid_argument("policy sequence length " + std::to_string(pi.steps.size()) +
                                " does not match period " + std::to_string(period));
  const Index n = mdp.n_states();
  if (period == 1) return TStepKernel(mdp, {}, 1);

  // Product P_{pi_1} ... P_{pi_{T-1}}, built back to front so each pass is
  // a sparse-row by dense-matrix multiply.
  std::vector<double> q(static_cast<std::size_t>(n) * n, 0.0);
  {
    const StationaryPolicy& last = pi.steps.back();
    for (Index s = 0; s < n; ++s) {
      double* row = q.data() + static_cast<std::size_t>(s) * n;
      for (const auto& e : mdp.joint_row(s, last.actions[s])) row[e.succ] = e.prob;
    }
  }
  std::vector<double> next(static_cast<std::size_t>(n) * n);
  for (int t = period - 3; t >= 0; --t) {
    const StationaryPolicy& pol = pi.steps[static_cast<std::size_t>(t)];
    std::fill(next.begin(), next.end(), 0.0);
    parallel_for(0, n, ex.workers, [&](std::size_t s) {
      double* row = next.data() + s * n;
      for (const auto& e : mdp.joint_row(static_cast<Index>(s), pol.actions[s])) {
        const double* src = q.data() + static_cast<std::size_t>(e.succ) * n;
        for (Index j = 0; j < n; ++j) row[j] += e.prob * src[j];
      }
    });
    q.swap(next);
  }
  return TStepKernel(mdp, std::move(q), period);
}

BackupResult backup_upper(const ValueTable& v, const ValueTable& j1, const TStepKernel& tk,
                          const FastSlowMdp& mdp, int period, const Exec& ex) {
  const Index n = mdp.n_states();
  const Index n_actions = mdp.n_actions();
  const double gamma = mdp.gamma();
  const double gamma_t = std::pow(gamma, period);
  // E[V(s_T) | s0, a] = sum_{s1} P(s1|s0,a) (Q v)(s1), by linearity.
  const std::vector<double> u = tk.propagate(v, ex);
  BackupResult out;
  out.values.resize(n);
  out.policy.actions.resize(n);
  parallel_for(0, n, ex.workers, [&](std::size_t s) {
    double best = -std::numeric_limits<double>::infinity();
    Index best_a = 0;
    for (Index a = 0; a < n_actions; ++a) {
      double exp_j = 0.0, exp_u = 0.0;
      for (const auto& e : mdp.joint_row(static_cast<Index>(s), a)) {
        exp_j += e.prob * j1[e.succ];
        exp_u += e.prob * u[e.succ];
      }
      const double q = mdp.reward_sa(static_cast<Index>(s), a) + gamma * exp_j + gamma_t * exp_u;
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.values[s] = best;
    out.policy.actions[s] = best_a;
  });
  return out;
}

}  // namespace fsmdp
