#include "fsmdp/simulate.hpp"

#include <stdexcept>

namespace fsmdp {

Index policy_action(const AnyPolicy& policy, const FastSlowMdp& mdp, Index state,
                    std::uint64_t step) {
  if (const auto* sp = std::get_if<StationaryPolicy>(&policy)) return sp->actions[state];
  if (const auto* fp = std::get_if<FastPolicy>(&policy)) return fp->actions[mdp.fast_of(state)];
  const auto& tp = std::get<TPeriodicPolicy>(policy);
  const std::uint64_t t = step % static_cast<std::uint64_t>(tp.period);
  if (t == 0) return tp.mu.actions[state];
  return tp.pi.steps[static_cast<std::size_t>(t - 1)].actions[state];
}

Index sample_row(const KernelRow& row, double u) {
  double acc = 0.0;
  for (const auto& e : row) {
    acc += e.prob;
    if (u < acc) return e.succ;
  }
  return row.back().succ;
}

std::vector<double> simulate_returns(const FastSlowMdp& mdp, const AnyPolicy& policy, int horizon,
                                     int episodes, std::uint64_t seed, const Exec& ex) {
  if (horizon < 1) throw std::invalid_argument("simulation horizon must be >= 1");
  const RandomStream stream{seed};
  const Index n = mdp.n_states();
  const double gamma = mdp.gamma();
  std::vector<double> out(static_cast<std::size_t>(episodes), 0.0);
  parallel_for(0, static_cast<std::size_t>(episodes), ex.workers, [&](std::size_t e) {
    const double u0 = stream.uniform(e, 0, 0);
    Index s = std::min<Index>(n - 1, static_cast<Index>(u0 * n));
    double ret = 0.0, disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const Index a = policy_action(policy, mdp, s, static_cast<std::uint64_t>(t));
      ret += disc * mdp.reward_sa(s, a);
      disc *= gamma;
      s = mdp.sample_joint(s, a, stream.uniform(e, static_cast<std::uint64_t>(t), 1));
    }
    out[e] = ret;
  });
  return out;
}

std::vector<double> evaluate_policy(const FastSlowMdp& mdp, const AnyPolicy& policy, int horizon,
                                    int episodes_per_seed, int n_seeds, std::uint64_t seed0,
                                    const Exec& ex) {
  if (n_seeds < 1) throw std::invalid_argument("evaluate_policy needs n_seeds >= 1");
  std::vector<double> means(static_cast<std::size_t>(n_seeds), 0.0);
  for (int i = 0; i < n_seeds; ++i) {
    const std::uint64_t seed = counter_hash(seed0, static_cast<std::uint64_t>(i), 0xE7A1ULL);
    const auto returns = simulate_returns(mdp, policy, horizon, episodes_per_seed, seed, ex);
    double sum = 0.0;
    for (double r : returns) sum += r;
    means[static_cast<std::size_t>(i)] = sum / static_cast<double>(returns.size());
  }
  return means;
}

}  // namespace fsmdp
