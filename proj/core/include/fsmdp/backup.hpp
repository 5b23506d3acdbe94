#pragma once

#include <vector>

#include "fsmdp/mdp.hpp"
#include "fsmdp/parallel.hpp"

namespace fsmdp {

inline constexpr double kTStepRowSumTol = 1e-10;

struct BackupResult {
  ValueTable values;
  StationaryPolicy policy;
};

struct FastBackupResult {
  std::vector<double> values;  // over y
  FastPolicy policy;
};

/// One synchronous Bellman sweep of the base model. Ties go to the lowest
/// action index.
BackupResult backup_exact(const ValueTable& v, const FastSlowMdp& mdp, const Exec& ex = {});

/// Bellman sweep of the lower level: the slow state never moves.
BackupResult backup_frozen(const ValueTable& j_next, const FastSlowMdp& mdp, const Exec& ex = {});

/// Slow-agnostic sweep: targets averaged uniformly over slow states, value
/// defined over fast states only.
FastBackupResult backup_slow_agnostic(const std::vector<double>& w, const FastSlowMdp& mdp,
                                      const Exec& ex = {});

/// Distribution of the state reached after T true transitions: action a
/// first, then the fixed lower-level policy. Stored as the one-step kernel
/// composed with the dense (T-1)-step policy product, so rows are
/// materialized on demand and value propagation is two matrix applications.
class TStepKernel {
 public:
  TStepKernel(const FastSlowMdp& mdp, std::vector<double> policy_product, int period);

  int period() const { return period_; }
  Index n() const { return n_; }

  /// Full probability row for (s, a); entries with zero mass are dropped.
  KernelRow row(Index s, Index a) const;

  /// u = Q v where Q is the (T-1)-step policy product.
  std::vector<double> propagate(const std::vector<double>& v, const Exec& ex = {}) const;

  double row_sum(Index s, Index a) const;

 private:
  const FastSlowMdp* mdp_;
  std::vector<double> product_;  // n x n dense, row-major; identity when T == 1
  int period_;
  Index n_;
};

/// Exact kernel product for (a, pi_1..pi_{T-1}) under the true dynamics.
TStepKernel compose_t_step(const FastSlowMdp& mdp, const FiniteHorizonPolicy& pi, int period,
                           const Exec& ex = {});

/// Upper-level sweep: r(s,a) + gamma E[J1(s1)] + gamma^T E[V(sT)].
BackupResult backup_upper(const ValueTable& v, const ValueTable& j1, const TStepKernel& tk,
                          const FastSlowMdp& mdp, int period, const Exec& ex = {});

}  // namespace fsmdp
