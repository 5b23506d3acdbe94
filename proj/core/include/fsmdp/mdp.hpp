#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fsmdp {

using Index = std::uint32_t;

inline constexpr double kRowSumTol = 1e-12;

/// One entry of a sparse probability row: successor index and probability.
struct KernelEntry {
  Index succ;
  double prob;
};
using KernelRow = std::vector<KernelEntry>;

/// Optional modeler-declared constants of the fast-slow structure.
struct FastSlowMeta {
  std::optional<double> d_y;
  std::optional<double> alpha;
  std::optional<double> zeta;
};

/// Raw tables consumed by build_mdp. `kernel_rows` holds the distinct rows;
/// `kernel_row_of[(x*Y+y)*A+a]` maps a state-action pair to its row. An empty
/// map means rows are stored one per (x,y,a) in order. Sharing rows keeps
/// environments with exogenous dynamics (many identical rows) small.
struct MdpTables {
  std::vector<std::vector<double>> slow_states;
  std::vector<std::vector<double>> fast_states;
  std::vector<std::vector<double>> actions;
  std::vector<double> reward;  // (x,y,a) row-major
  std::vector<KernelRow> kernel_rows;
  std::vector<Index> kernel_row_of;
  double gamma = 0.0;
  FastSlowMeta meta;
};

using ValueTable = std::vector<double>;  // indexed by joint state x*Y+y

struct StationaryPolicy {
  std::vector<Index> actions;  // joint state -> action
};

/// Policy over fast states only; slow state ignored at decision time.
struct FastPolicy {
  std::vector<Index> actions;  // y -> action
};

struct FiniteHorizonPolicy {
  std::vector<StationaryPolicy> steps;  // steps[t-1] applies at period t, t = 1..T-1
  int horizon() const { return static_cast<int>(steps.size()) + 1; }
};

/// Infinite repetition of (mu, pi_1..pi_{T-1}); mu acts at steps == 0 mod T.
struct TPeriodicPolicy {
  StationaryPolicy mu;
  FiniteHorizonPolicy pi;
  int period = 1;
};

using AnyPolicy = std::variant<StationaryPolicy, FastPolicy, TPeriodicPolicy>;

/// Lower-level value sequence J_1..J_T with J_T identically zero.
struct LowerValueSeq {
  std::vector<ValueTable> tables;  // tables[t-1] = J_t
  int period() const { return static_cast<int>(tables.size()); }
  const ValueTable& at(int t) const { return tables[static_cast<std::size_t>(t - 1)]; }
};

/// Marginal transition of the fast state with the slow state held fixed.
/// Rows are shared like the joint kernel's.
class FrozenKernel {
 public:
  FrozenKernel() = default;
  FrozenKernel(std::vector<KernelRow> rows, std::vector<Index> row_of)
      : rows_(std::move(rows)), row_of_(std::move(row_of)) {}

  const KernelRow& row(std::size_t flat_xya) const { return rows_[row_of_[flat_xya]]; }
  std::size_t unique_rows() const { return rows_.size(); }

 private:
  std::vector<KernelRow> rows_;
  std::vector<Index> row_of_;
};

/// Validated fast-slow MDP. All tables are immutable after construction.
class FastSlowMdp {
 public:
  static FastSlowMdp build(MdpTables tables);

  Index n_slow() const { return static_cast<Index>(slow_states_.size()); }
  Index n_fast() const { return static_cast<Index>(fast_states_.size()); }
  Index n_actions() const { return static_cast<Index>(actions_.size()); }
  Index n_states() const { return n_slow() * n_fast(); }

  Index state_index(Index x, Index y) const { return x * n_fast() + y; }
  Index slow_of(Index s) const { return s / n_fast(); }
  Index fast_of(Index s) const { return s % n_fast(); }

  double gamma() const { return gamma_; }
  double r_max() const { return r_max_; }
  const FastSlowMeta& meta() const { return meta_; }

  double reward(Index x, Index y, Index a) const {
    return reward_[(static_cast<std::size_t>(x) * n_fast() + y) * n_actions() + a];
  }
  double reward_sa(Index s, Index a) const {
    return reward_[static_cast<std::size_t>(s) * n_actions() + a];
  }

  /// Joint kernel row over successor joint states for (s, a).
  const KernelRow& joint_row(Index s, Index a) const {
    return kernel_rows_[kernel_row_of_[static_cast<std::size_t>(s) * n_actions() + a]];
  }
  /// Successor drawn from the joint row by inverse CDF (binary search over
  /// cached cumulative sums; rows can be wide).
  Index sample_joint(Index s, Index a, double u) const;
  /// Frozen row over successor fast states for (x, y, a).
  const KernelRow& frozen_row(Index x, Index y, Index a) const {
    return frozen_.row((static_cast<std::size_t>(x) * n_fast() + y) * n_actions() + a);
  }
  const FrozenKernel& frozen() const { return frozen_; }

  const std::vector<std::vector<double>>& slow_coords() const { return slow_states_; }
  const std::vector<std::vector<double>>& fast_coords() const { return fast_states_; }
  const std::vector<std::vector<double>>& action_coords() const { return actions_; }

  /// Coordinates of a joint state: slow coordinates followed by fast ones.
  std::vector<double> state_coords(Index s) const;

  /// Mean number of stored entries per joint kernel row.
  double mean_joint_support() const { return mean_joint_support_; }
  double mean_frozen_support() const { return mean_frozen_support_; }

  const std::vector<double>& reward_table() const { return reward_; }
  const std::vector<KernelRow>& kernel_rows() const { return kernel_rows_; }
  const std::vector<Index>& kernel_row_of() const { return kernel_row_of_; }

 private:
  FastSlowMdp() = default;

  std::vector<std::vector<double>> slow_states_, fast_states_, actions_;
  std::vector<double> reward_;
  std::vector<KernelRow> kernel_rows_;
  std::vector<std::vector<double>> kernel_cum_;  // running sums per row
  std::vector<Index> kernel_row_of_;
  FrozenKernel frozen_;
  double gamma_ = 0.0;
  double r_max_ = 0.0;
  double mean_joint_support_ = 0.0;
  double mean_frozen_support_ = 0.0;
  FastSlowMeta meta_;
};

/// Marginalizes the joint kernel over successor slow states. Exposed on its
/// own for tests; build() derives and caches the same thing.
FrozenKernel frozen_marginal(const FastSlowMdp& mdp);

}  // namespace fsmdp
