#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsmdp/avi.hpp"
#include "fsmdp/envs.hpp"
#include "fsmdp/mdp.hpp"
#include "fsmdp/solvers.hpp"

namespace fsmdp {

enum class Method {
  BaseVi,
  SlowAgnosticVi,
  QLearning,
  Fsvi,
  NominalFsvi,
  BaseAvi,
  SlowAgnosticAvi,
  Fsavi,
  NominalFsavi,
};

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct MethodConfig {
  Method method = Method::BaseVi;
  int iterations = 10;
  std::uint64_t step_budget = 100000;       // q_learning
  std::uint64_t snapshot_steps = 0;         // q_learning cadence; 0 = budget/50
  QLearningOptions q_hyper;
  int succ_samples = 40;                    // AVI variants
  int sim_paths = 25;                       // FSAVI variants
  std::optional<FeatureSpec> features;      // AVI variants; RBF default
  std::optional<FeatureSpec> fast_features; // slow-agnostic / nominal AVI
  std::string nominal = "preset";           // "preset" or explicit indices
  std::vector<Index> nominal_indices;
};

struct EnvConfig {
  std::string name = "queue";  // queue | bandit | demand_response | random
  QueueParams queue;
  BanditParams bandit;
  DemandResponseParams demand_response;
  RandomFastSlowSpec random;
  std::uint64_t random_seed = 0;
  std::optional<double> gamma;  // overrides the env default
};

struct ExperimentConfig {
  EnvConfig env;
  int period = 10;  // T
  int n_seeds = 10;
  int eval_horizon = 0;    // 0 = 10 * T
  int eval_episodes = 200;
  int snapshots_per_sweep = 8;
  std::uint64_t base_seed = 0;
  std::vector<MethodConfig> methods;

  void validate() const;
};

struct RunPoint {
  std::uint64_t cost;
  double mean_return;
};

struct RunRecord {
  std::string method;
  int seed = 0;
  std::vector<RunPoint> points;
  // Provenance: resolved hyperparameters and identity of the producing run.
  std::string config_hash;
  std::string code_version;
  std::string hyper_json;
};

FastSlowMdp build_environment(const EnvConfig& env);

/// Runs every (method, seed) pair, evaluating each policy snapshot over the
/// configured horizon and episode count. Deterministic per (config, seed);
/// records are byte-identical across reruns and worker counts.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const FastSlowMdp& mdp,
                                      int workers = 1);

std::string records_to_json(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_json(const std::string& text);

/// CSV columns: method, seed, cost, return.
std::string records_to_csv(const std::vector<RunRecord>& records);

struct PercentileTable {
  std::vector<double> grid;  // shared cost grid (log-spaced)
  struct Row {
    std::string method;
    std::vector<double> p10, median, p90;
  };
  std::vector<Row> rows;
};

/// Interpolates every record onto a shared log-spaced cost grid and reports
/// p10/median/p90 across seeds per method.
PercentileTable build_percentiles(const std::vector<RunRecord>& records, int grid_points = 100);
std::string percentiles_to_csv(const PercentileTable& table);

//===========================================================================
// Policy structure grids
//===========================================================================

struct GridAxis {
  std::string space;       // "slow" | "fast"
  std::vector<int> dims;   // coordinate dimensions forming the axis
};

struct GridCondition {
  std::string kind = "all";  // all | slow_le | slow_gt
  int lhs = 0, rhs = 1;
};

struct PolicyGridSpec {
  GridAxis axis_row;
  GridAxis axis_col;
  GridCondition condition;
};

/// Per-cell action frequencies over a set of policies (one per run). Each
/// policy contributes its modal action over the states aggregated into the
/// cell, so a single deterministic policy yields frequencies in {0,1}.
std::string export_policy_grid(const std::vector<StationaryPolicy>& policies,
                               const FastSlowMdp& mdp, const PolicyGridSpec& spec);

/// Default configuration reproducing the service-allocation comparison.
ExperimentConfig default_queue_experiment();

std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string env_config_to_json(const EnvConfig& env);
EnvConfig env_config_from_json(const std::string& text);

/// Nominal states and reward decomposition for an environment by name; used
/// when a method config says "preset".
std::vector<Index> preset_nominal_states(const EnvConfig& env, const FastSlowMdp& mdp);
NominalDecomposition preset_nominal_decomposition(const EnvConfig& env, const FastSlowMdp& mdp,
                                                  const std::vector<Index>& nominal_xs);

/// Best additive fit h(y,a) = mean_x r, g(x) = mean_{y,a} residual; zeta is
/// the realized worst error.
NominalDecomposition generic_additive_decomposition(const FastSlowMdp& mdp);

}  // namespace fsmdp
