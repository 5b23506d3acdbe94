#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsmdp/mdp.hpp"

namespace fsmdp {

/// Work is metered in units of |S_obs| * |A| * |S_succ| per update batch,
/// where |S_succ| counts the successor set an expectation ranges over (the
/// full set for exact expectations, the sample count for Monte Carlo ones).
enum class CostStage {
  ExactSweep,
  LowerSweep,
  SlowAgnosticSweep,
  Compose,
  UpperSweep,
  NominalLowerSweep,
  GreedyExtend,
  QLearningSteps,
  AviIteration,
  FsaviLower,
  FsaviUpper,
  PolicyEval,
};

const char* cost_stage_name(CostStage stage);

struct CostEvent {
  CostStage stage;
  std::uint64_t units;
};

struct PolicySnapshot {
  std::uint64_t cost;
  AnyPolicy policy;
};

struct SolveTrace {
  std::vector<CostEvent> events;
  std::vector<PolicySnapshot> snapshots;
  std::vector<std::pair<std::string, std::vector<double>>> final_tables;

  std::uint64_t total_cost() const {
    std::uint64_t c = 0;
    for (const auto& e : events) c += e.units;
    return c;
  }
  std::uint64_t stage_cost(CostStage stage) const {
    std::uint64_t c = 0;
    for (const auto& e : events)
      if (e.stage == stage) c += e.units;
    return c;
  }
};

/// Recount from the event log; equals SolveTrace::total_cost by construction
/// and is used as the audit oracle.
std::uint64_t meter_cost(const std::vector<CostEvent>& events);

struct TraceOptions {
  bool record_snapshots = false;
  int snapshots_per_sweep = 8;       // VI variants snapshot mid-sweep
  std::uint64_t snapshot_steps = 0;  // Q-learning cadence; 0 = budget/50
  std::uint64_t shuffle_seed = 0;    // state update order within sweeps
};

struct SolveOptions {
  TraceOptions trace;
  int workers = 1;
};

}  // namespace fsmdp
