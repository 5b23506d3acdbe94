#include "fsmdp/trace.hpp"

namespace fsmdp {

const char* cost_stage_name(CostStage stage) {
  switch (stage) {
    case CostStage::ExactSweep: return "exact_sweep";
    case CostStage::LowerSweep: return "lower_sweep";
    case CostStage::SlowAgnosticSweep: return "slow_agnostic_sweep";
    case CostStage::Compose: return "compose";
    case CostStage::UpperSweep: return "upper_sweep";
    case CostStage::NominalLowerSweep: return "nominal_lower_sweep";
    case CostStage::GreedyExtend: return "greedy_extend";
    case CostStage::QLearningSteps: return "q_learning_steps";
    case CostStage::AviIteration: return "avi_iteration";
    case CostStage::FsaviLower: return "fsavi_lower";
    case CostStage::FsaviUpper: return "fsavi_upper";
    case CostStage::PolicyEval: return "policy_eval";
  }
  return "unknown";
}

std::uint64_t meter_cost(const std::vector<CostEvent>& events) {
  std::uint64_t total = 0;
  for (const auto& e : events) total += e.units;
  return total;
}

}  // namespace fsmdp
