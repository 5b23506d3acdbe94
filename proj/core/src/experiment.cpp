#include "fsmdp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fsmdp/rng.hpp"
#include "fsmdp/serialize.hpp"
#include "fsmdp/simulate.hpp"

namespace fsmdp {

using nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::BaseVi: return "base_vi";
    case Method::SlowAgnosticVi: return "slow_agnostic_vi";
    case Method::QLearning: return "q_learning";
    case Method::Fsvi: return "fsvi";
    case Method::NominalFsvi: return "nominal_fsvi";
    case Method::BaseAvi: return "base_avi";
    case Method::SlowAgnosticAvi: return "slow_agnostic_avi";
    case Method::Fsavi: return "fsavi";
    case Method::NominalFsavi: return "nominal_fsavi";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::BaseVi, Method::SlowAgnosticVi, Method::QLearning, Method::Fsvi,
                   Method::NominalFsvi, Method::BaseAvi, Method::SlowAgnosticAvi, Method::Fsavi,
                   Method::NominalFsavi}) {
    if (name == method_name(m)) return m;
  }
  throw std::invalid_argument("unknown method: " + name);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw std::invalid_argument("experiment config: methods list is empty");
  if (n_seeds < 1) throw std::invalid_argument("experiment config: n_seeds must be >= 1");
  if (period < 1) throw std::invalid_argument("experiment config: period must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("experiment config: eval_episodes must be >= 1");
}

FastSlowMdp build_environment(const EnvConfig& env) {
  if (env.name == "queue") {
    QueueParams p = env.queue;
    if (env.gamma) p.gamma = *env.gamma;
    return make_queue_env(p);
  }
  if (env.name == "bandit") {
    BanditParams p = env.bandit;
    if (env.gamma) p.gamma = *env.gamma;
    return make_bandit_env(p);
  }
  if (env.name == "demand_response") {
    DemandResponseParams p = env.demand_response;
    if (env.gamma) p.gamma = *env.gamma;
    return make_demand_response_env(p);
  }
  if (env.name == "random") {
    RandomFastSlowSpec spec = env.random;
    if (env.gamma) spec.gamma = *env.gamma;
    return make_random_fastslow(env.random_seed, spec);
  }
  throw std::invalid_argument("unknown environment: " + env.name);
}

NominalDecomposition generic_additive_decomposition(const FastSlowMdp& mdp) {
  const Index nx = mdp.n_slow(), ny = mdp.n_fast(), na = mdp.n_actions();
  std::vector<double> h(static_cast<std::size_t>(ny) * na, 0.0);
  for (Index y = 0; y < ny; ++y)
    for (Index a = 0; a < na; ++a) {
      double acc = 0.0;
      for (Index x = 0; x < nx; ++x) acc += mdp.reward(x, y, a);
      h[static_cast<std::size_t>(y) * na + a] = acc / nx;
    }
  std::vector<double> g(nx, 0.0);
  for (Index x = 0; x < nx; ++x) {
    double acc = 0.0;
    for (Index y = 0; y < ny; ++y)
      for (Index a = 0; a < na; ++a)
        acc += mdp.reward(x, y, a) - h[static_cast<std::size_t>(y) * na + a];
    g[x] = acc / (static_cast<double>(ny) * na);
  }
  return make_additive_decomposition(mdp, std::move(g), std::move(h));
}

std::vector<Index> preset_nominal_states(const EnvConfig& env, const FastSlowMdp& mdp) {
  if (env.name == "queue") return queue_nominal_states(mdp);
  if (env.name == "bandit") return bandit_nominal_states(mdp);
  if (env.name == "demand_response") return demand_response_nominal_states(mdp);
  // Random fixtures: 5 equally spaced slow indices (or all of them).
  const int count = std::min<int>(5, static_cast<int>(mdp.n_slow()));
  std::vector<Index> out;
  for (int i = 0; i < count; ++i)
    out.push_back(static_cast<Index>(count == 1 ? 0
                                                : (static_cast<std::size_t>(i) *
                                                   (mdp.n_slow() - 1)) /
                                                      (count - 1)));
  return out;
}

NominalDecomposition preset_nominal_decomposition(const EnvConfig& env, const FastSlowMdp& mdp,
                                                  const std::vector<Index>& nominal_xs) {
  if (env.name == "queue") return queue_nominal_decomposition(mdp, nominal_xs);
  if (env.name == "bandit") return bandit_nominal_decomposition(mdp);
  if (env.name == "demand_response") return demand_response_nominal_decomposition(mdp, nominal_xs);
  return generic_additive_decomposition(mdp);
}

//===========================================================================
// Config serialization
//===========================================================================

namespace {

json feature_spec_to_json(const FeatureSpec& spec) {
  json j;
  if (const auto* rbf = std::get_if<RbfSpec>(&spec.kind)) {
    j["kind"] = "rbf";
    j["count_fraction"] = rbf->count_fraction;
    j["width"] = rbf->width;
    if (rbf->count) j["count"] = *rbf->count;
  } else {
    const auto& agg = std::get<AggregationSpec>(spec.kind);
    if (agg.partition.empty()) {
      j["kind"] = "aggregation_identity";
    } else {
      j["kind"] = "aggregation";
      j["partition"] = agg.partition;
    }
  }
  j["kappa"] = spec.declared_kappa;
  return j;
}

FeatureSpec feature_spec_from_json(const json& j) {
  FeatureSpec spec;
  const std::string kind = j.value("kind", "rbf");
  if (kind == "rbf") {
    RbfSpec rbf;
    rbf.count_fraction = j.value("count_fraction", 0.3);
    rbf.width = j.value("width", 0.02);
    if (j.contains("count")) rbf.count = j.at("count").get<int>();
    spec.kind = rbf;
  } else if (kind == "aggregation") {
    AggregationSpec agg;
    agg.partition = j.at("partition").get<std::vector<Index>>();
    spec.kind = agg;
  } else if (kind == "aggregation_identity") {
    spec.kind = AggregationSpec{};  // resolved against the state count later
  } else {
    throw std::invalid_argument("unknown feature kind: " + kind);
  }
  spec.declared_kappa = j.value("kappa", 1.0);
  return spec;
}

json method_to_json(const MethodConfig& mc) {
  json j;
  j["name"] = method_name(mc.method);
  j["iterations"] = mc.iterations;
  j["step_budget"] = mc.step_budget;
  j["snapshot_steps"] = mc.snapshot_steps;
  j["succ_samples"] = mc.succ_samples;
  j["sim_paths"] = mc.sim_paths;
  j["nominal"] = mc.nominal;
  if (!mc.nominal_indices.empty()) j["nominal_indices"] = mc.nominal_indices;
  if (mc.features) j["features"] = feature_spec_to_json(*mc.features);
  if (mc.fast_features) j["fast_features"] = feature_spec_to_json(*mc.fast_features);
  j["q_hyper"] = {{"epsilon_start", mc.q_hyper.epsilon_start},
                  {"epsilon_end", mc.q_hyper.epsilon_end},
                  {"learning_rate_power", mc.q_hyper.learning_rate_power},
                  {"episode_length", mc.q_hyper.episode_length}};
  return j;
}

MethodConfig method_from_json(const json& j) {
  MethodConfig mc;
  mc.method = method_from_name(j.at("name").get<std::string>());
  mc.iterations = j.value("iterations", 10);
  mc.step_budget = j.value("step_budget", std::uint64_t{100000});
  mc.snapshot_steps = j.value("snapshot_steps", std::uint64_t{0});
  mc.succ_samples = j.value("succ_samples",
                            mc.method == Method::SlowAgnosticAvi ? 20 : 40);
  mc.sim_paths = j.value("sim_paths", 25);
  mc.nominal = j.value("nominal", "preset");
  if (j.contains("nominal_indices"))
    mc.nominal_indices = j.at("nominal_indices").get<std::vector<Index>>();
  if (j.contains("features")) mc.features = feature_spec_from_json(j.at("features"));
  if (j.contains("fast_features")) mc.fast_features = feature_spec_from_json(j.at("fast_features"));
  if (j.contains("q_hyper")) {
    const json& q = j.at("q_hyper");
    mc.q_hyper.epsilon_start = q.value("epsilon_start", 1.0);
    mc.q_hyper.epsilon_end = q.value("epsilon_end", 0.05);
    mc.q_hyper.learning_rate_power = q.value("learning_rate_power", 0.6);
    mc.q_hyper.episode_length = q.value("episode_length", 100);
  }
  return mc;
}

json env_to_json_obj(const EnvConfig& env) {
  json j;
  j["name"] = env.name;
  if (env.gamma) j["gamma"] = *env.gamma;
  if (env.name == "queue") {
    const QueueParams& p = env.queue;
    j["params"] = {{"arrival_rate_1", p.arrival_rate_1}, {"arrival_rate_2", p.arrival_rate_2},
                   {"service_rate_1", p.service_rate_1}, {"service_rate_2", p.service_rate_2},
                   {"capacity_1", p.capacity_1},         {"capacity_2", p.capacity_2},
                   {"cost_levels", p.cost_levels},       {"cost_low", p.cost_low},
                   {"cost_high", p.cost_high},           {"cost_stay", p.cost_stay},
                   {"cost_up", p.cost_up},               {"cost_down", p.cost_down},
                   {"gamma", p.gamma}};
  } else if (env.name == "bandit") {
    const BanditParams& p = env.bandit;
    j["params"] = {{"env_levels", p.env_levels},
                   {"walk_probs", std::vector<double>(p.walk_probs, p.walk_probs + 5)},
                   {"stay_bad_no_int_at_0", p.stay_bad_no_int_at_0},
                   {"stay_bad_no_int_at_max", p.stay_bad_no_int_at_max},
                   {"stay_bad_int_at_0", p.stay_bad_int_at_0},
                   {"stay_bad_int_at_max", p.stay_bad_int_at_max},
                   {"break_no_int_at_0", p.break_no_int_at_0},
                   {"break_no_int_at_max", p.break_no_int_at_max},
                   {"break_int_at_0", p.break_int_at_0},
                   {"break_int_at_max", p.break_int_at_max},
                   {"operational_reward", p.operational_reward},
                   {"intervention_cost", p.intervention_cost},
                   {"gamma", p.gamma}};
  } else if (env.name == "demand_response") {
    const DemandResponseParams& p = env.demand_response;
    j["params"] = {{"ou_c1", p.ou_c1},
                   {"ou_c2", p.ou_c2},
                   {"price_low", p.price_low},
                   {"price_high", p.price_high},
                   {"price_step", p.price_step},
                   {"da_noise_std", p.da_noise_std},
                   {"rt_levels", p.rt_levels},
                   {"rt_under_low", p.rt_under_low},
                   {"rt_under_high", p.rt_under_high},
                   {"rt_over_low", p.rt_over_low},
                   {"rt_over_high", p.rt_over_high},
                   {"bids", p.bids},
                   {"alphas", p.alphas},
                   {"b11", p.b11},
                   {"b12", p.b12},
                   {"b21", p.b21},
                   {"b22", p.b22},
                   {"demand_noise_std", p.demand_noise_std},
                   {"demand_noise_cells", p.demand_noise_cells},
                   {"gamma", p.gamma}};
  } else if (env.name == "random") {
    const RandomFastSlowSpec& p = env.random;
    j["params"] = {{"n_slow", p.n_slow},
                   {"n_fast", p.n_fast},
                   {"n_actions", p.n_actions},
                   {"alpha", p.alpha},
                   {"d_y", p.d_y},
                   {"reward_mode",
                    p.reward_mode == RandomFastSlowSpec::RewardMode::Factored ? "factored"
                                                                              : "generic"},
                   {"zeta", p.zeta},
                   {"x_free", p.x_free},
                   {"gamma", p.gamma}};
    j["seed"] = env.random_seed;
  } else {
    throw std::invalid_argument("unknown environment: " + env.name);
  }
  return j;
}

EnvConfig env_from_json_obj(const json& j) {
  EnvConfig env;
  env.name = j.at("name").get<std::string>();
  if (j.contains("gamma")) env.gamma = j.at("gamma").get<double>();
  const json p = j.value("params", json::object());
  if (env.name == "queue") {
    QueueParams& q = env.queue;
    q.arrival_rate_1 = p.value("arrival_rate_1", q.arrival_rate_1);
    q.arrival_rate_2 = p.value("arrival_rate_2", q.arrival_rate_2);
    q.service_rate_1 = p.value("service_rate_1", q.service_rate_1);
    q.service_rate_2 = p.value("service_rate_2", q.service_rate_2);
    q.capacity_1 = p.value("capacity_1", q.capacity_1);
    q.capacity_2 = p.value("capacity_2", q.capacity_2);
    q.cost_levels = p.value("cost_levels", q.cost_levels);
    q.cost_low = p.value("cost_low", q.cost_low);
    q.cost_high = p.value("cost_high", q.cost_high);
    q.cost_stay = p.value("cost_stay", q.cost_stay);
    q.cost_up = p.value("cost_up", q.cost_up);
    q.cost_down = p.value("cost_down", q.cost_down);
    q.gamma = p.value("gamma", q.gamma);
  } else if (env.name == "bandit") {
    BanditParams& b = env.bandit;
    b.env_levels = p.value("env_levels", b.env_levels);
    if (p.contains("walk_probs")) {
      const auto w = p.at("walk_probs").get<std::vector<double>>();
      if (w.size() != 5) throw std::invalid_argument("bandit walk_probs needs 5 entries");
      std::copy(w.begin(), w.end(), b.walk_probs);
    }
    b.stay_bad_no_int_at_0 = p.value("stay_bad_no_int_at_0", b.stay_bad_no_int_at_0);
    b.stay_bad_no_int_at_max = p.value("stay_bad_no_int_at_max", b.stay_bad_no_int_at_max);
    b.stay_bad_int_at_0 = p.value("stay_bad_int_at_0", b.stay_bad_int_at_0);
    b.stay_bad_int_at_max = p.value("stay_bad_int_at_max", b.stay_bad_int_at_max);
    b.break_no_int_at_0 = p.value("break_no_int_at_0", b.break_no_int_at_0);
    b.break_no_int_at_max = p.value("break_no_int_at_max", b.break_no_int_at_max);
    b.break_int_at_0 = p.value("break_int_at_0", b.break_int_at_0);
    b.break_int_at_max = p.value("break_int_at_max", b.break_int_at_max);
    b.operational_reward = p.value("operational_reward", b.operational_reward);
    b.intervention_cost = p.value("intervention_cost", b.intervention_cost);
    b.gamma = p.value("gamma", b.gamma);
  } else if (env.name == "demand_response") {
    DemandResponseParams& d = env.demand_response;
    d.ou_c1 = p.value("ou_c1", d.ou_c1);
    d.ou_c2 = p.value("ou_c2", d.ou_c2);
    d.price_low = p.value("price_low", d.price_low);
    d.price_high = p.value("price_high", d.price_high);
    d.price_step = p.value("price_step", d.price_step);
    d.da_noise_std = p.value("da_noise_std", d.da_noise_std);
    d.rt_levels = p.value("rt_levels", d.rt_levels);
    d.rt_under_low = p.value("rt_under_low", d.rt_under_low);
    d.rt_under_high = p.value("rt_under_high", d.rt_under_high);
    d.rt_over_low = p.value("rt_over_low", d.rt_over_low);
    d.rt_over_high = p.value("rt_over_high", d.rt_over_high);
    if (p.contains("bids")) d.bids = p.at("bids").get<std::vector<double>>();
    if (p.contains("alphas")) d.alphas = p.at("alphas").get<std::vector<double>>();
    d.b11 = p.value("b11", d.b11);
    d.b12 = p.value("b12", d.b12);
    d.b21 = p.value("b21", d.b21);
    d.b22 = p.value("b22", d.b22);
    d.demand_noise_std = p.value("demand_noise_std", d.demand_noise_std);
    d.demand_noise_cells = p.value("demand_noise_cells", d.demand_noise_cells);
    d.gamma = p.value("gamma", d.gamma);
  } else if (env.name == "random") {
    RandomFastSlowSpec& r = env.random;
    r.n_slow = p.value("n_slow", r.n_slow);
    r.n_fast = p.value("n_fast", r.n_fast);
    r.n_actions = p.value("n_actions", r.n_actions);
    r.alpha = p.value("alpha", r.alpha);
    r.d_y = p.value("d_y", r.d_y);
    r.reward_mode = p.value("reward_mode", std::string("generic")) == "factored"
                        ? RandomFastSlowSpec::RewardMode::Factored
                        : RandomFastSlowSpec::RewardMode::Generic;
    r.zeta = p.value("zeta", r.zeta);
    r.x_free = p.value("x_free", r.x_free);
    r.gamma = p.value("gamma", r.gamma);
    env.random_seed = j.value("seed", std::uint64_t{0});
  } else {
    throw std::invalid_argument("unknown environment: " + env.name);
  }
  return env;
}

}  // namespace

std::string env_config_to_json(const EnvConfig& env) { return env_to_json_obj(env).dump(); }

EnvConfig env_config_from_json(const std::string& text) {
  return env_from_json_obj(json::parse(text));
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["format"] = "fsmdp-experiment/1";
  j["env"] = env_to_json_obj(cfg.env);
  j["period"] = cfg.period;
  j["n_seeds"] = cfg.n_seeds;
  j["eval_horizon"] = cfg.eval_horizon;
  j["eval_episodes"] = cfg.eval_episodes;
  j["snapshots_per_sweep"] = cfg.snapshots_per_sweep;
  j["base_seed"] = cfg.base_seed;
  json methods = json::array();
  for (const auto& mc : cfg.methods) methods.push_back(method_to_json(mc));
  j["methods"] = std::move(methods);
  return j.dump();
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.env = env_from_json_obj(j.at("env"));
  cfg.period = j.value("period", 10);
  cfg.n_seeds = j.value("n_seeds", 10);
  cfg.eval_horizon = j.value("eval_horizon", 0);
  cfg.eval_episodes = j.value("eval_episodes", 200);
  cfg.snapshots_per_sweep = j.value("snapshots_per_sweep", 8);
  cfg.base_seed = j.value("base_seed", std::uint64_t{0});
  for (const auto& mj : j.at("methods")) cfg.methods.push_back(method_from_json(mj));
  cfg.validate();
  return cfg;
}

//===========================================================================
// Experiment runner
//===========================================================================

namespace {

FeatureSpec resolve_feature_spec(const std::optional<FeatureSpec>& spec, Index n_states) {
  if (!spec) return FeatureSpec{RbfSpec{}, 1.0};
  FeatureSpec out = *spec;
  if (const auto* agg = std::get_if<AggregationSpec>(&out.kind); agg && agg->partition.empty())
    out = identity_feature_spec(n_states);
  return out;
}

SolveTrace run_method(const ExperimentConfig& cfg, const FastSlowMdp& mdp,
                      const MethodConfig& mc, std::uint64_t run_key);

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const FastSlowMdp& mdp,
                                      int workers) {
  cfg.validate();
  const std::string config_hash = fnv1a_hex(experiment_config_to_json(cfg));
  const int horizon = cfg.eval_horizon > 0 ? cfg.eval_horizon : 10 * cfg.period;

  struct Task {
    std::size_t method_idx;
    int seed;
  };
  std::vector<Task> tasks;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
    for (int seed = 0; seed < cfg.n_seeds; ++seed) tasks.push_back({mi, seed});

  std::vector<RunRecord> records(tasks.size());
  parallel_for(0, tasks.size(), workers, [&](std::size_t ti) {
    const Task& task = tasks[ti];
    const MethodConfig& mc = cfg.methods[task.method_idx];
    const std::uint64_t run_key =
        counter_hash(cfg.base_seed, static_cast<std::uint64_t>(mc.method),
                     static_cast<std::uint64_t>(task.seed), 0x7A5CULL);
    const SolveTrace trace = run_method(cfg, mdp, mc, run_key);

    RunRecord rec;
    rec.method = method_name(mc.method);
    rec.seed = task.seed;
    rec.config_hash = config_hash;
    rec.code_version = code_version();
    {
      json hyper = json::parse(experiment_config_to_json(cfg))["methods"][task.method_idx];
      hyper["gamma"] = mdp.gamma();
      hyper["period"] = cfg.period;
      hyper["eval_horizon"] = horizon;
      hyper["eval_episodes"] = cfg.eval_episodes;
      hyper["start_distribution"] = "uniform";
      rec.hyper_json = hyper.dump();
    }
    rec.points.reserve(trace.snapshots.size());
    for (std::size_t si = 0; si < trace.snapshots.size(); ++si) {
      const auto& snap = trace.snapshots[si];
      const std::uint64_t eval_seed = counter_hash(run_key, 0xEA11, si);
      const std::vector<double> returns =
          simulate_returns(mdp, snap.policy, horizon, cfg.eval_episodes, eval_seed);
      double mean = 0.0;
      for (double r : returns) mean += r;
      mean /= static_cast<double>(returns.size());
      rec.points.push_back({snap.cost, mean});
    }
    records[ti] = std::move(rec);
  });
  return records;
}

namespace {

SolveTrace run_method(const ExperimentConfig& cfg, const FastSlowMdp& mdp,
                      const MethodConfig& mc, std::uint64_t run_key) {
  SolveOptions opt;
  opt.trace.record_snapshots = true;
  opt.trace.snapshots_per_sweep = cfg.snapshots_per_sweep;
  opt.trace.snapshot_steps = mc.snapshot_steps;
  opt.trace.shuffle_seed = run_key;

  switch (mc.method) {
    case Method::BaseVi:
      return exact_vi(mdp, mc.iterations, ValueTable(mdp.n_states(), 0.0), opt).trace;
    case Method::SlowAgnosticVi:
      return slow_agnostic_vi(mdp, mc.iterations, opt).trace;
    case Method::QLearning:
      return q_learning(mdp, mc.step_budget, mc.q_hyper, run_key, opt).trace;
    case Method::Fsvi:
      return fsvi(mdp, cfg.period, mc.iterations, opt).trace;
    case Method::NominalFsvi: {
      const std::vector<Index> nominal = mc.nominal == "preset"
                                             ? preset_nominal_states(cfg.env, mdp)
                                             : mc.nominal_indices;
      const NominalDecomposition decomp = preset_nominal_decomposition(cfg.env, mdp, nominal);
      return nominal_fsvi(mdp, cfg.period, mc.iterations, nominal, decomp, opt).trace;
    }
    case Method::BaseAvi: {
      const FeatureModel fm =
          build_state_features(mdp, resolve_feature_spec(mc.features, mdp.n_states()), run_key);
      AviOptions aopt{mc.succ_samples, opt};
      return avi_base(mdp, fm, mc.iterations, aopt, run_key).trace;
    }
    case Method::SlowAgnosticAvi: {
      const FeatureModel fm =
          build_fast_features(mdp, resolve_feature_spec(mc.fast_features, mdp.n_fast()), run_key);
      AviOptions aopt{mc.succ_samples, opt};
      return avi_slow_agnostic(mdp, fm, mc.iterations, aopt, run_key).trace;
    }
    case Method::Fsavi: {
      const FeatureModel fm =
          build_state_features(mdp, resolve_feature_spec(mc.features, mdp.n_states()), run_key);
      return fsavi(mdp, fm, cfg.period, mc.iterations, SimSpec{mc.sim_paths}, run_key, opt).trace;
    }
    case Method::NominalFsavi: {
      const FeatureModel fm =
          build_state_features(mdp, resolve_feature_spec(mc.features, mdp.n_states()), run_key);
      const FeatureModel fm_y =
          build_fast_features(mdp, resolve_feature_spec(mc.fast_features, mdp.n_fast()), run_key);
      const std::vector<Index> nominal = mc.nominal == "preset"
                                             ? preset_nominal_states(cfg.env, mdp)
                                             : mc.nominal_indices;
      const NominalDecomposition decomp = preset_nominal_decomposition(cfg.env, mdp, nominal);
      return nominal_fsavi(mdp, fm, fm_y, cfg.period, mc.iterations, nominal, decomp,
                           SimSpec{mc.sim_paths}, run_key, opt)
          .trace;
    }
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace

//===========================================================================
// Record serialization and percentile aggregation
//===========================================================================

std::string records_to_json(const std::vector<RunRecord>& records) {
  json j;
  j["format"] = "fsmdp-records/1";
  json arr = json::array();
  for (const auto& rec : records) {
    json points = json::array();
    for (const auto& pt : rec.points) points.push_back(json::array({pt.cost, pt.mean_return}));
    arr.push_back({{"method", rec.method},
                   {"seed", rec.seed},
                   {"points", std::move(points)},
                   {"config_hash", rec.config_hash},
                   {"code_version", rec.code_version},
                   {"hyper", json::parse(rec.hyper_json.empty() ? "{}" : rec.hyper_json)}});
  }
  j["records"] = std::move(arr);
  return j.dump();
}

std::vector<RunRecord> records_from_json(const std::string& text) {
  const json j = json::parse(text);
  std::vector<RunRecord> out;
  for (const auto& rj : j.at("records")) {
    RunRecord rec;
    rec.method = rj.at("method").get<std::string>();
    rec.seed = rj.at("seed").get<int>();
    for (const auto& pt : rj.at("points"))
      rec.points.push_back({pt.at(0).get<std::uint64_t>(), pt.at(1).get<double>()});
    rec.config_hash = rj.value("config_hash", "");
    rec.code_version = rj.value("code_version", "");
    if (rj.contains("hyper")) rec.hyper_json = rj.at("hyper").dump();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "method,seed,cost,return\n";
  out.precision(17);
  for (const auto& rec : records)
    for (const auto& pt : rec.points)
      out << rec.method << ',' << rec.seed << ',' << pt.cost << ',' << pt.mean_return << '\n';
  return out.str();
}

namespace {

double interpolate_record(const RunRecord& rec, double cost) {
  if (rec.points.empty()) return 0.0;
  if (cost <= static_cast<double>(rec.points.front().cost)) return rec.points.front().mean_return;
  if (cost >= static_cast<double>(rec.points.back().cost)) return rec.points.back().mean_return;
  for (std::size_t i = 1; i < rec.points.size(); ++i) {
    const double c1 = static_cast<double>(rec.points[i].cost);
    if (cost <= c1) {
      const double c0 = static_cast<double>(rec.points[i - 1].cost);
      const double v0 = rec.points[i - 1].mean_return;
      const double v1 = rec.points[i].mean_return;
      const double t = c1 > c0 ? (cost - c0) / (c1 - c0) : 1.0;
      return v0 + t * (v1 - v0);
    }
  }
  return rec.points.back().mean_return;
}

double percentile(std::vector<double> vals, double q) {
  std::sort(vals.begin(), vals.end());
  const double pos = q * static_cast<double>(vals.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(vals.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return vals[lo] + frac * (vals[hi] - vals[lo]);
}

}  // namespace

PercentileTable build_percentiles(const std::vector<RunRecord>& records, int grid_points) {
  if (records.empty()) throw std::invalid_argument("build_percentiles: no records");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& rec : records) {
    if (rec.points.empty()) continue;
    lo = std::min(lo, static_cast<double>(rec.points.front().cost));
    hi = std::max(hi, static_cast<double>(rec.points.back().cost));
  }
  if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("build_percentiles: empty records");

  PercentileTable table;
  table.grid.resize(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    const double t = grid_points == 1 ? 1.0 : static_cast<double>(i) / (grid_points - 1);
    table.grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }

  std::map<std::string, std::vector<const RunRecord*>> by_method;
  for (const auto& rec : records) by_method[rec.method].push_back(&rec);
  for (const auto& [method, recs] : by_method) {
    PercentileTable::Row row;
    row.method = method;
    for (double g : table.grid) {
      std::vector<double> vals;
      for (const RunRecord* rec : recs) vals.push_back(interpolate_record(*rec, g));
      row.p10.push_back(percentile(vals, 0.10));
      row.median.push_back(percentile(vals, 0.50));
      row.p90.push_back(percentile(vals, 0.90));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string percentiles_to_csv(const PercentileTable& table) {
  std::ostringstream out;
  out << "method,cost,p10,median,p90\n";
  out.precision(17);
  for (const auto& row : table.rows)
    for (std::size_t i = 0; i < table.grid.size(); ++i)
      out << row.method << ',' << table.grid[i] << ',' << row.p10[i] << ',' << row.median[i] << ','
          << row.p90[i] << '\n';
  return out.str();
}

//===========================================================================
// Policy structure grids
//===========================================================================

namespace {

std::vector<double> axis_value(const FastSlowMdp& mdp, const GridAxis& axis, Index s) {
  const auto& coords = axis.space == "slow" ? mdp.slow_coords()[mdp.slow_of(s)]
                                            : mdp.fast_coords()[mdp.fast_of(s)];
  std::vector<double> v;
  for (int d : axis.dims) v.push_back(coords[static_cast<std::size_t>(d)]);
  return v;
}

bool condition_holds(const FastSlowMdp& mdp, const GridCondition& cond, Index s) {
  if (cond.kind == "all") return true;
  const auto& xs = mdp.slow_coords()[mdp.slow_of(s)];
  const double lhs = xs[static_cast<std::size_t>(cond.lhs)];
  const double rhs = xs[static_cast<std::size_t>(cond.rhs)];
  if (cond.kind == "slow_le") return lhs <= rhs;
  if (cond.kind == "slow_gt") return lhs > rhs;
  throw std::invalid_argument("unknown grid condition: " + cond.kind);
}

}  // namespace

std::string export_policy_grid(const std::vector<StationaryPolicy>& policies,
                               const FastSlowMdp& mdp, const PolicyGridSpec& spec) {
  if (policies.empty()) throw std::invalid_argument("export_policy_grid: no policies");
  if (spec.axis_row.space != "slow" && spec.axis_row.space != "fast")
    throw std::invalid_argument("grid axis space must be slow or fast");
  if (spec.axis_col.space != "slow" && spec.axis_col.space != "fast")
    throw std::invalid_argument("grid axis space must be slow or fast");

  std::set<std::vector<double>> row_vals, col_vals;
  for (Index s = 0; s < mdp.n_states(); ++s) {
    row_vals.insert(axis_value(mdp, spec.axis_row, s));
    col_vals.insert(axis_value(mdp, spec.axis_col, s));
  }
  const std::vector<std::vector<double>> rows(row_vals.begin(), row_vals.end());
  const std::vector<std::vector<double>> cols(col_vals.begin(), col_vals.end());
  auto index_of = [](const std::vector<std::vector<double>>& vals,
                     const std::vector<double>& v) {
    return static_cast<std::size_t>(
        std::lower_bound(vals.begin(), vals.end(), v) - vals.begin());
  };

  const Index n_actions = mdp.n_actions();
  const std::size_t n_cells = rows.size() * cols.size();
  std::vector<std::size_t> support(n_cells, 0);
  // Modal action per (cell, policy), then frequency over policies.
  std::vector<std::vector<std::size_t>> modal_counts(n_cells,
                                                     std::vector<std::size_t>(n_actions, 0));
  for (const auto& policy : policies) {
    std::vector<std::vector<std::size_t>> counts(n_cells,
                                                 std::vector<std::size_t>(n_actions, 0));
    for (Index s = 0; s < mdp.n_states(); ++s) {
      if (!condition_holds(mdp, spec.condition, s)) continue;
      const std::size_t cell = index_of(rows, axis_value(mdp, spec.axis_row, s)) * cols.size() +
                               index_of(cols, axis_value(mdp, spec.axis_col, s));
      counts[cell][policy.actions[s]] += 1;
    }
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
      std::size_t total = 0;
      Index modal = 0;
      for (Index a = 0; a < n_actions; ++a) {
        total += counts[cell][a];
        if (counts[cell][a] > counts[cell][modal]) modal = a;
      }
      if (total == 0) continue;
      support[cell] = total;
      modal_counts[cell][modal] += 1;
    }
  }

  json j;
  j["format"] = "fsmdp-policy-grid/1";
  j["rows"] = rows;
  j["cols"] = cols;
  j["condition"] = spec.condition.kind;
  j["policies"] = policies.size();
  json cells = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::size_t cell = r * cols.size() + c;
      if (support[cell] == 0) continue;
      json freq = json::array();
      for (Index a = 0; a < n_actions; ++a)
        freq.push_back(static_cast<double>(modal_counts[cell][a]) /
                       static_cast<double>(policies.size()));
      cells.push_back({{"row", r},
                       {"col", c},
                       {"states", support[cell]},
                       {"action_freq", std::move(freq)}});
    }
  j["cells"] = std::move(cells);
  return j.dump();
}

ExperimentConfig default_queue_experiment() {
  ExperimentConfig cfg;
  cfg.env.name = "queue";
  cfg.env.gamma = 0.95;
  cfg.period = 10;
  cfg.n_seeds = 10;
  cfg.eval_horizon = 100;
  cfg.eval_episodes = 200;
  cfg.snapshots_per_sweep = 8;
  cfg.base_seed = 0;

  MethodConfig base;
  base.method = Method::BaseVi;
  base.iterations = 12;
  MethodConfig slow;
  slow.method = Method::SlowAgnosticVi;
  slow.iterations = 40;
  MethodConfig ql;
  ql.method = Method::QLearning;
  ql.step_budget = 200000;
  ql.snapshot_steps = 4000;
  MethodConfig fs;
  fs.method = Method::Fsvi;
  fs.iterations = 6;
  MethodConfig nominal;
  nominal.method = Method::NominalFsvi;
  nominal.iterations = 6;
  cfg.methods = {base, slow, ql, fs, nominal};
  return cfg;
}

}  // namespace fsmdp
