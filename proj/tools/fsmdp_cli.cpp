// Command-line front end: environment construction, cost-metered solver
// runs, policy evaluation, experiment reproduction, bound reports, and
// plot-ready exports. Exit codes: 0 success, 2 validation error, 3 runtime
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fsmdp/analysis.hpp"
#include "fsmdp/avi.hpp"
#include "fsmdp/envs.hpp"
#include "fsmdp/experiment.hpp"
#include "fsmdp/serialize.hpp"
#include "fsmdp/simulate.hpp"
#include "fsmdp/solvers.hpp"

using namespace fsmdp;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

int run_build_env(const std::string& config_path, const std::string& out) {
  const EnvConfig env = env_config_from_json(read_file(config_path));
  const FastSlowMdp mdp = build_environment(env);
  write_file(out, mdp_to_json(mdp));
  std::cout << "built " << env.name << ": |X|=" << mdp.n_slow() << " |Y|=" << mdp.n_fast()
            << " |A|=" << mdp.n_actions() << " gamma=" << mdp.gamma() << " -> " << out << "\n";
  return 0;
}

int run_solve(const std::string& mdp_path, const std::string& config_path,
              const std::string& out_dir, std::uint64_t seed, int workers) {
  const FastSlowMdp mdp = mdp_from_json(read_file(mdp_path));
  const json cfg = json::parse(read_file(config_path));

  const std::string name = cfg.at("name").get<std::string>();
  SolveOptions opt;
  opt.workers = workers;
  opt.trace.record_snapshots = cfg.value("record_snapshots", false);
  opt.trace.snapshots_per_sweep = cfg.value("snapshots_per_sweep", 8);
  opt.trace.shuffle_seed = seed;

  AnyPolicy policy = StationaryPolicy{};
  SolveTrace trace;
  const int iterations = cfg.value("iterations", 10);
  const int period = cfg.value("period", 10);
  if (name == "base_vi") {
    VIResult r = exact_vi(mdp, iterations, ValueTable(mdp.n_states(), 0.0), opt);
    policy = r.policy;
    trace = std::move(r.trace);
  } else if (name == "slow_agnostic_vi") {
    FastVIResult r = slow_agnostic_vi(mdp, iterations, opt);
    policy = r.policy;
    trace = std::move(r.trace);
  } else if (name == "q_learning") {
    QLearningOptions hyper;
    QLearningResult r = q_learning(mdp, cfg.value("step_budget", std::uint64_t{100000}), hyper,
                                   seed, opt);
    policy = r.policy;
    trace = std::move(r.trace);
  } else if (name == "fsvi") {
    FsviResult r = fsvi(mdp, period, iterations, opt);
    policy = r.policy;
    trace = std::move(r.trace);
  } else if (name == "nominal_fsvi") {
    EnvConfig env;
    env.name = cfg.value("env_name", "random");
    const std::vector<Index> nominal = cfg.contains("nominal_indices")
                                           ? cfg.at("nominal_indices").get<std::vector<Index>>()
                                           : preset_nominal_states(env, mdp);
    const NominalDecomposition decomp = preset_nominal_decomposition(env, mdp, nominal);
    FsviResult r = nominal_fsvi(mdp, period, iterations, nominal, decomp, opt);
    policy = r.policy;
    trace = std::move(r.trace);
  } else if (name == "base_avi" || name == "fsavi" || name == "slow_agnostic_avi") {
    FeatureSpec spec{RbfSpec{cfg.value("rbf_fraction", 0.3), cfg.value("rbf_width", 0.02), {}},
                     cfg.value("kappa", 1.0)};
    if (name == "base_avi") {
      const FeatureModel fm = build_state_features(mdp, spec, seed);
      AviOptions aopt{cfg.value("succ_samples", 40), opt};
      AviResult r = avi_base(mdp, fm, iterations, aopt, seed);
      policy = r.policy;
      trace = std::move(r.trace);
    } else if (name == "slow_agnostic_avi") {
      const FeatureModel fm = build_fast_features(mdp, spec, seed);
      AviOptions aopt{cfg.value("succ_samples", 20), opt};
      FastAviResult r = avi_slow_agnostic(mdp, fm, iterations, aopt, seed);
      policy = r.policy;
      trace = std::move(r.trace);
    } else {
      const FeatureModel fm = build_state_features(mdp, spec, seed);
      FsaviResult r = fsavi(mdp, fm, period, iterations, SimSpec{cfg.value("sim_paths", 25)},
                            seed, opt);
      policy = r.policy;
      trace = std::move(r.trace);
    }
  } else {
    throw std::invalid_argument("unknown solver: " + name);
  }

  ensure_dir(out_dir);
  write_file(out_path(out_dir, "policy.json"), policy_to_json(policy));
  write_file(out_path(out_dir, "trace.json"), trace_to_json(trace));
  std::cout << name << " done: total cost " << trace.total_cost() << " units, outputs in "
            << out_dir << "\n";
  return 0;
}

int run_evaluate(const std::string& mdp_path, const std::string& policy_path, int horizon,
                 int episodes, int seeds, std::uint64_t seed, const std::string& out) {
  const FastSlowMdp mdp = mdp_from_json(read_file(mdp_path));
  const AnyPolicy policy = policy_from_json(read_file(policy_path));
  const std::vector<double> means = evaluate_policy(mdp, policy, horizon, episodes, seeds, seed);
  std::string csv = "seed,mean_return\n";
  for (std::size_t i = 0; i < means.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(means[i]) + "\n";
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_bench(const std::string& config_path, const std::string& out_dir, int workers,
              bool use_preset) {
  const ExperimentConfig cfg = use_preset
                                   ? default_queue_experiment()
                                   : experiment_config_from_json(read_file(config_path));
  const FastSlowMdp mdp = build_environment(cfg.env);
  const std::vector<RunRecord> records = run_experiment(cfg, mdp, workers);
  ensure_dir(out_dir);
  write_file(out_path(out_dir, "records.json"), records_to_json(records));
  write_file(out_path(out_dir, "results.csv"), records_to_csv(records));
  const PercentileTable table = build_percentiles(records);
  write_file(out_path(out_dir, "percentiles.csv"), percentiles_to_csv(table));
  std::cout << "bench complete: " << records.size() << " runs -> " << out_dir << "\n";
  return 0;
}

int run_bounds(const std::string& config_path, const std::string& out) {
  const json cfg = json::parse(read_file(config_path));
  BoundInputs in;
  in.gamma = cfg.value("gamma", 0.9);
  in.alpha = cfg.value("alpha", 0.0);
  in.d_y = cfg.value("d_y", 0.0);
  in.period = cfg.value("period", 1);
  in.iterations = cfg.value("iterations", 0);
  in.l_r = cfg.value("l_r", 0.0);
  in.l_f = cfg.value("l_f", 0.0);
  in.l_u = cfg.value("l_u", 0.0);
  in.r_max = cfg.value("r_max", 0.0);
  in.zeta = cfg.value("zeta", 0.0);
  in.max_nominal_distance = cfg.value("max_nominal_distance", 0.0);
  in.kappa = cfg.value("kappa", 1.0);
  in.eps_low = cfg.value("eps_low", 0.0);
  in.eps_up = cfg.value("eps_up", 0.0);

  const std::string kind = cfg.value("bound", "fsvi");
  BoundReport report;
  if (kind == "fsvi")
    report = regret_bound_fsvi_report(in);
  else if (kind == "nominal")
    report = regret_bound_nominal_report(in);
  else if (kind == "fsavi")
    report = regret_bound_fsavi_report(in);
  else if (kind == "reward_gap")
    report = BoundReport{{{"reward_gap", reward_gap_bound(in)}}, reward_gap_bound(in)};
  else
    throw std::invalid_argument("unknown bound kind: " + kind);

  json out_json;
  out_json["bound"] = kind;
  out_json["inputs"] = json::parse(read_file(config_path));
  json terms = json::object();
  for (const auto& [name, v] : report.terms) terms[name] = v;
  out_json["terms"] = terms;
  out_json["value"] = report.value;
  const std::string text = out_json.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_file(out, text);
  return 0;
}

int run_export(const std::string& records_path, const std::string& csv,
               const std::string& percentiles, const std::string& grid_spec,
               const std::string& mdp_path, const std::vector<std::string>& policy_paths,
               const std::string& grid_out) {
  if (!records_path.empty()) {
    const std::vector<RunRecord> records = records_from_json(read_file(records_path));
    if (!csv.empty()) write_file(csv, records_to_csv(records));
    if (!percentiles.empty())
      write_file(percentiles, percentiles_to_csv(build_percentiles(records)));
  }
  if (!grid_spec.empty()) {
    if (mdp_path.empty() || policy_paths.empty())
      throw std::invalid_argument("policy-grid export needs --mdp and --policies");
    const FastSlowMdp mdp = mdp_from_json(read_file(mdp_path));
    const json spec_json = json::parse(read_file(grid_spec));
    PolicyGridSpec spec;
    spec.axis_row.space = spec_json.at("axis_row").at("space").get<std::string>();
    spec.axis_row.dims = spec_json.at("axis_row").at("dims").get<std::vector<int>>();
    spec.axis_col.space = spec_json.at("axis_col").at("space").get<std::string>();
    spec.axis_col.dims = spec_json.at("axis_col").at("dims").get<std::vector<int>>();
    if (spec_json.contains("condition")) {
      spec.condition.kind = spec_json.at("condition").value("kind", "all");
      spec.condition.lhs = spec_json.at("condition").value("lhs", 0);
      spec.condition.rhs = spec_json.at("condition").value("rhs", 1);
    }
    std::vector<StationaryPolicy> policies;
    for (const std::string& path : policy_paths) {
      const AnyPolicy any = policy_from_json(read_file(path));
      if (const auto* sp = std::get_if<StationaryPolicy>(&any))
        policies.push_back(*sp);
      else if (const auto* tp = std::get_if<TPeriodicPolicy>(&any))
        policies.push_back(tp->mu);
      else
        throw std::invalid_argument("policy grids need stationary or periodic policies: " + path);
    }
    const std::string doc = export_policy_grid(policies, mdp, spec);
    if (grid_out.empty())
      std::cout << doc << "\n";
    else
      write_file(grid_out, doc);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fast-slow MDP solver bench"};
  app.require_subcommand(1);

  std::string config_path, mdp_path, out_path_arg, out_dir = "out", policy_path;
  std::uint64_t seed = 0;
  int workers = 1;

  auto* build_env = app.add_subcommand("build-env", "construct an environment MDP document");
  build_env->add_option("--config", config_path, "environment config (json)")->required();
  build_env->add_option("--out", out_path_arg, "output MDP path")->required();

  auto* solve = app.add_subcommand("solve", "run one solver on an MDP document");
  solve->add_option("--mdp", mdp_path, "MDP document")->required();
  solve->add_option("--config", config_path, "solver config (json)")->required();
  solve->add_option("--out-dir", out_dir, "output directory");
  solve->add_option("--seed", seed, "run seed");
  solve->add_option("--workers", workers, "worker threads");

  int horizon = 100, episodes = 200, seeds = 10;
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo policy evaluation");
  evaluate->add_option("--mdp", mdp_path)->required();
  evaluate->add_option("--policy", policy_path)->required();
  evaluate->add_option("--horizon", horizon);
  evaluate->add_option("--episodes", episodes);
  evaluate->add_option("--seeds", seeds);
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--out", out_path_arg);

  bool preset = false;
  auto* bench = app.add_subcommand("bench", "cost-metered experiment reproduction");
  bench->add_option("--config", config_path, "experiment config (json)");
  bench->add_flag("--queue-default", preset, "run the built-in service-allocation comparison");
  bench->add_option("--out-dir", out_dir);
  bench->add_option("--workers", workers);

  auto* bounds = app.add_subcommand("bounds", "theoretical regret bound report");
  bounds->add_option("--config", config_path)->required();
  bounds->add_option("--out", out_path_arg);

  std::string records_path, csv_out, percentiles_out, grid_spec, grid_out;
  std::vector<std::string> policy_paths;
  auto* exp = app.add_subcommand("export", "re-export records or policy grids");
  exp->add_option("--records", records_path);
  exp->add_option("--csv", csv_out);
  exp->add_option("--percentiles", percentiles_out);
  exp->add_option("--policy-grid", grid_spec, "grid slice spec (json)");
  exp->add_option("--mdp", mdp_path);
  exp->add_option("--policies", policy_paths);
  exp->add_option("--out", grid_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (build_env->parsed()) return run_build_env(config_path, out_path_arg);
    if (solve->parsed()) return run_solve(mdp_path, config_path, out_dir, seed, workers);
    if (evaluate->parsed())
      return run_evaluate(mdp_path, policy_path, horizon, episodes, seeds, seed, out_path_arg);
    if (bench->parsed()) {
      if (!preset && config_path.empty()) {
        std::cerr << "bench needs --config or --queue-default\n";
        return kExitValidation;
      }
      return run_bench(config_path, out_dir, workers, preset);
    }
    if (bounds->parsed()) return run_bounds(config_path, out_path_arg);
    if (exp->parsed())
      return run_export(records_path, csv_out, percentiles_out, grid_spec, mdp_path, policy_paths,
                        grid_out);
  } catch (const std::invalid_argument& err) {
    std::cerr << "validation error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
