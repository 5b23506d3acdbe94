#include "fsmdp/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fsmdp {

using nlohmann::json;

namespace {

json coords_to_json(const std::vector<std::vector<double>>& coords) {
  json out = json::array();
  for (const auto& c : coords) out.push_back(c);
  return out;
}

std::vector<std::vector<double>> coords_from_json(const json& j) {
  std::vector<std::vector<double>> out;
  for (const auto& c : j) out.push_back(c.get<std::vector<double>>());
  return out;
}

json policy_actions(const std::vector<Index>& actions) {
  json out = json::array();
  for (Index a : actions) out.push_back(a);
  return out;
}

std::vector<Index> actions_from_json(const json& j) {
  std::vector<Index> out;
  for (const auto& a : j) out.push_back(a.get<Index>());
  return out;
}

}  // namespace

std::string mdp_to_json(const FastSlowMdp& mdp) {
  json j;
  j["format"] = "fsmdp-mdp/1";
  j["gamma"] = mdp.gamma();
  j["slow_states"] = coords_to_json(mdp.slow_coords());
  j["fast_states"] = coords_to_json(mdp.fast_coords());
  j["actions"] = coords_to_json(mdp.action_coords());
  j["reward"] = mdp.reward_table();

  // Shared-row kernel form: distinct rows plus a (x,y,a) -> row map.
  json rows = json::array();
  for (const auto& row : mdp.kernel_rows()) {
    json entries = json::array();
    for (const auto& e : row) entries.push_back(json::array({e.succ, e.prob}));
    rows.push_back(std::move(entries));
  }
  j["kernel"] = {{"rows", std::move(rows)}, {"row_of", mdp.kernel_row_of()}};

  json meta = json::object();
  if (mdp.meta().d_y) meta["d_y"] = *mdp.meta().d_y;
  if (mdp.meta().alpha) meta["alpha"] = *mdp.meta().alpha;
  if (mdp.meta().zeta) meta["zeta"] = *mdp.meta().zeta;
  j["meta"] = std::move(meta);
  return j.dump();
}

FastSlowMdp mdp_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != "fsmdp-mdp/1")
    throw std::invalid_argument("unrecognized MDP document format");
  MdpTables t;
  t.gamma = j.at("gamma").get<double>();
  t.slow_states = coords_from_json(j.at("slow_states"));
  t.fast_states = coords_from_json(j.at("fast_states"));
  t.actions = coords_from_json(j.at("actions"));
  t.reward = j.at("reward").get<std::vector<double>>();

  const json& kernel = j.at("kernel");
  if (kernel.contains("rows")) {
    for (const auto& row : kernel.at("rows")) {
      KernelRow r;
      for (const auto& e : row) r.push_back({e.at(0).get<Index>(), e.at(1).get<double>()});
      t.kernel_rows.push_back(std::move(r));
    }
    if (kernel.contains("row_of")) t.kernel_row_of = kernel.at("row_of").get<std::vector<Index>>();
  } else if (kernel.contains("triplets")) {
    // Triplet form: [flat_state_action_row, flat_successor_state, probability].
    const std::size_t n_rows = t.reward.size();
    t.kernel_rows.assign(n_rows, {});
    for (const auto& trip : kernel.at("triplets")) {
      const std::size_t row = trip.at(0).get<std::size_t>();
      if (row >= n_rows) throw std::invalid_argument("kernel triplet row out of range");
      t.kernel_rows[row].push_back({trip.at(1).get<Index>(), trip.at(2).get<double>()});
    }
  } else {
    throw std::invalid_argument("kernel document needs either rows or triplets");
  }
  const json& meta = j.value("meta", json::object());
  if (meta.contains("d_y")) t.meta.d_y = meta.at("d_y").get<double>();
  if (meta.contains("alpha")) t.meta.alpha = meta.at("alpha").get<double>();
  if (meta.contains("zeta")) t.meta.zeta = meta.at("zeta").get<double>();
  return FastSlowMdp::build(std::move(t));
}

std::string policy_to_json(const AnyPolicy& policy) {
  json j;
  j["format"] = "fsmdp-policy/1";
  if (const auto* sp = std::get_if<StationaryPolicy>(&policy)) {
    j["kind"] = "stationary";
    j["actions"] = policy_actions(sp->actions);
  } else if (const auto* fp = std::get_if<FastPolicy>(&policy)) {
    j["kind"] = "fast";
    j["actions"] = policy_actions(fp->actions);
  } else {
    const auto& tp = std::get<TPeriodicPolicy>(policy);
    j["kind"] = "t_periodic";
    j["period"] = tp.period;
    j["mu"] = policy_actions(tp.mu.actions);
    json pi = json::array();
    for (const auto& step : tp.pi.steps) pi.push_back(policy_actions(step.actions));
    j["pi"] = std::move(pi);
  }
  return j.dump();
}

AnyPolicy policy_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != "fsmdp-policy/1")
    throw std::invalid_argument("unrecognized policy document format");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "stationary") return StationaryPolicy{actions_from_json(j.at("actions"))};
  if (kind == "fast") return FastPolicy{actions_from_json(j.at("actions"))};
  if (kind == "t_periodic") {
    TPeriodicPolicy tp;
    tp.period = j.at("period").get<int>();
    tp.mu.actions = actions_from_json(j.at("mu"));
    for (const auto& step : j.at("pi")) tp.pi.steps.push_back({actions_from_json(step)});
    return tp;
  }
  throw std::invalid_argument("unknown policy kind: " + kind);
}

std::string features_to_json(const FeatureModel& fm) {
  json j;
  j["format"] = "fsmdp-features/1";
  j["num_states"] = fm.num_states();
  j["num_features"] = fm.num_features();
  j["anchors"] = fm.anchors();
  j["kappa"] = fm.kappa();
  j["condition_estimate"] = fm.condition_estimate();
  if (fm.is_aggregation()) {
    j["kind"] = "aggregation";
    j["partition"] = fm.partition();
  } else {
    j["kind"] = "rbf";
    j["width"] = fm.width();
    j["centers"] = coords_to_json(fm.centers());
  }
  json rows = json::array();
  for (Index s = 0; s < fm.num_states(); ++s) {
    json row = json::array();
    for (const auto& e : fm.row(s)) row.push_back(json::array({e.feature, e.value}));
    rows.push_back(std::move(row));
  }
  j["phi"] = std::move(rows);
  return j.dump();
}

std::string trace_to_json(const SolveTrace& trace) {
  json j;
  j["format"] = "fsmdp-trace/1";
  json events = json::array();
  for (const auto& e : trace.events)
    events.push_back({{"stage", cost_stage_name(e.stage)}, {"units", e.units}});
  j["events"] = std::move(events);
  j["total_cost"] = trace.total_cost();
  json snaps = json::array();
  for (const auto& s : trace.snapshots)
    snaps.push_back({{"cost", s.cost}, {"policy", json::parse(policy_to_json(s.policy))}});
  j["snapshots"] = std::move(snaps);
  json tables = json::object();
  for (const auto& [name, table] : trace.final_tables) tables[name] = table;
  j["final_tables"] = std::move(tables);
  return j.dump();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string code_version() { return "fsmdp 0.1.0"; }

}  // namespace fsmdp
