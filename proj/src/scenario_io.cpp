#include "mpsim/scenario_io.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mpsim/error.hpp"

namespace mpsim {

using nlohmann::json;

namespace {

// ── File primitives ─────────────────────────────────────────────────────────

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw InputError("read failure on file: " + path);
  }
  return buffer.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot open file for writing: " + path);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out.good()) {
    throw InputError("write failure on file: " + path);
  }
}

/// Text JSON starts with '{' after optional whitespace; anything else is
/// treated as MessagePack.
json parse_document(const std::string& path) {
  const std::string bytes = read_file(path);
  std::size_t i = 0;
  while (i < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
  try {
    if (i < bytes.size() && bytes[i] == '{') {
      return json::parse(bytes);
    }
    return json::from_msgpack(bytes);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_document(const json& doc, const std::string& path, bool binary) {
  if (binary) {
    const auto bytes = json::to_msgpack(doc);
    write_file(path, std::string(bytes.begin(), bytes.end()));
  } else {
    write_file(path, doc.dump(2) + "\n");
  }
}

// ── Checked field access ────────────────────────────────────────────────────

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) {
    throw InputError(path + ": expected an object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw InputError(path + ": missing field '" + key + "'");
  }
  return *it;
}

double as_finite(const json& v, const std::string& path) {
  if (!v.is_number()) {
    throw InputError(path + ": expected a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    throw InputError(path + ": not a finite number");
  }
  return d;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) {
    throw InputError(path + ": expected an integer");
  }
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw InputError(path + ": expected an unsigned integer");
  }
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) {
    throw InputError(path + ": expected a boolean");
  }
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) {
    throw InputError(path + ": expected a string");
  }
  return v.get<std::string>();
}

void check_schema(const json& doc, const char* expected_kind, int expected_version,
                  const std::string& path) {
  const int version = as_int(require(doc, "schema_version", path), path + ".schema_version");
  if (version != expected_version) {
    throw InputError(path + ": unsupported schema_version " + std::to_string(version) +
                     " (expected " + std::to_string(expected_version) + ")");
  }
  const std::string kind = as_string(require(doc, "kind", path), path + ".kind");
  if (kind != expected_kind) {
    throw InputError(path + ": kind '" + kind + "' is not '" + expected_kind + "'");
  }
}

// ── State / trajectory encoding ─────────────────────────────────────────────

json state_to_json(const AgentState& s) { return json::array({s.x, s.y, s.vx, s.vy}); }

AgentState state_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 4) {
    throw InputError(path + ": expected [x, y, vx, vy]");
  }
  AgentState s;
  s.x = as_finite(v[0], path + "[0]");
  s.y = as_finite(v[1], path + "[1]");
  s.vx = as_finite(v[2], path + "[2]");
  s.vy = as_finite(v[3], path + "[3]");
  return s;
}

json states_to_json(const std::vector<AgentState>& states) {
  json arr = json::array();
  for (const auto& s : states) arr.push_back(state_to_json(s));
  return arr;
}

std::vector<AgentState> states_from_json(const json& v, const std::string& path) {
  if (!v.is_array()) {
    throw InputError(path + ": expected an array of states");
  }
  std::vector<AgentState> out;
  out.reserve(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) {
    out.push_back(state_from_json(v[t], path + "[" + std::to_string(t) + "]"));
  }
  return out;
}

json point_to_json(const Vec2& p) { return json::array({p.x(), p.y()}); }

Vec2 point_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) {
    throw InputError(path + ": expected [x, y]");
  }
  return {as_finite(v[0], path + "[0]"), as_finite(v[1], path + "[1]")};
}

json proposal_to_json(const Proposal& p) {
  json anchors = json::array();
  for (const auto& traj : p.anchors) anchors.push_back(states_to_json(traj.states));
  json goals = json::array();
  for (const auto& g : p.goals) goals.push_back(point_to_json(g));
  return json{{"anchors", anchors}, {"goals", goals}};
}

Proposal proposal_from_json(const json& v, double dt, const std::string& path) {
  Proposal p;
  const json& anchors = require(v, "anchors", path);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    Trajectory traj;
    traj.dt = dt;
    traj.states = states_from_json(anchors[i], path + ".anchors[" + std::to_string(i) + "]");
    p.anchors.push_back(std::move(traj));
  }
  const json& goals = require(v, "goals", path);
  for (std::size_t i = 0; i < goals.size(); ++i) {
    p.goals.push_back(point_from_json(goals[i], path + ".goals[" + std::to_string(i) + "]"));
  }
  if (p.goals.size() != p.anchors.size()) {
    throw InputError(path + ": anchors and goals disagree on agent count");
  }
  return p;
}

// ── Parameter blocks ────────────────────────────────────────────────────────

json weights_to_json(const FactorWeights& w) {
  return json{{"motion", w.w_motion},           {"goal", w.w_goal},
              {"linear", w.w_linear},           {"angular", w.w_angular},
              {"obstacle", w.w_obstacle},       {"collision", w.w_collision},
              {"softmin_temperature", w.softmin_temperature}};
}

json solver_to_json(const SolverParams& s) {
  return json{{"max_iterations", s.max_iterations},
              {"cost_tolerance", s.cost_tolerance},
              {"step_tolerance", s.step_tolerance},
              {"initial_damping", s.initial_damping},
              {"damping_increase", s.damping_increase},
              {"damping_decrease", s.damping_decrease},
              {"max_damping", s.max_damping},
              {"diagonal_epsilon", s.diagonal_epsilon}};
}

json field_to_json(const GaussianFieldParams& f) {
  return json{{"sigma_longitudinal", f.sigma_longitudinal},
              {"sigma_lateral", f.sigma_lateral},
              {"amplitude", f.amplitude}};
}

// Worker counts are deliberately absent from the echo: results are
// guaranteed identical across parallelism degrees, and persisting them
// would break byte-identity of otherwise equal runs.
json mps_to_json(const MpsParams& m) {
  return json{{"num_rollouts", m.num_rollouts},
              {"horizon", m.horizon},
              {"chunk_size", m.chunk_size},
              {"softmin_temperature", m.softmin_temperature},
              {"selection", to_string(m.selection)},
              {"interaction_only_energy", m.interaction_only_energy},
              {"include_goal_factor", m.include_goal_factor},
              {"weights", weights_to_json(m.weights)},
              {"solver", solver_to_json(m.solver)},
              {"field", field_to_json(m.field)}};
}

json proposer_to_json(const ProposerConfig& p) {
  json out{{"kind", to_string(p.kind)},
           {"position_noise_sigma", p.position_noise_sigma},
           {"goal_jitter_sigma", p.goal_jitter_sigma},
           {"speed_scale_min", p.speed_scale_range.first},
           {"speed_scale_max", p.speed_scale_range.second}};
  if (p.replay_path) out["replay_path"] = *p.replay_path;
  return out;
}

template <typename Fn>
void for_each_key(const json& obj, const std::string& path, Fn&& fn) {
  if (!obj.is_object()) {
    throw InputError(path + ": expected an object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    fn(it.key(), it.value());
  }
}

void apply_weights(const json& obj, FactorWeights& w, const std::string& path) {
  for_each_key(obj, path, [&](const std::string& key, const json& v) {
    const std::string p = path + "." + key;
    if (key == "motion") w.w_motion = as_finite(v, p);
    else if (key == "goal") w.w_goal = as_finite(v, p);
    else if (key == "linear") w.w_linear = as_finite(v, p);
    else if (key == "angular") w.w_angular = as_finite(v, p);
    else if (key == "obstacle") w.w_obstacle = as_finite(v, p);
    else if (key == "collision") w.w_collision = as_finite(v, p);
    else if (key == "softmin_temperature") w.softmin_temperature = as_finite(v, p);
    else throw InputError(p + ": unknown key");
  });
}

void apply_solver(const json& obj, SolverParams& s, const std::string& path) {
  for_each_key(obj, path, [&](const std::string& key, const json& v) {
    const std::string p = path + "." + key;
    if (key == "max_iterations") s.max_iterations = as_int(v, p);
    else if (key == "cost_tolerance") s.cost_tolerance = as_finite(v, p);
    else if (key == "step_tolerance") s.step_tolerance = as_finite(v, p);
    else if (key == "initial_damping") s.initial_damping = as_finite(v, p);
    else if (key == "damping_increase") s.damping_increase = as_finite(v, p);
    else if (key == "damping_decrease") s.damping_decrease = as_finite(v, p);
    else if (key == "max_damping") s.max_damping = as_finite(v, p);
    else if (key == "diagonal_epsilon") s.diagonal_epsilon = as_finite(v, p);
    else throw InputError(p + ": unknown key");
  });
}

void apply_field(const json& obj, GaussianFieldParams& f, const std::string& path) {
  for_each_key(obj, path, [&](const std::string& key, const json& v) {
    const std::string p = path + "." + key;
    if (key == "sigma_longitudinal") f.sigma_longitudinal = as_finite(v, p);
    else if (key == "sigma_lateral") f.sigma_lateral = as_finite(v, p);
    else if (key == "amplitude") f.amplitude = as_finite(v, p);
    else throw InputError(p + ": unknown key");
  });
}

void apply_mps(const json& obj, MpsParams& m, const std::string& path) {
  for_each_key(obj, path, [&](const std::string& key, const json& v) {
    const std::string p = path + "." + key;
    if (key == "num_rollouts") m.num_rollouts = as_int(v, p);
    else if (key == "horizon") m.horizon = as_int(v, p);
    else if (key == "chunk_size") m.chunk_size = as_int(v, p);
    else if (key == "softmin_temperature") m.softmin_temperature = as_finite(v, p);
    else if (key == "selection") m.selection = selection_mode_from_string(as_string(v, p));
    else if (key == "interaction_only_energy") m.interaction_only_energy = as_bool(v, p);
    else if (key == "include_goal_factor") m.include_goal_factor = as_bool(v, p);
    else if (key == "num_threads") m.num_threads = as_int(v, p);
    else if (key == "weights") apply_weights(v, m.weights, p);
    else if (key == "solver") apply_solver(v, m.solver, p);
    else if (key == "field") apply_field(v, m.field, p);
    else throw InputError(p + ": unknown key");
  });
}

void apply_proposer(const json& obj, ProposerConfig& c, const std::string& path) {
  for_each_key(obj, path, [&](const std::string& key, const json& v) {
    const std::string p = path + "." + key;
    if (key == "kind") c.kind = proposer_kind_from_string(as_string(v, p));
    else if (key == "position_noise_sigma") c.position_noise_sigma = as_finite(v, p);
    else if (key == "goal_jitter_sigma") c.goal_jitter_sigma = as_finite(v, p);
    else if (key == "speed_scale_min") c.speed_scale_range.first = as_finite(v, p);
    else if (key == "speed_scale_max") c.speed_scale_range.second = as_finite(v, p);
    else if (key == "replay_path") c.replay_path = as_string(v, p);
    else throw InputError(p + ": unknown key");
  });
}

}  // namespace

json params_to_json(const SimParams& params, const ProposerConfig& proposer) {
  return json{{"num_samples", params.num_samples},
              {"total_steps", params.total_steps},
              {"master_seed", params.master_seed},
              {"history_window", params.history_window},
              {"mps", mps_to_json(params.mps)},
              {"proposer", proposer_to_json(proposer)}};
}

void apply_config(const json& config, SimParams& params, ProposerConfig& proposer) {
  for_each_key(config, "config", [&](const std::string& key, const json& v) {
    const std::string p = "config." + key;
    if (key == "num_samples") params.num_samples = as_int(v, p);
    else if (key == "total_steps") params.total_steps = as_int(v, p);
    else if (key == "master_seed") params.master_seed = as_u64(v, p);
    else if (key == "num_threads") params.num_threads = as_int(v, p);
    else if (key == "history_window") params.history_window = as_int(v, p);
    else if (key == "mps") apply_mps(v, params.mps, p);
    else if (key == "proposer") apply_proposer(v, proposer, p);
    else throw InputError(p + ": unknown key");
  });
}

// ── Scenario files ──────────────────────────────────────────────────────────

Scenario load_scenario(const std::string& path) {
  const json doc = parse_document(path);
  check_schema(doc, "scenario", kScenarioSchemaVersion, path);

  Scenario scenario;
  scenario.context.dt = as_finite(require(doc, "dt", path), path + ".dt");

  scenario.drivable_interior =
      as_string(require(doc, "drivable_interior", path), path + ".drivable_interior");
  if (scenario.drivable_interior != "inside" && scenario.drivable_interior != "outside") {
    throw InputError(path + ".drivable_interior: must be 'inside' or 'outside'");
  }

  const json& edges = require(doc, "road_edges", path);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string epath = path + ".road_edges[" + std::to_string(e) + "]";
    Polyline line;
    for (std::size_t i = 0; i < edges[e].size(); ++i) {
      line.push_back(point_from_json(edges[e][i], epath + "[" + std::to_string(i) + "]"));
    }
    scenario.context.road_edges.push_back(std::move(line));
  }

  const json& agents = require(doc, "agents", path);
  if (!agents.is_array() || agents.empty()) {
    throw InputError(path + ".agents: expected a non-empty array");
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string apath = path + ".agents[" + std::to_string(i) + "]";
    const json& a = agents[i];
    AgentGeometry geom;
    geom.agent_id = as_string(require(a, "id", apath), apath + ".id");
    if (a.contains("length")) geom.length = as_finite(a["length"], apath + ".length");
    if (a.contains("width")) geom.width = as_finite(a["width"], apath + ".width");
    scenario.context.agents.push_back(geom);
    scenario.context.histories.push_back(
        states_from_json(require(a, "history", apath), apath + ".history"));
    if (a.contains("intent")) {
      scenario.context.intents.push_back(point_from_json(a["intent"], apath + ".intent"));
    } else {
      scenario.context.intents.push_back(std::nullopt);
    }
  }

  if (doc.contains("logged_future")) {
    const json& future = doc["logged_future"];
    if (!future.is_array() || future.size() != agents.size()) {
      throw InputError(path + ".logged_future: expected one state array per agent");
    }
    std::size_t expected_len = 0;
    for (std::size_t i = 0; i < future.size(); ++i) {
      auto states =
          states_from_json(future[i], path + ".logged_future[" + std::to_string(i) + "]");
      if (states.empty()) {
        throw InputError(path + ".logged_future[" + std::to_string(i) + "]: empty");
      }
      if (i == 0) expected_len = states.size();
      if (states.size() != expected_len) {
        throw InputError(path + ".logged_future: all agents must have the same length");
      }
      scenario.logged_future.push_back(std::move(states));
    }
  }

  try {
    scenario.context.validate();
  } catch (const std::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return scenario;
}

void save_scenario(const Scenario& scenario, const std::string& path, bool binary) {
  const SceneContext& c = scenario.context;
  json agents = json::array();
  for (std::size_t i = 0; i < c.agents.size(); ++i) {
    json a{{"id", c.agents[i].agent_id},
           {"length", c.agents[i].length},
           {"width", c.agents[i].width},
           {"history", states_to_json(c.histories[i])}};
    if (i < c.intents.size() && c.intents[i]) a["intent"] = point_to_json(*c.intents[i]);
    agents.push_back(a);
  }
  json edges = json::array();
  for (const auto& line : c.road_edges) {
    json e = json::array();
    for (const auto& p : line) e.push_back(point_to_json(p));
    edges.push_back(e);
  }
  json doc{{"schema_version", kScenarioSchemaVersion},
           {"kind", "scenario"},
           {"dt", c.dt},
           {"drivable_interior", scenario.drivable_interior},
           {"road_edges", edges},
           {"agents", agents}};
  if (!scenario.logged_future.empty()) {
    json future = json::array();
    for (const auto& states : scenario.logged_future) future.push_back(states_to_json(states));
    doc["logged_future"] = future;
  }
  write_document(doc, path, binary);
}

// ── Rollout files ───────────────────────────────────────────────────────────

namespace {

json breakdown_to_json(const EnergyBreakdown& b) {
  return json::array({b.motion, b.goal, b.linear, b.angular, b.obstacle, b.collision});
}

EnergyBreakdown breakdown_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 6) {
    throw InputError(path + ": expected [motion, goal, linear, angular, obstacle, collision]");
  }
  EnergyBreakdown b;
  b.motion = as_finite(v[0], path + "[0]");
  b.goal = as_finite(v[1], path + "[1]");
  b.linear = as_finite(v[2], path + "[2]");
  b.angular = as_finite(v[3], path + "[3]");
  b.obstacle = as_finite(v[4], path + "[4]");
  b.collision = as_finite(v[5], path + "[5]");
  return b;
}

}  // namespace

void save_rollouts(const SimulationRecord& record, const std::string& path, bool binary) {
  if (!record.output.all_finite()) {
    throw NumericalError("refusing to serialize non-finite trajectory states");
  }
  json samples = json::array();
  for (std::size_t k = 0; k < record.output.samples.size(); ++k) {
    const SampleRun& run = record.output.samples[k];
    json steps = json::array();
    for (const auto& step : run.steps) {
      json breakdowns = json::array();
      for (const auto& b : step.breakdowns) breakdowns.push_back(breakdown_to_json(b));
      steps.push_back(json{{"start_step", step.start_step},
                           {"selected", step.selected},
                           {"energies", step.energies},
                           {"breakdowns", breakdowns}});
    }
    json trajectories = json::array();
    for (const auto& traj : run.trajectories) trajectories.push_back(states_to_json(traj.states));
    samples.push_back(json{{"k", k}, {"steps", steps}, {"trajectories", trajectories}});
  }

  json doc{{"schema_version", kRolloutsSchemaVersion},
           {"kind", "rollouts"},
           {"dt", record.dt},
           {"agent_ids", record.agent_ids},
           {"params", params_to_json(record.params, record.proposer)},
           {"samples", samples}};
  if (!record.proposals.empty()) {
    json items = json::array();
    for (const auto& p : record.proposals) items.push_back(proposal_to_json(p));
    doc["proposals"] = items;
  }
  write_document(doc, path, binary);
}

SimulationRecord load_rollouts(const std::string& path) {
  const json doc = parse_document(path);
  check_schema(doc, "rollouts", kRolloutsSchemaVersion, path);

  SimulationRecord record;
  record.dt = as_finite(require(doc, "dt", path), path + ".dt");
  for (const auto& id : require(doc, "agent_ids", path)) {
    record.agent_ids.push_back(as_string(id, path + ".agent_ids[]"));
  }
  apply_config(require(doc, "params", path), record.params, record.proposer);

  record.output.dt = record.dt;
  const json& samples = require(doc, "samples", path);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const std::string spath = path + ".samples[" + std::to_string(k) + "]";
    SampleRun run;
    const json& steps = require(samples[k], "steps", spath);
    for (std::size_t s = 0; s < steps.size(); ++s) {
      const std::string stpath = spath + ".steps[" + std::to_string(s) + "]";
      StepDiagnostics diag;
      diag.start_step = as_int(require(steps[s], "start_step", stpath), stpath + ".start_step");
      diag.selected = as_int(require(steps[s], "selected", stpath), stpath + ".selected");
      for (const auto& e : require(steps[s], "energies", stpath)) {
        diag.energies.push_back(as_finite(e, stpath + ".energies[]"));
      }
      const json& breakdowns = require(steps[s], "breakdowns", stpath);
      for (std::size_t b = 0; b < breakdowns.size(); ++b) {
        diag.breakdowns.push_back(
            breakdown_from_json(breakdowns[b], stpath + ".breakdowns[" + std::to_string(b) + "]"));
      }
      if (diag.breakdowns.size() != diag.energies.size()) {
        throw InputError(stpath + ": breakdowns and energies disagree on rollout count");
      }
      run.steps.push_back(std::move(diag));
    }
    const json& trajectories = require(samples[k], "trajectories", spath);
    if (trajectories.size() != record.agent_ids.size()) {
      throw InputError(spath + ".trajectories: expected one per agent");
    }
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      Trajectory traj;
      traj.dt = record.dt;
      traj.states = states_from_json(trajectories[i],
                                     spath + ".trajectories[" + std::to_string(i) + "]");
      run.trajectories.push_back(std::move(traj));
    }
    record.output.samples.push_back(std::move(run));
  }

  if (doc.contains("proposals")) {
    const json& items = doc["proposals"];
    for (std::size_t i = 0; i < items.size(); ++i) {
      record.proposals.push_back(proposal_from_json(
          items[i], record.dt, path + ".proposals[" + std::to_string(i) + "]"));
    }
  }
  return record;
}

// ── Proposals files ─────────────────────────────────────────────────────────

void save_proposals(const std::vector<Proposal>& items, double dt, const std::string& path,
                    bool binary) {
  json arr = json::array();
  for (const auto& p : items) arr.push_back(proposal_to_json(p));
  json doc{{"schema_version", kProposalsSchemaVersion},
           {"kind", "proposals"},
           {"dt", dt},
           {"items", arr}};
  write_document(doc, path, binary);
}

std::vector<Proposal> load_proposals(const std::string& path) {
  const json doc = parse_document(path);
  std::vector<Proposal> out;
  const double dt = as_finite(require(doc, "dt", path), path + ".dt");
  const json* items = nullptr;
  if (as_string(require(doc, "kind", path), path + ".kind") == "proposals") {
    check_schema(doc, "proposals", kProposalsSchemaVersion, path);
    items = &require(doc, "items", path);
  } else {
    // A rollout file's proposals section is accepted interchangeably.
    check_schema(doc, "rollouts", kRolloutsSchemaVersion, path);
    if (!doc.contains("proposals")) {
      throw InputError(path + ": rollout file carries no proposals section");
    }
    items = &doc["proposals"];
  }
  for (std::size_t i = 0; i < items->size(); ++i) {
    out.push_back(
        proposal_from_json((*items)[i], dt, path + ".items[" + std::to_string(i) + "]"));
  }
  if (out.empty()) {
    throw InputError(path + ": no proposals stored");
  }
  return out;
}

}  // namespace mpsim
