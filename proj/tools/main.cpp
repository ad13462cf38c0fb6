// Command-line driver: scenario generation, closed-loop simulation, metrics,
// and rollout inspection.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mpsim/error.hpp"
#include "mpsim/metrics.hpp"
#include "mpsim/rng.hpp"
#include "mpsim/scenario_io.hpp"
#include "mpsim/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string default_output_dir() {
  if (const char* dir = std::getenv("MPSIM_OUT_DIR")) return dir;
  return ".";
}

std::string join_output(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mpsim::InputError("cannot open file for writing: " + path);
  out << text;
  if (!out.good()) throw mpsim::InputError("write failure on file: " + path);
}

/// Output paths are checked up front so a long run cannot fail at the
/// final write.
void ensure_writable_target(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw mpsim::InputError("output directory does not exist: " + parent.string());
  }
}

/// Every run drops a manifest next to its outputs so it can be reproduced
/// byte for byte.
void write_manifest(const std::string& output_path, const std::string& command,
                    json details) {
  details["command"] = command;
  details["schema_versions"] = json{{"scenario", mpsim::kScenarioSchemaVersion},
                                    {"rollouts", mpsim::kRolloutsSchemaVersion},
                                    {"proposals", mpsim::kProposalsSchemaVersion}};
  write_text(output_path + ".manifest.json", details.dump(2) + "\n");
}

struct SimulateOptions {
  std::string scenario_path;
  std::string out;
  std::string config_path;
  bool binary = false;
  bool plot_data = false;
  bool store_proposals = false;
};

void export_plot_data(const mpsim::SimulationRecord& record, const std::string& stem) {
  std::ostringstream positions;
  positions << "k,agent,t,x,y,vx,vy\n";
  for (std::size_t k = 0; k < record.output.samples.size(); ++k) {
    const auto& run = record.output.samples[k];
    for (std::size_t i = 0; i < run.trajectories.size(); ++i) {
      const auto& states = run.trajectories[i].states;
      for (std::size_t t = 0; t < states.size(); ++t) {
        const auto& s = states[t];
        positions << k << ',' << record.agent_ids[i] << ',' << t << ',' << s.x << ',' << s.y
                  << ',' << s.vx << ',' << s.vy << '\n';
      }
    }
  }
  write_text(stem + ".positions.csv", positions.str());

  std::ostringstream energies;
  energies << "k,step_start,rollout,energy,selected\n";
  for (std::size_t k = 0; k < record.output.samples.size(); ++k) {
    for (const auto& step : record.output.samples[k].steps) {
      for (std::size_t j = 0; j < step.energies.size(); ++j) {
        energies << k << ',' << step.start_step << ',' << j << ',' << step.energies[j] << ','
                 << (static_cast<int>(j) == step.selected ? 1 : 0) << '\n';
      }
    }
  }
  write_text(stem + ".energies.csv", energies.str());
}

int run_simulate(const SimulateOptions& opts, mpsim::SimParams params,
                 mpsim::ProposerConfig proposer_config, const json& cli_overrides) {
  // Precedence: CLI flags > config file > defaults.
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw mpsim::InputError("cannot open config file: " + opts.config_path);
    json config;
    try {
      config = json::parse(in);
    } catch (const json::exception& e) {
      throw mpsim::InputError(opts.config_path + ": " + e.what());
    }
    mpsim::apply_config(config, params, proposer_config);
  }
  mpsim::apply_config(cli_overrides, params, proposer_config);

  ensure_writable_target(opts.out);
  const mpsim::Scenario scenario = mpsim::load_scenario(opts.scenario_path);
  const auto proposer = mpsim::make_proposer(proposer_config);

  const mpsim::SimulationOutput output = mpsim::simulate(scenario.context, *proposer, params);

  mpsim::SimulationRecord record;
  record.params = params;
  record.proposer = proposer_config;
  record.dt = scenario.context.dt;
  for (const auto& agent : scenario.context.agents) record.agent_ids.push_back(agent.agent_id);
  record.output = output;
  if (opts.store_proposals) {
    // Regenerate the first replanning step's proposals for replay use.
    const auto histories = mpsim::init_trajectory(scenario.context);
    const int horizon = std::min(params.mps.horizon, params.total_steps);
    const std::uint64_t sample_seed =
        mpsim::split_seed(params.master_seed, 0, mpsim::SeedPurpose::kSample);
    const std::uint64_t step_seed =
        mpsim::split_seed(sample_seed, 0, mpsim::SeedPurpose::kStep);
    for (int j = 0; j < params.mps.num_rollouts; ++j) {
      const std::uint64_t rollout_seed =
          mpsim::split_seed(step_seed, static_cast<std::uint64_t>(j),
                            mpsim::SeedPurpose::kProposal);
      record.proposals.push_back(proposer->propose(scenario.context, histories,
                                                   std::max(2, horizon), {rollout_seed, j}));
    }
  }

  mpsim::save_rollouts(record, opts.out, opts.binary);
  write_manifest(opts.out, "simulate",
                 json{{"inputs", json{{"scenario", opts.scenario_path}}},
                      {"params", mpsim::params_to_json(params, proposer_config)}});
  if (opts.plot_data) {
    export_plot_data(record, opts.out);
  }
  std::cout << "wrote " << opts.out << " (" << output.num_samples() << " samples x "
            << output.num_agents() << " agents x " << output.total_steps() << " steps)\n";
  return kExitOk;
}

int run_metrics(const std::string& scenario_path, const std::string& rollouts_path,
                const std::string& out, bool require_min_ade) {
  if (!out.empty()) ensure_writable_target(out);
  const mpsim::Scenario scenario = mpsim::load_scenario(scenario_path);
  const mpsim::SimulationRecord record = mpsim::load_rollouts(rollouts_path);
  if (record.agent_ids.size() != scenario.context.agents.size()) {
    throw mpsim::InputError("rollout file has " + std::to_string(record.agent_ids.size()) +
                            " agents, scenario has " +
                            std::to_string(scenario.context.agents.size()));
  }
  const mpsim::MetricsReport report =
      mpsim::compute_metrics(record.output, scenario, require_min_ade);
  const std::string text = mpsim::metrics_to_json(report).dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) {
    write_text(out, text);
    write_manifest(out, "metrics",
                   json{{"inputs", json{{"scenario", scenario_path},
                                        {"rollouts", rollouts_path}}},
                        {"params", mpsim::params_to_json(record.params, record.proposer)}});
  }
  return kExitOk;
}

int run_gen_scenario(const std::string& kind, const mpsim::ScenarioGenParams& params,
                     std::uint64_t seed, const std::string& out, bool binary) {
  ensure_writable_target(out);
  const mpsim::Scenario scenario =
      mpsim::generate_scenario(mpsim::scenario_kind_from_string(kind), params, seed);
  mpsim::save_scenario(scenario, out, binary);
  write_manifest(out, "gen-scenario",
                 json{{"seed", seed},
                      {"generator",
                       json{{"kind", kind},
                            {"num_agents", params.num_agents},
                            {"speed", params.speed},
                            {"gap", params.gap},
                            {"lane_width", params.lane_width},
                            {"jitter", params.jitter},
                            {"history_len", params.history_len},
                            {"future_len", params.future_len},
                            {"dt", params.dt},
                            {"agent_length", params.agent_length},
                            {"agent_width", params.agent_width}}}});
  std::cout << "wrote " << out << " (" << scenario.context.num_agents() << " agents, kind "
            << kind << ")\n";
  return kExitOk;
}

int run_inspect(const std::string& rollouts_path) {
  const mpsim::SimulationRecord record = mpsim::load_rollouts(rollouts_path);
  std::cout << "rollouts: " << rollouts_path << "\n"
            << "  samples: " << record.output.num_samples()
            << "  agents: " << record.output.num_agents()
            << "  steps: " << record.output.total_steps() << "  dt: " << record.dt << "\n";
  for (std::size_t k = 0; k < record.output.samples.size(); ++k) {
    const auto& run = record.output.samples[k];
    std::cout << "sample " << k << " (" << run.steps.size() << " replanning steps)\n";
    for (const auto& step : run.steps) {
      std::cout << "  step t=" << step.start_step << " selected j=" << step.selected << "\n";
      for (std::size_t j = 0; j < step.breakdowns.size(); ++j) {
        const auto& b = step.breakdowns[j];
        std::cout << "    j=" << j << (static_cast<int>(j) == step.selected ? " *" : "  ")
                  << " total=" << step.energies[j] << " motion=" << b.motion
                  << " goal=" << b.goal << " linear=" << b.linear << " angular=" << b.angular
                  << " obstacle=" << b.obstacle << " collision=" << b.collision << "\n";
      }
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop multi-agent trajectory simulator"};
  app.require_subcommand(1);

  mpsim::SimParams params;
  mpsim::ProposerConfig proposer_config;
  const std::string out_dir = default_output_dir();

  // ── simulate ──────────────────────────────────────────────────────────────
  auto* sim = app.add_subcommand("simulate", "Run the closed-loop simulation on a scenario");
  SimulateOptions sim_opts;
  sim_opts.out = join_output(out_dir, "rollouts.json");
  sim->add_option("--scenario", sim_opts.scenario_path, "Scenario file")->required();
  sim->add_option("--out", sim_opts.out, "Output rollout file");
  sim->add_option("--config", sim_opts.config_path, "JSON config file (overridden by flags)");
  sim->add_flag("--binary", sim_opts.binary, "Write MessagePack instead of JSON");
  sim->add_flag("--plot-data", sim_opts.plot_data, "Also write positions/energies CSV files");
  sim->add_flag("--store-proposals", sim_opts.store_proposals,
                "Embed the first step's proposals for replay");

  int opt_K = 32, opt_T = 80, opt_J = 60, opt_chunk = 10, opt_horizon = 80, opt_threads = 1;
  std::uint64_t opt_seed = 0;
  double opt_temperature = 1.0, opt_noise = 0.25, opt_goal_jitter = 1.0;
  double opt_w_angular = 2.0, opt_w_collision = 1.0, opt_w_obstacle = 1.0;
  std::pair<double, double> opt_speed_scale{0.9, 1.1};
  std::string opt_proposer = "constant_velocity", opt_selection = "softmin";
  std::string opt_replay_path;
  bool opt_interaction_only = false, opt_no_goal = false;

  auto* oK = sim->add_option("-K,--samples", opt_K, "Number of simulation samples");
  auto* oT = sim->add_option("-T,--steps", opt_T, "Simulated steps per sample");
  auto* oJ = sim->add_option("-J,--rollouts", opt_J, "Rollouts per replanning step");
  auto* oChunk = sim->add_option("--chunk", opt_chunk, "Steps committed per replanning step");
  auto* oHorizon = sim->add_option("--horizon", opt_horizon, "Planning horizon");
  auto* oSeed = sim->add_option("--seed", opt_seed, "Master seed");
  auto* oTemp = sim->add_option("--temperature", opt_temperature, "Softmin temperature");
  auto* oThreads = sim->add_option("--threads", opt_threads, "Worker threads");
  auto* oProp = sim->add_option("--proposer", opt_proposer,
                                "constant_velocity | goal_directed | replay");
  auto* oNoise = sim->add_option("--noise", opt_noise, "Anchor position noise sigma [m]");
  auto* oGoalJitter = sim->add_option("--goal-jitter", opt_goal_jitter,
                                      "Goal jitter sigma [m]");
  auto* oSpeedScale = sim->add_option("--speed-scale", opt_speed_scale,
                                      "Speed scale range (min max)");
  auto* oReplay = sim->add_option("--replay-path", opt_replay_path, "Proposals file for replay");
  auto* oSelection = sim->add_option("--selection", opt_selection,
                                     "softmin | uniform_random");
  auto* oWAngular = sim->add_option("--w-angular", opt_w_angular, "Angular factor weight");
  auto* oWCollision = sim->add_option("--w-collision", opt_w_collision,
                                      "Collision factor weight");
  auto* oWObstacle = sim->add_option("--w-obstacle", opt_w_obstacle, "Obstacle factor weight");
  auto* oInterOnly = sim->add_flag("--interaction-only", opt_interaction_only,
                                   "Score rollouts by interaction energy only");
  auto* oNoGoal = sim->add_flag("--no-goal-factor", opt_no_goal, "Drop the goal factor");

  // ── metrics ───────────────────────────────────────────────────────────────
  auto* met = app.add_subcommand("metrics", "Compute metrics of a rollout file");
  std::string met_scenario, met_rollouts;
  std::string met_out = join_output(out_dir, "metrics.json");
  bool met_min_ade = false;
  met->add_option("--scenario", met_scenario, "Scenario file")->required();
  met->add_option("--rollouts", met_rollouts, "Rollout file")->required();
  met->add_option("--out", met_out, "Metrics report file");
  met->add_flag("--min-ade", met_min_ade, "Fail when the scenario has no logged future");

  // ── gen-scenario ──────────────────────────────────────────────────────────
  auto* gen = app.add_subcommand("gen-scenario", "Generate a synthetic scenario");
  std::string gen_kind = "head_on";
  std::string gen_out = join_output(out_dir, "scenario.json");
  std::uint64_t gen_seed = 0;
  bool gen_binary = false;
  mpsim::ScenarioGenParams gen_params;
  gen->add_option("--kind", gen_kind, "head_on | crossing | merge | stationary")->required();
  gen->add_option("--out", gen_out, "Output scenario file");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--agents", gen_params.num_agents, "Agents (stationary kind)");
  gen->add_option("--speed", gen_params.speed, "Nominal speed [m/s]");
  gen->add_option("--gap", gen_params.gap, "Initial separation [m]");
  gen->add_option("--lane-width", gen_params.lane_width, "Corridor half width [m]");
  gen->add_option("--jitter", gen_params.jitter, "Start perturbation scale");
  gen->add_option("--history-len", gen_params.history_len, "History states per agent");
  gen->add_option("--future-len", gen_params.future_len, "Logged future states per agent");
  gen->add_option("--dt", gen_params.dt, "Sampling period [s]");
  gen->add_flag("--binary", gen_binary, "Write MessagePack instead of JSON");

  // ── inspect ───────────────────────────────────────────────────────────────
  auto* ins = app.add_subcommand("inspect", "Print per-rollout factor energy breakdowns");
  std::string ins_rollouts;
  ins->add_option("--rollouts", ins_rollouts, "Rollout file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) {
      // Only flags the user actually passed override the config file.
      json overrides = json::object();
      if (oK->count()) overrides["num_samples"] = opt_K;
      if (oT->count()) overrides["total_steps"] = opt_T;
      if (oSeed->count()) overrides["master_seed"] = opt_seed;
      if (oThreads->count()) overrides["num_threads"] = opt_threads;
      json mps = json::object();
      if (oJ->count()) mps["num_rollouts"] = opt_J;
      if (oChunk->count()) mps["chunk_size"] = opt_chunk;
      if (oHorizon->count()) mps["horizon"] = opt_horizon;
      if (oTemp->count()) mps["softmin_temperature"] = opt_temperature;
      if (oSelection->count()) mps["selection"] = opt_selection;
      if (oInterOnly->count()) mps["interaction_only_energy"] = opt_interaction_only;
      if (oNoGoal->count()) mps["include_goal_factor"] = !opt_no_goal;
      if (oThreads->count()) mps["num_threads"] = opt_threads;
      json weights = json::object();
      if (oWAngular->count()) weights["angular"] = opt_w_angular;
      if (oWCollision->count()) weights["collision"] = opt_w_collision;
      if (oWObstacle->count()) weights["obstacle"] = opt_w_obstacle;
      if (!weights.empty()) mps["weights"] = weights;
      if (!mps.empty()) overrides["mps"] = mps;
      json prop = json::object();
      if (oProp->count()) prop["kind"] = opt_proposer;
      if (oNoise->count()) prop["position_noise_sigma"] = opt_noise;
      if (oGoalJitter->count()) prop["goal_jitter_sigma"] = opt_goal_jitter;
      if (oSpeedScale->count()) {
        prop["speed_scale_min"] = opt_speed_scale.first;
        prop["speed_scale_max"] = opt_speed_scale.second;
      }
      if (oReplay->count()) prop["replay_path"] = opt_replay_path;
      if (!prop.empty()) overrides["proposer"] = prop;
      return run_simulate(sim_opts, params, proposer_config, overrides);
    }
    if (met->parsed()) {
      return run_metrics(met_scenario, met_rollouts, met_out, met_min_ade);
    }
    if (gen->parsed()) {
      return run_gen_scenario(gen_kind, gen_params, gen_seed, gen_out, gen_binary);
    }
    if (ins->parsed()) {
      return run_inspect(ins_rollouts);
    }
  } catch (const mpsim::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitInput;
  } catch (const mpsim::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
