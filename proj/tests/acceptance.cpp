// Acceptance suite: one self-contained check per release criterion, each
// printed as a single pass/fail line. Exits nonzero when any criterion fails.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mpsim/metrics.hpp"
#include "mpsim/parallel.hpp"
#include "mpsim/proposer.hpp"
#include "mpsim/rng.hpp"
#include "mpsim/rollout.hpp"
#include "mpsim/scenario_io.hpp"
#include "mpsim/simulation.hpp"
#include "mpsim/solver.hpp"

using namespace mpsim;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct CheckFailure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ── Shared helpers ──────────────────────────────────────────────────────────

Trajectory random_trajectory(Rng& rng, int f, double dt) {
  Trajectory traj;
  traj.dt = dt;
  for (int t = 0; t < f; ++t) {
    traj.states.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-5, 5),
                           rng.uniform(-5, 5)});
  }
  return traj;
}

Eigen::VectorXd to_vector(const Trajectory& traj) {
  Eigen::VectorXd x(4 * traj.size());
  for (int t = 0; t < traj.size(); ++t) {
    x(4 * t) = traj[t].x;
    x(4 * t + 1) = traj[t].y;
    x(4 * t + 2) = traj[t].vx;
    x(4 * t + 3) = traj[t].vy;
  }
  return x;
}

Trajectory from_vector(const Eigen::VectorXd& x, double dt) {
  Trajectory traj;
  traj.dt = dt;
  for (int t = 0; 4 * t < x.size(); ++t) {
    traj.states.push_back({x(4 * t), x(4 * t + 1), x(4 * t + 2), x(4 * t + 3)});
  }
  return traj;
}

Eigen::MatrixXd fd_jacobian(const Trajectory& at, const Trajectory& anchors, const Vec2& goal,
                            const FactorWeights& weights, double dt) {
  const double step = 1e-6;
  const Eigen::VectorXd x0 = to_vector(at);
  const int rows = assemble_system(at, anchors, goal, weights, dt).residual_dim();
  Eigen::MatrixXd jac(rows, x0.size());
  for (int col = 0; col < x0.size(); ++col) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(col) += step;
    xm(col) -= step;
    jac.col(col) =
        (assemble_system(from_vector(xp, dt), anchors, goal, weights, dt).stacked_residual() -
         assemble_system(from_vector(xm, dt), anchors, goal, weights, dt).stacked_residual()) /
        (2 * step);
  }
  return jac;
}

SceneContext single_agent_empty_map(const AgentState& current, double dt = 0.1) {
  SceneContext context;
  context.dt = dt;
  context.agents.push_back({4.8, 2.0, "a0"});
  std::vector<AgentState> hist;
  for (int h = 10; h >= 0; --h) {
    hist.push_back({current.x - current.vx * h * dt, current.y - current.vy * h * dt,
                    current.vx, current.vy});
  }
  context.histories.push_back(std::move(hist));
  context.intents.push_back(std::nullopt);
  return context;
}

// Two opposing pairs in adjacent lanes.
SceneContext four_agent_scene() {
  SceneContext context;
  context.dt = 0.1;
  const double reach = 62.0;
  context.road_edges.push_back(
      {{-reach, -7.0}, {reach, -7.0}, {reach, 13.0}, {-reach, 13.0}, {-reach, -7.0}});
  const std::vector<std::tuple<Vec2, Vec2>> setup = {
      {{-20.0, 0.0}, {4.0, 0.0}},
      {{20.0, 0.3}, {-4.0, 0.0}},
      {{-18.0, 6.0}, {4.0, 0.0}},
      {{18.0, 6.3}, {-4.0, 0.0}},
  };
  int idx = 0;
  for (const auto& [pos, vel] : setup) {
    AgentGeometry geom;
    geom.agent_id = "a" + std::to_string(idx++);
    context.agents.push_back(geom);
    std::vector<AgentState> hist;
    for (int h = 10; h >= 0; --h) {
      hist.push_back({pos.x() - vel.x() * h * 0.1, pos.y() - vel.y() * h * 0.1, vel.x(),
                      vel.y()});
    }
    context.histories.push_back(std::move(hist));
    context.intents.push_back(pos + vel * 8.0);
  }
  return context;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "mpsim_acceptance") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// ── Criteria ────────────────────────────────────────────────────────────────

// 1. Analytic Jacobians of every residual factor match central differences.
void criterion_jacobians() {
  const double dt = 0.1;
  const struct {
    const char* name;
    FactorWeights weights;
  } factors[] = {
      {"motion", [] { FactorWeights w{}; w.w_motion = 1; w.w_goal = 0; w.w_linear = 0; w.w_angular = 0; return w; }()},
      {"goal", [] { FactorWeights w{}; w.w_motion = 0; w.w_goal = 1; w.w_linear = 0; w.w_angular = 0; return w; }()},
      {"linear", [] { FactorWeights w{}; w.w_motion = 0; w.w_goal = 0; w.w_linear = 1; w.w_angular = 0; return w; }()},
      {"angular", [] { FactorWeights w{}; w.w_motion = 0; w.w_goal = 0; w.w_linear = 0; w.w_angular = 1; return w; }()},
  };
  Rng rng(101);
  for (const auto& factor : factors) {
    for (int trial = 0; trial < 100; ++trial) {
      const Trajectory traj = random_trajectory(rng, 2, dt);
      const Trajectory anchors = random_trajectory(rng, 2, dt);
      const Vec2 goal(rng.uniform(-10, 10), rng.uniform(-10, 10));
      const Eigen::MatrixXd analytic =
          assemble_system(traj, anchors, goal, factor.weights, dt).dense_jacobian();
      const Eigen::MatrixXd fd = fd_jacobian(traj, anchors, goal, factor.weights, dt);
      const double err = (analytic - fd).norm() / std::max(1.0, fd.norm());
      require(err < 1e-5, std::string(factor.name) + " factor Jacobian error " + fmt(err));
    }
  }
}

// 2 & 3. Gauss-Newton reaches the linear-least-squares optimum, and accepted
// iterations never increase the energy.
void criterion_global_optimum(std::vector<SolveReport>& collected) {
  Rng rng(202);
  for (int trial = 0; trial < 50; ++trial) {
    const double dt = rng.uniform(0.05, 0.2);
    const int f = 2 + rng.uniform_index(9);  // F <= 10
    const Trajectory init = random_trajectory(rng, f, dt);
    const Trajectory anchors = random_trajectory(rng, f, dt);
    const Vec2 goal(rng.uniform(-10, 10), rng.uniform(-10, 10));
    FactorWeights weights;
    weights.w_motion = rng.uniform(0.1, 5.0);
    weights.w_goal = rng.uniform(0.1, 5.0);
    weights.w_linear = rng.uniform(0.1, 5.0);
    weights.w_angular = rng.uniform(0.1, 5.0);

    const auto [smoothed, report] =
        smooth_trajectory(init, anchors, goal, weights, dt, SolverParams{});
    collected.push_back(report);

    const AssembledSystem sys = assemble_system(init, anchors, goal, weights, dt);
    const Eigen::VectorXd r0 = sys.stacked_residual();
    const Eigen::MatrixXd jac = sys.dense_jacobian();
    const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(-r0);
    const double oracle = (r0 + jac * delta).squaredNorm();

    const double err = std::abs(report.final_energy - oracle) / std::max(1.0, oracle);
    require(err <= 1e-8, "instance " + std::to_string(trial) + " off the optimum by " +
                             fmt(err) + " relative");
  }
}

void criterion_monotone_energy(std::vector<SolveReport>& collected) {
  // Extra batch on longer horizons plus replanning-step reports.
  Rng rng(303);
  for (int trial = 0; trial < 50; ++trial) {
    const double dt = 0.1;
    const int f = 2 + rng.uniform_index(29);
    const Trajectory init = random_trajectory(rng, f, dt);
    const Trajectory anchors = random_trajectory(rng, f, dt);
    const auto [smoothed, report] = smooth_trajectory(
        init, anchors, Vec2(rng.uniform(-10, 10), rng.uniform(-10, 10)), FactorWeights{}, dt,
        SolverParams{});
    collected.push_back(report);
  }
  const Scenario scenario = generate_scenario(ScenarioKind::kHeadOn, ScenarioGenParams{}, 5);
  ProposerConfig pconfig;
  pconfig.kind = ProposerKind::kGoalDirected;
  pconfig.goal_jitter_sigma = 2.0;
  const auto proposer = make_proposer(pconfig);
  MpsParams params;
  params.num_rollouts = 8;
  params.horizon = 20;
  params.chunk_size = 10;
  const MpsStepResult step =
      mps_step(scenario.context, scenario.context.histories, *proposer, params, 17);
  for (const auto& rollout : step.rollouts) {
    for (const auto& report : rollout.smoothing_reports) collected.push_back(report);
  }

  for (std::size_t i = 0; i < collected.size(); ++i) {
    require(collected[i].energy_monotone,
            "solve " + std::to_string(i) + " reported an energy increase");
    require(collected[i].final_energy <= collected[i].initial_energy,
            "solve " + std::to_string(i) + " ended above its initial energy");
  }
  require(collected.size() >= 100, "expected at least 100 collected solve reports");
}

// 4. Softmin selection frequencies match the closed form.
void criterion_softmin() {
  const std::vector<double> energies{0.0, std::log(3.0)};
  const int draws = 100000;
  int first = 0;
  for (int d = 0; d < draws; ++d) {
    const int j = softmin_sample(
        energies, 1.0, split_seed(404, static_cast<std::uint64_t>(d), SeedPurpose::kHarness));
    if (j == 0) ++first;
  }
  const double p0 = static_cast<double>(first) / draws;
  require(std::abs(p0 - 0.75) <= 0.01, "empirical P(0) = " + fmt(p0) + ", expected 0.75");
  require(std::abs((1.0 - p0) - 0.25) <= 0.01, "empirical P(1) = " + fmt(1.0 - p0));
}

// 5. Noise-free constant-velocity agent: simulation is exact extrapolation
// with zero energies.
void criterion_zero_residual() {
  const AgentState current{2.0, -1.0, 1.25, 0.5};
  const SceneContext context = single_agent_empty_map(current);
  const auto proposer = make_proposer(ProposerConfig{});
  SimParams params;
  params.num_samples = 1;
  params.total_steps = 80;
  params.mps.num_rollouts = 4;
  params.mps.horizon = 80;
  params.mps.chunk_size = 10;
  const SimulationOutput out = simulate(context, *proposer, params);

  double max_err = 0.0;
  for (int t = 0; t < 80; ++t) {
    const AgentState& s = out.samples[0].trajectories[0][t];
    max_err = std::max(max_err, std::abs(s.x - (current.x + current.vx * 0.1 * (t + 1))));
    max_err = std::max(max_err, std::abs(s.y - (current.y + current.vy * 0.1 * (t + 1))));
  }
  require(max_err <= 1e-6, "max extrapolation error " + fmt(max_err));
  for (const auto& step : out.samples[0].steps) {
    for (double e : step.energies) {
      require(std::abs(e) <= 1e-12, "nonzero rollout energy " + fmt(e));
    }
  }
}

// 6. Softmin selection beats uniform-random selection on head-on collisions.
void criterion_ablation(std::string& detail) {
  ScenarioGenParams gen;
  gen.future_len = 25;  // close intents: evasive arcs bend early

  ProposerConfig pconfig;
  pconfig.kind = ProposerKind::kGoalDirected;
  pconfig.goal_jitter_sigma = 4.0;
  pconfig.speed_scale_range = {0.8, 1.2};
  const auto proposer = make_proposer(pconfig);

  SimParams base;
  base.num_samples = 8;   // K
  base.total_steps = 40;  // T
  base.num_threads = 2;
  base.mps.num_rollouts = 16;  // J
  base.mps.horizon = 20;
  base.mps.chunk_size = 10;
  base.mps.softmin_temperature = 0.02;

  double softmin_sum = 0.0;
  double uniform_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scenario scenario = generate_scenario(ScenarioKind::kHeadOn, gen, seed);
    SimParams params = base;
    params.master_seed = split_seed(seed, 0, SeedPurpose::kHarness);

    params.mps.selection = SelectionMode::kSoftmin;
    softmin_sum +=
        compute_metrics(simulate(scenario.context, *proposer, params), scenario).collision_rate;

    params.mps.selection = SelectionMode::kUniformRandom;
    uniform_sum +=
        compute_metrics(simulate(scenario.context, *proposer, params), scenario).collision_rate;
  }
  const double softmin_rate = softmin_sum / 20.0;
  const double uniform_rate = uniform_sum / 20.0;
  const double reduction =
      uniform_rate > 0.0 ? (uniform_rate - softmin_rate) / uniform_rate : 0.0;
  detail = "softmin " + fmt(softmin_rate) + " vs uniform " + fmt(uniform_rate) +
           " (reduction " + fmt(100.0 * reduction) + "%)";
  require(softmin_rate < uniform_rate, "softmin selection did not reduce collisions: " + detail);
  require(reduction >= 0.30, "collision reduction below the 30% floor: " + detail);
}

// 7. Byte-identical rollout files across reruns and parallelism degrees.
void criterion_determinism() {
  TempDir dir;
  const Scenario scenario = generate_scenario(ScenarioKind::kHeadOn, ScenarioGenParams{}, 13);
  ProposerConfig pconfig;
  pconfig.position_noise_sigma = 0.3;
  const auto proposer = make_proposer(pconfig);

  SimParams params;
  params.num_samples = 2;
  params.total_steps = 20;
  params.master_seed = 99;
  params.mps.num_rollouts = 6;
  params.mps.horizon = 20;
  params.mps.chunk_size = 10;

  auto write_run = [&](const std::string& name, int sim_threads, int mps_threads,
                       bool binary) {
    SimParams p = params;
    p.num_threads = sim_threads;
    p.mps.num_threads = mps_threads;
    SimulationRecord record;
    record.params = p;
    record.proposer = pconfig;
    record.dt = scenario.context.dt;
    for (const auto& a : scenario.context.agents) record.agent_ids.push_back(a.agent_id);
    record.output = simulate(scenario.context, *proposer, p);
    const std::string path = dir.file(name);
    save_rollouts(record, path, binary);
    return slurp(path);
  };

  const std::string serial_a = write_run("a.json", 1, 1, false);
  const std::string serial_b = write_run("b.json", 1, 1, false);
  require(serial_a == serial_b, "two serial runs differ");
  const std::string parallel_k = write_run("c.json", 4, 1, false);
  require(serial_a == parallel_k, "sample-parallel run differs from serial");
  const std::string parallel_j = write_run("d.json", 2, 4, false);
  require(serial_a == parallel_j, "rollout-parallel run differs from serial");
  const std::string bin_a = write_run("a.bin", 1, 1, true);
  const std::string bin_b = write_run("b.bin", 4, 4, true);
  require(bin_a == bin_b, "binary runs differ across parallelism");
}

// 8. Default configuration end to end on a 4-agent scene.
void criterion_default_config(std::string& detail) {
  const SceneContext context = four_agent_scene();
  ProposerConfig pconfig;
  pconfig.kind = ProposerKind::kGoalDirected;
  pconfig.goal_jitter_sigma = 1.0;
  pconfig.speed_scale_range = {0.9, 1.1};
  const auto proposer = make_proposer(pconfig);

  SimParams params;  // K = 32, T = 80, J = 60, chunk = 10 defaults
  params.mps.horizon = 80;
  params.num_threads = 2;
  const SimulationOutput out = simulate(context, *proposer, params);

  require(out.num_samples() == 32, "expected 32 samples");
  require(out.num_agents() == 4, "expected 4 agents");
  require(out.total_steps() == 80, "expected 80 steps");
  require(out.all_finite(), "non-finite state in the output tensor");
  detail = "32 x 4 x 80 states, all finite";
}

// 9. Separating-axis test agrees with a dense point-sampling oracle.
void criterion_geometry_oracle() {
  Rng rng(2024);
  auto random_box = [&rng]() {
    return OrientedBox{{rng.uniform(-6, 6), rng.uniform(-6, 6)},
                       rng.uniform(-kPi, kPi),
                       rng.uniform(1.0, 6.0),
                       rng.uniform(0.5, 3.0)};
  };
  auto sampling_overlap = [](const OrientedBox& a, const OrientedBox& b) {
    auto covered = [](const OrientedBox& from, const OrientedBox& to) {
      const int side = 100;  // 101 x 101 inclusive grid, ~10^4 points
      const double c = std::cos(from.heading), s = std::sin(from.heading);
      for (int iu = 0; iu <= side; ++iu) {
        for (int iv = 0; iv <= side; ++iv) {
          const double u = (static_cast<double>(iu) / side - 0.5) * from.length;
          const double v = (static_cast<double>(iv) / side - 0.5) * from.width;
          const Vec2 p(from.center.x() + c * u - s * v, from.center.y() + s * u + c * v);
          if (point_in_box(to, p)) return true;
        }
      }
      return false;
    };
    return covered(a, b) || covered(b, a);
  };

  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const OrientedBox a = random_box();
    const OrientedBox b = random_box();
    if (std::abs(sat_margin(a, b)) <= 1e-9) continue;  // boundary epsilon cases
    ++compared;
    require(boxes_overlap(a, b) == sampling_overlap(a, b),
            "disagreement at trial " + std::to_string(trial) + " (margin " +
                fmt(sat_margin(a, b)) + ")");
  }
  require(compared >= 490, "too many boundary cases skipped");
}

// 10. parse ∘ serialize identity on all fixtures; binary mode bit exact.
void criterion_round_trip() {
  TempDir dir;
  int fixtures = 0;
  for (const auto kind : {ScenarioKind::kHeadOn, ScenarioKind::kCrossing, ScenarioKind::kMerge,
                          ScenarioKind::kStationary}) {
    for (std::uint64_t seed : {0ULL, 42ULL}) {
      const Scenario scenario = generate_scenario(kind, ScenarioGenParams{}, seed);
      const std::string p1 = dir.file("s1.json");
      const std::string p2 = dir.file("s2.json");
      save_scenario(scenario, p1);
      save_scenario(load_scenario(p1), p2);
      require(slurp(p1) == slurp(p2), std::string("text round trip failed for ") +
                                          to_string(kind) + " seed " + std::to_string(seed));
      const std::string b1 = dir.file("s1.bin");
      const std::string b2 = dir.file("s2.bin");
      save_scenario(scenario, b1, true);
      save_scenario(load_scenario(b1), b2, true);
      require(slurp(b1) == slurp(b2), std::string("binary round trip failed for ") +
                                          to_string(kind));
      ++fixtures;
    }
  }

  // One rollout fixture, including an embedded proposals section.
  const Scenario scenario = generate_scenario(ScenarioKind::kMerge, ScenarioGenParams{}, 3);
  ProposerConfig pconfig;
  pconfig.position_noise_sigma = 0.2;
  const auto proposer = make_proposer(pconfig);
  SimParams params;
  params.num_samples = 2;
  params.total_steps = 10;
  params.mps.num_rollouts = 3;
  params.mps.horizon = 10;
  params.mps.chunk_size = 5;
  SimulationRecord record;
  record.params = params;
  record.proposer = pconfig;
  record.dt = scenario.context.dt;
  for (const auto& a : scenario.context.agents) record.agent_ids.push_back(a.agent_id);
  record.output = simulate(scenario.context, *proposer, params);
  for (int j = 0; j < 3; ++j) {
    record.proposals.push_back(proposer->propose(
        scenario.context, scenario.context.histories, 10,
        {split_seed(1, static_cast<std::uint64_t>(j), SeedPurpose::kProposal), j}));
  }
  const std::string r1 = dir.file("r1.json");
  const std::string r2 = dir.file("r2.json");
  save_rollouts(record, r1);
  save_rollouts(load_rollouts(r1), r2);
  require(slurp(r1) == slurp(r2), "rollout text round trip failed");
  const std::string rb1 = dir.file("r1.bin");
  const std::string rb2 = dir.file("r2.bin");
  save_rollouts(record, rb1, true);
  save_rollouts(load_rollouts(rb1), rb2, true);
  require(slurp(rb1) == slurp(rb2), "rollout binary round trip failed");
  require(fixtures == 8, "fixture corpus incomplete");
}

// ── Driver ──────────────────────────────────────────────────────────────────

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0 = no limit
  std::function<void(std::string&)> run;
};

}  // namespace

int main() {
  std::vector<SolveReport> solve_reports;

  const std::vector<Criterion> criteria = {
      {1, "Jacobian correctness (analytic vs central differences)", 1.0,
       [](std::string&) { criterion_jacobians(); }},
      {2, "global-optimum equivalence vs dense least-squares oracle", 5.0,
       [&](std::string&) { criterion_global_optimum(solve_reports); }},
      {3, "monotone energy across all accepted iterations", 0.0,
       [&](std::string&) { criterion_monotone_energy(solve_reports); }},
      {4, "softmin distribution (0, ln 3) at temperature 1", 0.0,
       [](std::string&) { criterion_softmin(); }},
      {5, "zero-residual fixed point over 80 steps", 1.0,
       [](std::string&) { criterion_zero_residual(); }},
      {6, "collision ablation: softmin vs uniform selection", 120.0,
       [](std::string& d) { criterion_ablation(d); }},
      {7, "byte-identical rollout files across runs and thread counts", 0.0,
       [](std::string&) { criterion_determinism(); }},
      {8, "default configuration end-to-end (32 x 4 x 80)", 600.0,
       [](std::string& d) { criterion_default_config(d); }},
      {9, "separating-axis vs point-sampling oracle on 500 box pairs", 0.0,
       [](std::string&) { criterion_geometry_oracle(); }},
      {10, "canonical and binary round trips on the fixture corpus", 0.0,
       [](std::string&) { criterion_round_trip(); }},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    std::string error;
    try {
      criterion.run(detail);
    } catch (const CheckFailure& f) {
      error = f.message;
    } catch (const std::exception& e) {
      error = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && criterion.time_limit_s > 0.0 && elapsed > criterion.time_limit_s) {
      error = "exceeded the " + fmt(criterion.time_limit_s) + " s budget";
    }
    const bool passed = error.empty();
    failures += passed ? 0 : 1;
    std::cout << (passed ? "[PASS] " : "[FAIL] ") << criterion.id << ". " << criterion.name
              << " (" << fmt(elapsed) << " s)";
    if (!detail.empty()) std::cout << " -- " << detail;
    if (!error.empty()) std::cout << " -- " << error;
    std::cout << "\n";
  }

  if (failures != 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
