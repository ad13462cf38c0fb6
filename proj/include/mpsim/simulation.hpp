#pragma once

#include <cstdint>
#include <vector>

#include "mpsim/rollout.hpp"

namespace mpsim {

/// Outer-loop configuration: K independent closed-loop samples of T steps,
/// replanned chunk by chunk.
struct SimParams {
  int num_samples{32};  // K
  int total_steps{80};  // T
  MpsParams mps{};
  std::uint64_t master_seed{0};
  int num_threads{1};      // across samples
  int history_window{11};  // newest states visible to the proposer

  void validate() const;
};

/// Diagnostics of one replanning step within one sample.
struct StepDiagnostics {
  int start_step{0};  // index of the first committed state of this chunk
  int selected{0};
  std::vector<double> energies;             // raw selection energies, per rollout
  std::vector<EnergyBreakdown> breakdowns;  // per rollout
};

struct SampleRun {
  std::vector<Trajectory> trajectories;  // per agent, length T
  std::vector<StepDiagnostics> steps;
};

struct SimulationOutput {
  std::vector<SampleRun> samples;  // K
  double dt{0.1};

  int num_samples() const { return static_cast<int>(samples.size()); }
  int num_agents() const {
    return samples.empty() ? 0 : static_cast<int>(samples[0].trajectories.size());
  }
  int total_steps() const {
    return num_agents() == 0 ? 0 : samples[0].trajectories[0].size();
  }
  bool all_finite() const;
};

/// Initial conditioning window: the logged history of every agent.
/// Throws InputError when any agent has no history.
std::vector<std::vector<AgentState>> init_trajectory(const SceneContext& context);

/// Runs the closed-loop simulation. Each sample k starts from the logged
/// histories and repeatedly replans, committing chunk_size states per step;
/// appended states depend only on the context, earlier simulated states and
/// the seeds derived from (master_seed, k).
SimulationOutput simulate(const SceneContext& context, const Proposer& proposer,
                          const SimParams& params);

}  // namespace mpsim
