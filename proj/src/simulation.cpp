#include "mpsim/simulation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mpsim/error.hpp"
#include "mpsim/parallel.hpp"
#include "mpsim/rng.hpp"

namespace mpsim {

void SimParams::validate() const {
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (num_threads < 0) throw std::invalid_argument("num_threads must be >= 0");
  if (history_window < 1) throw std::invalid_argument("history_window must be >= 1");
  mps.validate();
}

bool SimulationOutput::all_finite() const {
  for (const auto& sample : samples) {
    for (const auto& traj : sample.trajectories) {
      if (!traj.all_finite()) return false;
    }
  }
  return true;
}

std::vector<std::vector<AgentState>> init_trajectory(const SceneContext& context) {
  if (context.agents.size() != context.histories.size()) {
    throw InputError("scene has " + std::to_string(context.agents.size()) + " agents but " +
                     std::to_string(context.histories.size()) + " histories");
  }
  for (std::size_t i = 0; i < context.histories.size(); ++i) {
    if (context.histories[i].empty()) {
      throw InputError("agent " + context.agents[i].agent_id +
                       " has no logged history to initialize from");
    }
  }
  return context.histories;
}

namespace {

SampleRun run_sample(const SceneContext& context, const Proposer& proposer,
                     const SimParams& params, int k) {
  const int n = context.num_agents();
  const std::uint64_t sample_seed =
      split_seed(params.master_seed, static_cast<std::uint64_t>(k), SeedPurpose::kSample);

  auto history = init_trajectory(context);

  SampleRun run;
  run.trajectories.assign(static_cast<std::size_t>(n), Trajectory{{}, context.dt});
  for (auto& traj : run.trajectories) {
    traj.states.reserve(static_cast<std::size_t>(params.total_steps));
  }

  int produced = 0;
  int step_index = 0;
  while (produced < params.total_steps) {
    const int remaining = params.total_steps - produced;
    // The smoother needs at least one consecutive-state pair, so the
    // planning horizon never drops below 2 even when one step remains.
    const int horizon = std::max(2, std::min(params.mps.horizon, remaining));
    const int commit = std::min({params.mps.chunk_size, remaining, horizon});

    MpsParams step_params = params.mps;
    step_params.horizon = horizon;
    step_params.chunk_size = commit;

    std::vector<std::vector<AgentState>> window(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& h = history[static_cast<std::size_t>(i)];
      const std::size_t keep =
          std::min(h.size(), static_cast<std::size_t>(params.history_window));
      window[static_cast<std::size_t>(i)].assign(h.end() - static_cast<std::ptrdiff_t>(keep),
                                                 h.end());
    }

    const std::uint64_t step_seed =
        split_seed(sample_seed, static_cast<std::uint64_t>(step_index), SeedPurpose::kStep);
    MpsStepResult step;
    try {
      step = mps_step(context, window, proposer, step_params, step_seed);
    } catch (const InputError& e) {
      throw InputError("step " + std::to_string(produced) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(produced) + ": " + e.what());
    }

    StepDiagnostics diag;
    diag.start_step = produced;
    diag.selected = step.selected;
    diag.energies.reserve(step.rollouts.size());
    diag.breakdowns.reserve(step.rollouts.size());
    for (const auto& rollout : step.rollouts) {
      diag.energies.push_back(rollout.energy);
      diag.breakdowns.push_back(rollout.breakdown);
    }
    run.steps.push_back(std::move(diag));

    for (int i = 0; i < n; ++i) {
      const auto& chunk = step.chunk[static_cast<std::size_t>(i)];
      auto& out = run.trajectories[static_cast<std::size_t>(i)].states;
      out.insert(out.end(), chunk.begin(), chunk.end());
      auto& h = history[static_cast<std::size_t>(i)];
      h.insert(h.end(), chunk.begin(), chunk.end());
    }
    produced += commit;
    ++step_index;
  }
  return run;
}

}  // namespace

SimulationOutput simulate(const SceneContext& context, const Proposer& proposer,
                          const SimParams& params) {
  params.validate();
  context.validate();

  SimulationOutput output;
  output.dt = context.dt;
  output.samples.resize(static_cast<std::size_t>(params.num_samples));

  parallel_for(params.num_samples, params.num_threads, [&](int k) {
    try {
      output.samples[static_cast<std::size_t>(k)] = run_sample(context, proposer, params, k);
    } catch (const InputError& e) {
      throw InputError("sample " + std::to_string(k) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("sample " + std::to_string(k) + ": " + e.what());
    }
  });
  return output;
}

}  // namespace mpsim
