#include "mpsim/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpsim/error.hpp"
#include "mpsim/parallel.hpp"
#include "mpsim/rng.hpp"

namespace mpsim {

const char* to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::kSoftmin: return "softmin";
    case SelectionMode::kUniformRandom: return "uniform_random";
  }
  return "unknown";
}

SelectionMode selection_mode_from_string(const std::string& name) {
  if (name == "softmin") return SelectionMode::kSoftmin;
  if (name == "uniform_random") return SelectionMode::kUniformRandom;
  throw InputError("unknown selection mode: " + name);
}

void MpsParams::validate() const {
  if (num_rollouts < 1) throw std::invalid_argument("num_rollouts must be >= 1");
  if (horizon < 2) throw std::invalid_argument("horizon must be >= 2");
  if (chunk_size < 1 || chunk_size > horizon) {
    throw std::invalid_argument("chunk_size must satisfy 1 <= chunk_size <= horizon");
  }
  if (!(softmin_temperature > 0.0) || !std::isfinite(softmin_temperature)) {
    throw std::invalid_argument("softmin_temperature must be finite and > 0");
  }
  if (num_threads < 0) throw std::invalid_argument("num_threads must be >= 0");
  weights.validate();
  solver.validate();
  field.validate();
}

int softmin_sample(const std::vector<double>& energies, double temperature, std::uint64_t seed) {
  if (energies.empty()) {
    throw InputError("softmin over an empty energy list");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InputError("softmin temperature must be finite and > 0");
  }
  double lowest = energies[0];
  for (double e : energies) {
    if (!std::isfinite(e)) {
      throw InputError("softmin energies must all be finite");
    }
    lowest = std::min(lowest, e);
  }

  std::vector<double> weights(energies.size());
  double total = 0.0;
  for (std::size_t j = 0; j < energies.size(); ++j) {
    weights[j] = std::exp(-(energies[j] - lowest) / temperature);
    total += weights[j];
  }

  Rng rng(seed);
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    cumulative += weights[j];
    if (u < cumulative) return static_cast<int>(j);
  }
  return static_cast<int>(weights.size()) - 1;
}

MpsStepResult mps_step(const SceneContext& context,
                       const std::vector<std::vector<AgentState>>& histories,
                       const Proposer& proposer, const MpsParams& params, std::uint64_t seed) {
  params.validate();
  context.validate();
  const int n = context.num_agents();
  if (static_cast<int>(histories.size()) != n) {
    throw std::invalid_argument("histories count does not match scene agents");
  }
  for (int i = 0; i < n; ++i) {
    if (histories[static_cast<std::size_t>(i)].empty()) {
      throw std::invalid_argument("agent " + context.agents[static_cast<std::size_t>(i)].agent_id +
                                  " has an empty history");
    }
  }

  FactorWeights weights = params.weights;
  if (!params.include_goal_factor) weights.w_goal = 0.0;

  const int horizon = params.horizon;
  const int num_rollouts = params.num_rollouts;
  const auto edge_points = densify_road_edges(context.road_edges);
  // Slow agents orient their field by the live history, not the logged one.
  std::vector<double> initial_headings(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    initial_headings[static_cast<std::size_t>(i)] =
        initial_heading_fallback(histories[static_cast<std::size_t>(i)]);
  }

  MpsStepResult result;
  result.rollouts.resize(static_cast<std::size_t>(num_rollouts));

  parallel_for(num_rollouts, params.num_threads, [&](int j) {
    const std::uint64_t rollout_seed =
        split_seed(seed, static_cast<std::uint64_t>(j), SeedPurpose::kProposal);
    Proposal proposal = proposer.propose(context, histories, horizon, {rollout_seed, j});
    if (static_cast<int>(proposal.anchors.size()) != n ||
        static_cast<int>(proposal.goals.size()) != n) {
      throw InputError("proposal shape does not match scene agents");
    }

    RolloutResult& rollout = result.rollouts[static_cast<std::size_t>(j)];
    rollout.trajectories.resize(static_cast<std::size_t>(n));
    rollout.smoothing_reports.resize(static_cast<std::size_t>(n));

    EnergyBreakdown breakdown;
    for (int i = 0; i < n; ++i) {
      const Trajectory& anchors = proposal.anchors[static_cast<std::size_t>(i)];
      if (anchors.size() != horizon) {
        throw InputError("proposal anchors for agent " +
                         context.agents[static_cast<std::size_t>(i)].agent_id +
                         " have length " + std::to_string(anchors.size()) + ", expected " +
                         std::to_string(horizon));
      }
      // Smoothing starts from the proposal itself.
      auto [smoothed, report] =
          smooth_trajectory(anchors, anchors, proposal.goals[static_cast<std::size_t>(i)],
                            weights, context.dt, params.solver);
      breakdown += smoothing_energy_breakdown(smoothed, anchors,
                                              proposal.goals[static_cast<std::size_t>(i)],
                                              weights, context.dt);
      rollout.trajectories[static_cast<std::size_t>(i)] = std::move(smoothed);
      rollout.smoothing_reports[static_cast<std::size_t>(i)] = report;
    }
    breakdown += interaction_energy_breakdown(rollout.trajectories, context, weights,
                                              params.field,
                                              std::span<const Vec2>(edge_points),
                                              std::span<const double>(initial_headings));
    rollout.breakdown = breakdown;
    rollout.energy =
        params.interaction_only_energy ? breakdown.interaction_total() : breakdown.total();
  });

  // Scale-free selection energies: per agent, per planned step.
  std::vector<double> normalized(static_cast<std::size_t>(num_rollouts));
  bool any_finite = false;
  for (int j = 0; j < num_rollouts; ++j) {
    normalized[static_cast<std::size_t>(j)] =
        result.rollouts[static_cast<std::size_t>(j)].energy / (static_cast<double>(n) * horizon);
    any_finite = any_finite || std::isfinite(normalized[static_cast<std::size_t>(j)]);
  }
  if (!any_finite) {
    throw NumericalError("all rollout energies are non-finite");
  }

  const std::uint64_t selection_seed = split_seed(seed, 0, SeedPurpose::kSelection);
  if (params.selection == SelectionMode::kSoftmin) {
    result.selected = softmin_sample(normalized, params.softmin_temperature, selection_seed);
  } else {
    Rng rng(selection_seed);
    result.selected = rng.uniform_index(num_rollouts);
  }

  const auto& chosen = result.rollouts[static_cast<std::size_t>(result.selected)];
  result.chunk.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& states = chosen.trajectories[static_cast<std::size_t>(i)].states;
    result.chunk[static_cast<std::size_t>(i)]
        .assign(states.begin(), states.begin() + params.chunk_size);
  }
  return result;
}

}  // namespace mpsim
