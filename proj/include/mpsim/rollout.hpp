#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpsim/core.hpp"
#include "mpsim/factors.hpp"
#include "mpsim/proposer.hpp"
#include "mpsim/solver.hpp"

namespace mpsim {

enum class SelectionMode { kSoftmin, kUniformRandom };

const char* to_string(SelectionMode m);
SelectionMode selection_mode_from_string(const std::string& name);

/// Configuration of one replanning step: propose J joint futures, smooth
/// each agent independently, score jointly, select, commit a chunk.
struct MpsParams {
  int num_rollouts{60};  // J
  int horizon{80};       // F
  int chunk_size{10};
  double softmin_temperature{1.0};
  SelectionMode selection{SelectionMode::kSoftmin};
  /// When true the selection energy is the interaction part only, dropping
  /// the smoothing residual of each rollout.
  bool interaction_only_energy{false};
  /// When false the goal factor is dropped from smoothing and scoring.
  bool include_goal_factor{true};
  int num_threads{1};
  FactorWeights weights{};
  SolverParams solver{};
  GaussianFieldParams field{};

  void validate() const;
};

/// One candidate joint future and its score.
struct RolloutResult {
  std::vector<Trajectory> trajectories;  // per agent, length F
  double energy{0.0};                    // unnormalized selection energy
  EnergyBreakdown breakdown{};
  std::vector<SolveReport> smoothing_reports;  // per agent
};

struct MpsStepResult {
  std::vector<std::vector<AgentState>> chunk;  // per agent, chunk_size states
  int selected{0};
  std::vector<RolloutResult> rollouts;  // all J, diagnostics
};

/// Draws an index with probability proportional to exp(-energy/temperature),
/// max-shifted for stability. Deterministic given the seed. Throws
/// InputError when energies is empty or contains a non-finite value.
int softmin_sample(const std::vector<double>& energies, double temperature, std::uint64_t seed);

/// One replanning step. Rollout j derives its proposal seed from
/// (seed, j), so parallel and serial execution produce identical output.
MpsStepResult mps_step(const SceneContext& context,
                       const std::vector<std::vector<AgentState>>& histories,
                       const Proposer& proposer, const MpsParams& params, std::uint64_t seed);

}  // namespace mpsim
