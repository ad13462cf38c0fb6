#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpsim/core.hpp"

namespace mpsim {

enum class ProposerKind { kConstantVelocity, kGoalDirected, kReplay };

const char* to_string(ProposerKind k);
ProposerKind proposer_kind_from_string(const std::string& name);

struct ProposerConfig {
  ProposerKind kind{ProposerKind::kConstantVelocity};
  double position_noise_sigma{0.0};                 // [m], i.i.d. per anchor point
  double goal_jitter_sigma{0.0};                    // [m], applied to the intent point
  std::pair<double, double> speed_scale_range{1.0, 1.0};
  std::optional<std::string> replay_path;

  void validate() const;
};

/// Identifies one proposal draw. seed drives the synthetic backends;
/// rollout_index selects the stored entry in replay mode.
struct ProposalRequest {
  std::uint64_t seed{0};
  int rollout_index{0};
};

/// Source of (anchors, goals) joint proposals. Implementations are pure
/// given (inputs, request) and safe to call concurrently.
class Proposer {
 public:
  virtual ~Proposer() = default;

  /// Produces exactly one anchor trajectory of length horizon and one goal
  /// per scene agent, in scene order. horizon >= 2.
  virtual Proposal propose(const SceneContext& context,
                           const std::vector<std::vector<AgentState>>& histories, int horizon,
                           const ProposalRequest& request) const = 0;
};

/// Builds the backend for the config. Replay mode loads the proposals file
/// eagerly and throws InputError when it is missing or malformed.
std::unique_ptr<Proposer> make_proposer(const ProposerConfig& config);

/// Replay backend over an in-memory proposal list (also the building block
/// of the file-backed replay mode).
std::unique_ptr<Proposer> make_replay_proposer(std::vector<Proposal> items);

/// Overwrites velocities with forward finite differences of the positions;
/// the last state copies its predecessor. Requires >= 2 states.
void fill_velocities_from_positions(Trajectory& traj);

}  // namespace mpsim
