#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "mpsim/simulation.hpp"

namespace mpsim {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kRolloutsSchemaVersion = 1;
inline constexpr int kProposalsSchemaVersion = 1;

/// A scene plus the bookkeeping the metrics need: which side of the road
/// edges is drivable, and the logged future when one exists.
struct Scenario {
  SceneContext context;
  /// "inside": the interior of the (implicitly closed) road-edge rings is
  /// drivable. "outside": the rings are obstacles and everything else is
  /// drivable.
  std::string drivable_interior{"inside"};
  std::vector<std::vector<AgentState>> logged_future;  // per agent; may be empty
};

/// Parses and validates a scenario file (text JSON or binary MessagePack,
/// sniffed). Throws InputError with a field path on any malformed content.
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path, bool binary = false);

/// Everything needed to reproduce and re-score one simulation run.
struct SimulationRecord {
  SimParams params{};
  ProposerConfig proposer{};
  double dt{0.1};
  std::vector<std::string> agent_ids;
  SimulationOutput output;
  std::vector<Proposal> proposals;  // optional replay section
};

void save_rollouts(const SimulationRecord& record, const std::string& path, bool binary = false);
SimulationRecord load_rollouts(const std::string& path);

std::vector<Proposal> load_proposals(const std::string& path);
void save_proposals(const std::vector<Proposal>& items, double dt, const std::string& path,
                    bool binary = false);

// ── Parameter echo / config files ──────────────────────────────────────────

nlohmann::json params_to_json(const SimParams& params, const ProposerConfig& proposer);

/// Overlays the fields present in config onto params/proposer; unknown keys
/// raise InputError. Missing keys keep their current values.
void apply_config(const nlohmann::json& config, SimParams& params, ProposerConfig& proposer);

// ── Synthetic scenario generators ──────────────────────────────────────────

enum class ScenarioKind { kHeadOn, kCrossing, kMerge, kStationary };

const char* to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct ScenarioGenParams {
  int num_agents{4};      // stationary grid population; the others use 2
  double speed{4.0};      // [m/s] nominal
  double gap{16.0};       // [m] initial separation of the interacting pair
  double lane_width{7.0}; // [m] per-direction corridor width
  double jitter{0.1};     // relative speed / absolute lateral perturbation
  int history_len{11};
  int future_len{80};
  double dt{0.1};
  double agent_length{4.8};
  double agent_width{2.0};

  void validate() const;
};

/// Deterministic per seed; produces a geometrically valid scene with
/// consistent histories (finite-difference velocities match stored ones)
/// and a constant-velocity logged future.
Scenario generate_scenario(ScenarioKind kind, const ScenarioGenParams& params,
                           std::uint64_t seed);

}  // namespace mpsim
