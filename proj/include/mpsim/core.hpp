#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mpsim {

using Vec2 = Eigen::Vector2d;
using Polyline = std::vector<Vec2>;

/// Below this speed a velocity vector no longer defines a usable heading
/// and callers fall back to the last well-defined one.
inline constexpr double kEpsilonSpeed = 1e-3;  // [m/s]

/// 2D position and velocity of one agent at one timestep.
struct AgentState {
  double x{0.0};   // [m]
  double y{0.0};   // [m]
  double vx{0.0};  // [m/s]
  double vy{0.0};  // [m/s]

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return {vx, vy}; }
  double speed() const { return std::hypot(vx, vy); }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(vx) && std::isfinite(vy);
  }

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Footprint of one agent. length is the extent along the heading,
/// width the extent across it.
struct AgentGeometry {
  double length{4.8};  // [m]
  double width{2.0};   // [m]
  std::string agent_id;

  /// Enforces length >= width > 0 and finiteness.
  void validate() const;
};

/// Fixed-rate sequence of agent states.
struct Trajectory {
  std::vector<AgentState> states;
  double dt{0.1};  // [s], constant across the sequence

  int size() const { return static_cast<int>(states.size()); }
  bool empty() const { return states.empty(); }
  const AgentState& operator[](int t) const { return states[static_cast<std::size_t>(t)]; }
  AgentState& operator[](int t) { return states[static_cast<std::size_t>(t)]; }
  const AgentState& back() const { return states.back(); }

  bool all_finite() const;
};

/// Static world shared by every rollout: road-edge polylines, agent
/// footprints, the logged per-agent history windows, and the sampling
/// period. Optional per-agent intent points feed goal-directed proposers.
struct SceneContext {
  std::vector<Polyline> road_edges;
  std::vector<AgentGeometry> agents;
  std::vector<std::vector<AgentState>> histories;  // per agent, oldest first
  std::vector<std::optional<Vec2>> intents;        // per agent; may be empty
  double dt{0.1};

  int num_agents() const { return static_cast<int>(agents.size()); }

  /// Checks the structural invariants: every agent has a non-empty history,
  /// every polyline has >= 2 points, dt > 0, geometries valid.
  void validate() const;
};

/// One joint proposal: per-agent anchor trajectories of equal length plus
/// one goal point per agent, in scene agent order.
struct Proposal {
  std::vector<Trajectory> anchors;
  std::vector<Vec2> goals;
};

/// Heading from the velocity direction; returns fallback_heading when the
/// speed is at or below kEpsilonSpeed. Total function, never NaN for
/// finite input.
double heading_of(const AgentState& state, double fallback_heading);

/// The 9 sampled points of the oriented box centered on the state:
/// 4 corners, 4 edge midpoints, then the center (always exactly the
/// state position). Box axes follow heading_of(state, fallback_heading).
std::array<Vec2, 9> oriented_box_points(const AgentState& state, const AgentGeometry& geom,
                                        double fallback_heading);

/// Heading to use for an agent entering the planning horizon: the velocity
/// direction of the newest history state that moves faster than
/// kEpsilonSpeed, or 0 if the agent never moved.
double initial_heading_fallback(const std::vector<AgentState>& history);

/// Per-step headings along a trajectory. Slow steps inherit the heading of
/// the last fast step (seeded with initial_fallback).
std::vector<double> trajectory_headings(const Trajectory& traj, double initial_fallback);

}  // namespace mpsim
