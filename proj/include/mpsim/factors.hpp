#pragma once

#include <span>
#include <vector>

#include "mpsim/core.hpp"

namespace mpsim {

/// Per-factor energy weights. Residual factors contribute weight * |r|^2,
/// the max-of-Gaussian factors contribute weight * value.
struct FactorWeights {
  double w_motion{1.0};
  double w_goal{1.0};
  double w_linear{1.0};
  double w_angular{2.0};
  double w_obstacle{1.0};
  double w_collision{1.0};
  double softmin_temperature{1.0};

  void validate() const;
};

/// Anisotropic Gaussian bump attached to an agent, long axis along the
/// heading. A non-positive sigma selects the default tied to the agent
/// footprint: half the extent on that axis.
struct GaussianFieldParams {
  double sigma_longitudinal{0.0};  // [m]; <= 0 means length / 2
  double sigma_lateral{0.0};       // [m]; <= 0 means width / 2
  double amplitude{1.0};

  void validate() const;

  /// Concrete sigmas for one agent (both guaranteed > 0 for valid geometry).
  GaussianFieldParams resolve(const AgentGeometry& geom) const;
};

/// Road-edge polylines are interpolated down to at most this spacing before
/// the max-field query, so proximity between vertices is not missed.
inline constexpr double kRoadEdgeSpacing = 0.5;  // [m]

// ── Residuals ──────────────────────────────────────────────────────────────
// All four are exactly linear in the state fields they read.

/// Position difference to the anchor point.
inline Vec2 residual_motion(const AgentState& s, const AgentState& anchor) {
  return {s.x - anchor.x, s.y - anchor.y};
}

/// Position difference of the final state to the goal point.
inline Vec2 residual_goal(const AgentState& s_final, const Vec2& goal) {
  return {s_final.x - goal.x(), s_final.y - goal.y()};
}

/// Deviation of the successor position from the constant-velocity prediction.
inline Vec2 residual_linear(const AgentState& s, const AgentState& s_next, double dt) {
  return {s_next.x - (s.x + s.vx * dt), s_next.y - (s.y + s.vy * dt)};
}

/// Velocity change between consecutive states.
inline Vec2 residual_angular(const AgentState& s, const AgentState& s_next) {
  return {s.vx - s_next.vx, s.vy - s_next.vy};
}

// ── Gaussian field and scored energies ─────────────────────────────────────

/// Field value at a query point: amplitude * exp(-1/2 * [u^2/sl^2 + v^2/st^2])
/// with (u, v) the query in the agent frame. Strictly positive, equals
/// amplitude exactly at the agent center.
double gaussian_field(const Vec2& query, const AgentState& s, const AgentGeometry& geom,
                      const GaussianFieldParams& params, double fallback_heading);

std::vector<Vec2> densify_polyline(const Polyline& line, double max_spacing);
std::vector<Vec2> densify_road_edges(const std::vector<Polyline>& edges,
                                     double max_spacing = kRoadEdgeSpacing);

/// Max of the agent's field over all (densified) road-edge points;
/// 0 when there are no road edges.
double energy_obstacle(const AgentState& s, const std::vector<Polyline>& road_edges,
                       const AgentGeometry& geom, const GaussianFieldParams& params,
                       double fallback_heading);

/// Same, over a pre-densified point set.
double energy_obstacle(const AgentState& s, std::span<const Vec2> edge_points,
                       const AgentGeometry& geom, const GaussianFieldParams& params,
                       double fallback_heading);

/// Max of agent s's field over the 9 box points of the other agent.
/// Asymmetric; the joint model sums both directions of each pair.
double energy_collision(const AgentState& s, const AgentGeometry& geom_s,
                        const AgentState& s_other, const AgentGeometry& geom_other,
                        const GaussianFieldParams& params, double fallback_heading_s,
                        double fallback_heading_other);

// ── Aggregate energies ─────────────────────────────────────────────────────

/// Per-factor subtotals of a rollout energy. total() is the selection energy.
struct EnergyBreakdown {
  double motion{0.0};
  double goal{0.0};
  double linear{0.0};
  double angular{0.0};
  double obstacle{0.0};
  double collision{0.0};

  double smoothing_total() const { return motion + goal + linear + angular; }
  double interaction_total() const { return obstacle + collision; }
  double total() const { return smoothing_total() + interaction_total(); }

  EnergyBreakdown& operator+=(const EnergyBreakdown& o);
};

/// Weighted squared-residual energy of one agent's trajectory against its
/// anchors and goal: motion over all but the last step, goal on the last,
/// linear and angular over consecutive pairs. Throws std::invalid_argument
/// on length mismatch or F < 2.
double smoothing_energy(const Trajectory& traj, const Trajectory& anchors, const Vec2& goal,
                        const FactorWeights& weights, double dt);

EnergyBreakdown smoothing_energy_breakdown(const Trajectory& traj, const Trajectory& anchors,
                                           const Vec2& goal, const FactorWeights& weights,
                                           double dt);

/// Obstacle plus pairwise-collision energy of joint trajectories, summed
/// over agents, ordered pairs, and timesteps. Heading fallbacks for slow
/// agents come from the scene's logged histories.
double interaction_energy(const std::vector<Trajectory>& joint, const SceneContext& context,
                          const FactorWeights& weights, const GaussianFieldParams& field);

/// initial_headings, when non-empty, supplies one fallback heading per agent
/// (callers that track a live history window pass the current ones);
/// otherwise the fallbacks derive from context.histories.
EnergyBreakdown interaction_energy_breakdown(const std::vector<Trajectory>& joint,
                                             const SceneContext& context,
                                             const FactorWeights& weights,
                                             const GaussianFieldParams& field,
                                             std::span<const Vec2> densified_edges,
                                             std::span<const double> initial_headings = {});

}  // namespace mpsim
