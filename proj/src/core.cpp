#include "mpsim/core.hpp"

#include <stdexcept>

namespace mpsim {

void AgentGeometry::validate() const {
  if (!std::isfinite(length) || !std::isfinite(width)) {
    throw std::invalid_argument("agent geometry must be finite (id=" + agent_id + ")");
  }
  if (!(width > 0.0) || !(length >= width)) {
    throw std::invalid_argument("agent geometry requires length >= width > 0 (id=" + agent_id +
                                ")");
  }
}

bool Trajectory::all_finite() const {
  for (const auto& s : states) {
    if (!s.finite()) return false;
  }
  return true;
}

void SceneContext::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("scene dt must be positive and finite");
  }
  if (agents.size() != histories.size()) {
    throw std::invalid_argument("scene has " + std::to_string(agents.size()) + " agents but " +
                                std::to_string(histories.size()) + " histories");
  }
  if (!intents.empty() && intents.size() != agents.size()) {
    throw std::invalid_argument("intents must be empty or one per agent");
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agents[i].validate();
    if (histories[i].empty()) {
      throw std::invalid_argument("agent " + agents[i].agent_id + " has an empty history");
    }
    for (const auto& s : histories[i]) {
      if (!s.finite()) {
        throw std::invalid_argument("agent " + agents[i].agent_id +
                                    " has a non-finite history state");
      }
    }
  }
  for (std::size_t e = 0; e < road_edges.size(); ++e) {
    if (road_edges[e].size() < 2) {
      throw std::invalid_argument("road edge " + std::to_string(e) + " has fewer than 2 points");
    }
    for (const auto& p : road_edges[e]) {
      if (!std::isfinite(p.x()) || !std::isfinite(p.y())) {
        throw std::invalid_argument("road edge " + std::to_string(e) +
                                    " contains a non-finite point");
      }
    }
  }
}

double heading_of(const AgentState& state, double fallback_heading) {
  if (state.speed() > kEpsilonSpeed) {
    return std::atan2(state.vy, state.vx);
  }
  return fallback_heading;
}

std::array<Vec2, 9> oriented_box_points(const AgentState& state, const AgentGeometry& geom,
                                        double fallback_heading) {
  const double heading = heading_of(state, fallback_heading);
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const double hl = 0.5 * geom.length;
  const double hw = 0.5 * geom.width;

  // Local box frame: +u along the heading, +v to the left.
  const std::array<Vec2, 8> local = {{
      {+hl, +hw}, {+hl, -hw}, {-hl, +hw}, {-hl, -hw},  // corners
      {+hl, 0.0}, {-hl, 0.0}, {0.0, +hw}, {0.0, -hw},  // edge midpoints
  }};

  std::array<Vec2, 9> out;
  for (std::size_t i = 0; i < local.size(); ++i) {
    out[i] = Vec2(state.x + c * local[i].x() - s * local[i].y(),
                  state.y + s * local[i].x() + c * local[i].y());
  }
  out[8] = Vec2(state.x, state.y);  // center: exact, no arithmetic
  return out;
}

double initial_heading_fallback(const std::vector<AgentState>& history) {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->speed() > kEpsilonSpeed) {
      return std::atan2(it->vy, it->vx);
    }
  }
  return 0.0;
}

std::vector<double> trajectory_headings(const Trajectory& traj, double initial_fallback) {
  std::vector<double> headings;
  headings.reserve(traj.states.size());
  double fallback = initial_fallback;
  for (const auto& s : traj.states) {
    const double h = heading_of(s, fallback);
    headings.push_back(h);
    fallback = h;
  }
  return headings;
}

}  // namespace mpsim
