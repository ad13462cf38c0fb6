#include "mpsim/factors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mpsim {

namespace {

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
  }
}

// Squared Mahalanobis distance of q from the agent center in the box frame
// given by (cos, sin) of the heading.
inline double mahalanobis2(const Vec2& q, double cx, double cy, double cos_h, double sin_h,
                           double inv_sl2, double inv_st2) {
  const double dx = q.x() - cx;
  const double dy = q.y() - cy;
  const double u = cos_h * dx + sin_h * dy;
  const double v = -sin_h * dx + cos_h * dy;
  return u * u * inv_sl2 + v * v * inv_st2;
}

struct FieldFrame {
  double cx, cy, cos_h, sin_h, inv_sl2, inv_st2, amplitude;
};

FieldFrame make_frame(const AgentState& s, const AgentGeometry& geom,
                      const GaussianFieldParams& params, double fallback_heading) {
  const GaussianFieldParams p = params.resolve(geom);
  const double heading = heading_of(s, fallback_heading);
  return {s.x,
          s.y,
          std::cos(heading),
          std::sin(heading),
          1.0 / (p.sigma_longitudinal * p.sigma_longitudinal),
          1.0 / (p.sigma_lateral * p.sigma_lateral),
          p.amplitude};
}

// max over points of amplitude * exp(-m2/2) == amplitude * exp(-min(m2)/2),
// so only one exp is needed per query set.
double max_field_over_points(const FieldFrame& f, std::span<const Vec2> points) {
  if (points.empty()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : points) {
    const double m2 = mahalanobis2(q, f.cx, f.cy, f.cos_h, f.sin_h, f.inv_sl2, f.inv_st2);
    if (m2 < best) best = m2;
  }
  return f.amplitude * std::exp(-0.5 * best);
}

}  // namespace

void FactorWeights::validate() const {
  require_nonnegative(w_motion, "w_motion");
  require_nonnegative(w_goal, "w_goal");
  require_nonnegative(w_linear, "w_linear");
  require_nonnegative(w_angular, "w_angular");
  require_nonnegative(w_obstacle, "w_obstacle");
  require_nonnegative(w_collision, "w_collision");
  if (!(softmin_temperature > 0.0) || !std::isfinite(softmin_temperature)) {
    throw std::invalid_argument("softmin_temperature must be finite and > 0");
  }
}

void GaussianFieldParams::validate() const {
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("field amplitude must be finite and > 0");
  }
  if (!std::isfinite(sigma_longitudinal) || !std::isfinite(sigma_lateral)) {
    throw std::invalid_argument("field sigmas must be finite");
  }
}

GaussianFieldParams GaussianFieldParams::resolve(const AgentGeometry& geom) const {
  GaussianFieldParams out = *this;
  if (!(out.sigma_longitudinal > 0.0)) out.sigma_longitudinal = 0.5 * geom.length;
  if (!(out.sigma_lateral > 0.0)) out.sigma_lateral = 0.5 * geom.width;
  return out;
}

double gaussian_field(const Vec2& query, const AgentState& s, const AgentGeometry& geom,
                      const GaussianFieldParams& params, double fallback_heading) {
  const FieldFrame f = make_frame(s, geom, params, fallback_heading);
  const double m2 = mahalanobis2(query, f.cx, f.cy, f.cos_h, f.sin_h, f.inv_sl2, f.inv_st2);
  return f.amplitude * std::exp(-0.5 * m2);
}

std::vector<Vec2> densify_polyline(const Polyline& line, double max_spacing) {
  std::vector<Vec2> out;
  if (line.empty()) return out;
  out.push_back(line.front());
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Vec2& a = line[i - 1];
    const Vec2& b = line[i];
    const double len = (b - a).norm();
    const int segments = std::max(1, static_cast<int>(std::ceil(len / max_spacing)));
    for (int k = 1; k <= segments; ++k) {
      const double t = static_cast<double>(k) / segments;
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

std::vector<Vec2> densify_road_edges(const std::vector<Polyline>& edges, double max_spacing) {
  std::vector<Vec2> out;
  for (const auto& line : edges) {
    auto pts = densify_polyline(line, max_spacing);
    out.insert(out.end(), pts.begin(), pts.end());
  }
  return out;
}

double energy_obstacle(const AgentState& s, const std::vector<Polyline>& road_edges,
                       const AgentGeometry& geom, const GaussianFieldParams& params,
                       double fallback_heading) {
  const auto points = densify_road_edges(road_edges);
  return energy_obstacle(s, std::span<const Vec2>(points), geom, params, fallback_heading);
}

double energy_obstacle(const AgentState& s, std::span<const Vec2> edge_points,
                       const AgentGeometry& geom, const GaussianFieldParams& params,
                       double fallback_heading) {
  return max_field_over_points(make_frame(s, geom, params, fallback_heading), edge_points);
}

double energy_collision(const AgentState& s, const AgentGeometry& geom_s,
                        const AgentState& s_other, const AgentGeometry& geom_other,
                        const GaussianFieldParams& params, double fallback_heading_s,
                        double fallback_heading_other) {
  const auto ccp = oriented_box_points(s_other, geom_other, fallback_heading_other);
  return max_field_over_points(make_frame(s, geom_s, params, fallback_heading_s),
                               std::span<const Vec2>(ccp.data(), ccp.size()));
}

EnergyBreakdown& EnergyBreakdown::operator+=(const EnergyBreakdown& o) {
  motion += o.motion;
  goal += o.goal;
  linear += o.linear;
  angular += o.angular;
  obstacle += o.obstacle;
  collision += o.collision;
  return *this;
}

EnergyBreakdown smoothing_energy_breakdown(const Trajectory& traj, const Trajectory& anchors,
                                           const Vec2& goal, const FactorWeights& weights,
                                           double dt) {
  const int f = traj.size();
  if (f != anchors.size()) {
    throw std::invalid_argument("trajectory length " + std::to_string(f) +
                                " does not match anchors length " +
                                std::to_string(anchors.size()));
  }
  if (f < 2) {
    throw std::invalid_argument("smoothing requires at least 2 states, got " + std::to_string(f));
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("dt must be > 0");
  }

  EnergyBreakdown e;
  for (int t = 0; t + 1 < f; ++t) {
    e.motion += weights.w_motion * residual_motion(traj[t], anchors[t]).squaredNorm();
  }
  e.goal = weights.w_goal * residual_goal(traj[f - 1], goal).squaredNorm();
  for (int t = 0; t + 1 < f; ++t) {
    e.linear += weights.w_linear * residual_linear(traj[t], traj[t + 1], dt).squaredNorm();
    e.angular += weights.w_angular * residual_angular(traj[t], traj[t + 1]).squaredNorm();
  }
  return e;
}

double smoothing_energy(const Trajectory& traj, const Trajectory& anchors, const Vec2& goal,
                        const FactorWeights& weights, double dt) {
  return smoothing_energy_breakdown(traj, anchors, goal, weights, dt).smoothing_total();
}

EnergyBreakdown interaction_energy_breakdown(const std::vector<Trajectory>& joint,
                                             const SceneContext& context,
                                             const FactorWeights& weights,
                                             const GaussianFieldParams& field,
                                             std::span<const Vec2> densified_edges,
                                             std::span<const double> initial_headings) {
  const int n = static_cast<int>(joint.size());
  if (n != context.num_agents()) {
    throw std::invalid_argument("joint trajectories count does not match scene agents");
  }
  if (!initial_headings.empty() && static_cast<int>(initial_headings.size()) != n) {
    throw std::invalid_argument("initial_headings must be empty or one per agent");
  }
  if (n == 0) return {};
  const int f = joint[0].size();
  for (const auto& traj : joint) {
    if (traj.size() != f) {
      throw std::invalid_argument("joint trajectories must all have the same length");
    }
  }

  // Per-agent frames and box points, computed once per (agent, step).
  std::vector<std::vector<double>> headings(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double fallback =
        initial_headings.empty()
            ? initial_heading_fallback(context.histories[static_cast<std::size_t>(i)])
            : initial_headings[static_cast<std::size_t>(i)];
    headings[static_cast<std::size_t>(i)] =
        trajectory_headings(joint[static_cast<std::size_t>(i)], fallback);
  }
  std::vector<std::vector<std::array<Vec2, 9>>> box_points(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& per_step = box_points[static_cast<std::size_t>(i)];
    per_step.reserve(static_cast<std::size_t>(f));
    for (int t = 0; t < f; ++t) {
      per_step.push_back(oriented_box_points(joint[static_cast<std::size_t>(i)][t],
                                             context.agents[static_cast<std::size_t>(i)],
                                             headings[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]));
    }
  }

  EnergyBreakdown e;
  for (int i = 0; i < n; ++i) {
    const auto& geom_i = context.agents[static_cast<std::size_t>(i)];
    for (int t = 0; t < f; ++t) {
      const FieldFrame frame = make_frame(joint[static_cast<std::size_t>(i)][t], geom_i, field,
                                          headings[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]);
      e.obstacle += weights.w_obstacle * max_field_over_points(frame, densified_edges);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto& ccp = box_points[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
        e.collision += weights.w_collision *
                       max_field_over_points(frame, std::span<const Vec2>(ccp.data(), ccp.size()));
      }
    }
  }
  return e;
}

double interaction_energy(const std::vector<Trajectory>& joint, const SceneContext& context,
                          const FactorWeights& weights, const GaussianFieldParams& field) {
  const auto points = densify_road_edges(context.road_edges);
  return interaction_energy_breakdown(joint, context, weights, field,
                                      std::span<const Vec2>(points))
      .interaction_total();
}

}  // namespace mpsim
