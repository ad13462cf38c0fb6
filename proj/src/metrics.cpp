#include "mpsim/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpsim/error.hpp"

namespace mpsim {

OrientedBox agent_box(const AgentState& state, const AgentGeometry& geom,
                      double fallback_heading) {
  return {state.position(), heading_of(state, fallback_heading), geom.length, geom.width};
}

namespace {

struct BoxFrame {
  Vec2 center;
  Vec2 axis_u;  // along heading
  Vec2 axis_v;  // across
  double hu;    // half length
  double hv;    // half width
};

BoxFrame frame_of(const OrientedBox& b) {
  const double c = std::cos(b.heading);
  const double s = std::sin(b.heading);
  return {b.center, {c, s}, {-s, c}, 0.5 * b.length, 0.5 * b.width};
}

// Projection radius of a box onto a unit axis.
double radius_on(const BoxFrame& f, const Vec2& axis) {
  return f.hu * std::abs(f.axis_u.dot(axis)) + f.hv * std::abs(f.axis_v.dot(axis));
}

}  // namespace

double sat_margin(const OrientedBox& a, const OrientedBox& b) {
  const BoxFrame fa = frame_of(a);
  const BoxFrame fb = frame_of(b);
  const Vec2 d = fb.center - fa.center;
  const Vec2 axes[4] = {fa.axis_u, fa.axis_v, fb.axis_u, fb.axis_v};
  double margin = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : axes) {
    const double depth = radius_on(fa, axis) + radius_on(fb, axis) - std::abs(d.dot(axis));
    margin = std::min(margin, depth);
  }
  return margin;
}

bool point_in_box(const OrientedBox& box, const Vec2& point) {
  const BoxFrame f = frame_of(box);
  const Vec2 d = point - f.center;
  return std::abs(d.dot(f.axis_u)) <= f.hu && std::abs(d.dot(f.axis_v)) <= f.hv;
}

namespace {

// Even-odd ray crossing against one polyline treated as a closed ring.
bool inside_ring(const Polyline& ring, const Vec2& p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[j];
    const Vec2& b = ring[i];
    if ((b.y() > p.y()) != (a.y() > p.y())) {
      const double x_cross = b.x() + (p.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

bool point_is_offroad(const Scenario& scenario, const Vec2& point) {
  bool inside_any = false;
  for (const auto& ring : scenario.context.road_edges) {
    if (inside_ring(ring, point)) {
      inside_any = true;
      break;
    }
  }
  return scenario.drivable_interior == "inside" ? !inside_any : inside_any;
}

HistogramSummary summarize(const std::vector<double>& values, int bin_count) {
  HistogramSummary h;
  if (values.empty() || bin_count < 1) return h;

  double sum = 0.0;
  double lo = values[0];
  double hi = values[0];
  for (double v : values) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double n = static_cast<double>(values.size());
  h.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - h.mean) * (v - h.mean);
  h.stddev = std::sqrt(sq / n);

  const double span = std::max(hi - lo, 1e-9);
  h.edges.resize(static_cast<std::size_t>(bin_count) + 1);
  for (int i = 0; i <= bin_count; ++i) {
    h.edges[static_cast<std::size_t>(i)] = lo + span * i / bin_count;
  }
  h.counts.assign(static_cast<std::size_t>(bin_count), 0);
  for (double v : values) {
    int bin = static_cast<int>((v - lo) / span * bin_count);
    bin = std::clamp(bin, 0, bin_count - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

MetricsReport compute_metrics(const SimulationOutput& output, const Scenario& scenario,
                              bool require_min_ade) {
  const SceneContext& context = scenario.context;
  const int k_count = output.num_samples();
  const int n = output.num_agents();
  const int t_count = output.total_steps();
  if (k_count == 0 || n == 0 || t_count == 0) {
    throw InputError("metrics require a non-empty simulation output");
  }
  if (n != context.num_agents()) {
    throw InputError("simulation output has " + std::to_string(n) + " agents, scenario has " +
                     std::to_string(context.num_agents()));
  }
  for (const auto& sample : output.samples) {
    for (const auto& traj : sample.trajectories) {
      if (traj.size() != t_count) {
        throw InputError("simulation output trajectories have uneven lengths");
      }
    }
  }

  MetricsReport report;
  report.num_samples = k_count;
  report.num_agents = n;
  report.num_steps = t_count;

  std::int64_t collisions = 0;
  std::int64_t offroad = 0;
  std::vector<double> speeds;
  std::vector<double> accels;
  speeds.reserve(static_cast<std::size_t>(k_count) * n * t_count);
  accels.reserve(static_cast<std::size_t>(k_count) * n * std::max(t_count - 1, 0));

  std::vector<bool> in_collision(static_cast<std::size_t>(n));
  std::vector<OrientedBox> boxes(static_cast<std::size_t>(n));

  for (int k = 0; k < k_count; ++k) {
    const SampleRun& run = output.samples[static_cast<std::size_t>(k)];

    std::vector<std::vector<double>> headings(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      headings[static_cast<std::size_t>(i)] = trajectory_headings(
          run.trajectories[static_cast<std::size_t>(i)],
          initial_heading_fallback(context.histories[static_cast<std::size_t>(i)]));
    }

    for (int t = 0; t < t_count; ++t) {
      for (int i = 0; i < n; ++i) {
        const AgentState& s = run.trajectories[static_cast<std::size_t>(i)][t];
        boxes[static_cast<std::size_t>(i)] =
            agent_box(s, context.agents[static_cast<std::size_t>(i)],
                      headings[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]);
        if (point_is_offroad(scenario, s.position())) ++offroad;
        speeds.push_back(s.speed());
        if (t + 1 < t_count) {
          const AgentState& next = run.trajectories[static_cast<std::size_t>(i)][t + 1];
          accels.push_back(std::hypot(next.vx - s.vx, next.vy - s.vy) / output.dt);
        }
      }
      std::fill(in_collision.begin(), in_collision.end(), false);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (boxes_overlap(boxes[static_cast<std::size_t>(i)],
                            boxes[static_cast<std::size_t>(j)])) {
            in_collision[static_cast<std::size_t>(i)] = true;
            in_collision[static_cast<std::size_t>(j)] = true;
          }
        }
      }
      for (int i = 0; i < n; ++i) {
        if (in_collision[static_cast<std::size_t>(i)]) ++collisions;
      }
    }
  }

  const double triples = static_cast<double>(k_count) * n * t_count;
  report.collision_rate = static_cast<double>(collisions) / triples;
  report.offroad_rate = static_cast<double>(offroad) / triples;
  report.speed = summarize(speeds);
  report.accel = summarize(accels);

  if (scenario.logged_future.empty()) {
    if (require_min_ade) {
      throw InputError("min_ade requested but the scenario has no logged future");
    }
    return report;
  }
  const int logged_len = static_cast<int>(scenario.logged_future[0].size());
  if (logged_len < t_count) {
    // The displacement error is defined over the full simulated span; a
    // shorter logged future cannot support it.
    if (require_min_ade) {
      throw InputError("min_ade requested but the logged future has " +
                       std::to_string(logged_len) + " steps, simulation has " +
                       std::to_string(t_count));
    }
    return report;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& run : output.samples) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < t_count; ++t) {
        const AgentState& s = run.trajectories[static_cast<std::size_t>(i)][t];
        const AgentState& logged =
            scenario.logged_future[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
        sum += (s.position() - logged.position()).norm();
      }
    }
    best = std::min(best, sum / (static_cast<double>(n) * t_count));
  }
  report.min_ade = best;
  return report;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  using nlohmann::json;
  auto histogram = [](const HistogramSummary& h) {
    return json{{"mean", h.mean},
                {"stddev", h.stddev},
                {"histogram", json{{"edges", h.edges}, {"counts", h.counts}}}};
  };
  json doc{{"schema_version", 1},
           {"kind", "metrics"},
           {"collision_rate", report.collision_rate},
           {"offroad_rate", report.offroad_rate},
           {"speed", histogram(report.speed)},
           {"accel", histogram(report.accel)},
           {"counts", json{{"samples", report.num_samples},
                           {"agents", report.num_agents},
                           {"steps", report.num_steps}}}};
  if (report.min_ade) doc["min_ade"] = *report.min_ade;
  return doc;
}

}  // namespace mpsim
