#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <vector>

#include "mpsim/scenario_io.hpp"

namespace mpsim {

struct OrientedBox {
  Vec2 center{0.0, 0.0};
  double heading{0.0};  // [rad]
  double length{1.0};
  double width{1.0};
};

OrientedBox agent_box(const AgentState& state, const AgentGeometry& geom,
                      double fallback_heading);

/// Smallest projected overlap depth across the four separating-axis
/// candidates. Positive means the boxes overlap, negative means they are
/// disjoint; magnitudes near zero are boundary cases.
double sat_margin(const OrientedBox& a, const OrientedBox& b);

inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  return sat_margin(a, b) > 0.0;
}

/// Closed-box containment test in the box frame.
bool point_in_box(const OrientedBox& box, const Vec2& point);

/// Even-odd containment against the scenario's road-edge rings combined
/// with its drivable_interior declaration.
bool point_is_offroad(const Scenario& scenario, const Vec2& point);

struct HistogramSummary {
  double mean{0.0};
  double stddev{0.0};
  std::vector<double> edges;         // bin_count + 1 edges
  std::vector<std::int64_t> counts;  // bin_count entries
};

HistogramSummary summarize(const std::vector<double>& values, int bin_count = 20);

struct MetricsReport {
  double collision_rate{0.0};  // fraction of (sample, agent, step) in overlap
  double offroad_rate{0.0};    // fraction of (sample, agent, step) off the map
  HistogramSummary speed;
  HistogramSummary accel;
  std::optional<double> min_ade;
  int num_samples{0};
  int num_agents{0};
  int num_steps{0};
};

/// Box-overlap collision rate, offroad rate, kinematic distributions, and
/// (when a logged future is available) the min-over-samples average
/// displacement error. require_min_ade makes a missing logged future an
/// InputError instead of an absent metric.
MetricsReport compute_metrics(const SimulationOutput& output, const Scenario& scenario,
                              bool require_min_ade = false);

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace mpsim
