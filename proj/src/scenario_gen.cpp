#include <cmath>
#include <stdexcept>

#include "mpsim/error.hpp"
#include "mpsim/rng.hpp"
#include "mpsim/scenario_io.hpp"

namespace mpsim {

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kHeadOn: return "head_on";
    case ScenarioKind::kCrossing: return "crossing";
    case ScenarioKind::kMerge: return "merge";
    case ScenarioKind::kStationary: return "stationary";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "head_on") return ScenarioKind::kHeadOn;
  if (name == "crossing") return ScenarioKind::kCrossing;
  if (name == "merge") return ScenarioKind::kMerge;
  if (name == "stationary") return ScenarioKind::kStationary;
  throw InputError("unknown scenario kind: " + name);
}

void ScenarioGenParams::validate() const {
  if (num_agents < 1) throw InputError("scenario num_agents must be >= 1");
  if (!(speed > 0.0)) throw InputError("scenario speed must be > 0");
  if (!(gap > 0.0)) throw InputError("scenario gap must be > 0");
  if (!(lane_width > 0.0)) throw InputError("scenario lane_width must be > 0");
  if (!(jitter >= 0.0)) throw InputError("scenario jitter must be >= 0");
  if (history_len < 1) throw InputError("scenario history_len must be >= 1");
  if (future_len < 1) throw InputError("scenario future_len must be >= 1");
  if (!(dt > 0.0)) throw InputError("scenario dt must be > 0");
  if (!(agent_width > 0.0) || !(agent_length >= agent_width)) {
    throw InputError("scenario agent extents require length >= width > 0");
  }
}

namespace {

std::vector<AgentState> constant_velocity_history(const Vec2& current, const Vec2& vel,
                                                  int length, double dt) {
  std::vector<AgentState> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int h = 0; h < length; ++h) {
    const double back = static_cast<double>(length - 1 - h) * dt;
    out.push_back({current.x() - vel.x() * back, current.y() - vel.y() * back, vel.x(), vel.y()});
  }
  return out;
}

std::vector<AgentState> constant_velocity_future(const Vec2& current, const Vec2& vel,
                                                 int length, double dt) {
  std::vector<AgentState> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int t = 1; t <= length; ++t) {
    out.push_back({current.x() + vel.x() * t * dt, current.y() + vel.y() * t * dt, vel.x(),
                   vel.y()});
  }
  return out;
}

Polyline rectangle_ring(double x_min, double x_max, double y_min, double y_max) {
  return {{x_min, y_min}, {x_max, y_min}, {x_max, y_max}, {x_min, y_max}, {x_min, y_min}};
}

struct AgentSetup {
  Vec2 position;
  Vec2 velocity;
  Vec2 intent;
};

Scenario assemble(const std::vector<AgentSetup>& specs, const Polyline& ring,
                  const ScenarioGenParams& params) {
  Scenario scenario;
  scenario.context.dt = params.dt;
  scenario.context.road_edges.push_back(ring);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    AgentGeometry geom;
    geom.length = params.agent_length;
    geom.width = params.agent_width;
    geom.agent_id = "a" + std::to_string(i);
    scenario.context.agents.push_back(geom);
    scenario.context.histories.push_back(constant_velocity_history(
        specs[i].position, specs[i].velocity, params.history_len, params.dt));
    scenario.context.intents.push_back(specs[i].intent);
    scenario.logged_future.push_back(constant_velocity_future(
        specs[i].position, specs[i].velocity, params.future_len, params.dt));
  }
  scenario.context.validate();
  return scenario;
}

Scenario make_head_on(const ScenarioGenParams& p, Rng& rng) {
  const double horizon_m = p.speed * p.future_len * p.dt;
  const double speed_a = p.speed * (1.0 + p.jitter * rng.uniform(-0.5, 0.5));
  const double speed_b = p.speed * (1.0 + p.jitter * rng.uniform(-0.5, 0.5));
  const double lat_a = p.jitter * rng.uniform(-1.0, 1.0);
  const double lat_b = p.jitter * rng.uniform(-1.0, 1.0);

  std::vector<AgentSetup> specs(2);
  specs[0].position = {-0.5 * p.gap, lat_a};
  specs[0].velocity = {speed_a, 0.0};
  specs[0].intent = specs[0].position + Vec2(horizon_m, 0.0);
  specs[1].position = {0.5 * p.gap, lat_b};
  specs[1].velocity = {-speed_b, 0.0};
  specs[1].intent = specs[1].position + Vec2(-horizon_m, 0.0);

  const double x_reach = 0.5 * p.gap + horizon_m + 10.0;
  return assemble(specs, rectangle_ring(-x_reach, x_reach, -p.lane_width, p.lane_width), p);
}

Scenario make_crossing(const ScenarioGenParams& p, Rng& rng) {
  const double horizon_m = p.speed * p.future_len * p.dt;
  // The second agent reaches the intersection two body lengths later, so the
  // logged play-out stays collision free.
  const double offset = 2.0 * p.agent_length;
  const double speed_a = p.speed * (1.0 + p.jitter * rng.uniform(-0.2, 0.2));
  const double speed_b = p.speed * (1.0 + p.jitter * rng.uniform(-0.2, 0.2));

  std::vector<AgentSetup> specs(2);
  specs[0].position = {-p.gap, 0.0};
  specs[0].velocity = {speed_a, 0.0};
  specs[0].intent = specs[0].position + Vec2(horizon_m, 0.0);
  specs[1].position = {0.0, -p.gap - offset};
  specs[1].velocity = {0.0, speed_b};
  specs[1].intent = specs[1].position + Vec2(0.0, horizon_m);

  const double reach = p.gap + offset + horizon_m + 10.0;
  return assemble(specs, rectangle_ring(-reach, reach, -reach, reach), p);
}

Scenario make_merge(const ScenarioGenParams& p, Rng& rng) {
  const double horizon_m = p.speed * p.future_len * p.dt;
  const double lane_offset = 0.5 * p.lane_width;
  const double speed_a = p.speed * (1.0 + p.jitter * rng.uniform(-0.2, 0.2));
  const double speed_b = p.speed * (1.0 + p.jitter * rng.uniform(-0.2, 0.2));

  std::vector<AgentSetup> specs(2);
  specs[0].position = {0.0, 0.0};
  specs[0].velocity = {speed_a, 0.0};
  specs[0].intent = specs[0].position + Vec2(horizon_m, 0.0);
  // Trailing agent in the adjacent lane, intent back in the main lane.
  specs[1].position = {-0.5 * p.gap, lane_offset};
  specs[1].velocity = {speed_b, 0.0};
  specs[1].intent = {specs[1].position.x() + horizon_m, 0.0};

  const double x_reach = 0.5 * p.gap + horizon_m + 10.0;
  return assemble(specs, rectangle_ring(-x_reach, x_reach, -p.lane_width, 1.5 * p.lane_width),
                  p);
}

Scenario make_stationary(const ScenarioGenParams& p, Rng& rng) {
  const double spacing = 2.0 * p.agent_length;
  std::vector<AgentSetup> specs(static_cast<std::size_t>(p.num_agents));
  for (int i = 0; i < p.num_agents; ++i) {
    const double x =
        spacing * (i - 0.5 * (p.num_agents - 1)) + p.jitter * rng.uniform(-1.0, 1.0);
    const double y = p.jitter * rng.uniform(-1.0, 1.0);
    specs[static_cast<std::size_t>(i)].position = {x, y};
    specs[static_cast<std::size_t>(i)].velocity = {0.0, 0.0};
    specs[static_cast<std::size_t>(i)].intent = {x, y};
  }
  const double reach = spacing * p.num_agents + 20.0;
  return assemble(specs, rectangle_ring(-reach, reach, -reach, reach), p);
}

}  // namespace

Scenario generate_scenario(ScenarioKind kind, const ScenarioGenParams& params,
                           std::uint64_t seed) {
  params.validate();
  Rng rng(split_seed(seed, static_cast<std::uint64_t>(kind), SeedPurpose::kHarness));
  switch (kind) {
    case ScenarioKind::kHeadOn: return make_head_on(params, rng);
    case ScenarioKind::kCrossing: return make_crossing(params, rng);
    case ScenarioKind::kMerge: return make_merge(params, rng);
    case ScenarioKind::kStationary: return make_stationary(params, rng);
  }
  throw InputError("unknown scenario kind");
}

}  // namespace mpsim
