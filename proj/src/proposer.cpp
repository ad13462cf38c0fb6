#include "mpsim/proposer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mpsim/error.hpp"
#include "mpsim/rng.hpp"
#include "mpsim/scenario_io.hpp"

namespace mpsim {

namespace {

void check_inputs(const SceneContext& context,
                  const std::vector<std::vector<AgentState>>& histories, int horizon) {
  if (horizon < 2) {
    throw std::invalid_argument("proposal horizon must be >= 2, got " + std::to_string(horizon));
  }
  if (static_cast<int>(histories.size()) != context.num_agents()) {
    throw std::invalid_argument("histories count does not match scene agents");
  }
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (histories[i].empty()) {
      throw std::invalid_argument("agent " + context.agents[i].agent_id + " has an empty history");
    }
  }
}

class ConstantVelocityProposer final : public Proposer {
 public:
  explicit ConstantVelocityProposer(const ProposerConfig& config) : config_(config) {}

  Proposal propose(const SceneContext& context,
                   const std::vector<std::vector<AgentState>>& histories, int horizon,
                   const ProposalRequest& request) const override {
    check_inputs(context, histories, horizon);
    const int n = context.num_agents();
    Proposal out;
    out.anchors.reserve(static_cast<std::size_t>(n));
    out.goals.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Rng rng(split_seed(request.seed, static_cast<std::uint64_t>(i), SeedPurpose::kAgent));
      const double scale = rng.uniform(config_.speed_scale_range.first,
                                       config_.speed_scale_range.second);
      const AgentState& last = histories[static_cast<std::size_t>(i)].back();
      Trajectory anchors;
      anchors.dt = context.dt;
      anchors.states.reserve(static_cast<std::size_t>(horizon));
      for (int t = 1; t <= horizon; ++t) {
        AgentState s;
        s.x = last.x + last.vx * scale * context.dt * t;
        s.y = last.y + last.vy * scale * context.dt * t;
        if (config_.position_noise_sigma > 0.0) {
          s.x += config_.position_noise_sigma * rng.normal();
          s.y += config_.position_noise_sigma * rng.normal();
        }
        anchors.states.push_back(s);
      }
      fill_velocities_from_positions(anchors);
      out.goals.push_back(anchors.back().position());
      out.anchors.push_back(std::move(anchors));
    }
    return out;
  }

 private:
  ProposerConfig config_;
};

class GoalDirectedProposer final : public Proposer {
 public:
  explicit GoalDirectedProposer(const ProposerConfig& config) : config_(config) {}

  Proposal propose(const SceneContext& context,
                   const std::vector<std::vector<AgentState>>& histories, int horizon,
                   const ProposalRequest& request) const override {
    check_inputs(context, histories, horizon);
    const int n = context.num_agents();
    Proposal out;
    out.anchors.reserve(static_cast<std::size_t>(n));
    out.goals.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Rng rng(split_seed(request.seed, static_cast<std::uint64_t>(i), SeedPurpose::kAgent));
      const double scale = rng.uniform(config_.speed_scale_range.first,
                                       config_.speed_scale_range.second);
      const auto& history = histories[static_cast<std::size_t>(i)];
      const AgentState& last = history.back();
      const Vec2 start = last.position();

      Vec2 intent = start + last.velocity() * (horizon * context.dt);
      if (i < static_cast<int>(context.intents.size()) &&
          context.intents[static_cast<std::size_t>(i)].has_value()) {
        intent = *context.intents[static_cast<std::size_t>(i)];
      }
      Vec2 goal = intent;
      if (config_.goal_jitter_sigma > 0.0) {
        goal.x() += config_.goal_jitter_sigma * rng.normal();
        goal.y() += config_.goal_jitter_sigma * rng.normal();
      }

      const double heading = initial_heading_fallback(history);
      double speed = last.speed() * scale;
      const double distance = (goal - start).norm();
      if (speed <= kEpsilonSpeed) {
        // Stationary agent with a goal: ramp so it arrives at the horizon end.
        speed = distance / (horizon * context.dt);
      }

      Trajectory anchors = path_anchors(start, heading, goal, speed, horizon, context.dt);
      fill_velocities_from_positions(anchors);
      // The anchors lead to the returned goal: when the jittered intent is
      // not reachable within the horizon, the goal is the path endpoint,
      // so the terminal factor never drags the trajectory past its speed.
      out.goals.push_back(anchors.back().position());
      out.anchors.push_back(std::move(anchors));
    }
    return out;
  }

 private:
  // Anchors along the straight segment or the unique circular arc that
  // leaves `start` tangent to `heading` and passes through `goal`, traversed
  // at constant speed and clamped at the goal.
  static Trajectory path_anchors(const Vec2& start, double heading, const Vec2& goal,
                                 double speed, int horizon, double dt) {
    Trajectory anchors;
    anchors.dt = dt;
    anchors.states.reserve(static_cast<std::size_t>(horizon));

    const Vec2 chord = goal - start;
    const double chord_len = chord.norm();
    if (chord_len < 1e-12 || speed <= 0.0) {
      for (int t = 0; t < horizon; ++t) {
        anchors.states.push_back({start.x(), start.y(), 0.0, 0.0});
      }
      return anchors;
    }

    const Vec2 normal(-std::sin(heading), std::cos(heading));  // left of heading
    const double lateral = chord.dot(normal);

    if (std::abs(lateral) < 1e-9 * chord_len) {
      const Vec2 dir = chord / chord_len;
      for (int t = 1; t <= horizon; ++t) {
        const double s = std::min(speed * dt * t, chord_len);
        const Vec2 p = start + dir * s;
        anchors.states.push_back({p.x(), p.y(), 0.0, 0.0});
      }
      return anchors;
    }

    // Signed radius: positive when the center lies to the left.
    const double radius = chord_len * chord_len / (2.0 * lateral);
    const Vec2 center = start + radius * normal;
    const double abs_radius = std::abs(radius);
    const double phi0 = std::atan2(start.y() - center.y(), start.x() - center.x());
    const double phi1 = std::atan2(goal.y() - center.y(), goal.x() - center.x());
    // Left turn runs counterclockwise around the center, right turn clockwise.
    const double direction = radius > 0.0 ? 1.0 : -1.0;
    double sweep = direction * (phi1 - phi0);
    sweep = std::fmod(sweep, 2.0 * std::numbers::pi);
    if (sweep < 0.0) sweep += 2.0 * std::numbers::pi;
    const double arc_len = abs_radius * sweep;

    for (int t = 1; t <= horizon; ++t) {
      const double s = std::min(speed * dt * t, arc_len);
      const double phi = phi0 + direction * s / abs_radius;
      const Vec2 p = center + abs_radius * Vec2(std::cos(phi), std::sin(phi));
      anchors.states.push_back({p.x(), p.y(), 0.0, 0.0});
    }
    return anchors;
  }

  ProposerConfig config_;
};

class ReplayProposer final : public Proposer {
 public:
  explicit ReplayProposer(std::vector<Proposal> items) : items_(std::move(items)) {}

  Proposal propose(const SceneContext& context,
                   const std::vector<std::vector<AgentState>>& histories, int horizon,
                   const ProposalRequest& request) const override {
    check_inputs(context, histories, horizon);
    if (request.rollout_index < 0 ||
        request.rollout_index >= static_cast<int>(items_.size())) {
      throw InputError("replay proposals exhausted: requested entry " +
                       std::to_string(request.rollout_index) + " of " +
                       std::to_string(items_.size()));
    }
    Proposal out = items_[static_cast<std::size_t>(request.rollout_index)];
    if (static_cast<int>(out.anchors.size()) != context.num_agents()) {
      throw InputError("replay proposal has " + std::to_string(out.anchors.size()) +
                       " agents, scene has " + std::to_string(context.num_agents()));
    }
    for (auto& anchors : out.anchors) {
      if (anchors.size() < horizon) {
        throw InputError("replay proposal horizon " + std::to_string(anchors.size()) +
                         " is shorter than requested " + std::to_string(horizon));
      }
      anchors.states.resize(static_cast<std::size_t>(horizon));
      anchors.dt = context.dt;
    }
    return out;
  }

 private:
  std::vector<Proposal> items_;
};

}  // namespace

const char* to_string(ProposerKind k) {
  switch (k) {
    case ProposerKind::kConstantVelocity: return "constant_velocity";
    case ProposerKind::kGoalDirected: return "goal_directed";
    case ProposerKind::kReplay: return "replay";
  }
  return "unknown";
}

ProposerKind proposer_kind_from_string(const std::string& name) {
  if (name == "constant_velocity") return ProposerKind::kConstantVelocity;
  if (name == "goal_directed") return ProposerKind::kGoalDirected;
  if (name == "replay") return ProposerKind::kReplay;
  throw InputError("unknown proposer kind: " + name);
}

void ProposerConfig::validate() const {
  if (!(position_noise_sigma >= 0.0) || !std::isfinite(position_noise_sigma)) {
    throw std::invalid_argument("position_noise_sigma must be finite and >= 0");
  }
  if (!(goal_jitter_sigma >= 0.0) || !std::isfinite(goal_jitter_sigma)) {
    throw std::invalid_argument("goal_jitter_sigma must be finite and >= 0");
  }
  if (!(speed_scale_range.first > 0.0) ||
      !(speed_scale_range.second >= speed_scale_range.first)) {
    throw std::invalid_argument("speed_scale_range requires 0 < min <= max");
  }
  if (kind == ProposerKind::kReplay && !replay_path.has_value()) {
    throw std::invalid_argument("replay proposer requires replay_path");
  }
}

void fill_velocities_from_positions(Trajectory& traj) {
  const int f = traj.size();
  if (f < 2) {
    throw std::invalid_argument("velocity fill requires >= 2 states");
  }
  for (int t = 0; t + 1 < f; ++t) {
    traj[t].vx = (traj[t + 1].x - traj[t].x) / traj.dt;
    traj[t].vy = (traj[t + 1].y - traj[t].y) / traj.dt;
  }
  traj[f - 1].vx = traj[f - 2].vx;
  traj[f - 1].vy = traj[f - 2].vy;
}

std::unique_ptr<Proposer> make_replay_proposer(std::vector<Proposal> items) {
  return std::make_unique<ReplayProposer>(std::move(items));
}

std::unique_ptr<Proposer> make_proposer(const ProposerConfig& config) {
  config.validate();
  switch (config.kind) {
    case ProposerKind::kConstantVelocity:
      return std::make_unique<ConstantVelocityProposer>(config);
    case ProposerKind::kGoalDirected:
      return std::make_unique<GoalDirectedProposer>(config);
    case ProposerKind::kReplay:
      return make_replay_proposer(load_proposals(*config.replay_path));
  }
  throw std::invalid_argument("unknown proposer kind");
}

}  // namespace mpsim
