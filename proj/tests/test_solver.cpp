#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cstring>
#include <limits>
#include <vector>

#include "mpsim/error.hpp"
#include "mpsim/rng.hpp"
#include "mpsim/solver.hpp"

using namespace mpsim;

namespace {

Trajectory random_trajectory(Rng& rng, int f, double dt) {
  Trajectory traj;
  traj.dt = dt;
  for (int t = 0; t < f; ++t) {
    traj.states.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-5, 5),
                           rng.uniform(-5, 5)});
  }
  return traj;
}

Trajectory from_vector(const Eigen::VectorXd& x, double dt) {
  Trajectory traj;
  traj.dt = dt;
  for (int t = 0; 4 * t < x.size(); ++t) {
    traj.states.push_back({x(4 * t), x(4 * t + 1), x(4 * t + 2), x(4 * t + 3)});
  }
  return traj;
}

Eigen::VectorXd to_vector(const Trajectory& traj) {
  Eigen::VectorXd x(4 * traj.size());
  for (int t = 0; t < traj.size(); ++t) {
    x(4 * t) = traj[t].x;
    x(4 * t + 1) = traj[t].y;
    x(4 * t + 2) = traj[t].vx;
    x(4 * t + 3) = traj[t].vy;
  }
  return x;
}

// Central-difference Jacobian of the stacked residual.
Eigen::MatrixXd fd_jacobian(const Trajectory& at, const Trajectory& anchors, const Vec2& goal,
                            const FactorWeights& weights, double dt, double step = 1e-6) {
  const Eigen::VectorXd x0 = to_vector(at);
  const int rows = assemble_system(at, anchors, goal, weights, dt).residual_dim();
  Eigen::MatrixXd jac(rows, x0.size());
  for (int col = 0; col < x0.size(); ++col) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(col) += step;
    xm(col) -= step;
    const Eigen::VectorXd rp =
        assemble_system(from_vector(xp, dt), anchors, goal, weights, dt).stacked_residual();
    const Eigen::VectorXd rm =
        assemble_system(from_vector(xm, dt), anchors, goal, weights, dt).stacked_residual();
    jac.col(col) = (rp - rm) / (2 * step);
  }
  return jac;
}

// Global optimum of the linear least-squares problem r(x) = r0 + J (x - x0).
double dense_optimal_energy(const Trajectory& init, const Trajectory& anchors, const Vec2& goal,
                            const FactorWeights& weights, double dt) {
  const AssembledSystem sys = assemble_system(init, anchors, goal, weights, dt);
  const Eigen::VectorXd r0 = sys.stacked_residual();
  const Eigen::MatrixXd jac = sys.dense_jacobian();
  const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(-r0);
  return (r0 + jac * delta).squaredNorm();
}

FactorWeights random_weights(Rng& rng) {
  FactorWeights w;
  w.w_motion = rng.uniform(0.1, 5.0);
  w.w_goal = rng.uniform(0.1, 5.0);
  w.w_linear = rng.uniform(0.1, 5.0);
  w.w_angular = rng.uniform(0.1, 5.0);
  return w;
}

bool bitwise_equal(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.states.data(), b.states.data(),
                     a.states.size() * sizeof(AgentState)) == 0;
}

Trajectory straight_line(const Vec2& start, const Vec2& vel, int f, double dt) {
  Trajectory traj;
  traj.dt = dt;
  for (int t = 1; t <= f; ++t) {
    traj.states.push_back(
        {start.x() + vel.x() * t * dt, start.y() + vel.y() * t * dt, vel.x(), vel.y()});
  }
  return traj;
}

}  // namespace

TEST_CASE("assembled dimensions at F = 2") {
  const double dt = 0.1;
  Rng rng(1);
  const Trajectory traj = random_trajectory(rng, 2, dt);
  const Trajectory anchors = random_trajectory(rng, 2, dt);
  const AssembledSystem sys = assemble_system(traj, anchors, {0, 0}, FactorWeights{}, dt);
  // motion(1) + goal(1) + linear(1) + angular(1) blocks of 2 rows each.
  CHECK(sys.residual_dim() == 8);
  CHECK(sys.variable_dim() == 8);
}

TEST_CASE("zero residual at a perfect trajectory") {
  const double dt = 0.125;
  const Trajectory traj = straight_line({0, 0}, {2, 1}, 5, dt);
  const AssembledSystem sys =
      assemble_system(traj, traj, traj.back().position(), FactorWeights{}, dt);
  CHECK(sys.stacked_residual().norm() == 0.0);
}

TEST_CASE("stacked residual squared norm equals the smoothing energy") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const double dt = rng.uniform(0.05, 0.2);
    const int f = 2 + rng.uniform_index(8);
    const Trajectory traj = random_trajectory(rng, f, dt);
    const Trajectory anchors = random_trajectory(rng, f, dt);
    const Vec2 goal(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const FactorWeights weights = random_weights(rng);
    const AssembledSystem sys = assemble_system(traj, anchors, goal, weights, dt);
    CHECK(sys.stacked_residual().squaredNorm() ==
          doctest::Approx(smoothing_energy(traj, anchors, goal, weights, dt)).epsilon(1e-12));
  }
}

TEST_CASE("analytic Jacobian matches central differences") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const double dt = 0.1;
    const int f = 4;
    const Trajectory traj = random_trajectory(rng, f, dt);
    const Trajectory anchors = random_trajectory(rng, f, dt);
    const Vec2 goal(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const FactorWeights weights = random_weights(rng);

    const Eigen::MatrixXd analytic =
        assemble_system(traj, anchors, goal, weights, dt).dense_jacobian();
    const Eigen::MatrixXd fd = fd_jacobian(traj, anchors, goal, weights, dt);
    const double denom = std::max(1.0, fd.norm());
    CHECK((analytic - fd).norm() / denom < 1e-5);
  }
}

TEST_CASE("already-optimal init returns unchanged and converged") {
  const double dt = 0.125;
  const Trajectory traj = straight_line({1, -2}, {0.5, 0.25}, 6, dt);
  const auto [smoothed, report] =
      smooth_trajectory(traj, traj, traj.back().position(), FactorWeights{}, dt, SolverParams{});
  CHECK(report.converged);
  CHECK(report.iterations <= 1);
  CHECK(report.final_energy == 0.0);
  CHECK(bitwise_equal(smoothed, traj));
}

TEST_CASE("pure motion problem lands on the anchors in one undamped step") {
  Rng rng(55);
  const double dt = 0.1;
  FactorWeights weights;
  weights.w_goal = 0.0;
  weights.w_linear = 0.0;
  weights.w_angular = 0.0;
  SolverParams params;
  params.initial_damping = 0.0;

  const Trajectory init = random_trajectory(rng, 6, dt);
  const Trajectory anchors = random_trajectory(rng, 6, dt);
  const auto [smoothed, report] =
      smooth_trajectory(init, anchors, anchors.back().position(), weights, dt, params);
  CHECK(report.converged);
  CHECK(report.iterations <= 3);
  for (int t = 0; t + 1 < smoothed.size(); ++t) {
    CHECK(smoothed[t].x == doctest::Approx(anchors[t].x).epsilon(1e-9));
    CHECK(smoothed[t].y == doctest::Approx(anchors[t].y).epsilon(1e-9));
  }
}

TEST_CASE("F = 3 conflicting anchors match the dense oracle") {
  const double dt = 0.1;
  Trajectory init, anchors;
  init.dt = anchors.dt = dt;
  // Anchors that no constant-velocity path can satisfy.
  anchors.states = {{0, 0, 1, 0}, {1, 1, 1, 0}, {0, 2, 1, 0}};
  init.states = anchors.states;
  const Vec2 goal(2, 2);

  const auto [smoothed, report] =
      smooth_trajectory(init, anchors, goal, FactorWeights{}, dt, SolverParams{});
  const double oracle = dense_optimal_energy(init, anchors, goal, FactorWeights{}, dt);
  CHECK(report.final_energy ==
        doctest::Approx(oracle).epsilon(1e-8));
  CHECK(report.final_energy <= report.initial_energy);
  CHECK(report.final_energy > 0.0);
}

TEST_CASE("random instances reach the global optimum of the linear problem") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const double dt = rng.uniform(0.05, 0.2);
    const int f = 2 + rng.uniform_index(9);  // F <= 10
    const Trajectory init = random_trajectory(rng, f, dt);
    const Trajectory anchors = random_trajectory(rng, f, dt);
    const Vec2 goal(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const FactorWeights weights = random_weights(rng);

    const auto [smoothed, report] =
        smooth_trajectory(init, anchors, goal, weights, dt, SolverParams{});
    const double oracle = dense_optimal_energy(init, anchors, goal, weights, dt);
    CHECK(report.final_energy <= report.initial_energy);
    CHECK(std::abs(report.final_energy - oracle) <= 1e-8 * std::max(1.0, oracle));
  }
}

TEST_CASE("deterministic: identical inputs give bit-identical outputs") {
  Rng rng(1234);
  const double dt = 0.1;
  const Trajectory init = random_trajectory(rng, 8, dt);
  const Trajectory anchors = random_trajectory(rng, 8, dt);
  const Vec2 goal(3, 3);

  const auto [a, ra] = smooth_trajectory(init, anchors, goal, FactorWeights{}, dt, SolverParams{});
  const auto [b, rb] = smooth_trajectory(init, anchors, goal, FactorWeights{}, dt, SolverParams{});
  CHECK(bitwise_equal(a, b));
  CHECK(ra.final_energy == rb.final_energy);
  CHECK(ra.iterations == rb.iterations);
}

TEST_CASE("non-finite initial energy is an input error") {
  const double dt = 0.1;
  Trajectory init = straight_line({0, 0}, {1, 0}, 4, dt);
  init[1].x = std::numeric_limits<double>::quiet_NaN();
  const Trajectory anchors = straight_line({0, 0}, {1, 0}, 4, dt);
  CHECK_THROWS_AS(
      smooth_trajectory(init, anchors, {0, 0}, FactorWeights{}, dt, SolverParams{}),
      InputError);
}

TEST_CASE("length mismatch is a contract violation") {
  const double dt = 0.1;
  const Trajectory init = straight_line({0, 0}, {1, 0}, 4, dt);
  const Trajectory anchors = straight_line({0, 0}, {1, 0}, 5, dt);
  CHECK_THROWS_AS(assemble_system(init, anchors, {0, 0}, FactorWeights{}, dt),
                  std::invalid_argument);
}
