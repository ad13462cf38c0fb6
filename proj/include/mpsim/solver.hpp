#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "mpsim/factors.hpp"

namespace mpsim {

/// Damping and stopping configuration of the Gauss-Newton smoother.
struct SolverParams {
  int max_iterations{25};
  double cost_tolerance{1e-8};   // relative energy decrease per accepted step
  double step_tolerance{1e-10};  // update-norm threshold
  double initial_damping{1e-4};
  double damping_increase{10.0};
  double damping_decrease{0.5};
  double max_damping{1e12};
  // Absolute Tikhonov floor added to the damped diagonal; keeps the normal
  // equations positive definite when some variables carry zero weight.
  double diagonal_epsilon{1e-12};

  void validate() const;
};

enum class Termination { kCostTolerance, kStepTolerance, kMaxIterations };

const char* to_string(Termination t);

struct SolveReport {
  double initial_energy{0.0};
  double final_energy{0.0};
  int iterations{0};
  bool converged{false};
  Termination termination{Termination::kMaxIterations};
  /// True iff the accepted-iteration energy sequence never increased.
  bool energy_monotone{true};
};

/// One 2-row residual block touching state t0 and, for binary factors,
/// t1 = t0 + 1. Residuals and Jacobians carry the sqrt-weight scaling, so
/// |stacked residual|^2 equals the smoothing energy.
struct ResidualBlock {
  int row{0};
  int t0{0};
  int t1{-1};  // -1 for unary blocks
  Eigen::Vector2d r{Eigen::Vector2d::Zero()};
  Eigen::Matrix<double, 2, 4> j0{Eigen::Matrix<double, 2, 4>::Zero()};
  Eigen::Matrix<double, 2, 4> j1{Eigen::Matrix<double, 2, 4>::Zero()};
};

/// Linearization of the per-agent smoothing problem at one trajectory.
/// The Jacobian of the stacked residual is block-tridiagonal in the
/// 4F-dimensional state vector [x, y, vx, vy] per step.
struct AssembledSystem {
  int num_steps{0};  // F
  std::vector<ResidualBlock> blocks;

  int residual_dim() const;
  int variable_dim() const { return 4 * num_steps; }
  Eigen::VectorXd stacked_residual() const;
  /// Dense Jacobian; intended for small F (tests, oracles).
  Eigen::MatrixXd dense_jacobian() const;
};

/// Builds residuals and Jacobians of the motion/goal/linear/angular factors
/// at the given trajectory. Throws std::invalid_argument on length mismatch
/// or F < 2.
AssembledSystem assemble_system(const Trajectory& traj, const Trajectory& anchors,
                                const Vec2& goal, const FactorWeights& weights, double dt);

/// Minimizes the smoothing energy over one agent's trajectory by damped
/// Gauss-Newton: solve (J'J + lambda diag(J'J) + eps I) d = -J'r, accept on
/// energy decrease, shrink/grow lambda. Deterministic; final energy never
/// exceeds the initial energy. Throws InputError when the initial energy is
/// not finite.
std::pair<Trajectory, SolveReport> smooth_trajectory(const Trajectory& init,
                                                     const Trajectory& anchors, const Vec2& goal,
                                                     const FactorWeights& weights, double dt,
                                                     const SolverParams& params);

}  // namespace mpsim
