#include "mpsim/solver.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>

#include "mpsim/error.hpp"

namespace mpsim {

namespace {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;
using Mat24 = Eigen::Matrix<double, 2, 4>;

// Normal equations of the chain problem: diagonal 4x4 blocks plus one
// sub-diagonal band of 4x4 blocks (block (t+1, t)).
struct BlockTridiagonal {
  std::vector<Mat4> diag;  // F blocks
  std::vector<Mat4> sub;   // F-1 blocks
  Eigen::VectorXd rhs;     // 4F, holds -J'r
};

BlockTridiagonal build_normal_equations(const AssembledSystem& sys) {
  const std::size_t f = static_cast<std::size_t>(sys.num_steps);
  BlockTridiagonal eq;
  eq.diag.assign(f, Mat4::Zero());
  eq.sub.assign(f - 1, Mat4::Zero());
  eq.rhs = Eigen::VectorXd::Zero(4 * sys.num_steps);
  for (const auto& b : sys.blocks) {
    const std::size_t t0 = static_cast<std::size_t>(b.t0);
    eq.diag[t0] += b.j0.transpose() * b.j0;
    eq.rhs.segment<4>(4 * b.t0) -= b.j0.transpose() * b.r;
    if (b.t1 >= 0) {
      const std::size_t t1 = static_cast<std::size_t>(b.t1);
      eq.diag[t1] += b.j1.transpose() * b.j1;
      eq.sub[t0] += b.j1.transpose() * b.j0;  // block (t1, t0)
      eq.rhs.segment<4>(4 * b.t1) -= b.j1.transpose() * b.r;
    }
  }
  return eq;
}

// Block Thomas elimination with per-block Cholesky. Returns false when a
// pivot block is not positive definite (caller raises damping).
bool solve_block_tridiagonal(const BlockTridiagonal& eq, double lambda, double epsilon,
                             Eigen::VectorXd& delta) {
  const std::size_t f = eq.diag.size();
  std::vector<Eigen::LLT<Mat4>> pivots(f);
  std::vector<Mat4> reduced(f);
  Eigen::VectorXd y = eq.rhs;

  auto damped = [&](std::size_t t) {
    Mat4 d = eq.diag[t];
    d.diagonal() += lambda * eq.diag[t].diagonal();
    d.diagonal().array() += epsilon;
    return d;
  };

  reduced[0] = damped(0);
  pivots[0].compute(reduced[0]);
  if (pivots[0].info() != Eigen::Success) return false;
  for (std::size_t t = 1; t < f; ++t) {
    // W = sub[t-1] * C_{t-1}^{-1}; C is symmetric so solve on the transpose.
    const Mat4 w = pivots[t - 1].solve(eq.sub[t - 1].transpose()).transpose();
    reduced[t] = damped(t) - w * eq.sub[t - 1].transpose();
    y.segment<4>(static_cast<Eigen::Index>(4 * t)) -=
        w * y.segment<4>(static_cast<Eigen::Index>(4 * (t - 1)));
    pivots[t].compute(reduced[t]);
    if (pivots[t].info() != Eigen::Success) return false;
  }

  delta.resize(static_cast<Eigen::Index>(4 * f));
  delta.segment<4>(static_cast<Eigen::Index>(4 * (f - 1))) =
      pivots[f - 1].solve(y.segment<4>(static_cast<Eigen::Index>(4 * (f - 1))));
  for (std::size_t t = f - 1; t-- > 0;) {
    const Vec4 rhs_t = y.segment<4>(static_cast<Eigen::Index>(4 * t)) -
                       eq.sub[t].transpose() * delta.segment<4>(static_cast<Eigen::Index>(4 * (t + 1)));
    delta.segment<4>(static_cast<Eigen::Index>(4 * t)) = pivots[t].solve(rhs_t);
  }
  return delta.allFinite();
}

Trajectory apply_step(const Trajectory& traj, const Eigen::VectorXd& delta) {
  Trajectory out = traj;
  for (int t = 0; t < traj.size(); ++t) {
    out[t].x += delta(4 * t + 0);
    out[t].y += delta(4 * t + 1);
    out[t].vx += delta(4 * t + 2);
    out[t].vy += delta(4 * t + 3);
  }
  return out;
}

}  // namespace

void SolverParams::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(cost_tolerance > 0.0)) throw std::invalid_argument("cost_tolerance must be > 0");
  if (!(step_tolerance > 0.0)) throw std::invalid_argument("step_tolerance must be > 0");
  if (!(initial_damping >= 0.0)) throw std::invalid_argument("initial_damping must be >= 0");
  if (!(damping_increase > 1.0)) throw std::invalid_argument("damping_increase must be > 1");
  if (!(damping_decrease > 0.0 && damping_decrease < 1.0)) {
    throw std::invalid_argument("damping_decrease must be in (0, 1)");
  }
  if (!(max_damping > 0.0)) throw std::invalid_argument("max_damping must be > 0");
  if (!(diagonal_epsilon >= 0.0)) throw std::invalid_argument("diagonal_epsilon must be >= 0");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kCostTolerance: return "cost_tol";
    case Termination::kStepTolerance: return "step_tol";
    case Termination::kMaxIterations: return "max_iter";
  }
  return "unknown";
}

int AssembledSystem::residual_dim() const { return 2 * static_cast<int>(blocks.size()); }

Eigen::VectorXd AssembledSystem::stacked_residual() const {
  Eigen::VectorXd r(residual_dim());
  for (const auto& b : blocks) r.segment<2>(b.row) = b.r;
  return r;
}

Eigen::MatrixXd AssembledSystem::dense_jacobian() const {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(residual_dim(), variable_dim());
  for (const auto& b : blocks) {
    j.block<2, 4>(b.row, 4 * b.t0) = b.j0;
    if (b.t1 >= 0) j.block<2, 4>(b.row, 4 * b.t1) = b.j1;
  }
  return j;
}

AssembledSystem assemble_system(const Trajectory& traj, const Trajectory& anchors,
                                const Vec2& goal, const FactorWeights& weights, double dt) {
  const int f = traj.size();
  if (f != anchors.size()) {
    throw std::invalid_argument("trajectory length " + std::to_string(f) +
                                " does not match anchors length " +
                                std::to_string(anchors.size()));
  }
  if (f < 2) {
    throw std::invalid_argument("assembly requires at least 2 states, got " + std::to_string(f));
  }
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");

  const double sm = std::sqrt(weights.w_motion);
  const double sg = std::sqrt(weights.w_goal);
  const double sl = std::sqrt(weights.w_linear);
  const double sa = std::sqrt(weights.w_angular);

  AssembledSystem sys;
  sys.num_steps = f;
  sys.blocks.reserve(static_cast<std::size_t>(3 * f - 2));
  int row = 0;

  // Motion: position pulled to the anchor, all steps but the last.
  for (int t = 0; t + 1 < f; ++t) {
    ResidualBlock b;
    b.row = row;
    b.t0 = t;
    b.r = sm * residual_motion(traj[t], anchors[t]);
    b.j0(0, 0) = sm;
    b.j0(1, 1) = sm;
    sys.blocks.push_back(b);
    row += 2;
  }
  // Goal: final position pulled to the goal point.
  {
    ResidualBlock b;
    b.row = row;
    b.t0 = f - 1;
    b.r = sg * residual_goal(traj[f - 1], goal);
    b.j0(0, 0) = sg;
    b.j0(1, 1) = sg;
    sys.blocks.push_back(b);
    row += 2;
  }
  // Linear and angular: consecutive-state coupling.
  for (int t = 0; t + 1 < f; ++t) {
    {
      ResidualBlock b;
      b.row = row;
      b.t0 = t;
      b.t1 = t + 1;
      b.r = sl * residual_linear(traj[t], traj[t + 1], dt);
      b.j0(0, 0) = -sl;
      b.j0(1, 1) = -sl;
      b.j0(0, 2) = -sl * dt;
      b.j0(1, 3) = -sl * dt;
      b.j1(0, 0) = sl;
      b.j1(1, 1) = sl;
      sys.blocks.push_back(b);
      row += 2;
    }
    {
      ResidualBlock b;
      b.row = row;
      b.t0 = t;
      b.t1 = t + 1;
      b.r = sa * residual_angular(traj[t], traj[t + 1]);
      b.j0(0, 2) = sa;
      b.j0(1, 3) = sa;
      b.j1(0, 2) = -sa;
      b.j1(1, 3) = -sa;
      sys.blocks.push_back(b);
      row += 2;
    }
  }
  return sys;
}

std::pair<Trajectory, SolveReport> smooth_trajectory(const Trajectory& init,
                                                     const Trajectory& anchors, const Vec2& goal,
                                                     const FactorWeights& weights, double dt,
                                                     const SolverParams& params) {
  params.validate();
  Trajectory x = init;
  double energy = smoothing_energy(x, anchors, goal, weights, dt);
  if (!std::isfinite(energy)) {
    throw InputError("initial smoothing energy is not finite");
  }

  SolveReport report;
  report.initial_energy = energy;
  report.final_energy = energy;

  double lambda = params.initial_damping;
  Eigen::VectorXd delta;

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    report.iterations = iter;
    const AssembledSystem sys = assemble_system(x, anchors, goal, weights, dt);
    const BlockTridiagonal eq = build_normal_equations(sys);

    bool solved = solve_block_tridiagonal(eq, lambda, params.diagonal_epsilon, delta);
    while (!solved) {
      lambda = std::max(lambda, 1e-12) * params.damping_increase;
      if (lambda > params.max_damping) {
        report.converged = false;
        report.termination = Termination::kMaxIterations;
        return {x, report};
      }
      solved = solve_block_tridiagonal(eq, lambda, params.diagonal_epsilon, delta);
    }

    if (delta.norm() <= params.step_tolerance) {
      // Already at the (numerical) optimum; leave the iterate untouched.
      report.converged = true;
      report.termination = Termination::kStepTolerance;
      return {x, report};
    }

    const Trajectory candidate = apply_step(x, delta);
    const double candidate_energy = smoothing_energy(candidate, anchors, goal, weights, dt);

    if (std::isfinite(candidate_energy) && candidate_energy < energy) {
      const double decrease = energy - candidate_energy;
      x = candidate;
      energy = candidate_energy;
      report.final_energy = energy;
      lambda *= params.damping_decrease;
      if (decrease <= params.cost_tolerance * std::max(energy + decrease, 1e-300)) {
        report.converged = true;
        report.termination = Termination::kCostTolerance;
        return {x, report};
      }
    } else {
      lambda = std::max(lambda, 1e-12) * params.damping_increase;
      if (lambda > params.max_damping) {
        report.converged = false;
        report.termination = Termination::kMaxIterations;
        return {x, report};
      }
    }
  }

  report.converged = false;
  report.termination = Termination::kMaxIterations;
  return {x, report};
}

}  // namespace mpsim
