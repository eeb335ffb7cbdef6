#pragma once

#include <string>
#include <vector>

#include "sacr2/types.hpp"

namespace sacr2 {

/// Planar kinematic reacher: an n-joint arm anchored at the origin must bring
/// its end effector within `reach_threshold` of a target sampled in an
/// annulus. Velocity-command dynamics (angles += action_scale * action), no
/// physics, fully sparse reward.
struct EnvConfig {
  int num_joints = 4;
  std::vector<Scalar> link_lengths = {0.25, 0.25, 0.25, 0.25};
  Scalar action_scale = 0.05;      // max joint delta per step, radians
  Scalar reach_threshold = 0.05;
  int max_steps = 100;
  Scalar sparse_reward = 100.0;    // R
  Scalar target_r_min = 0.3;
  Scalar target_r_max = 0.95;

  Scalar arm_reach() const;
  void validate() const;
  /// Stable identifier of the kinematics/reward parameters; demo files record
  /// it so demos cannot silently be replayed against a different environment.
  std::string hash() const;
};

struct ReacherState {
  Vector joint_angles;
  Vector joint_velocities;  // last applied joint deltas, radians/step
  Vector2 ee_position;
  Vector2 target_position;
  int step_count = 0;
  bool terminal = false;
};

struct StepResult {
  ReacherState state;
  Scalar reward = 0.0;
  bool done = false;
  bool success = false;
};

/// Position of the end effector for a chain of links: sum of per-link offsets
/// at cumulative joint angles.
Vector2 forward_kinematics(const VectorRef& joint_angles,
                           const std::vector<Scalar>& link_lengths);

/// 2 x n Jacobian of the end-effector position w.r.t. joint angles.
Matrix arm_jacobian(const VectorRef& joint_angles,
                    const std::vector<Scalar>& link_lengths);

/// Fixed home pose (all zeros, joint 2 bent at 0.3 rad), target sampled
/// uniformly by area in the configured annulus. Draw order: radius, angle.
ReacherState reset(const EnvConfig& config, Rng& rng);

/// Reset to an explicit arm configuration and target (used when an episode is
/// restarted from a demonstration state).
ReacherState reset_to(const EnvConfig& config, const VectorRef& joint_angles,
                      const VectorRef& joint_velocities, const Vector2& target);

/// Applies one clamped velocity command. Throws ContractViolation when called
/// on a terminal state.
StepResult step(const ReacherState& state, const VectorRef& action,
                const EnvConfig& config);

/// Observation layout: [sin q_i, cos q_i] per joint, joint velocities,
/// ee position, target position. Dimension 3 * num_joints + 4.
Vector observe(const ReacherState& state);

int observation_dim(const EnvConfig& config);

/// Inverse of the angle encoding used by observe(); recovers wrapped joint
/// angles, velocities and the target from an observation vector.
ReacherState state_from_observation(const EnvConfig& config,
                                    const VectorRef& observation);

}  // namespace sacr2
