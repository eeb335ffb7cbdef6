#include "sacr2/env.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace sacr2 {

std::string format_double(Scalar v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

Scalar EnvConfig::arm_reach() const {
  return std::accumulate(link_lengths.begin(), link_lengths.end(), Scalar(0));
}

void EnvConfig::validate() const {
  if (num_joints < 1) throw ContractViolation("EnvConfig: num_joints must be >= 1");
  if (int(link_lengths.size()) != num_joints)
    throw ContractViolation("EnvConfig: link_lengths size must equal num_joints");
  for (Scalar l : link_lengths)
    if (!(l > 0)) throw ContractViolation("EnvConfig: link lengths must be positive");
  if (!(reach_threshold > 0)) throw ContractViolation("EnvConfig: reach_threshold must be > 0");
  if (max_steps < 1) throw ContractViolation("EnvConfig: max_steps must be >= 1");
  if (!(action_scale > 0)) throw ContractViolation("EnvConfig: action_scale must be > 0");
  if (!(target_r_min >= 0) || !(target_r_max >= target_r_min))
    throw ContractViolation("EnvConfig: target annulus radii must satisfy 0 <= r_min <= r_max");
  if (target_r_max > arm_reach())
    throw ContractViolation("EnvConfig: target_r_max exceeds arm reach");
}

std::string EnvConfig::hash() const {
  std::ostringstream canon;
  canon << "nj=" << num_joints << ";L=";
  for (size_t i = 0; i < link_lengths.size(); ++i) {
    if (i) canon << ",";
    canon << format_double(link_lengths[i]);
  }
  canon << ";as=" << format_double(action_scale)
        << ";rt=" << format_double(reach_threshold)
        << ";ms=" << max_steps
        << ";R=" << format_double(sparse_reward)
        << ";tr=" << format_double(target_r_min) << "," << format_double(target_r_max);
  // FNV-1a 64
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canon.str()) {
    h ^= std::uint64_t(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vector2 forward_kinematics(const VectorRef& joint_angles,
                           const std::vector<Scalar>& link_lengths) {
  Scalar cum = 0, x = 0, y = 0;
  for (int i = 0; i < joint_angles.size(); ++i) {
    cum += joint_angles[i];
    x += link_lengths[size_t(i)] * std::cos(cum);
    y += link_lengths[size_t(i)] * std::sin(cum);
  }
  return {x, y};
}

Matrix arm_jacobian(const VectorRef& joint_angles,
                    const std::vector<Scalar>& link_lengths) {
  const int n = int(joint_angles.size());
  Vector cum(n);
  Scalar acc = 0;
  for (int i = 0; i < n; ++i) {
    acc += joint_angles[i];
    cum[i] = acc;
  }
  // dee/dq_j = sum_{i >= j} l_i * (-sin(cum_i), cos(cum_i))
  Matrix jac = Matrix::Zero(2, n);
  Scalar sx = 0, sy = 0;
  for (int j = n - 1; j >= 0; --j) {
    sx += -link_lengths[size_t(j)] * std::sin(cum[j]);
    sy += link_lengths[size_t(j)] * std::cos(cum[j]);
    jac(0, j) = sx;
    jac(1, j) = sy;
  }
  return jac;
}

ReacherState reset(const EnvConfig& config, Rng& rng) {
  config.validate();
  ReacherState s;
  s.joint_angles = Vector::Zero(config.num_joints);
  if (config.num_joints >= 2) s.joint_angles[1] = 0.3;  // avoid the stretched singularity
  s.joint_velocities = Vector::Zero(config.num_joints);
  s.ee_position = forward_kinematics(s.joint_angles, config.link_lengths);
  const Scalar r_min2 = config.target_r_min * config.target_r_min;
  const Scalar r_max2 = config.target_r_max * config.target_r_max;
  const Scalar radius = std::sqrt(r_min2 + rng.uniform() * (r_max2 - r_min2));
  const Scalar angle = Scalar(2.0) * std::numbers::pi_v<Scalar> * rng.uniform();
  s.target_position = {radius * std::cos(angle), radius * std::sin(angle)};
  return s;
}

ReacherState reset_to(const EnvConfig& config, const VectorRef& joint_angles,
                      const VectorRef& joint_velocities, const Vector2& target) {
  config.validate();
  if (joint_angles.size() != config.num_joints || joint_velocities.size() != config.num_joints)
    throw ContractViolation("reset_to: joint vector size mismatch");
  ReacherState s;
  s.joint_angles = joint_angles;
  s.joint_velocities = joint_velocities;
  s.ee_position = forward_kinematics(s.joint_angles, config.link_lengths);
  s.target_position = target;
  return s;
}

StepResult step(const ReacherState& state, const VectorRef& action,
                const EnvConfig& config) {
  if (state.terminal)
    throw ContractViolation("step: environment episode already terminal");
  if (action.size() != config.num_joints)
    throw ContractViolation("step: action dimension mismatch");

  StepResult out;
  out.state = state;
  const Vector clamped = action.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
  out.state.joint_velocities = config.action_scale * clamped;
  out.state.joint_angles += out.state.joint_velocities;
  out.state.ee_position = forward_kinematics(out.state.joint_angles, config.link_lengths);
  out.state.step_count = state.step_count + 1;

  out.success = (out.state.ee_position - out.state.target_position).norm() <
                config.reach_threshold;
  out.reward = out.success ? config.sparse_reward : Scalar(0);
  out.done = out.success || out.state.step_count >= config.max_steps;
  out.state.terminal = out.done;
  return out;
}

Vector observe(const ReacherState& state) {
  const int n = int(state.joint_angles.size());
  Vector obs(3 * n + 4);
  for (int i = 0; i < n; ++i) {
    obs[2 * i] = std::sin(state.joint_angles[i]);
    obs[2 * i + 1] = std::cos(state.joint_angles[i]);
  }
  obs.segment(2 * n, n) = state.joint_velocities;
  obs.segment(3 * n, 2) = state.ee_position;
  obs.segment(3 * n + 2, 2) = state.target_position;
  return obs;
}

int observation_dim(const EnvConfig& config) { return 3 * config.num_joints + 4; }

ReacherState state_from_observation(const EnvConfig& config,
                                    const VectorRef& observation) {
  const int n = config.num_joints;
  if (observation.size() != observation_dim(config))
    throw ContractViolation("state_from_observation: dimension mismatch");
  Vector angles(n), velocities(n);
  for (int i = 0; i < n; ++i)
    angles[i] = std::atan2(observation[2 * i], observation[2 * i + 1]);
  velocities = observation.segment(2 * n, n);
  Vector2 target{observation[3 * n + 2], observation[3 * n + 3]};
  return reset_to(config, angles, velocities, target);
}

}  // namespace sacr2
