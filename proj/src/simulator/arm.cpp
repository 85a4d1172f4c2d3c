#include <algorithm>
#include <cmath>
#include <numbers>

#include "h2r/error.hpp"
#include "h2r/simulator.hpp"

namespace h2r {

std::int64_t tick_time_ns(std::int64_t k) {
  // Exact rational k * 1e9 / 30 rounded to the nearest ns.
  return (k * 1'000'000'000 + 15) / 30;
}

bool Box::contains(Vec3 p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

Vec3 Box::clamp(Vec3 p) const {
  return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
          std::clamp(p.z, min.z, max.z)};
}

void SimArmConfig::validate() const {
  const bool box_ok = workspace.min.x < workspace.max.x && workspace.min.y < workspace.max.y &&
                      workspace.min.z < workspace.max.z;
  if (!(v_max > 0.0) || !(w_max > 0.0) || !(exec_latency > 0.0) || !(tick_rate > 0.0) || !box_ok) {
    throw Error(ErrorCode::BadConfig, "simulated arm limits must be positive");
  }
}

// Rows: pseudo-joints q1..q7. Columns: x, y, z, roll, pitch, yaw, gripper.
// Chosen to couple translation and orientation the way a redundant arm's
// joints do; the matrix is invertible so the joint trace preserves the pose.
const std::array<std::array<double, kPseudoJointCount>, kPseudoJointCount> kPseudoJointMap{{
    {0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0},
    {2.0, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0},
    {0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0},
    {1.5, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 0.0, 0.0, 0.5, 0.0, 1.0, 0.0},
    {0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0},
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 1.0},
}};

namespace {

double unwrap_near(double angle, double reference) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return angle + two_pi * std::round((reference - angle) / two_pi);
}

JointVector pseudo_joints(Vec3 position, Vec3 rpy, double gripper) {
  const std::array<double, kPseudoJointCount> task{position.x, position.y, position.z, rpy.x,
                                                   rpy.y,      rpy.z,      gripper};
  JointVector q{};
  for (std::size_t r = 0; r < kPseudoJointCount; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < kPseudoJointCount; ++c) s += kPseudoJointMap[r][c] * task[c];
    q[r] = s;
  }
  return q;
}

}  // namespace

SimArmState make_arm_state(const Pose& pose, double gripper) {
  SimArmState s;
  s.pose = pose;
  s.gripper = gripper;
  s.rpy_unwrapped = pose.rotation.to_rpy();
  s.pseudo_joints = pseudo_joints(pose.position, s.rpy_unwrapped, gripper);
  return s;
}

SimArmState arm_tick(const SimArmState& state, const RobotCommand& target, const SimArmConfig& cfg,
                     double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::BadConfig, "arm tick requires dt > 0");
  SimArmState next = state;

  const Vec3 delta = target.position - state.pose.position;
  const double gap = norm(delta);
  const double max_step = cfg.v_max * dt;
  next.pose.position =
      gap <= max_step ? target.position : state.pose.position + (max_step / gap) * delta;
  next.pose.position = cfg.workspace.clamp(next.pose.position);

  const Rot3 rel = state.pose.rotation.inverse() * target.rotation;
  const double angle = rotation_angle(rel);
  const double max_turn = cfg.w_max * dt;
  if (angle <= max_turn) {
    next.pose.rotation = target.rotation;
  } else {
    next.pose.rotation = orthonormalize(
        (state.pose.rotation * Rot3::exp((max_turn / angle) * rel.log())).matrix());
  }

  next.gripper = target.gripper.closed ? 0.0 : 1.0;

  if (next.pose.rotation == state.pose.rotation) {
    next.rpy_unwrapped = state.rpy_unwrapped;
  } else {
    const Vec3 rpy = next.pose.rotation.to_rpy();
    next.rpy_unwrapped = {unwrap_near(rpy.x, state.rpy_unwrapped.x),
                          unwrap_near(rpy.y, state.rpy_unwrapped.y),
                          unwrap_near(rpy.z, state.rpy_unwrapped.z)};
  }
  next.pseudo_joints = pseudo_joints(next.pose.position, next.rpy_unwrapped, next.gripper);
  for (std::size_t i = 0; i < kPseudoJointCount; ++i) {
    next.pseudo_joint_vel[i] = (next.pseudo_joints[i] - state.pseudo_joints[i]) / dt;
  }
  return next;
}

}  // namespace h2r
