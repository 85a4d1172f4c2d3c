#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "h2r/calibration.hpp"
#include "h2r/geometry.hpp"

namespace h2r {

// Coordinates of a hand point in the human calibration basis.
struct Mu {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

enum class TrackedPointStrategy { Wrist, ThumbIndexMidpoint, IndexMcp };

std::string_view to_string(TrackedPointStrategy s);
// Accepts "wrist", "midpoint", "mcp"; throws BadConfig otherwise.
TrackedPointStrategy parse_tracked_point(std::string_view name);

// 21-joint hand layout.
enum class Joint : std::size_t {
  Wrist = 0,
  ThumbCmc, ThumbMcp, ThumbIp, ThumbTip,
  IndexMcp, IndexPip, IndexDip, IndexTip,
  MiddleMcp, MiddlePip, MiddleDip, MiddleTip,
  RingMcp, RingPip, RingDip, RingTip,
  PinkyMcp, PinkyPip, PinkyDip, PinkyTip,
};
inline constexpr std::size_t kJointCount = 21;

// Lost joints are represented by non-finite coordinates.
struct HandKeypoints {
  std::array<Vec3, kJointCount> joints{};

  Vec3 operator[](Joint j) const { return joints[static_cast<std::size_t>(j)]; }
  Vec3& operator[](Joint j) { return joints[static_cast<std::size_t>(j)]; }
  friend bool operator==(const HandKeypoints&, const HandKeypoints&) = default;
};

struct HandSample {
  std::int64_t t_ns = 0;
  HandKeypoints keypoints;
  // Rotation and position of the hand frame (the 4x4 transform).
  Pose transform;
  friend bool operator==(const HandSample&, const HandSample&) = default;
};

struct GripperConfig {
  double d_close = 0.02;     // m
  double d_open = 0.08;      // m
  double hysteresis = 0.01;  // m
  friend bool operator==(const GripperConfig&, const GripperConfig&) = default;
};

struct GripperState {
  double aperture = 1.0;  // 1 = fully open
  bool closed = false;
  friend bool operator==(const GripperState&, const GripperState&) = default;
};

struct RobotCommand {
  Vec3 position;
  Rot3 rotation;
  GripperState gripper;
  friend bool operator==(const RobotCommand&, const RobotCommand&) = default;
};

Mu project_mu(Vec3 p_h, const CalibrationFrame& frame_h);
Vec3 map_position(Vec3 p_h, const SharedMap& map);

// Batch form of map_position; dispatches to the fastest available kernel and
// produces bit-identical results to the scalar loop.
void map_positions(std::span<const Vec3> p_h, const SharedMap& map, std::span<Vec3> p_r);

// P = (M_h^0)^-1 * E_h * E_r^-1 * M_r^0 with E the orthonormal calibration bases.
Rot3 compute_basis_change(const SharedMap& map, const Rot3& m_h0, const Rot3& m_r0);

// M_r^t = M_r^0 * P^-1 * (M_h^0)^-1 * M_h^t * P, re-orthonormalized.
// Returns m_r0 unchanged when m_ht == m_h0.
Rot3 map_rotation(const Rot3& m_ht, const Rot3& m_h0, const Rot3& m_r0, const Rot3& p);

Vec3 select_tracked_point(const HandKeypoints& kp, TrackedPointStrategy strategy);

GripperState gripper_from_pinch(const HandKeypoints& kp, const GripperConfig& cfg,
                                const GripperState& prev);

// Everything retarget_step needs beyond the hand sample.
struct RetargetContext {
  SharedMap map;
  Rot3 m_h0;
  Rot3 m_r0;
  TrackedPointStrategy strategy = TrackedPointStrategy::IndexMcp;
  GripperConfig gripper;
  friend bool operator==(const RetargetContext&, const RetargetContext&) = default;
};

// Throws NotCalibrated when the map has no basis change yet.
RobotCommand retarget_step(const HandSample& sample, const RetargetContext& ctx,
                           const GripperState& prev_gripper);

}  // namespace h2r
