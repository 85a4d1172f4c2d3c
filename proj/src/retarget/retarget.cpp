#include "h2r/retarget.hpp"

#include <algorithm>
#include <string>

#include "h2r/error.hpp"
#include "h2r/kernels/kernels.hpp"

namespace h2r {

std::string_view to_string(TrackedPointStrategy s) {
  switch (s) {
    case TrackedPointStrategy::Wrist: return "wrist";
    case TrackedPointStrategy::ThumbIndexMidpoint: return "midpoint";
    case TrackedPointStrategy::IndexMcp: return "mcp";
  }
  return "mcp";
}

TrackedPointStrategy parse_tracked_point(std::string_view name) {
  if (name == "wrist") return TrackedPointStrategy::Wrist;
  if (name == "midpoint") return TrackedPointStrategy::ThumbIndexMidpoint;
  if (name == "mcp") return TrackedPointStrategy::IndexMcp;
  throw Error(ErrorCode::BadConfig, "unknown tracked point '" + std::string(name) + "'");
}

Mu project_mu(Vec3 p_h, const CalibrationFrame& f) {
  const Vec3 d = p_h - f.origin;
  return {dot(f.ex, d) / dot(f.ex, f.ex), dot(f.ey, d) / dot(f.ey, f.ey),
          dot(f.ez, d) / dot(f.ez, f.ez)};
}

Vec3 map_position(Vec3 p_h, const SharedMap& map) {
  const Mu mu = project_mu(p_h, map.human);
  const CalibrationFrame& r = map.robot;
  return r.origin + mu.x * r.ex + mu.y * r.ey + (map.eta * mu.z) * r.ez;
}

namespace {

kernels::AffineMapParams kernel_params(const SharedMap& map) {
  kernels::AffineMapParams k{};
  const CalibrationFrame& h = map.human;
  const CalibrationFrame& r = map.robot;
  const Vec3 h_axes[3] = {h.ex, h.ey, h.ez};
  const Vec3 r_axes[3] = {r.ex, r.ey, r.ez};
  for (int i = 0; i < 3; ++i) {
    k.human_origin[i] = h.origin[i];
    k.robot_origin[i] = r.origin[i];
    k.human_len2[i] = dot(h_axes[i], h_axes[i]);
    for (int c = 0; c < 3; ++c) {
      k.human_axes[i][c] = h_axes[i][c];
      k.robot_axes[i][c] = r_axes[i][c];
    }
  }
  k.eta = map.eta;
  return k;
}

}  // namespace

void map_positions(std::span<const Vec3> p_h, const SharedMap& map, std::span<Vec3> p_r) {
  if (p_h.size() != p_r.size()) {
    throw Error(ErrorCode::DimensionMismatch, "input and output spans differ in length");
  }
  static_assert(sizeof(Vec3) == 3 * sizeof(double));
  const auto params = kernel_params(map);
  kernels::active().map_positions(reinterpret_cast<const double*>(p_h.data()),
                                  reinterpret_cast<double*>(p_r.data()), p_h.size(), params);
}

namespace {

void require_rotation(const Rot3& r, const char* name) {
  if (!is_rotation(r.matrix())) {
    throw Error(ErrorCode::InvalidRotation, std::string(name) + " is not a proper rotation");
  }
}

}  // namespace

Rot3 compute_basis_change(const SharedMap& map, const Rot3& m_h0, const Rot3& m_r0) {
  require_rotation(m_h0, "m_h0");
  require_rotation(m_r0, "m_r0");
  const Rot3 e_h = map.human.orthonormal_basis();
  const Rot3 e_r = map.robot.orthonormal_basis();
  return orthonormalize((m_h0.inverse() * e_h * e_r.inverse() * m_r0).matrix());
}

Rot3 map_rotation(const Rot3& m_ht, const Rot3& m_h0, const Rot3& m_r0, const Rot3& p) {
  require_rotation(m_ht, "m_ht");
  require_rotation(m_h0, "m_h0");
  require_rotation(m_r0, "m_r0");
  require_rotation(p, "P");
  // Zero relative rotation: the arm holds its reference orientation bit-for-bit.
  if (m_ht == m_h0) return m_r0;
  return orthonormalize((m_r0 * p.inverse() * m_h0.inverse() * m_ht * p).matrix());
}

Vec3 select_tracked_point(const HandKeypoints& kp, TrackedPointStrategy strategy) {
  auto need = [&](Joint j, const char* name) {
    const Vec3 v = kp[j];
    if (!v.finite()) throw Error(ErrorCode::MissingKeypoint, std::string(name) + " not tracked");
    return v;
  };
  switch (strategy) {
    case TrackedPointStrategy::Wrist:
      return need(Joint::Wrist, "wrist");
    case TrackedPointStrategy::ThumbIndexMidpoint:
      return 0.5 * (need(Joint::ThumbTip, "thumb_tip") + need(Joint::IndexTip, "index_tip"));
    case TrackedPointStrategy::IndexMcp:
      return need(Joint::IndexMcp, "index_mcp");
  }
  throw Error(ErrorCode::BadConfig, "unknown tracked point strategy");
}

GripperState gripper_from_pinch(const HandKeypoints& kp, const GripperConfig& cfg,
                                const GripperState& prev) {
  if (!(cfg.d_close > 0.0) || !(cfg.d_open > cfg.d_close) || !(cfg.hysteresis >= 0.0)) {
    throw Error(ErrorCode::BadConfig, "gripper config requires d_open > d_close > 0");
  }
  const Vec3 thumb = kp[Joint::ThumbTip];
  const Vec3 index = kp[Joint::IndexTip];
  if (!thumb.finite() || !index.finite()) {
    throw Error(ErrorCode::MissingKeypoint, "pinch needs thumb_tip and index_tip");
  }
  const double span = cfg.d_open - cfg.d_close;
  GripperState out;
  out.aperture = std::clamp((distance(thumb, index) - cfg.d_close) / span, 0.0, 1.0);
  const double band = cfg.hysteresis / span;
  out.closed = prev.closed;
  if (prev.closed && out.aperture > 0.5 + band) out.closed = false;
  if (!prev.closed && out.aperture < 0.5 - band) out.closed = true;
  return out;
}

RobotCommand retarget_step(const HandSample& sample, const RetargetContext& ctx,
                           const GripperState& prev_gripper) {
  if (!ctx.map.p_basis) {
    throw Error(ErrorCode::NotCalibrated, "rotation references have not been latched");
  }
  RobotCommand cmd;
  cmd.position = map_position(select_tracked_point(sample.keypoints, ctx.strategy), ctx.map);
  cmd.rotation = map_rotation(sample.transform.rotation, ctx.m_h0, ctx.m_r0, *ctx.map.p_basis);
  cmd.gripper = gripper_from_pinch(sample.keypoints, ctx.gripper, prev_gripper);
  return cmd;
}

}  // namespace h2r
