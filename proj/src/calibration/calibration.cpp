#include "h2r/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "h2r/error.hpp"

namespace h2r {

Rot3 CalibrationFrame::orthonormal_basis() const {
  return orthonormalize(Mat3::from_columns(ex / norm(ex), ey / norm(ey), ez));
}

CalibrationFrame build_frame(const AnchorSet& anchors) {
  if (!anchors.a0.finite() || !anchors.a1.finite() || !anchors.a2.finite()) {
    throw Error(ErrorCode::CollinearAnchors, "anchors must be finite");
  }
  const Vec3 ex = anchors.a1 - anchors.a0;
  const Vec3 ey_raw = anchors.a2 - anchors.a0;
  if (norm(cross(ex, ey_raw)) <= kCollinearTol) {
    throw Error(ErrorCode::CollinearAnchors, "anchors a0, a1, a2 are collinear");
  }

  const Vec3 ey = ey_raw - (dot(ey_raw, ex) / dot(ex, ex)) * ex;
  const double deviation =
      std::atan2(norm(cross(ey_raw, ey)), dot(ey_raw, ey)) * 180.0 / std::numbers::pi;
  if (!(deviation <= kOrthoRejectDeg)) {
    throw Error(ErrorCode::AnchorsNotPerpendicular,
                "y anchor deviates " + std::to_string(deviation) + " deg from perpendicular");
  }

  const Vec3 z = cross(ex, ey);
  CalibrationFrame frame{anchors.a0, ex, ey, z / norm(z)};
  if (std::abs(dot(frame.ex, frame.ey)) > kPerpendicularTol * norm(frame.ex) * norm(frame.ey)) {
    throw Error(ErrorCode::AnchorsNotPerpendicular, "orthogonalized axes are not perpendicular");
  }
  return frame;
}

SharedMap pair_frames(const CalibrationFrame& human, const CalibrationFrame& robot, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::BadConfig, "eta must be positive");
  }
  const double dx = std::abs(norm(human.ex) - norm(robot.ex));
  const double dy = std::abs(norm(human.ey) - norm(robot.ey));
  if (dx > kScaleTol) {
    throw Error(ErrorCode::ScaleMismatch, "x axis lengths differ by " + std::to_string(dx) + " m");
  }
  if (dy > kScaleTol) {
    throw Error(ErrorCode::ScaleMismatch, "y axis lengths differ by " + std::to_string(dy) + " m");
  }
  return SharedMap{human, robot, eta, std::nullopt};
}

DwellDetector::DwellDetector(DwellConfig cfg)
    : cfg_(cfg), dwell_ns_(static_cast<std::int64_t>(std::llround(cfg.dwell_time * 1e9))) {
  if (!(cfg.radius > 0.0) || !(cfg.dwell_time > 0.0)) {
    throw Error(ErrorCode::BadConfig, "dwell radius and time must be positive");
  }
}

void DwellDetector::reset() { window_.clear(); }

std::optional<Vec3> DwellDetector::feed(std::int64_t t_ns, Vec3 point) {
  if (last_t_ && t_ns < *last_t_) {
    throw Error(ErrorCode::NonMonotonicTimestamp, "dwell sample went back in time");
  }
  last_t_ = t_ns;
  window_.push_back({t_ns, point});
  // Keep the shortest suffix that still spans the dwell time.
  while (window_.size() > 2 && t_ns - window_[1].t_ns >= dwell_ns_) window_.pop_front();
  if (t_ns - window_.front().t_ns < dwell_ns_) return std::nullopt;

  Vec3 centroid;
  for (const auto& s : window_) centroid += s.p;
  centroid = centroid / static_cast<double>(window_.size());
  const bool still = std::all_of(window_.begin(), window_.end(), [&](const Sample& s) {
    return distance(s.p, centroid) <= cfg_.radius;
  });
  if (!still) return std::nullopt;
  window_.clear();
  return centroid;
}

}  // namespace h2r
