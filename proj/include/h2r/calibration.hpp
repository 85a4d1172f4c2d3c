#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "h2r/geometry.hpp"

namespace h2r {

inline constexpr double kCollinearTol = 1e-6;
inline constexpr double kPerpendicularTol = 1e-6;
// Largest angle Gram-Schmidt may remove from the raw y anchor direction.
inline constexpr double kOrthoRejectDeg = 5.0;
// Allowed real-world length mismatch between corresponding axes (m).
inline constexpr double kScaleTol = 1e-3;

// a0 is the origin (bottom-right) anchor, a1 lies along +x, a2 along +y.
struct AnchorSet {
  Vec3 a0;
  Vec3 a1;
  Vec3 a2;
  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;
};

// ex and ey keep their measured length; ez is unit.
struct CalibrationFrame {
  Vec3 origin;
  Vec3 ex;
  Vec3 ey;
  Vec3 ez;

  // Columns [unit(ex), unit(ey), ez].
  Rot3 orthonormal_basis() const;
  friend bool operator==(const CalibrationFrame&, const CalibrationFrame&) = default;
};

struct SharedMap {
  CalibrationFrame human;
  CalibrationFrame robot;
  double eta = 1.0;
  // Basis change P, filled once rotation references are latched.
  std::optional<Rot3> p_basis;
  friend bool operator==(const SharedMap&, const SharedMap&) = default;
};

CalibrationFrame build_frame(const AnchorSet& anchors);

// Throws ScaleMismatch when |h.ex| and |r.ex| (or ey) differ by more than kScaleTol,
// BadConfig for eta <= 0.
SharedMap pair_frames(const CalibrationFrame& human, const CalibrationFrame& robot, double eta);

struct DwellConfig {
  double radius = 0.005;    // m
  double dwell_time = 1.0;  // s
  friend bool operator==(const DwellConfig&, const DwellConfig&) = default;
};

// Declares an anchor when every sample in the trailing dwell window stays
// within `radius` of the window centroid. Single writer.
class DwellDetector {
 public:
  explicit DwellDetector(DwellConfig cfg = {});

  // Returns the window centroid once per dwell, then starts a fresh window.
  // Throws NonMonotonicTimestamp if t_ns decreases.
  std::optional<Vec3> feed(std::int64_t t_ns, Vec3 point);
  void reset();

  const DwellConfig& config() const { return cfg_; }
  friend bool operator==(const DwellDetector&, const DwellDetector&) = default;

 private:
  struct Sample {
    std::int64_t t_ns;
    Vec3 p;
    friend bool operator==(const Sample&, const Sample&) = default;
  };

  DwellConfig cfg_;
  std::int64_t dwell_ns_;
  std::deque<Sample> window_;
  std::optional<std::int64_t> last_t_;
};

}  // namespace h2r
