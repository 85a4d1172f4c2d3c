#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "h2r/calibration.hpp"
#include "h2r/geometry.hpp"
#include "h2r/retarget.hpp"

namespace h2r {

inline constexpr double kTickRate = 30.0;  // Hz, camera cadence
inline constexpr std::int64_t kTickNs = 33'333'333;

// Timestamp of tick k on the fixed 30 Hz grid.
std::int64_t tick_time_ns(std::int64_t k);

struct Box {
  Vec3 min;
  Vec3 max;
  bool contains(Vec3 p) const;
  Vec3 clamp(Vec3 p) const;
  friend bool operator==(const Box&, const Box&) = default;
};

struct SimArmConfig {
  double v_max = 0.5;         // m/s
  double w_max = 2.0;         // rad/s
  Box workspace{{-0.25, -0.60, -0.02}, {0.75, 0.60, 0.60}};
  double exec_latency = 0.05; // s, time for one serial command to execute
  double tick_rate = kTickRate;

  void validate() const;
  friend bool operator==(const SimArmConfig&, const SimArmConfig&) = default;
};

inline constexpr std::size_t kPseudoJointCount = 7;
using JointVector = std::array<double, kPseudoJointCount>;

// Task-space arm. Pseudo-joints are a fixed linear image of
// [x, y, z, roll, pitch, yaw, gripper] (see kPseudoJointMap) with roll/pitch/yaw
// unwrapped against the previous tick so they stay continuous.
struct SimArmState {
  Pose pose;
  double gripper = 1.0;  // 1 open, 0 closed
  JointVector pseudo_joints{};
  JointVector pseudo_joint_vel{};
  Vec3 rpy_unwrapped;
  friend bool operator==(const SimArmState&, const SimArmState&) = default;
};

extern const std::array<std::array<double, kPseudoJointCount>, kPseudoJointCount> kPseudoJointMap;

SimArmState make_arm_state(const Pose& pose, double gripper = 1.0);

// Moves toward `target` under the speed limits, clamps to the workspace and
// refreshes pseudo-joints. dt must be > 0.
SimArmState arm_tick(const SimArmState& state, const RobotCommand& target, const SimArmConfig& cfg,
                     double dt);

// ---------------------------------------------------------------------------
// Scripted hand streams

// Rigid 21-point template in the hand frame (wrist at origin, x toward the
// fingers, z out of the back of the hand). The thumb tip is placed `pinch`
// metres from the index tip.
HandKeypoints pose_hand_template(const Pose& hand, double pinch);
HandSample make_hand_sample(std::int64_t t_ns, const Pose& hand, double pinch);

inline constexpr double kPinchOpen = 0.09;
inline constexpr double kPinchClosed = 0.01;

// Reference rig: human/robot anchors with equal axis lengths, the hand's rest
// orientation and the arm's initial pose. Scripts are expressed in the human
// calibration frame of this rig.
struct Rig {
  AnchorSet human;
  AnchorSet robot;
  Pose robot_initial;
  Rot3 hand_rest;

  // o_h + u * e_h^x + v * e_h^y + w * e_h^z (w in metres).
  Vec3 human_point(double u, double v, double w) const;
};

Rig default_rig();

struct LissajousParams {
  Vec3 center;                 // wrist position at t = 0
  Vec3 amplitude{0.08, 0.0, 0.06};
  Vec3 frequency{0.25, 0.0, 0.5};  // Hz
  Vec3 phase{0.0, 0.0, 0.0};       // rad
  Rot3 rotation;
  double roll_amplitude = 0.2;  // rad about the hand x axis
  double roll_frequency = 0.2;  // Hz
  double pinch_period = 0.0;    // s; 0 keeps the pinch open
};

struct PickPlaceParams {
  Vec3 home;
  Vec3 pick;
  Vec3 place;
  Vec3 up{0.0, 1.0, 0.0};
  double lift = 0.10;       // m
  double peak_speed = 0.2;  // m/s
  double hold = 0.8;        // s at each stop
  Rot3 rotation;
};

struct ReplayParams {
  std::string episode_path;
  double speed = 1.0;
};

struct LiveSource {};

using HandStreamSpec = std::variant<LissajousParams, PickPlaceParams, ReplayParams, LiveSource>;

LissajousParams default_lissajous(const Rig& rig);
// `variant` shifts pick and place deterministically (0 = nominal layout).
PickPlaceParams default_pick_place(const Rig& rig, int variant = 0);

struct PathSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  Vec3 from;
  Vec3 to;
  bool hold() const { return from == to; }
};

// Piecewise schedule of a pick-and-place demonstration.
class PickPlaceSchedule {
 public:
  explicit PickPlaceSchedule(const PickPlaceParams& params);

  Vec3 wrist(double t) const;
  double pinch(double t) const;
  double grasp_time() const { return grasp_time_; }
  double release_time() const { return release_time_; }
  double duration() const { return segments_.back().t1; }
  const std::vector<PathSegment>& segments() const { return segments_; }
  // Peak wrist speed along the path.
  double peak_speed() const { return params_.peak_speed; }
  const PickPlaceParams& params() const { return params_; }

 private:
  PickPlaceParams params_;
  std::vector<PathSegment> segments_;
  double grasp_time_ = 0.0;
  double release_time_ = 0.0;
};

struct EpisodeRecord;

// Deterministic hand sample source. Scripted variants are pure functions of t;
// replay re-emits recorded samples (timestamps rescaled by 1/speed).
class HandStream {
 public:
  // t0_ns: timestamp assigned to t = 0. Replay specs load their episode here
  // (throws CorruptEpisode on a bad file).
  explicit HandStream(HandStreamSpec spec, std::int64_t t0_ns = 0);

  // Throws ReplayExhausted past the end of a replay, BadConfig for Live or t < 0.
  HandSample next(double t) const;

  // Length in seconds of the stream (infinite for Lissajous and Live).
  double duration() const;
  const HandStreamSpec& spec() const { return spec_; }
  const PickPlaceSchedule* schedule() const { return schedule_.get(); }

 private:
  HandStreamSpec spec_;
  std::int64_t t0_ns_;
  std::shared_ptr<const PickPlaceSchedule> schedule_;
  std::shared_ptr<const std::vector<HandSample>> replay_;
};

// Free-function form of HandStream::next.
HandSample hand_stream_next(const HandStream& stream, double t);

}  // namespace h2r
