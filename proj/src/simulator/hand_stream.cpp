#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "h2r/episode.hpp"
#include "h2r/error.hpp"
#include "h2r/simulator.hpp"

namespace h2r {

namespace {

constexpr double kPi = std::numbers::pi;

// Hand-frame joint offsets (m). The thumb tip entry is unused: it is placed
// relative to the index tip by the pinch distance.
constexpr std::array<Vec3, kJointCount> kTemplate{{
    {0.000, 0.000, 0.000},                                                    // wrist
    {0.025, 0.025, -0.010}, {0.050, 0.045, -0.015}, {0.075, 0.055, -0.020},  // thumb cmc/mcp/ip
    {0.000, 0.000, 0.000},                                                    // thumb tip
    {0.090, 0.025, 0.000}, {0.130, 0.027, 0.000}, {0.155, 0.028, 0.000}, {0.175, 0.028, 0.000},
    {0.095, 0.000, 0.000}, {0.140, 0.000, 0.000}, {0.168, 0.000, 0.000}, {0.190, 0.000, 0.000},
    {0.090, -0.020, 0.000}, {0.130, -0.021, 0.000}, {0.155, -0.022, 0.000}, {0.175, -0.022, 0.000},
    {0.080, -0.038, 0.000}, {0.110, -0.040, 0.000}, {0.130, -0.041, 0.000}, {0.145, -0.042, 0.000},
}};

const Vec3 kThumbDirection = Vec3{-0.3, 0.5, -0.81} / norm(Vec3{-0.3, 0.5, -0.81});

double cosine_profile(double tau) { return 0.5 * (1.0 - std::cos(kPi * tau)); }

}  // namespace

HandKeypoints pose_hand_template(const Pose& hand, double pinch) {
  HandKeypoints kp;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    kp.joints[i] = hand.position + hand.rotation * kTemplate[i];
  }
  const Vec3 index_tip_local = kTemplate[static_cast<std::size_t>(Joint::IndexTip)];
  kp[Joint::ThumbTip] = hand.position + hand.rotation * (index_tip_local + pinch * kThumbDirection);
  return kp;
}

HandSample make_hand_sample(std::int64_t t_ns, const Pose& hand, double pinch) {
  return HandSample{t_ns, pose_hand_template(hand, pinch), hand};
}

Vec3 Rig::human_point(double u, double v, double w) const {
  const CalibrationFrame f = build_frame(human);
  return f.origin + u * f.ex + v * f.ey + w * f.ez;
}

Rig default_rig() {
  Rig rig;
  // Operator table in headset coordinates (y up): 0.4 m x 0.3 m rectangle.
  rig.human = {{0.25, 0.80, -0.40}, {-0.15, 0.80, -0.40}, {0.25, 0.80, -0.10}};
  // Robot table in base coordinates (z up), same rectangle.
  rig.robot = {{0.30, -0.20, 0.00}, {0.30, 0.20, 0.00}, {0.00, -0.20, 0.00}};
  rig.robot_initial = Pose{{0.24, 0.0, 0.30}, Rot3::about_x(kPi)};
  rig.hand_rest = Rot3::about_x(-kPi / 2.0);
  return rig;
}

LissajousParams default_lissajous(const Rig& rig) {
  LissajousParams p;
  p.center = rig.human_point(0.5, 0.5, 0.20);
  p.amplitude = {0.08, 0.05, 0.06};
  p.frequency = {0.25, 0.5, 0.2};
  p.rotation = rig.hand_rest;
  return p;
}

PickPlaceParams default_pick_place(const Rig& rig, int variant) {
  double du = 0.0, dv = 0.0, dw = 0.0;
  if (variant != 0) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(variant));
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    du = 0.15 * jitter(rng);
    dv = 0.15 * jitter(rng);
    dw = 0.10 * jitter(rng);
  }
  PickPlaceParams p;
  p.home = rig.human_point(0.5, 0.2, 0.25);
  p.pick = rig.human_point(0.25 + du, 0.6 + dv, 0.05);
  p.place = rig.human_point(0.75 + dw, 0.6 - dv, 0.05);
  p.up = build_frame(rig.human).ez;
  p.rotation = rig.hand_rest;
  return p;
}

PickPlaceSchedule::PickPlaceSchedule(const PickPlaceParams& params) : params_(params) {
  if (!(params.peak_speed > 0.0) || !(params.hold > 0.0) || !(params.lift >= 0.0)) {
    throw Error(ErrorCode::BadConfig, "pick/place speed and hold must be positive");
  }
  const Vec3 up = params.up / norm(params.up);
  const Vec3 above_pick = params.pick + params.lift * up;
  const Vec3 above_place = params.place + params.lift * up;
  double t = 0.0;
  auto hold = [&](Vec3 at, double duration) {
    segments_.push_back({t, t + duration, at, at});
    t += duration;
  };
  auto move = [&](Vec3 from, Vec3 to) {
    // Cosine profile peaks at pi L / (2 T).
    const double duration = std::max(kPi * distance(from, to) / (2.0 * params.peak_speed), 0.3);
    segments_.push_back({t, t + duration, from, to});
    t += duration;
  };
  hold(params.home, params.hold);
  move(params.home, above_pick);
  move(above_pick, params.pick);
  grasp_time_ = t + params.hold;
  hold(params.pick, 2.0 * params.hold);
  move(params.pick, above_pick);
  move(above_pick, above_place);
  move(above_place, params.place);
  release_time_ = t + params.hold;
  hold(params.place, 2.0 * params.hold);
  move(params.place, above_place);
  move(above_place, params.home);
  hold(params.home, params.hold);
}

Vec3 PickPlaceSchedule::wrist(double t) const {
  if (t <= 0.0) return segments_.front().from;
  for (const PathSegment& s : segments_) {
    if (t < s.t1) {
      if (s.hold()) return s.from;
      return s.from + cosine_profile((t - s.t0) / (s.t1 - s.t0)) * (s.to - s.from);
    }
  }
  return segments_.back().to;
}

double PickPlaceSchedule::pinch(double t) const {
  return (t >= grasp_time_ && t < release_time_) ? kPinchClosed : kPinchOpen;
}

HandStream::HandStream(HandStreamSpec spec, std::int64_t t0_ns) : spec_(std::move(spec)), t0_ns_(t0_ns) {
  if (const auto* pp = std::get_if<PickPlaceParams>(&spec_)) {
    schedule_ = std::make_shared<const PickPlaceSchedule>(*pp);
  } else if (const auto* lp = std::get_if<LissajousParams>(&spec_)) {
    for (int i = 0; i < 3; ++i) {
      if (lp->frequency[i] < 0.0) throw Error(ErrorCode::BadConfig, "frequencies must be >= 0");
    }
    if (lp->pinch_period < 0.0) throw Error(ErrorCode::BadConfig, "pinch period must be >= 0");
  } else if (const auto* rp = std::get_if<ReplayParams>(&spec_)) {
    if (!(rp->speed > 0.0)) throw Error(ErrorCode::BadConfig, "replay speed must be positive");
    Episode ep;
    try {
      ep = read_episode_file(rp->episode_path);
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptEpisode, rp->episode_path + ": " + e.what());
    }
    if (ep.records.empty()) throw Error(ErrorCode::CorruptEpisode, "episode has no records");
    auto samples = std::make_shared<std::vector<HandSample>>();
    samples->reserve(ep.records.size());
    for (const auto& r : ep.records) samples->push_back(hand_sample_of(r));
    replay_ = std::move(samples);
  }
}

double HandStream::duration() const {
  if (schedule_) return schedule_->duration();
  if (replay_) {
    const auto& s = *replay_;
    const double speed = std::get<ReplayParams>(spec_).speed;
    if (s.size() < 2) return (1.0 / kTickRate) / speed;
    const double span = static_cast<double>(s.back().t_ns - s.front().t_ns) * 1e-9;
    // N samples cover N frame periods.
    return span * static_cast<double>(s.size()) / static_cast<double>(s.size() - 1) / speed;
  }
  return INFINITY;
}

HandSample HandStream::next(double t) const {
  if (!(t >= 0.0)) throw Error(ErrorCode::BadConfig, "stream time must be >= 0");
  const std::int64_t t_ns = t0_ns_ + static_cast<std::int64_t>(std::llround(t * 1e9));

  if (const auto* lp = std::get_if<LissajousParams>(&spec_)) {
    Vec3 offset;
    for (int i = 0; i < 3; ++i) {
      offset[i] = lp->amplitude[i] * std::sin(2.0 * kPi * lp->frequency[i] * t + lp->phase[i]) -
                  lp->amplitude[i] * std::sin(lp->phase[i]);
    }
    const Rot3 roll = Rot3::about_x(lp->roll_amplitude * std::sin(2.0 * kPi * lp->roll_frequency * t));
    double pinch = kPinchOpen;
    if (lp->pinch_period > 0.0) {
      const double phase = std::fmod(t / lp->pinch_period, 1.0);
      if (phase >= 0.5) pinch = kPinchClosed;
    }
    const Rot3 rotation = t == 0.0 ? lp->rotation : orthonormalize((lp->rotation * roll).matrix());
    return make_hand_sample(t_ns, Pose{lp->center + offset, rotation}, pinch);
  }
  if (schedule_) {
    return make_hand_sample(t_ns, Pose{schedule_->wrist(t), schedule_->params().rotation},
                            schedule_->pinch(t));
  }
  if (replay_) {
    const auto& s = *replay_;
    const double speed = std::get<ReplayParams>(spec_).speed;
    if (t >= duration()) throw Error(ErrorCode::ReplayExhausted, "replay ended");
    // Latest recorded sample at or before t * speed (1 us slack for rounding).
    const std::int64_t cursor =
        s.front().t_ns + static_cast<std::int64_t>(std::llround(t * speed * 1e9)) + 1000;
    auto it = std::upper_bound(s.begin(), s.end(), cursor,
                               [](std::int64_t v, const HandSample& h) { return v < h.t_ns; });
    HandSample out = *std::prev(it);
    const double rel = static_cast<double>(out.t_ns - s.front().t_ns) / speed;
    out.t_ns = s.front().t_ns + t0_ns_ + static_cast<std::int64_t>(std::llround(rel));
    return out;
  }
  throw Error(ErrorCode::BadConfig, "live streams are driven by the session, not sampled");
}

HandSample hand_stream_next(const HandStream& stream, double t) { return stream.next(t); }

}  // namespace h2r
