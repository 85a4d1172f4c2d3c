#include "h2r/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "h2r/error.hpp"

namespace h2r {

using nlohmann::json;
using protocol::CalibSide;

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "idle";
    case Phase::Calibrating: return "calibrating";
    case Phase::Live: return "live";
    case Phase::Recording: return "recording";
  }
  return "?";
}

void SessionConfig::validate() const {
  if (!std::isfinite(eta) || !(eta > 0.0)) throw Error(ErrorCode::BadConfig, "eta must be > 0");
  smoothing.validate();
  scheduler.validate();
  arm.validate();
  if (!(dwell.radius > 0.0) || !(dwell.dwell_time > 0.0)) {
    throw Error(ErrorCode::BadConfig, "dwell radius and time must be > 0");
  }
  if (!(anchor_min_separation >= 0.0)) throw Error(ErrorCode::BadConfig, "anchor separation must be >= 0");
}

std::size_t SessionState::captured() const {
  const auto& slots = side == CalibSide::Human ? human_slots : robot_slots;
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); }));
}

bool SessionState::calibration_complete() const {
  const auto full = [](const auto& slots) {
    return std::all_of(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); });
  };
  return full(human_slots) && full(robot_slots) && robot_initial.has_value();
}

json session_state_json(const SessionState& s) {
  json j{{"type", "session_state"},
         {"state", to_string(s.phase)},
         {"calibrated", s.map.has_value()},
         {"references_latched", s.context.has_value()},
         {"config",
          {{"eta", s.config.eta},
           {"alpha_pos", s.config.smoothing.alpha_pos},
           {"alpha_rot", s.config.smoothing.alpha_rot},
           {"latency_budget_ms", s.config.scheduler.latency_budget * 1e3},
           {"strategy", to_string(s.config.strategy)}}}};
  if (s.phase == Phase::Calibrating) {
    j["side"] = protocol::to_string(s.side);
    j["captured"] = s.captured();
  }
  if (s.phase == Phase::Recording) {
    j["episode_path"] = *s.episode_path;
    j["frames"] = s.frames_recorded;
  }
  return j;
}

namespace {

[[noreturn]] void violation(const SessionState& s, std::string_view msg) {
  throw Error(ErrorCode::ProtocolViolation,
              std::string(msg) + " not allowed in state " + std::string(to_string(s.phase)));
}

std::int64_t seconds_to_ns(double s) { return std::llround(s * 1e9); }

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

AnchorSet anchors_of(const std::array<std::optional<Vec3>, 3>& slots) {
  return {*slots[0], *slots[1], *slots[2]};
}

// Per-message worker over a scratch copy of the state.
struct Step {
  SessionState& s;
  const SessionOptions& opt;
  std::vector<json> out;
  std::optional<EpisodeRecord> record;
  bool flush_recording = false;

  void latch(const Rot3& m_h0) {
    RetargetContext ctx;
    ctx.map = *s.map;
    ctx.m_h0 = m_h0;
    ctx.m_r0 = s.robot_initial->rotation;
    ctx.map.p_basis = compute_basis_change(ctx.map, ctx.m_h0, ctx.m_r0);
    ctx.strategy = s.config.strategy;
    ctx.gripper = s.config.gripper;
    s.context = ctx;
  }

  // Builds both frames and goes Live once every anchor and the initial pose are known.
  void try_complete() {
    if (!s.calibration_complete()) return;
    const CalibrationFrame human = build_frame(anchors_of(s.human_slots));
    const CalibrationFrame robot = build_frame(anchors_of(s.robot_slots));
    s.map = pair_frames(human, robot, s.config.eta);
    s.context.reset();
    s.smoothed.reset();
    s.gripper = {};
    s.phase = Phase::Live;
    s.dwell.reset();
    if (s.last_sample) latch(s.last_sample->transform.rotation);
    out.push_back(session_state_json(s));
  }

  void capture(std::size_t label, Vec3 xyz) {
    auto& slots = s.side == CalibSide::Human ? s.human_slots : s.robot_slots;
    slots[label] = xyz;
    if (s.side == CalibSide::Robot && !s.robot_initial) s.robot_initial = s.arm.pose;
    out.push_back(protocol::anchor_captured_message(label, xyz));
    out.push_back(session_state_json(s));
    try_complete();
  }

  void tick_to(std::int64_t t) {
    if (!s.clock_ns || t <= *s.clock_ns) return;
    if (s.arm_target) {
      s.arm = arm_tick(s.arm, *s.arm_target, s.config.arm, static_cast<double>(t - *s.clock_ns) * 1e-9);
    }
    s.clock_ns = t;
  }

  // Runs the arm and the scheduler's completions up to t.
  void advance_clock(std::int64_t t) {
    if (!s.clock_ns) {
      s.clock_ns = t;
      return;
    }
    const std::int64_t t_prev = *s.clock_ns;
    const JointVector q_prev = s.arm.pseudo_joints;
    const std::int64_t exec_ns = seconds_to_ns(s.config.arm.exec_latency);
    while (s.scheduler.in_flight()) {
      const CommandTicket& running = *s.scheduler.in_flight();
      const std::int64_t done = *running.dispatched_at + exec_ns;
      if (done > t) break;
      tick_to(done);
      const std::int64_t submitted = running.submitted_at;
      s.scheduler.complete(running.id, done);
      s.last_end_to_end_ns = done - submitted;
      if (s.scheduler.in_flight()) s.arm_target = s.scheduler.in_flight()->command;
    }
    tick_to(t);
    const double dt = static_cast<double>(t - t_prev) * 1e-9;
    for (std::size_t i = 0; i < kPseudoJointCount; ++i) {
      s.arm.pseudo_joint_vel[i] = s.arm_target ? (s.arm.pseudo_joints[i] - q_prev[i]) / dt : 0.0;
    }
  }

  void drive(const HandSample& h) {
    if (!s.context) latch(h.transform.rotation);
    const RobotCommand raw = retarget_step(h, *s.context, s.gripper);
    s.gripper = raw.gripper;
    const Pose in{raw.position, raw.rotation};
    const Pose target = s.smoothed ? smooth(*s.smoothed, in, s.config.smoothing) : in;
    s.smoothed = target;
    s.scheduler.submit({target.position, target.rotation, raw.gripper}, h.t_ns);
    if (s.scheduler.in_flight()) s.arm_target = s.scheduler.in_flight()->command;

    out.push_back(protocol::robot_state_message(h.t_ns, s.arm));
    json telemetry = protocol::telemetry_message(h.t_ns, s.scheduler.stats(), s.scheduler.in_flight().has_value(),
                                                 s.scheduler.pending().has_value());
    telemetry["end_to_end_ms"] = static_cast<double>(s.last_end_to_end_ns) * 1e-6;
    out.push_back(std::move(telemetry));

    if (s.phase == Phase::Recording) {
      EpisodeRecord r;
      r.timestamp_ns = h.t_ns;
      r.hand_transform = to_transform(h.transform);
      for (std::size_t i = 0; i < kJointCount; ++i) {
        const Vec3 p = h.keypoints.joints[i];
        r.hand_keypoints[i] = {p.x, p.y, p.z};
      }
      r.robot_state = to_arm_block(s.arm.pose, s.arm.gripper);
      r.joint_velocity = s.arm.pseudo_joint_vel;
      r.action = to_arm_block({raw.position, raw.rotation}, gripper_command_value(raw.gripper));
      r.frame_index = static_cast<std::int64_t>(s.frames_recorded);
      ++s.frames_recorded;
      record = std::move(r);
    }
  }

  void on(const protocol::HandSampleMsg& m) {
    const HandSample& h = m.sample;
    if (s.last_sample && h.t_ns <= s.last_sample->t_ns) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  "t_ns " + std::to_string(h.t_ns) + " not after " + std::to_string(s.last_sample->t_ns));
    }
    if (s.phase == Phase::Recording) {
      for (std::size_t i = 0; i < kJointCount; ++i) {
        if (!h.keypoints.joints[i].finite()) {
          throw Error(ErrorCode::MissingKeypoint, "recorded samples need all 21 keypoints", static_cast<std::int64_t>(i));
        }
      }
    }
    advance_clock(h.t_ns);
    s.last_sample = h;
    switch (s.phase) {
      case Phase::Idle:
        return;
      case Phase::Calibrating: {
        if (s.side != CalibSide::Human) return;
        const Vec3 p = select_tracked_point(h.keypoints, s.config.strategy);
        const auto centroid = s.dwell.feed(h.t_ns, p);
        if (!centroid) return;
        for (const auto& slot : s.human_slots) {
          if (slot && distance(*slot, *centroid) < s.config.anchor_min_separation) return;
        }
        const auto empty = std::find_if(s.human_slots.begin(), s.human_slots.end(),
                                        [](const auto& slot) { return !slot.has_value(); });
        if (empty == s.human_slots.end()) return;
        capture(static_cast<std::size_t>(empty - s.human_slots.begin()), *centroid);
        return;
      }
      case Phase::Live:
      case Phase::Recording:
        drive(h);
        return;
    }
  }

  void on(const protocol::CalibrateBeginMsg& m) {
    if (s.phase != Phase::Idle && s.phase != Phase::Calibrating) violation(s, "calibrate_begin");
    s.phase = Phase::Calibrating;
    s.side = m.side;
    auto& slots = m.side == CalibSide::Human ? s.human_slots : s.robot_slots;
    slots = {};
    if (m.side == CalibSide::Robot) s.robot_initial.reset();
    s.map.reset();
    s.context.reset();
    s.dwell.reset();
    out.push_back(session_state_json(s));
  }

  void on(const protocol::AnchorPointMsg& m) {
    if (s.phase != Phase::Calibrating) violation(s, "anchor_point");
    capture(m.label, m.xyz);
  }

  void on(const protocol::RobotAnchorConfigMsg& m) {
    if (s.phase != Phase::Idle && s.phase != Phase::Calibrating) violation(s, "robot_anchor_config");
    // Validate the robot frame on its own before accepting it.
    build_frame(m.anchors);
    s.robot_slots = {m.anchors.a0, m.anchors.a1, m.anchors.a2};
    s.robot_initial = m.initial_pose;
    s.arm = make_arm_state(m.initial_pose, s.arm.gripper);
    s.arm_target.reset();
    out.push_back(session_state_json(s));
    if (s.phase == Phase::Calibrating) try_complete();
  }

  void on(const protocol::GoLiveMsg&) {
    if (s.phase == Phase::Live || s.phase == Phase::Recording) violation(s, "go_live");
    if (s.phase == Phase::Idle || !s.calibration_complete()) {
      throw Error(ErrorCode::NotCalibrated, "go_live needs three anchors on each side and an initial pose");
    }
    try_complete();
  }

  void on(const protocol::RecordStartMsg& m) {
    if (s.phase != Phase::Live) violation(s, "record_start");
    char seq[32];
    std::snprintf(seq, sizeof seq, "_%04llu", static_cast<unsigned long long>(s.episode_seq));
    s.episode_path = (opt.record_dir / (sanitize(m.task_name) + seq + kEpisodeExtension)).string();
    ++s.episode_seq;
    s.task_name = m.task_name;
    s.scene = m.scene;
    s.record_started_at = s.clock_ns.value_or(0);
    s.frames_recorded = 0;
    // Stored actions must be reproducible offline from the manifest alone.
    s.gripper = {};
    s.phase = Phase::Recording;
    out.push_back(session_state_json(s));
  }

  EpisodeManifest manifest() const {
    EpisodeManifest mf;
    mf.task_name = s.task_name;
    mf.source = s.config.source;
    mf.eta = s.map->eta;
    mf.human_anchors = anchors_of(s.human_slots);
    mf.robot_anchors = anchors_of(s.robot_slots);
    mf.created_at = s.record_started_at;
    mf.robot_initial = *s.robot_initial;
    mf.hand_reference = s.context ? s.context->m_h0 : Rot3{};
    mf.tracked_point = s.config.strategy;
    mf.gripper = s.config.gripper;
    mf.scene = s.scene;
    return mf;
  }

  void stop_recording(const std::vector<EpisodeRecord>& records) {
    const EpisodeManifest mf = manifest();
    const std::filesystem::path path = *s.episode_path;
    if (opt.writer) {
      opt.writer(path, mf, records);
    } else {
      write_episode_file(mf, records, path);
    }
    s.episode_path.reset();
    s.scene.reset();
    s.frames_recorded = 0;
    flush_recording = true;
  }

  void on(const protocol::RecordStopMsg&, const std::vector<EpisodeRecord>& records) {
    if (s.phase != Phase::Recording) violation(s, "record_stop");
    const std::string path = *s.episode_path;
    stop_recording(records);
    s.phase = Phase::Live;
    json state = session_state_json(s);
    state["episode_written"] = path;
    out.push_back(std::move(state));
  }

  void on(const protocol::SetConfigMsg& m) {
    if (s.phase == Phase::Recording) violation(s, "set_config");
    SessionConfig cfg = s.config;
    if (m.eta) cfg.eta = *m.eta;
    if (m.alpha) cfg.smoothing.alpha_pos = cfg.smoothing.alpha_rot = *m.alpha;
    if (m.latency_budget_ms) cfg.scheduler.latency_budget = *m.latency_budget_ms * 1e-3;
    if (m.strategy) cfg.strategy = *m.strategy;
    cfg.validate();
    s.config = cfg;
    s.scheduler.set_config(cfg.scheduler);
    if (s.map) s.map->eta = cfg.eta;
    if (s.context) {
      s.context->map.eta = cfg.eta;
      s.context->strategy = cfg.strategy;
    }
    if (m.strategy) s.dwell.reset();
    out.push_back(session_state_json(s));
  }

  void on(const protocol::KnnQueryMsg& m) {
    if (!opt.index || opt.index->empty()) throw Error(ErrorCode::EmptyInput, "no episode index loaded");
    out.push_back(protocol::knn_result_message(knn_query(*opt.index, GridEmbedder{}.embed(m.scene), m.n)));
  }
};

}  // namespace

Session::Session(SessionOptions options) : options_(std::move(options)) {
  options_.config.validate();
  state_.config = options_.config;
  state_.dwell = DwellDetector(options_.config.dwell);
  state_.scheduler = SerialScheduler(options_.config.scheduler);
  state_.arm = make_arm_state(options_.config.arm_home);
  state_.episode_seq = options_.first_episode_seq;
}

std::vector<json> Session::handle_message(const json& msg) {
  protocol::Inbound in;
  try {
    in = protocol::parse_inbound(msg);
  } catch (const Error& e) {
    return {protocol::error_message(e.code(), e.detail())};
  }
  return handle(in);
}

std::vector<json> Session::handle(const protocol::Inbound& msg) {
  SessionState scratch = state_;
  Step step{scratch, options_, {}, {}, false};
  try {
    std::visit(
        [&](const auto& m) {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, protocol::RecordStopMsg>) {
            step.on(m, recording_);
          } else {
            step.on(m);
          }
        },
        msg);
  } catch (const Error& e) {
    return {protocol::error_message(e.code(), e.detail())};
  } catch (const std::exception& e) {
    return {protocol::error_message(ErrorCode::IoFailure, e.what())};
  }

  state_ = std::move(scratch);
  if (step.flush_recording) recording_.clear();
  if (step.record) recording_.push_back(std::move(*step.record));
  auto events = state_.scheduler.take_events();
  if (options_.keep_scheduler_events) events_.insert(events_.end(), events.begin(), events.end());
  return std::move(step.out);
}

std::vector<json> Session::close() {
  SessionState scratch = state_;
  Step step{scratch, options_, {}, {}, false};
  std::vector<json> out;
  if (scratch.phase == Phase::Recording) {
    try {
      step.stop_recording(recording_);
    } catch (const std::exception& e) {
      out.push_back(protocol::error_message(ErrorCode::IoFailure, e.what()));
    }
  }
  recording_.clear();
  scratch.episode_path.reset();
  scratch.phase = Phase::Idle;
  state_ = std::move(scratch);
  out.push_back(session_state_json(state_));
  return out;
}

json Session::state_message() const { return session_state_json(state_); }

std::vector<SchedulerEvent> Session::take_scheduler_events() { return std::exchange(events_, {}); }

}  // namespace h2r
