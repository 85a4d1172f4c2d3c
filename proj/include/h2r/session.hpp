#pragma once

// One teleoperation session: calibration, live retargeting through the
// smoother and serial scheduler into the simulated arm, and recording.
// Single writer; messages are applied in arrival order.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "h2r/calibration.hpp"
#include "h2r/control.hpp"
#include "h2r/episode.hpp"
#include "h2r/protocol.hpp"
#include "h2r/retarget.hpp"
#include "h2r/retrieval.hpp"
#include "h2r/simulator.hpp"

namespace h2r {

enum class Phase { Idle, Calibrating, Live, Recording };
std::string_view to_string(Phase phase);

struct SessionConfig {
  double eta = 1.0;
  SmoothingConfig smoothing;
  SchedulerConfig scheduler;
  TrackedPointStrategy strategy = TrackedPointStrategy::IndexMcp;
  GripperConfig gripper;
  DwellConfig dwell;
  SimArmConfig arm;
  Pose arm_home = default_rig().robot_initial;
  EpisodeSource source = EpisodeSource::Sim;
  // Dwell captures closer than this to an already captured anchor are ignored.
  double anchor_min_separation = 0.02;  // m

  // Throws BadConfig.
  void validate() const;
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

using EpisodeWriter = std::function<void(const std::filesystem::path&, const EpisodeManifest&,
                                         const std::vector<EpisodeRecord>&)>;

struct SessionOptions {
  SessionConfig config;
  std::filesystem::path record_dir = ".";
  EpisodeWriter writer;  // empty: write_episode_file
  std::shared_ptr<const KnnIndex> index;
  std::uint64_t first_episode_seq = 0;
  bool keep_scheduler_events = false;
};

// Everything a message can change. Copied before each message and committed
// only if the message is accepted.
struct SessionState {
  Phase phase = Phase::Idle;
  protocol::CalibSide side = protocol::CalibSide::Human;
  SessionConfig config;

  std::array<std::optional<Vec3>, 3> human_slots;
  std::array<std::optional<Vec3>, 3> robot_slots;
  std::optional<Pose> robot_initial;
  DwellDetector dwell;
  std::optional<SharedMap> map;
  std::optional<RetargetContext> context;  // set once references are latched

  std::optional<HandSample> last_sample;
  std::optional<Pose> smoothed;
  GripperState gripper;
  SerialScheduler scheduler;
  std::optional<RobotCommand> arm_target;
  SimArmState arm;
  std::optional<std::int64_t> clock_ns;
  std::int64_t last_end_to_end_ns = 0;

  std::optional<std::string> episode_path;
  std::string task_name;
  std::optional<SceneSummary> scene;
  std::int64_t record_started_at = 0;
  std::uint64_t episode_seq = 0;
  std::uint64_t frames_recorded = 0;

  std::size_t captured() const;
  bool calibration_complete() const;
  friend bool operator==(const SessionState&, const SessionState&) = default;
};

class Session {
 public:
  explicit Session(SessionOptions options = {});

  // Never throws for bad input: rejected messages produce one `error`
  // message and leave the state untouched.
  std::vector<nlohmann::json> handle_message(const nlohmann::json& msg);
  std::vector<nlohmann::json> handle(const protocol::Inbound& msg);

  // End of session: an open recording is written and the session returns to Idle.
  std::vector<nlohmann::json> close();

  const SessionState& state() const { return state_; }
  Phase phase() const { return state_.phase; }
  const std::vector<EpisodeRecord>& recording() const { return recording_; }
  nlohmann::json state_message() const;

  // Scheduler events accumulated since the last call (only with keep_scheduler_events).
  std::vector<SchedulerEvent> take_scheduler_events();

 private:
  SessionOptions options_;
  SessionState state_;
  std::vector<EpisodeRecord> recording_;
  std::vector<SchedulerEvent> events_;
};

nlohmann::json session_state_json(const SessionState& state);

}  // namespace h2r
