#pragma once

// Command-line tools. Each subcommand is also exposed as a function so tests
// can drive it in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "h2r/episode.hpp"
#include "h2r/protocol.hpp"
#include "h2r/session.hpp"
#include "h2r/simulator.hpp"

namespace h2r {

// Messages that calibrate a session from known anchors and go Live:
// robot_anchor_config, calibrate_begin(human), anchor_point a0..a2.
std::vector<protocol::Inbound> calibration_messages(const AnchorSet& human, const AnchorSet& robot,
                                                    const Pose& robot_initial);

// 16x16 grid with a bump at each scripted target, in human-frame (u, v) coordinates.
SceneSummary scripted_scene(const Rig& rig, const HandStreamSpec& spec);

struct RecordRequest {
  std::string script = "pick_place";  // "lissajous" | "pick_place"
  std::int64_t frames = 300;
  std::string task;  // defaults to the script name
  int variant = 0;
  SessionConfig config;
};

struct SessionRun {
  std::vector<nlohmann::json> outbound;  // every message the session emitted
  std::optional<Episode> episode;        // the recording, when one was made
};

// Scripted demonstration through a full session. Throws on any rejected message.
SessionRun record_scripted(const RecordRequest& request);

// Feeds a recorded hand channel through a session calibrated from the
// episode's manifest. With `record_task`, the replay is itself recorded.
SessionRun replay_episode(const std::filesystem::path& path, double speed,
                          const std::optional<std::string>& record_task = std::nullopt);

struct TimedCommand {
  std::int64_t t_ns = 0;
  RobotCommand command;
};

// Offline retargeting with the context stored in a manifest.
std::vector<TimedCommand> retarget_offline(const EpisodeManifest& calibration,
                                           const std::vector<HandSample>& samples);

// Hand samples from an episode file or from JSONL hand_sample messages.
std::vector<HandSample> read_hand_samples(const std::filesystem::path& path);
// Manifest from the first line of an episode or manifest file.
EpisodeManifest read_calibration(const std::filesystem::path& path);

nlohmann::ordered_json command_json(const TimedCommand& c);

// Returns the process exit code: 0 on success, 1 on a runtime error, 2 on a
// usage error. Errors are written to `err` as one JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace h2r
