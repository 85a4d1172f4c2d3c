#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "h2r/calibration.hpp"
#include "h2r/retarget.hpp"

namespace h2r {

inline constexpr int kEpisodeSchemaVersion = 1;
inline constexpr const char* kEpisodeExtension = ".h2r.jsonl";

enum class EpisodeSource { Sim, Live };

// Optional first-frame scene summary (any grid of reals, row-major).
struct SceneSummary {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  friend bool operator==(const SceneSummary&, const SceneSummary&) = default;
};

struct EpisodeManifest {
  int schema_version = kEpisodeSchemaVersion;
  std::string task_name;
  EpisodeSource source = EpisodeSource::Sim;
  double eta = 1.0;
  AnchorSet human_anchors;
  AnchorSet robot_anchors;
  std::int64_t created_at = 0;  // ns
  std::int64_t frame_count = 0;
  // Rotation references and pipeline settings needed to re-run retargeting.
  Pose robot_initial;
  Rot3 hand_reference;  // M_h^0
  TrackedPointStrategy tracked_point = TrackedPointStrategy::IndexMcp;
  GripperConfig gripper;
  std::optional<SceneSummary> scene;

  friend bool operator==(const EpisodeManifest&, const EpisodeManifest&) = default;
};

struct ArmBlock {
  std::array<double, 3> position{};
  std::array<double, 9> rotation{};  // row-major
  double gripper = 0.0;
  friend bool operator==(const ArmBlock&, const ArmBlock&) = default;
};

struct EpisodeRecord {
  std::int64_t timestamp_ns = 0;
  std::array<double, 16> hand_transform{};  // row-major 4x4
  std::array<std::array<double, 3>, kJointCount> hand_keypoints{};
  ArmBlock robot_state;
  std::array<double, 7> joint_velocity{};
  ArmBlock action;
  std::int64_t frame_index = 0;
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

// Conversions between records and pipeline types.
std::array<double, 16> to_transform(const Pose& pose);
ArmBlock to_arm_block(const Pose& pose, double gripper);
HandSample hand_sample_of(const EpisodeRecord& record);
RobotCommand action_of(const EpisodeRecord& record);
// 1 open, 0 closed.
double gripper_command_value(const GripperState& g);

// Retargeting context captured in a manifest.
RetargetContext retarget_context_of(const EpisodeManifest& manifest);

// Throws InvariantViolation (with record index) or IoFailure. Sets frame_count
// to records.size(). Returns bytes written.
std::size_t write_episode(const EpisodeManifest& manifest, const std::vector<EpisodeRecord>& records,
                          std::ostream& sink);
std::size_t write_episode_file(const EpisodeManifest& manifest,
                               const std::vector<EpisodeRecord>& records,
                               const std::filesystem::path& path);

struct Episode {
  EpisodeManifest manifest;
  std::vector<EpisodeRecord> records;
};

// Line numbers in errors are 1-based with the manifest on line 1.
Episode read_episode(std::istream& source);
Episode read_episode_file(const std::filesystem::path& path);

// The manifest line alone; parse errors as read_episode.
EpisodeManifest read_manifest_json(const std::string& line);
std::string manifest_json(const EpisodeManifest& manifest);

struct FrameRange {
  std::int64_t min = 200;
  std::int64_t max = 600;
};

struct EpisodeFlag {
  std::string path;
  std::int64_t frames = 0;
  std::string reason;  // "below_range" | "above_range"
};

struct EpisodeStats {
  std::size_t episode_count = 0;
  std::size_t total_frames = 0;
  // Bucket lower bound (multiples of 100 frames) -> episodes.
  std::map<std::int64_t, std::size_t> frame_histogram;
  std::map<std::string, std::size_t> per_task;
  std::vector<EpisodeFlag> flagged;
  // path -> error message for unreadable files.
  std::vector<std::pair<std::string, std::string>> errors;
};

// Scans `dir` for *.h2r.jsonl files. Per-file errors are collected, not thrown.
EpisodeStats episode_stats(const std::filesystem::path& dir, FrameRange range = {});

std::vector<std::filesystem::path> list_episodes(const std::filesystem::path& dir);

}  // namespace h2r
