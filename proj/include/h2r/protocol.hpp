#pragma once

// Session wire protocol: one JSON object per WebSocket text frame, tagged by
// a "type" field. Numbers are doubles; timestamps are integer nanoseconds.

#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "h2r/calibration.hpp"
#include "h2r/control.hpp"
#include "h2r/episode.hpp"
#include "h2r/error.hpp"
#include "h2r/retarget.hpp"
#include "h2r/retrieval.hpp"
#include "h2r/simulator.hpp"

namespace h2r::protocol {

using nlohmann::json;

enum class CalibSide { Human, Robot };

struct HandSampleMsg {
  HandSample sample;
};
struct CalibrateBeginMsg {
  CalibSide side = CalibSide::Human;
};
struct AnchorPointMsg {
  std::size_t label = 0;  // 0..2 for a0..a2
  Vec3 xyz;
};
struct RobotAnchorConfigMsg {
  AnchorSet anchors;
  Pose initial_pose;
};
struct GoLiveMsg {};
struct RecordStartMsg {
  std::string task_name;
  std::optional<SceneSummary> scene;
};
struct RecordStopMsg {};
struct SetConfigMsg {
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<double> latency_budget_ms;
  std::optional<TrackedPointStrategy> strategy;
};
struct KnnQueryMsg {
  SceneSummary scene;
  std::size_t n = kDefaultNeighbors;
};

using Inbound = std::variant<HandSampleMsg, CalibrateBeginMsg, AnchorPointMsg, RobotAnchorConfigMsg,
                             GoLiveMsg, RecordStartMsg, RecordStopMsg, SetConfigMsg, KnnQueryMsg>;

// Throws Error(BadMessage) for unknown types or malformed payloads and
// Error(InvalidRotation) for bad rotation blocks.
Inbound parse_inbound(const json& msg);
// Inverse of parse_inbound, used by tools and tests that drive a session.
json to_json(const Inbound& msg);

std::string_view type_name(const Inbound& msg);
std::string_view to_string(CalibSide side);

// Pose on the wire: {"position":[3], "quaternion":[w,x,y,z], "rotation":[9]}.
// On input either "rotation" or "quaternion" is accepted.
json pose_json(const Pose& pose);
Pose parse_pose(const json& j);

json vec3_json(Vec3 v);
Vec3 parse_vec3(const json& j, const char* what);

json scene_json(const SceneSummary& scene);
SceneSummary parse_scene(const json& j);

json error_message(ErrorCode code, const std::string& detail);
json anchor_captured_message(std::size_t label, Vec3 xyz);
json robot_state_message(std::int64_t t_ns, const SimArmState& arm);
json telemetry_message(std::int64_t t_ns, const SchedulerStats& stats, bool in_flight, bool pending);
json knn_result_message(const KnnResult& result);

std::string anchor_label(std::size_t label);

}  // namespace h2r::protocol
