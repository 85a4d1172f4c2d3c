#include "h2r/protocol.hpp"

#include <cmath>

#include "h2r/error.hpp"

namespace h2r::protocol {

namespace {

[[noreturn]] void bad(const std::string& detail) { throw Error(ErrorCode::BadMessage, detail); }

double number(const json& j, const char* what) {
  if (!j.is_number()) bad(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(std::string(what) + " must be finite");
  return v;
}

const json& member(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::size_t parse_label(const json& j) {
  if (!j.is_string()) bad("anchor label must be a string");
  const auto s = j.get<std::string>();
  if (s == "a0") return 0;
  if (s == "a1") return 1;
  if (s == "a2") return 2;
  bad("anchor label must be a0, a1 or a2");
}

}  // namespace

std::string anchor_label(std::size_t label) { return "a" + std::to_string(label); }

std::string_view to_string(CalibSide side) { return side == CalibSide::Human ? "human" : "robot"; }

json vec3_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) bad(std::string(what) + " must be [x, y, z]");
  return {number(j[0], what), number(j[1], what), number(j[2], what)};
}

json pose_json(const Pose& pose) {
  const auto q = pose.rotation.to_quaternion();
  return json{{"position", vec3_json(pose.position)},
              {"quaternion", json::array({q[0], q[1], q[2], q[3]})},
              {"rotation", pose.rotation.row_major()}};
}

Pose parse_pose(const json& j) {
  if (!j.is_object()) bad("pose must be an object");
  Pose p;
  p.position = parse_vec3(member(j, "position"), "position");
  if (const auto it = j.find("rotation"); it != j.end()) {
    if (!it->is_array() || it->size() != 9) bad("rotation must hold 9 numbers");
    std::array<double, 9> r{};
    for (std::size_t i = 0; i < 9; ++i) r[i] = number((*it)[i], "rotation");
    p.rotation = Rot3::from_row_major(r);
  } else if (const auto q = j.find("quaternion"); q != j.end()) {
    if (!q->is_array() || q->size() != 4) bad("quaternion must be [w, x, y, z]");
    p.rotation = Rot3::from_quaternion({number((*q)[0], "quaternion"), number((*q)[1], "quaternion"),
                                        number((*q)[2], "quaternion"), number((*q)[3], "quaternion")});
  } else {
    bad("pose needs rotation or quaternion");
  }
  return p;
}

json scene_json(const SceneSummary& s) {
  return json{{"rows", s.rows}, {"cols", s.cols}, {"values", s.values}};
}

SceneSummary parse_scene(const json& j) {
  if (!j.is_object()) bad("scene must be an object");
  const json& rows = member(j, "rows");
  const json& cols = member(j, "cols");
  if (!rows.is_number_integer() || !cols.is_number_integer() || rows.get<std::int64_t>() < 0 ||
      cols.get<std::int64_t>() < 0) {
    bad("scene rows/cols must be non-negative integers");
  }
  SceneSummary s;
  s.rows = rows.get<std::size_t>();
  s.cols = cols.get<std::size_t>();
  const json& values = member(j, "values");
  if (!values.is_array() || values.size() != s.rows * s.cols || s.rows == 0 || s.cols == 0) {
    bad("scene values must hold rows * cols numbers");
  }
  for (const auto& v : values) s.values.push_back(number(v, "scene value"));
  return s;
}

Inbound parse_inbound(const json& msg) {
  if (!msg.is_object()) bad("message must be a JSON object");
  const json& type_j = member(msg, "type");
  if (!type_j.is_string()) bad("type must be a string");
  const std::string type = type_j.get<std::string>();

  if (type == "hand_sample") {
    HandSampleMsg m;
    const json& t = member(msg, "t_ns");
    if (!t.is_number_integer()) bad("t_ns must be an integer");
    m.sample.t_ns = t.get<std::int64_t>();
    const json& kp = member(msg, "keypoints");
    if (!kp.is_array() || kp.size() != kJointCount) bad("keypoints must hold 21 joints");
    for (std::size_t i = 0; i < kJointCount; ++i) {
      // null marks a joint the tracker lost
      if (kp[i].is_null()) {
        m.sample.keypoints.joints[i] = {NAN, NAN, NAN};
        continue;
      }
      m.sample.keypoints.joints[i] = parse_vec3(kp[i], "keypoint");
    }
    if (!m.sample.keypoints[Joint::Wrist].finite()) bad("wrist keypoint is required");
    const json& tf = member(msg, "transform");
    if (!tf.is_array() || tf.size() != 16) bad("transform must hold 16 numbers");
    std::array<double, 16> t16{};
    for (std::size_t i = 0; i < 16; ++i) t16[i] = number(tf[i], "transform");
    m.sample.transform.position = {t16[3], t16[7], t16[11]};
    m.sample.transform.rotation =
        Rot3::from_row_major({t16[0], t16[1], t16[2], t16[4], t16[5], t16[6], t16[8], t16[9], t16[10]});
    return m;
  }
  if (type == "calibrate_begin") {
    CalibrateBeginMsg m;
    const std::string side = msg.value("side", std::string("human"));
    if (side == "human") m.side = CalibSide::Human;
    else if (side == "robot") m.side = CalibSide::Robot;
    else bad("side must be human or robot");
    return m;
  }
  if (type == "anchor_point") {
    return AnchorPointMsg{parse_label(member(msg, "label")), parse_vec3(member(msg, "xyz"), "xyz")};
  }
  if (type == "robot_anchor_config") {
    RobotAnchorConfigMsg m;
    m.anchors = {parse_vec3(member(msg, "a0"), "a0"), parse_vec3(member(msg, "a1"), "a1"),
                 parse_vec3(member(msg, "a2"), "a2")};
    m.initial_pose = parse_pose(member(msg, "initial_pose"));
    return m;
  }
  if (type == "go_live") return GoLiveMsg{};
  if (type == "record_start") {
    RecordStartMsg m;
    const json& name = member(msg, "task_name");
    if (!name.is_string() || name.get<std::string>().empty()) bad("task_name must be a non-empty string");
    m.task_name = name.get<std::string>();
    if (const auto it = msg.find("scene"); it != msg.end() && !it->is_null()) m.scene = parse_scene(*it);
    return m;
  }
  if (type == "record_stop") return RecordStopMsg{};
  if (type == "set_config") {
    SetConfigMsg m;
    if (const auto it = msg.find("eta"); it != msg.end()) m.eta = number(*it, "eta");
    if (const auto it = msg.find("alpha"); it != msg.end()) m.alpha = number(*it, "alpha");
    if (const auto it = msg.find("latency_budget_ms"); it != msg.end()) {
      m.latency_budget_ms = number(*it, "latency_budget_ms");
    }
    if (const auto it = msg.find("strategy"); it != msg.end()) {
      if (!it->is_string()) bad("strategy must be a string");
      try {
        m.strategy = parse_tracked_point(it->get<std::string>());
      } catch (const Error& e) {
        bad(e.detail());
      }
    }
    return m;
  }
  if (type == "knn_query") {
    KnnQueryMsg m;
    m.scene = parse_scene(member(msg, "scene"));
    if (const auto it = msg.find("n"); it != msg.end()) {
      if (!it->is_number_integer()) bad("n must be an integer");
      const auto n = it->get<std::int64_t>();
      if (n < 1) throw Error(ErrorCode::BadN, "n must be >= 1");
      m.n = static_cast<std::size_t>(n);
    }
    return m;
  }
  bad("unknown message type '" + type + "'");
}

std::string_view type_name(const Inbound& msg) {
  static constexpr std::string_view names[] = {"hand_sample", "calibrate_begin", "anchor_point",
                                               "robot_anchor_config", "go_live", "record_start",
                                               "record_stop", "set_config", "knn_query"};
  return names[msg.index()];
}

json to_json(const Inbound& msg) {
  json j{{"type", type_name(msg)}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HandSampleMsg>) {
          j["t_ns"] = m.sample.t_ns;
          json kp = json::array();
          for (const Vec3& v : m.sample.keypoints.joints) {
            kp.push_back(v.finite() ? vec3_json(v) : json(nullptr));
          }
          j["keypoints"] = std::move(kp);
          j["transform"] = to_transform(m.sample.transform);
        } else if constexpr (std::is_same_v<T, CalibrateBeginMsg>) {
          j["side"] = to_string(m.side);
        } else if constexpr (std::is_same_v<T, AnchorPointMsg>) {
          j["label"] = anchor_label(m.label);
          j["xyz"] = vec3_json(m.xyz);
        } else if constexpr (std::is_same_v<T, RobotAnchorConfigMsg>) {
          j["a0"] = vec3_json(m.anchors.a0);
          j["a1"] = vec3_json(m.anchors.a1);
          j["a2"] = vec3_json(m.anchors.a2);
          j["initial_pose"] = pose_json(m.initial_pose);
        } else if constexpr (std::is_same_v<T, RecordStartMsg>) {
          j["task_name"] = m.task_name;
          if (m.scene) j["scene"] = scene_json(*m.scene);
        } else if constexpr (std::is_same_v<T, SetConfigMsg>) {
          if (m.eta) j["eta"] = *m.eta;
          if (m.alpha) j["alpha"] = *m.alpha;
          if (m.latency_budget_ms) j["latency_budget_ms"] = *m.latency_budget_ms;
          if (m.strategy) j["strategy"] = to_string(*m.strategy);
        } else if constexpr (std::is_same_v<T, KnnQueryMsg>) {
          j["scene"] = scene_json(m.scene);
          j["n"] = m.n;
        }
      },
      msg);
  return j;
}

json error_message(ErrorCode code, const std::string& detail) {
  return json{{"type", "error"}, {"code", to_string(code)}, {"detail", detail}};
}

json anchor_captured_message(std::size_t label, Vec3 xyz) {
  return json{{"type", "anchor_captured"}, {"label", anchor_label(label)}, {"xyz", vec3_json(xyz)}};
}

json robot_state_message(std::int64_t t_ns, const SimArmState& arm) {
  return json{{"type", "robot_state"},
              {"t_ns", t_ns},
              {"pose", pose_json(arm.pose)},
              {"gripper", arm.gripper},
              {"pseudo_joints", arm.pseudo_joints}};
}

json telemetry_message(std::int64_t t_ns, const SchedulerStats& s, bool in_flight, bool pending) {
  return json{{"type", "telemetry"},
              {"t_ns", t_ns},
              {"queue_delay_ms", static_cast<double>(s.last_queue_delay_ns) * 1e-6},
              {"max_queue_delay_ms", static_cast<double>(s.max_queue_delay_ns) * 1e-6},
              {"drops", s.drops},
              {"stale", s.stale},
              {"dispatched", s.dispatched},
              {"in_flight", in_flight},
              {"pending", pending}};
}

json knn_result_message(const KnnResult& r) {
  json neighbors = json::array();
  for (const auto& n : r.neighbors) {
    neighbors.push_back({{"episode_id", n.episode_id}, {"task_label", n.task_label}, {"distance", n.distance}});
  }
  return json{{"type", "knn_result"},
              {"chosen_episode_id", r.chosen_episode_id},
              {"chosen_label", r.chosen_label},
              {"path", r.chosen_path},
              {"neighbors", std::move(neighbors)}};
}

}  // namespace h2r::protocol
