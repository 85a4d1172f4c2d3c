#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>

#include <json.hpp>

#include "h2r/episode.hpp"
#include "h2r/error.hpp"

namespace h2r {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Conversions

std::array<double, 16> to_transform(const Pose& pose) {
  const auto& r = pose.rotation.row_major();
  return {r[0], r[1], r[2], pose.position.x, r[3], r[4], r[5], pose.position.y,
          r[6], r[7], r[8], pose.position.z, 0.0,  0.0,  0.0,  1.0};
}

ArmBlock to_arm_block(const Pose& pose, double gripper) {
  return ArmBlock{{pose.position.x, pose.position.y, pose.position.z}, pose.rotation.row_major(), gripper};
}

double gripper_command_value(const GripperState& g) { return g.closed ? 0.0 : 1.0; }

HandSample hand_sample_of(const EpisodeRecord& r) {
  HandSample s;
  s.t_ns = r.timestamp_ns;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    s.keypoints.joints[i] = {r.hand_keypoints[i][0], r.hand_keypoints[i][1], r.hand_keypoints[i][2]};
  }
  const auto& m = r.hand_transform;
  s.transform.position = {m[3], m[7], m[11]};
  s.transform.rotation = Rot3::from_row_major({m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]});
  return s;
}

RobotCommand action_of(const EpisodeRecord& r) {
  RobotCommand c;
  c.position = {r.action.position[0], r.action.position[1], r.action.position[2]};
  c.rotation = Rot3::from_row_major(r.action.rotation);
  c.gripper.closed = r.action.gripper < 0.5;
  c.gripper.aperture = r.action.gripper;
  return c;
}

RetargetContext retarget_context_of(const EpisodeManifest& m) {
  RetargetContext ctx;
  ctx.map = pair_frames(build_frame(m.human_anchors), build_frame(m.robot_anchors), m.eta);
  ctx.m_h0 = m.hand_reference;
  ctx.m_r0 = m.robot_initial.rotation;
  ctx.map.p_basis = compute_basis_change(ctx.map, ctx.m_h0, ctx.m_r0);
  ctx.strategy = m.tracked_point;
  ctx.gripper = m.gripper;
  return ctx;
}

// ---------------------------------------------------------------------------
// Writer: fixed key order, 17 significant digits, LF line endings.

namespace {

class LineWriter {
 public:
  void raw(std::string_view s) { out_ += s; }
  void key(std::string_view k) {
    sep();
    out_ += '"';
    out_ += k;
    out_ += "\":";
    first_ = true;
  }
  void open_object() { sep(); out_ += '{'; first_ = true; }
  void close_object() { out_ += '}'; first_ = false; }
  void open_array() { sep(); out_ += '['; first_ = true; }
  void close_array() { out_ += ']'; first_ = false; }
  void number(double v) {
    sep();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out_ += buf;
    first_ = false;
  }
  void integer(std::int64_t v) {
    sep();
    out_ += std::to_string(v);
    first_ = false;
  }
  void string(std::string_view s) {
    sep();
    out_ += json(std::string(s)).dump();
    first_ = false;
  }
  template <std::size_t N>
  void numbers(const std::array<double, N>& a) {
    open_array();
    for (double v : a) number(v);
    close_array();
  }
  void vec3(Vec3 v) { numbers(std::array<double, 3>{v.x, v.y, v.z}); }
  std::string take() { return std::move(out_); }

 private:
  // Emits a comma before every element except the first in a container or
  // the value directly after a key.
  void sep() {
    if (!first_) out_ += ',';
    first_ = false;
  }
  std::string out_;
  bool first_ = true;
};

void write_anchors(LineWriter& w, const AnchorSet& a) {
  w.open_object();
  w.key("a0"); w.vec3(a.a0);
  w.key("a1"); w.vec3(a.a1);
  w.key("a2"); w.vec3(a.a2);
  w.close_object();
}

void write_arm(LineWriter& w, const ArmBlock& b) {
  w.open_object();
  w.key("position"); w.numbers(b.position);
  w.key("rotation"); w.numbers(b.rotation);
  w.key("gripper"); w.number(b.gripper);
  w.close_object();
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Returns an empty string when valid, else the violated invariant.
std::string record_violation(const EpisodeRecord& r) {
  const auto& t = r.hand_transform;
  if (!all_finite(t)) return "hand_transform not finite";
  if (!is_rotation(Mat3{{t[0], t[1], t[2], t[4], t[5], t[6], t[8], t[9], t[10]}})) {
    return "hand_transform rotation block is not a proper rotation";
  }
  if (t[12] != 0.0 || t[13] != 0.0 || t[14] != 0.0 || t[15] != 1.0) {
    return "hand_transform bottom row must be 0 0 0 1";
  }
  for (const auto& k : r.hand_keypoints) {
    if (!all_finite(k)) return "hand_keypoints not finite";
  }
  for (const ArmBlock* b : {&r.robot_state, &r.action}) {
    if (!all_finite(b->position) || !std::isfinite(b->gripper)) return "arm block not finite";
    if (!is_rotation(Mat3{b->rotation})) return "arm rotation block is not a proper rotation";
  }
  if (!all_finite(r.joint_velocity)) return "joint_velocity not finite";
  return {};
}

}  // namespace

std::string manifest_json(const EpisodeManifest& m) {
  LineWriter w;
  w.open_object();
  w.key("kind"); w.string("manifest");
  w.key("schema_version"); w.integer(m.schema_version);
  w.key("task_name"); w.string(m.task_name);
  w.key("source"); w.string(m.source == EpisodeSource::Sim ? "sim" : "live");
  w.key("eta"); w.number(m.eta);
  w.key("anchors");
  w.open_object();
  w.key("human"); write_anchors(w, m.human_anchors);
  w.key("robot"); write_anchors(w, m.robot_anchors);
  w.close_object();
  w.key("created_at"); w.integer(m.created_at);
  w.key("frame_count"); w.integer(m.frame_count);
  w.key("robot_initial_pose");
  w.open_object();
  w.key("position"); w.vec3(m.robot_initial.position);
  w.key("rotation"); w.numbers(m.robot_initial.rotation.row_major());
  w.close_object();
  w.key("hand_reference_rotation"); w.numbers(m.hand_reference.row_major());
  w.key("tracked_point"); w.string(to_string(m.tracked_point));
  w.key("gripper");
  w.open_object();
  w.key("d_close"); w.number(m.gripper.d_close);
  w.key("d_open"); w.number(m.gripper.d_open);
  w.key("hysteresis"); w.number(m.gripper.hysteresis);
  w.close_object();
  if (m.scene) {
    w.key("scene");
    w.open_object();
    w.key("rows"); w.integer(static_cast<std::int64_t>(m.scene->rows));
    w.key("cols"); w.integer(static_cast<std::int64_t>(m.scene->cols));
    w.key("values");
    w.open_array();
    for (double v : m.scene->values) w.number(v);
    w.close_array();
    w.close_object();
  }
  w.close_object();
  return w.take();
}

namespace {

std::string record_json(const EpisodeRecord& r) {
  LineWriter w;
  w.open_object();
  w.key("kind"); w.string("record");
  w.key("timestamp_ns"); w.integer(r.timestamp_ns);
  w.key("hand_transform"); w.numbers(r.hand_transform);
  w.key("hand_keypoints");
  w.open_array();
  for (const auto& k : r.hand_keypoints) w.numbers(k);
  w.close_array();
  w.key("robot_state"); write_arm(w, r.robot_state);
  w.key("joint_velocity"); w.numbers(r.joint_velocity);
  w.key("action"); write_arm(w, r.action);
  w.key("frame_index"); w.integer(r.frame_index);
  w.close_object();
  return w.take();
}

}  // namespace

std::size_t write_episode(const EpisodeManifest& manifest, const std::vector<EpisodeRecord>& records,
                          std::ostream& sink) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string why = record_violation(records[i]);
    if (!why.empty()) {
      throw Error(ErrorCode::InvariantViolation, why, static_cast<std::int64_t>(i));
    }
    if (i > 0 && records[i].timestamp_ns <= records[i - 1].timestamp_ns) {
      throw Error(ErrorCode::InvariantViolation, "timestamps must strictly increase",
                  static_cast<std::int64_t>(i));
    }
  }
  if (!std::isfinite(manifest.eta) || !(manifest.eta > 0.0)) {
    throw Error(ErrorCode::InvariantViolation, "manifest eta must be positive");
  }

  EpisodeManifest m = manifest;
  m.frame_count = static_cast<std::int64_t>(records.size());
  std::size_t bytes = 0;
  auto emit = [&](const std::string& line) {
    sink.write(line.data(), static_cast<std::streamsize>(line.size()));
    sink.put('\n');
    bytes += line.size() + 1;
  };
  emit(manifest_json(m));
  for (const auto& r : records) emit(record_json(r));
  sink.flush();
  if (!sink) throw Error(ErrorCode::IoFailure, "episode sink write failed");
  return bytes;
}

std::size_t write_episode_file(const EpisodeManifest& manifest,
                               const std::vector<EpisodeRecord>& records,
                               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  return write_episode(manifest, records, out);
}

// ---------------------------------------------------------------------------
// Reader

namespace {

[[noreturn]] void malformed(std::int64_t line, const std::string& why) {
  throw Error(ErrorCode::MalformedLine, why, line);
}

template <std::size_t N>
std::array<double, N> numbers_of(const json& j, const char* key, std::int64_t line) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != N) {
    malformed(line, std::string("field '") + key + "' must be an array of " + std::to_string(N));
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!(*it)[i].is_number()) malformed(line, std::string("field '") + key + "' has a non-number");
    out[i] = (*it)[i].get<double>();
  }
  return out;
}

const json& field(const json& j, const char* key, std::int64_t line) {
  const auto it = j.find(key);
  if (it == j.end()) malformed(line, std::string("missing field '") + key + "'");
  return *it;
}

double number_of(const json& j, const char* key, std::int64_t line) {
  const json& v = field(j, key, line);
  if (!v.is_number()) malformed(line, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t integer_of(const json& j, const char* key, std::int64_t line) {
  const json& v = field(j, key, line);
  if (!v.is_number_integer()) malformed(line, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string string_of(const json& j, const char* key, std::int64_t line) {
  const json& v = field(j, key, line);
  if (!v.is_string()) malformed(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

Vec3 vec3_of(const json& j, const char* key, std::int64_t line) {
  const auto a = numbers_of<3>(j, key, line);
  return {a[0], a[1], a[2]};
}

AnchorSet anchors_of(const json& j, std::int64_t line) {
  if (!j.is_object()) malformed(line, "anchors must be objects");
  return {vec3_of(j, "a0", line), vec3_of(j, "a1", line), vec3_of(j, "a2", line)};
}

Rot3 rotation_of(const json& j, const char* key, std::int64_t line) {
  try {
    return Rot3::from_row_major(numbers_of<9>(j, key, line));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedLine) throw;
    throw Error(ErrorCode::InvariantViolation, std::string(key) + ": " + e.detail(), line);
  }
}

ArmBlock arm_of(const json& j, std::int64_t line) {
  if (!j.is_object()) malformed(line, "arm block must be an object");
  return ArmBlock{numbers_of<3>(j, "position", line), numbers_of<9>(j, "rotation", line),
                  number_of(j, "gripper", line)};
}

json parse_line(const std::string& text, std::int64_t line) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) malformed(line, "not a JSON object");
  return j;
}

EpisodeManifest manifest_of(const json& j) {
  constexpr std::int64_t line = 1;
  if (string_of(j, "kind", line) != "manifest") malformed(line, "first line must be the manifest");
  EpisodeManifest m;
  m.schema_version = static_cast<int>(integer_of(j, "schema_version", line));
  if (m.schema_version != kEpisodeSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionUnsupported,
                "schema_version " + std::to_string(m.schema_version), line);
  }
  m.task_name = string_of(j, "task_name", line);
  const std::string source = string_of(j, "source", line);
  if (source != "sim" && source != "live") malformed(line, "source must be sim or live");
  m.source = source == "sim" ? EpisodeSource::Sim : EpisodeSource::Live;
  m.eta = number_of(j, "eta", line);
  const json& anchors = field(j, "anchors", line);
  if (!anchors.is_object()) malformed(line, "anchors must be an object");
  m.human_anchors = anchors_of(field(anchors, "human", line), line);
  m.robot_anchors = anchors_of(field(anchors, "robot", line), line);
  m.created_at = integer_of(j, "created_at", line);
  m.frame_count = integer_of(j, "frame_count", line);
  const json& initial = field(j, "robot_initial_pose", line);
  if (!initial.is_object()) malformed(line, "robot_initial_pose must be an object");
  m.robot_initial = Pose{vec3_of(initial, "position", line), rotation_of(initial, "rotation", line)};
  m.hand_reference = rotation_of(j, "hand_reference_rotation", line);
  try {
    m.tracked_point = parse_tracked_point(string_of(j, "tracked_point", line));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedLine) throw;
    malformed(line, e.detail());
  }
  const json& g = field(j, "gripper", line);
  if (!g.is_object()) malformed(line, "gripper must be an object");
  m.gripper = {number_of(g, "d_close", line), number_of(g, "d_open", line),
               number_of(g, "hysteresis", line)};
  if (const auto it = j.find("scene"); it != j.end()) {
    if (!it->is_object()) malformed(line, "scene must be an object");
    SceneSummary s;
    s.rows = static_cast<std::size_t>(integer_of(*it, "rows", line));
    s.cols = static_cast<std::size_t>(integer_of(*it, "cols", line));
    const json& values = field(*it, "values", line);
    if (!values.is_array() || values.size() != s.rows * s.cols) {
      malformed(line, "scene values must hold rows * cols numbers");
    }
    for (const auto& v : values) {
      if (!v.is_number()) malformed(line, "scene values must be numbers");
      s.values.push_back(v.get<double>());
    }
    m.scene = std::move(s);
  }
  return m;
}

EpisodeRecord record_of(const json& j, std::int64_t line) {
  if (string_of(j, "kind", line) != "record") malformed(line, "expected a record line");
  EpisodeRecord r;
  r.timestamp_ns = integer_of(j, "timestamp_ns", line);
  r.hand_transform = numbers_of<16>(j, "hand_transform", line);
  const json& kp = field(j, "hand_keypoints", line);
  if (!kp.is_array() || kp.size() != kJointCount) malformed(line, "hand_keypoints must hold 21 joints");
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (!kp[i].is_array() || kp[i].size() != 3) malformed(line, "keypoint must be [x, y, z]");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!kp[i][c].is_number()) malformed(line, "keypoint coordinate must be a number");
      r.hand_keypoints[i][c] = kp[i][c].get<double>();
    }
  }
  r.robot_state = arm_of(field(j, "robot_state", line), line);
  r.joint_velocity = numbers_of<7>(j, "joint_velocity", line);
  r.action = arm_of(field(j, "action", line), line);
  r.frame_index = integer_of(j, "frame_index", line);
  return r;
}

}  // namespace

EpisodeManifest read_manifest_json(const std::string& text) { return manifest_of(parse_line(text, 1)); }

Episode read_episode(std::istream& source) {
  Episode ep;
  std::string text;
  std::int64_t line = 0;
  bool have_manifest = false;
  while (true) {
    text.clear();
    if (!std::getline(source, text)) break;
    ++line;
    if (source.eof()) malformed(line, "truncated line (missing newline)");
    if (!have_manifest) {
      ep.manifest = manifest_of(parse_line(text, line));
      have_manifest = true;
      continue;
    }
    EpisodeRecord r = record_of(parse_line(text, line), line);
    if (!ep.records.empty() && r.timestamp_ns <= ep.records.back().timestamp_ns) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  "timestamp " + std::to_string(r.timestamp_ns) + " does not increase", line);
    }
    if (const std::string why = record_violation(r); !why.empty()) {
      throw Error(ErrorCode::InvariantViolation, why, line);
    }
    ep.records.push_back(std::move(r));
  }
  if (!have_manifest) malformed(1, "empty episode file");
  if (ep.manifest.frame_count != static_cast<std::int64_t>(ep.records.size())) {
    malformed(1, "frame_count " + std::to_string(ep.manifest.frame_count) + " but " +
                     std::to_string(ep.records.size()) + " records");
  }
  return ep;
}

Episode read_episode_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_episode(in);
}

}  // namespace h2r
