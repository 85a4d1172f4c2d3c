#include "h2r/commands.hpp"

#include <csignal>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "h2r/error.hpp"
#include "h2r/retrieval.hpp"
#include "h2r/ws_server.hpp"

namespace h2r {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<protocol::Inbound> calibration_messages(const AnchorSet& human, const AnchorSet& robot,
                                                    const Pose& robot_initial) {
  return {protocol::RobotAnchorConfigMsg{robot, robot_initial},
          protocol::CalibrateBeginMsg{protocol::CalibSide::Human},
          protocol::AnchorPointMsg{0, human.a0},
          protocol::AnchorPointMsg{1, human.a1},
          protocol::AnchorPointMsg{2, human.a2}};
}

SceneSummary scripted_scene(const Rig& rig, const HandStreamSpec& spec) {
  constexpr std::size_t kSide = 16;
  constexpr double kSigma = 0.08;
  const CalibrationFrame frame = build_frame(rig.human);
  struct Bump {
    Mu at;
    double height;
  };
  std::vector<Bump> bumps;
  if (const auto* pp = std::get_if<PickPlaceParams>(&spec)) {
    bumps.push_back({project_mu(pp->pick, frame), 1.0});
    bumps.push_back({project_mu(pp->place, frame), 0.5});
  } else if (const auto* lp = std::get_if<LissajousParams>(&spec)) {
    bumps.push_back({project_mu(lp->center, frame), 1.0});
  } else {
    throw Error(ErrorCode::BadConfig, "scenes exist for scripted streams only");
  }
  SceneSummary scene{kSide, kSide, std::vector<double>(kSide * kSide, 0.0)};
  for (std::size_t r = 0; r < kSide; ++r) {
    for (std::size_t c = 0; c < kSide; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / kSide;
      const double y = (static_cast<double>(r) + 0.5) / kSide;
      double v = 0.0;
      for (const auto& b : bumps) {
        const double d2 = (x - b.at.x) * (x - b.at.x) + (y - b.at.y) * (y - b.at.y);
        v += b.height * std::exp(-d2 / (2.0 * kSigma * kSigma));
      }
      scene.values[r * kSide + c] = v;
    }
  }
  return scene;
}

namespace {

// Session whose episode writer keeps the recording in memory.
struct CapturingSession {
  std::optional<Episode> episode;
  Session session;
  SessionRun run;

  explicit CapturingSession(const SessionConfig& config)
      : session([&] {
          SessionOptions o;
          o.config = config;
          o.record_dir = "";
          o.writer = [this](const std::filesystem::path&, const EpisodeManifest& m,
                            const std::vector<EpisodeRecord>& r) {
            Episode ep{m, r};
            ep.manifest.frame_count = static_cast<std::int64_t>(r.size());
            episode = std::move(ep);
          };
          return o;
        }()) {}

  void send(const protocol::Inbound& msg) {
    auto out = session.handle(msg);
    for (auto& m : out) {
      if (m["type"] == "error") {
        throw Error(ErrorCode::ProtocolViolation, std::string(protocol::type_name(msg)) + " rejected: " +
                                                      m["code"].get<std::string>() + ": " +
                                                      m["detail"].get<std::string>());
      }
      run.outbound.push_back(std::move(m));
    }
  }

  SessionRun finish() {
    run.episode = std::move(episode);
    return std::move(run);
  }
};

}  // namespace

SessionRun record_scripted(const RecordRequest& req) {
  if (req.frames < 1) throw Error(ErrorCode::BadConfig, "frames must be >= 1");
  const Rig rig = default_rig();
  HandStreamSpec spec;
  if (req.script == "pick_place") {
    spec = default_pick_place(rig, req.variant);
  } else if (req.script == "lissajous") {
    spec = default_lissajous(rig);
  } else {
    throw Error(ErrorCode::BadConfig, "unknown script '" + req.script + "'");
  }
  const HandStream stream(spec);

  CapturingSession cs(req.config);
  for (const auto& m : calibration_messages(rig.human, rig.robot, rig.robot_initial)) cs.send(m);
  cs.send(protocol::RecordStartMsg{req.task.empty() ? req.script : req.task, scripted_scene(rig, spec)});
  for (std::int64_t k = 0; k < req.frames; ++k) {
    const double t = static_cast<double>(tick_time_ns(k)) * 1e-9;
    cs.send(protocol::HandSampleMsg{stream.next(t)});
  }
  cs.send(protocol::RecordStopMsg{});
  return cs.finish();
}

SessionRun replay_episode(const std::filesystem::path& path, double speed,
                          const std::optional<std::string>& record_task) {
  if (!(speed > 0.0) || !std::isfinite(speed)) throw Error(ErrorCode::BadConfig, "speed must be > 0");
  const EpisodeManifest mf = read_calibration(path);
  SessionConfig config;
  config.eta = mf.eta;
  config.strategy = mf.tracked_point;
  config.gripper = mf.gripper;
  config.source = mf.source;
  config.arm_home = mf.robot_initial;

  HandStream stream(ReplayParams{path.string(), speed});
  CapturingSession cs(config);
  for (const auto& m : calibration_messages(mf.human_anchors, mf.robot_anchors, mf.robot_initial)) cs.send(m);
  if (record_task) cs.send(protocol::RecordStartMsg{*record_task, mf.scene});
  std::optional<std::int64_t> last;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(tick_time_ns(k)) * 1e-9;
    if (t >= stream.duration()) break;
    HandSample s = stream.next(t);
    // Slowed replays repeat a sample across ticks; only new samples are sent.
    if (last && s.t_ns <= *last) continue;
    last = s.t_ns;
    cs.send(protocol::HandSampleMsg{std::move(s)});
  }
  if (record_task) cs.send(protocol::RecordStopMsg{});
  return cs.finish();
}

std::vector<TimedCommand> retarget_offline(const EpisodeManifest& calibration,
                                           const std::vector<HandSample>& samples) {
  const RetargetContext ctx = retarget_context_of(calibration);
  std::vector<TimedCommand> out;
  out.reserve(samples.size());
  GripperState gripper;
  for (const auto& s : samples) {
    RobotCommand c = retarget_step(s, ctx, gripper);
    gripper = c.gripper;
    out.push_back({s.t_ns, std::move(c)});
  }
  return out;
}

namespace {

bool is_episode_path(const std::filesystem::path& p) {
  return p.filename().string().ends_with(kEpisodeExtension);
}

}  // namespace

std::vector<HandSample> read_hand_samples(const std::filesystem::path& path) {
  if (is_episode_path(path)) {
    std::vector<HandSample> out;
    for (const auto& r : read_episode_file(path).records) out.push_back(hand_sample_of(r));
    return out;
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<HandSample> out;
  std::string text;
  std::int64_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedLine, "not JSON", line);
    try {
      const auto msg = protocol::parse_inbound(j);
      const auto* hs = std::get_if<protocol::HandSampleMsg>(&msg);
      if (!hs) throw Error(ErrorCode::MalformedLine, "expected hand_sample", line);
      out.push_back(hs->sample);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedLine) throw;
      throw Error(ErrorCode::MalformedLine, e.detail(), line);
    }
  }
  return out;
}

EpisodeManifest read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string first;
  if (!std::getline(in, first)) throw Error(ErrorCode::MalformedLine, "empty calibration file", 1);
  return read_manifest_json(first);
}

ordered_json command_json(const TimedCommand& c) {
  ordered_json j;
  j["t_ns"] = c.t_ns;
  j["position"] = {c.command.position.x, c.command.position.y, c.command.position.z};
  j["rotation"] = c.command.rotation.row_major();
  j["gripper"] = gripper_command_value(c.command.gripper);
  j["aperture"] = c.command.gripper.aperture;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

void write_error(std::ostream& err, const std::string& code, const std::string& detail,
                 std::optional<std::int64_t> index = std::nullopt) {
  ordered_json e;
  e["code"] = code;
  e["detail"] = detail;
  if (index) e["index"] = *index;
  err << ordered_json{{"error", e}}.dump() << '\n';
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  return out;
}

int serve(const ServerOptions& options, std::ostream& out) {
  // Signals are taken synchronously by a helper thread so stop() never runs
  // inside a signal handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  WsServer server(options);
  out << ordered_json{{"event", "listening"}, {"host", options.host}, {"port", server.port()}}.dump()
      << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.run();
  // Wake the waiter if run() returned for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hand-to-robot teleoperation retargeting engine", "h2r"};
  app.require_subcommand(1);

  ServerOptions serve_opts;
  double latency_ms = 200.0;
  std::string tracked = "mcp";
  std::string index_path;
  std::string record_dir = ".";
  auto* serve_cmd = app.add_subcommand("serve", "Run the WebSocket session server");
  serve_cmd->add_option("--port", serve_opts.port, "Listen port (0 picks a free one)");
  serve_cmd->add_option("--host", serve_opts.host, "Listen address");
  serve_cmd->add_option("--eta", serve_opts.session.config.eta, "Motion scale factor");
  serve_cmd->add_option("--latency-budget", latency_ms, "Queueing budget in ms (100-300)");
  serve_cmd->add_option("--tracked-point", tracked, "wrist | midpoint | mcp");
  serve_cmd->add_option("--index", index_path, "Feature index for knn_query");
  serve_cmd->add_option("--record-dir", record_dir, "Directory for recorded episodes");

  std::string episode_path;
  double speed = 1.0;
  std::string replay_out;
  std::string replay_record;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a recorded hand stream through a session");
  replay_cmd->add_option("--episode", episode_path)->required();
  replay_cmd->add_option("--speed", speed);
  replay_cmd->add_option("--out", replay_out, "Outbound messages as JSONL (default stdout)");
  replay_cmd->add_option("--record", replay_record, "Also record the replay to this episode file");

  std::string input_path, calib_path, output_path;
  auto* retarget_cmd = app.add_subcommand("retarget", "Offline batch retargeting of hand samples");
  retarget_cmd->add_option("--input", input_path)->required();
  retarget_cmd->add_option("--calib", calib_path)->required();
  retarget_cmd->add_option("--output", output_path)->required();

  RecordRequest record_req;
  std::string record_out;
  auto* record_cmd = app.add_subcommand("record", "Record a scripted demonstration");
  record_cmd->add_option("--script", record_req.script)->required()->check(CLI::IsMember({"lissajous", "pick_place"}));
  record_cmd->add_option("--out", record_out)->required();
  record_cmd->add_option("--frames", record_req.frames)->required();
  record_cmd->add_option("--task", record_req.task, "Task label (default: script name)");
  record_cmd->add_option("--variant", record_req.variant, "Layout variant for pick_place (0 = nominal)");
  record_cmd->add_option("--eta", record_req.config.eta);

  auto* knn_cmd = app.add_subcommand("knn", "Episode retrieval");
  knn_cmd->require_subcommand(1);
  std::string corpus_dir, features_out;
  auto* knn_build = knn_cmd->add_subcommand("build", "Index first-frame features of a corpus");
  knn_build->add_option("--corpus", corpus_dir)->required();
  knn_build->add_option("--out", features_out)->required();
  std::string query_index, scene_path;
  std::int64_t n = static_cast<std::int64_t>(kDefaultNeighbors);
  auto* knn_q = knn_cmd->add_subcommand("query", "Pick the demonstration for a scene");
  knn_q->add_option("--index", query_index)->required();
  knn_q->add_option("--scene", scene_path)->required();
  knn_q->add_option("--n", n);

  std::string validate_dir;
  FrameRange range;
  auto* validate_cmd = app.add_subcommand("validate", "Corpus statistics and checks");
  validate_cmd->add_option("--corpus", validate_dir)->required();
  validate_cmd->add_option("--min-frames", range.min);
  validate_cmd->add_option("--max-frames", range.max);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "Usage", e.what());
    return 2;
  }

  try {
    if (*serve_cmd) {
      serve_opts.session.config.scheduler.latency_budget = latency_ms * 1e-3;
      serve_opts.session.config.strategy = parse_tracked_point(tracked);
      serve_opts.session.config.validate();
      serve_opts.session.record_dir = record_dir;
      if (!index_path.empty()) {
        std::ifstream in(index_path);
        if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + index_path);
        serve_opts.session.index = std::make_shared<const KnnIndex>(index_build(read_features(in)));
      }
      return serve(serve_opts, out);
    }
    if (*replay_cmd) {
      const auto task = replay_record.empty()
                            ? std::nullopt
                            : std::optional<std::string>(read_calibration(episode_path).task_name);
      const SessionRun run = replay_episode(episode_path, speed, task);
      std::ofstream file;
      if (!replay_out.empty()) file = open_output(replay_out);
      std::ostream& sink = replay_out.empty() ? out : file;
      for (const auto& m : run.outbound) sink << m.dump() << '\n';
      if (!replay_record.empty() && run.episode) {
        write_episode_file(run.episode->manifest, run.episode->records, replay_record);
      }
      return 0;
    }
    if (*retarget_cmd) {
      const auto commands = retarget_offline(read_calibration(calib_path), read_hand_samples(input_path));
      std::ofstream file = open_output(output_path);
      for (const auto& c : commands) file << command_json(c).dump() << '\n';
      if (!file) throw Error(ErrorCode::IoFailure, "write to " + output_path + " failed");
      out << ordered_json{{"commands", commands.size()}, {"output", output_path}}.dump() << '\n';
      return 0;
    }
    if (*record_cmd) {
      const SessionRun run = record_scripted(record_req);
      const std::size_t bytes = write_episode_file(run.episode->manifest, run.episode->records, record_out);
      out << ordered_json{{"episode", record_out}, {"frames", run.episode->records.size()}, {"bytes", bytes}}.dump()
          << '\n';
      return 0;
    }
    if (*knn_build) {
      auto features = corpus_features(corpus_dir, GridEmbedder{});
      const KnnIndex index = index_build(features);
      std::ofstream file = open_output(features_out);
      write_features(features, file);
      out << ordered_json{{"indexed", index.size()}, {"dimension", index.dimension()}, {"embedder", "grid8"}}.dump()
          << '\n';
      return 0;
    }
    if (*knn_q) {
      std::ifstream in(query_index);
      if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + query_index);
      const KnnIndex index = index_build(read_features(in));
      if (n < 1) throw Error(ErrorCode::BadN, "n must be >= 1");
      KnnResult result;
      condition_lookup(read_scene_file(scene_path), GridEmbedder{}, index, static_cast<std::size_t>(n), &result);
      out << protocol::knn_result_message(result).dump() << '\n';
      return 0;
    }
    if (*validate_cmd) {
      if (!std::filesystem::is_directory(validate_dir)) {
        throw Error(ErrorCode::IoFailure, validate_dir + " is not a directory");
      }
      const EpisodeStats stats = episode_stats(validate_dir, range);
      ordered_json j;
      j["episodes"] = stats.episode_count;
      j["total_frames"] = stats.total_frames;
      j["range"] = {{"min", range.min}, {"max", range.max}};
      ordered_json hist = ordered_json::object();
      for (const auto& [bucket, count] : stats.frame_histogram) hist[std::to_string(bucket)] = count;
      j["frame_histogram"] = hist;
      j["per_task"] = stats.per_task;
      ordered_json flagged = ordered_json::array();
      for (const auto& f : stats.flagged) flagged.push_back({{"path", f.path}, {"frames", f.frames}, {"reason", f.reason}});
      j["flagged"] = flagged;
      // The stricter 300-frame floor is reported alongside the configured range.
      std::size_t below_300 = 0;
      for (const auto& path : list_episodes(validate_dir)) {
        try {
          if (read_episode_file(path).manifest.frame_count < 300) ++below_300;
        } catch (const Error&) {
        }
      }
      j["below_300_frames"] = below_300;
      ordered_json errors = ordered_json::array();
      for (const auto& [path, message] : stats.errors) errors.push_back({{"path", path}, {"error", message}});
      j["errors"] = errors;
      out << j.dump() << '\n';
      if (!stats.errors.empty()) {
        write_error(err, "CorruptEpisode", std::to_string(stats.errors.size()) + " unreadable episode(s)");
        return 1;
      }
      return 0;
    }
  } catch (const Error& e) {
    write_error(err, std::string(to_string(e.code())), e.detail(), e.index());
    return 1;
  } catch (const std::exception& e) {
    write_error(err, "IoFailure", e.what());
    return 1;
  }
  return 2;
}

}  // namespace h2r
