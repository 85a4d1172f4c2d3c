// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "h2r/commands.hpp"
#include "h2r/retrieval.hpp"
#include "h2r/session.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace h2r;
using nlohmann::json;
using h2r::test::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// ---------------------------------------------------------------------------

Outcome retarget_identity() {
  Rng rng(1001);
  double worst = 0.0;
  bool rot_exact = true;
  for (int c = 0; c < 100; ++c) {
    const CalibrationFrame f =
        build_frame(test::random_anchors(rng, test::uniform(rng, 0.2, 0.6), test::uniform(rng, 0.2, 0.6)));
    const SharedMap map = pair_frames(f, f, 1.0);
    std::vector<Vec3> in(100), out(100);
    for (auto& p : in) p = test::random_vec(rng, -1.5, 1.5);
    map_positions(in, map, out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      worst = std::max(worst, distance(map_position(in[i], map), in[i]));
      worst = std::max(worst, distance(out[i], in[i]));
    }
    for (int r = 0; r < 100; ++r) {
      const Rot3 m_h0 = test::random_rotation(rng), m_r0 = test::random_rotation(rng);
      const SharedMap random_map =
          pair_frames(build_frame(test::random_anchors(rng, 0.4, 0.3)), build_frame(test::random_anchors(rng, 0.4, 0.3)), 1.0);
      const Rot3 p = compute_basis_change(random_map, m_h0, m_r0);
      rot_exact = rot_exact && map_rotation(m_h0, m_h0, m_r0, p) == m_r0;
    }
  }
  return {worst < 1e-12 && rot_exact,
          "10000 points, max |map(p) - p| " + fmt("%.2e", worst) + ", rotation reference exact: " +
              (rot_exact ? "yes" : "no")};
}

Outcome mu_eta_contract() {
  Rng rng(1002);
  double worst_local = 0.0, worst_scale = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double lx = test::uniform(rng, 0.2, 0.6), ly = test::uniform(rng, 0.2, 0.6);
    SharedMap m = pair_frames(build_frame(test::random_anchors(rng, lx, ly)),
                              build_frame(test::random_anchors(rng, lx, ly)), 1.0);
    const Vec3 p = m.human.origin + test::random_vec(rng, -0.5, 0.5);
    const Mu mu = project_mu(p, m.human);

    // eta touches only the z coordinate, and scales it linearly.
    const Vec3 r1 = map_position(p, m) - m.robot.origin;
    m.eta = test::uniform(rng, 0.1, 5.0);
    const Vec3 r2 = map_position(p, m) - m.robot.origin;
    const double ez2 = dot(m.robot.ez, m.robot.ez);
    worst_local = std::max({worst_local, std::abs(dot(r2 - r1, m.robot.ex)), std::abs(dot(r2 - r1, m.robot.ey)),
                            std::abs(dot(r2, m.robot.ez) / ez2 - m.eta * mu.z)});
    // A point on the calibration plane is unaffected by eta.
    const Vec3 planar = m.human.origin + mu.x * m.human.ex + mu.y * m.human.ey;
    const Vec3 a = map_position(planar, m);
    m.eta = 1.0;
    worst_local = std::max(worst_local, distance(a, map_position(planar, m)));

    // Scaling an axis and the displacement along it together leaves mu unchanged.
    const double s = test::uniform(rng, 0.2, 5.0);
    CalibrationFrame f = m.human;
    const Vec3 d = p - f.origin;
    const Vec3 ux = f.ex / norm(f.ex), uy = f.ey / norm(f.ey);
    const Vec3 scaled = f.origin + d + (s - 1.0) * dot(d, ux) * ux + (s - 1.0) * dot(d, uy) * uy;
    f.ex = s * f.ex;
    f.ey = s * f.ey;
    const Mu mu_s = project_mu(scaled, f);
    worst_scale = std::max({worst_scale, std::abs(mu_s.x - mu.x), std::abs(mu_s.y - mu.y), std::abs(mu_s.z - mu.z)});
  }
  return {worst_local < 1e-9 && worst_scale < 1e-9,
          "10000 cases, eta locality " + fmt("%.2e", worst_local) + ", joint scaling " + fmt("%.2e", worst_scale)};
}

Outcome affine_oracle() {
  Rng rng(1003);
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const double lx = test::uniform(rng, 0.15, 0.8), ly = test::uniform(rng, 0.15, 0.8);
    const SharedMap m = pair_frames(build_frame(test::random_anchors(rng, lx, ly)),
                                    build_frame(test::random_anchors(rng, lx, ly)), test::uniform(rng, 0.2, 3.0));
    std::vector<Vec3> probes(12), images(12);
    for (auto& p : probes) p = test::random_vec(rng);
    for (std::size_t i = 0; i < probes.size(); ++i) images[i] = map_position(probes[i], m);
    const auto fit = test::fit_affine(probes, images);
    for (int k = 0; k < 20; ++k) {
      const Vec3 q = test::random_vec(rng, -2, 2);
      worst = std::max(worst, distance(map_position(q, m), fit.apply(q)));
    }
  }
  return {worst < 1e-6, "1000 calibrations, max deviation from fitted affine map " + fmt("%.2e", worst)};
}

Outcome conjugation_angle() {
  Rng rng(1004);
  double worst = 0.0;
  double worst_orth = 0.0;
  SharedMap m = pair_frames(build_frame(test::random_anchors(rng, 0.4, 0.3)),
                            build_frame(test::random_anchors(rng, 0.4, 0.3)), 1.0);
  for (int i = 0; i < 10000; ++i) {
    if (i % 100 == 0) {
      m = pair_frames(build_frame(test::random_anchors(rng, 0.4, 0.3)),
                      build_frame(test::random_anchors(rng, 0.4, 0.3)), 1.0);
    }
    const Rot3 m_h0 = test::random_rotation(rng), m_r0 = test::random_rotation(rng);
    const Rot3 p = compute_basis_change(m, m_h0, m_r0);
    const Rot3 m_ht = test::random_rotation(rng);
    const Rot3 m_rt = map_rotation(m_ht, m_h0, m_r0, p);
    const double robot_rel = test::angle_oracle(m_r0.inverse() * m_rt);
    const double hand_rel = test::angle_oracle(m_h0.inverse() * m_ht);
    worst = std::max(worst, std::abs(robot_rel - hand_rel));
    worst_orth = std::max(worst_orth, orthonormality_residual(m_rt.matrix()));
  }
  return {worst < 1e-9 && worst_orth < 1e-12,
          "10000 pairs, max angle difference " + fmt("%.2e", worst) + " rad"};
}

// Audits the scheduler event log of a simulated 30 Hz session.
struct LatencyAudit {
  std::size_t dispatched = 0;
  std::size_t stale = 0;
  std::int64_t max_delay = 0;
  int max_in_flight = 0;
  bool exec_ok = true;
};

LatencyAudit run_latency_session(double budget_s, double exec_s, double seconds) {
  SessionConfig cfg;
  cfg.scheduler.latency_budget = budget_s;
  cfg.arm.exec_latency = exec_s;
  SessionOptions opt;
  opt.config = cfg;
  opt.keep_scheduler_events = true;
  Session session(opt);
  const Rig rig = default_rig();
  for (const auto& m : calibration_messages(rig.human, rig.robot, rig.robot_initial)) session.handle(m);
  auto params = default_lissajous(rig);
  params.pinch_period = 2.0;
  const HandStream stream(params);
  const auto frames = static_cast<std::int64_t>(seconds * kTickRate);
  for (std::int64_t k = 0; k < frames; ++k) {
    session.handle(protocol::HandSampleMsg{stream.next(static_cast<double>(tick_time_ns(k)) * 1e-9)});
  }

  LatencyAudit a;
  int in_flight = 0;
  std::map<std::uint64_t, std::int64_t> dispatch_time;
  const auto exec_ns = static_cast<std::int64_t>(std::llround(exec_s * 1e9));
  for (const auto& e : session.take_scheduler_events()) {
    switch (e.kind) {
      case SchedulerEventKind::Dispatched:
        ++a.dispatched;
        ++in_flight;
        a.max_delay = std::max(a.max_delay, e.t_ns - e.submitted_at);
        dispatch_time[e.ticket_id] = e.t_ns;
        break;
      case SchedulerEventKind::Completed:
        --in_flight;
        a.exec_ok = a.exec_ok && e.t_ns - dispatch_time.at(e.ticket_id) == exec_ns;
        break;
      case SchedulerEventKind::Stale:
        ++a.stale;
        break;
      case SchedulerEventKind::Dropped:
        break;
    }
    a.max_in_flight = std::max(a.max_in_flight, in_flight);
  }
  return a;
}

Outcome serial_latency() {
  Outcome o;
  std::string detail;
  struct Case {
    double budget, exec;
  };
  // The first case is the nominal one; the others vary the budget and overload the arm.
  for (const Case c : {Case{0.2, 0.05}, Case{0.1, 0.05}, Case{0.3, 0.05}, Case{0.1, 0.25}}) {
    const LatencyAudit a = run_latency_session(c.budget, c.exec, 60.0);
    const auto budget_ns = static_cast<std::int64_t>(std::llround(c.budget * 1e9));
    const bool ok = a.dispatched > 0 && a.max_delay <= budget_ns && a.max_in_flight <= 1 && a.exec_ok;
    o.pass = o.pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += "budget " + fmt("%.0f", c.budget * 1e3) + " ms exec " + fmt("%.0f", c.exec * 1e3) + " ms: " +
              std::to_string(a.dispatched) + " dispatched, max delay " + fmt("%.1f", a.max_delay * 1e-6) +
              " ms, max in flight " + std::to_string(a.max_in_flight);
  }
  o.detail = detail;
  return o;
}

// Error between the arm and the retargeted hand point while the scripted hand
// holds still (pick, grasp, place, return), after a settling time.
double closed_loop_error(double peak_speed, double settle_s) {
  const Rig rig = default_rig();
  SessionConfig cfg;
  Session session(SessionOptions{cfg, ".", {}, nullptr, 0, false});
  for (const auto& m : calibration_messages(rig.human, rig.robot, rig.robot_initial)) session.handle(m);
  PickPlaceParams params = default_pick_place(rig);
  params.peak_speed = peak_speed;
  const HandStream stream(params);
  const PickPlaceSchedule& sched = *stream.schedule();
  double worst = 0.0;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(tick_time_ns(k)) * 1e-9;
    if (t >= sched.duration()) break;
    const HandSample h = stream.next(t);
    const auto out = session.handle(protocol::HandSampleMsg{h});
    if (out.empty() || out[0]["type"] != "robot_state") return INFINITY;
    const auto& segs = sched.segments();
    for (std::size_t i = 1; i < segs.size(); ++i) {
      if (segs[i].hold() && t >= segs[i].t0 + settle_s && t < segs[i].t1) {
        const Vec3 target = map_position(select_tracked_point(h.keypoints, cfg.strategy), *session.state().map);
        worst = std::max(worst, distance(session.state().arm.pose.position, target));
      }
    }
  }
  return worst;
}

Outcome closed_loop() {
  const double fast = closed_loop_error(0.25, 0.5);
  const double slow = closed_loop_error(0.10, 0.5);
  return {fast < 0.005 && slow < 0.005, "steady-state error " + fmt("%.3f", fast * 1e3) + " mm at 0.25 m/s, " +
                                            fmt("%.3f", slow * 1e3) + " mm at 0.10 m/s"};
}

// --- episodes ---------------------------------------------------------------

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

struct ReadFailure {
  std::optional<ErrorCode> code;
  std::optional<std::int64_t> line;
};

ReadFailure try_read(const std::string& text) {
  std::istringstream is(text);
  try {
    read_episode(is);
  } catch (const Error& e) {
    return {e.code(), e.index()};
  }
  return {};
}

bool expect(const ReadFailure& f, ErrorCode code, std::int64_t line) { return f.code == code && f.line == line; }

Outcome episode_round_trip() {
  Rng rng(1007);
  std::size_t exact = 0, corruptions = 0, corruption_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = test::random_manifest(rng, i % 3 == 0);
    const auto records = test::random_records(rng, rng() % 40);
    std::ostringstream a, b;
    write_episode(m, records, a);
    write_episode(m, records, b);
    std::istringstream is(a.str());
    const Episode ep = read_episode(is);
    EpisodeManifest expected = m;
    expected.frame_count = static_cast<std::int64_t>(records.size());
    if (a.str() == b.str() && ep.manifest == expected && ep.records == records) ++exact;

    if (records.size() < 3) continue;
    const auto lines = split_lines(a.str());
    const auto n_lines = static_cast<std::int64_t>(lines.size());
    const auto k = static_cast<std::int64_t>(3 + rng() % (lines.size() - 2));  // a record line after the first
    auto check = [&](bool ok) {
      ++corruptions;
      corruption_ok += ok;
    };

    std::string truncated = a.str();
    truncated.resize(truncated.size() - 1 - rng() % (lines.back().size() / 2));
    check(expect(try_read(truncated), ErrorCode::MalformedLine, n_lines));

    auto dup = lines;
    json rec = json::parse(dup[static_cast<std::size_t>(k - 1)]);
    rec["timestamp_ns"] = json::parse(dup[static_cast<std::size_t>(k - 2)])["timestamp_ns"];
    dup[static_cast<std::size_t>(k - 1)] = rec.dump();
    check(expect(try_read(join_lines(dup)), ErrorCode::NonMonotonicTimestamp, k));

    auto garbage = lines;
    garbage[static_cast<std::size_t>(k - 1)] = garbage[static_cast<std::size_t>(k - 1)].substr(0, 10);
    check(expect(try_read(join_lines(garbage)), ErrorCode::MalformedLine, k));

    auto skew = lines;
    rec = json::parse(skew[static_cast<std::size_t>(k - 1)]);
    rec["action"]["rotation"][1] = 0.5;
    skew[static_cast<std::size_t>(k - 1)] = rec.dump();
    check(expect(try_read(join_lines(skew)), ErrorCode::InvariantViolation, k));

    auto missing = lines;
    missing.erase(missing.begin() + k - 1);
    check(expect(try_read(join_lines(missing)), ErrorCode::MalformedLine, 1));

    auto version = lines;
    json head = json::parse(version[0]);
    head["schema_version"] = 7;
    version[0] = head.dump();
    check(expect(try_read(join_lines(version)), ErrorCode::SchemaVersionUnsupported, 1));
  }
  return {exact == 1000 && corruption_ok == corruptions && corruptions > 0,
          std::to_string(exact) + "/1000 exact round trips, " + std::to_string(corruption_ok) + "/" +
              std::to_string(corruptions) + " corruptions located"};
}

// --- replay self-consistency ---------------------------------------------------

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "h2r");
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

Outcome self_consistency() {
  TempDir dir("h2r_acceptance_replay");
  double worst = 0.0;
  std::size_t compared = 0;
  bool ok = true;
  struct Run {
    const char* script;
    const char* eta;
    int variant;
  };
  for (const Run r : {Run{"pick_place", "1.0", 0}, Run{"pick_place", "1.5", 2}, Run{"lissajous", "0.7", 0}}) {
    const std::string ep = (dir.path / (std::string(r.script) + "_" + r.eta + ".h2r.jsonl")).string();
    const std::string cmds = ep + ".commands";
    ok = ok && cli({"record", "--script", r.script, "--frames", "300", "--eta", r.eta, "--variant",
                    std::to_string(r.variant), "--out", ep}) == 0;
    ok = ok && cli({"retarget", "--input", ep, "--calib", ep, "--output", cmds}) == 0;
    if (!ok) break;
    const Episode episode = read_episode_file(ep);
    std::ifstream in(cmds);
    std::size_t i = 0;
    for (std::string line; std::getline(in, line); ++i) {
      const json c = json::parse(line);
      if (i >= episode.records.size()) {
        ok = false;
        break;
      }
      const ArmBlock& a = episode.records[i].action;
      ok = ok && c["t_ns"] == episode.records[i].timestamp_ns && c["gripper"] == a.gripper;
      for (std::size_t j = 0; j < 3; ++j) worst = std::max(worst, std::abs(c["position"][j].get<double>() - a.position[j]));
      for (std::size_t j = 0; j < 9; ++j) worst = std::max(worst, std::abs(c["rotation"][j].get<double>() - a.rotation[j]));
      ++compared;
    }
    ok = ok && i == episode.records.size();
  }
  return {ok && worst <= 1e-9,
          std::to_string(compared) + " stored actions reproduced, max deviation " + fmt("%.2e", worst)};
}

// --- KNN ---------------------------------------------------------------------

std::vector<FeatureVector> knn_corpus(Rng& rng, std::size_t count, std::size_t dim, int labels) {
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = test::uniform(rng, -1, 1);
    out.push_back({std::move(v), "ep" + std::to_string(i), "task" + std::to_string(rng() % labels), ""});
  }
  return out;
}

bool same_as_oracle(const KnnIndex& index, const std::vector<FeatureVector>& corpus, const std::vector<double>& q,
                    std::size_t n) {
  const KnnResult r = knn_query(index, q, n);
  const auto oracle = test::brute_force_knn(corpus, q, n);
  if (r.neighbors.size() != oracle.ids.size() || r.chosen_episode_id != oracle.chosen) return false;
  for (std::size_t k = 0; k < oracle.ids.size(); ++k) {
    if (r.neighbors[k].episode_id != oracle.ids[k]) return false;
    if (std::abs(r.neighbors[k].distance - oracle.distances[k]) > 1e-12) return false;
  }
  return std::any_of(r.neighbors.begin(), r.neighbors.end(),
                     [&](const Neighbor& nb) { return nb.episode_id == r.chosen_episode_id; });
}

Outcome knn_exactness() {
  Rng rng(1009);
  std::size_t queries = 0, agree = 0;
  for (std::size_t size : {1, 7, 100, 1000, 10000}) {
    const auto corpus = knn_corpus(rng, size, 64, 4);
    const KnnIndex index = index_build(corpus);
    for (int q = 0; q < 12; ++q) {
      std::vector<double> query(64);
      if (q % 4 == 0) {
        query = corpus[rng() % size].values;  // exact hit
      } else {
        for (double& x : query) x = test::uniform(rng, -1, 1);
      }
      const std::size_t n = std::min<std::size_t>(size, 1 + rng() % 12);
      ++queries;
      agree += same_as_oracle(index, corpus, query, n);
    }
  }

  // Label-count ties. Entries sit at increasing angles from the query so the
  // ranking is known; the tied label owning the nearest neighbour must win.
  std::size_t ties = 0, ties_ok = 0;
  auto at = [](double a) { return std::vector<double>{std::cos(a), std::sin(a), 0.0}; };
  const std::vector<std::pair<std::string, std::string>> patterns{
      {"BAAB", "B"}, {"AABB", "A"}, {"ABAB", "A"}, {"BABA", "B"}, {"ABBA", "A"}, {"ABCABC", "A"}, {"CBACBA", "C"}};
  for (const auto& [pattern, winner] : patterns) {
    std::vector<FeatureVector> corpus;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      corpus.push_back({at(0.1 * static_cast<double>(i + 1)), "e" + std::to_string(i), std::string(1, pattern[i]), ""});
    }
    // Decoys beyond the neighbour set.
    corpus.push_back({at(2.5), "z0", "A", ""});
    corpus.push_back({at(2.6), "z1", "B", ""});
    const KnnIndex index = index_build(corpus);
    const KnnResult r = knn_query(index, {1, 0, 0}, pattern.size());
    const std::string expected_id = "e" + std::to_string(pattern.find(winner[0]));
    ++ties;
    ties_ok += r.chosen_label == winner && r.chosen_episode_id == expected_id &&
               same_as_oracle(index, corpus, {1, 0, 0}, pattern.size());
  }
  // Random tie constructions checked against the oracle.
  for (int t = 0; t < 200; ++t) {
    const int per_label = 1 + static_cast<int>(rng() % 3);
    std::string pattern = std::string(static_cast<std::size_t>(per_label), 'A') + std::string(static_cast<std::size_t>(per_label), 'B');
    std::shuffle(pattern.begin(), pattern.end(), rng);
    std::vector<FeatureVector> corpus;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      corpus.push_back({at(0.05 * static_cast<double>(i + 1)), "r" + std::to_string(rng()), std::string(1, pattern[i]), ""});
    }
    const KnnIndex index = index_build(corpus);
    const KnnResult r = knn_query(index, {1, 0, 0}, pattern.size());
    ++ties;
    ties_ok += r.chosen_label == std::string(1, pattern[0]) && r.chosen_episode_id == corpus[0].episode_id &&
               same_as_oracle(index, corpus, {1, 0, 0}, pattern.size());
  }
  // Identical vectors tie on distance and are ordered by id.
  {
    std::vector<FeatureVector> corpus{{at(0.3), "m", "B", ""}, {at(0.3), "k", "A", ""}, {at(0.3), "q", "A", ""}};
    const KnnIndex index = index_build(corpus);
    const KnnResult r = knn_query(index, {1, 0, 0}, 3);
    ++ties;
    ties_ok += r.neighbors[0].episode_id == "k" && r.chosen_episode_id == "k" &&
               same_as_oracle(index, corpus, {1, 0, 0}, 3);
  }
  return {agree == queries && ties_ok == ties, std::to_string(agree) + "/" + std::to_string(queries) +
                                                   " queries match the exhaustive scan (corpora to 10000), " +
                                                   std::to_string(ties_ok) + "/" + std::to_string(ties) +
                                                   " tie cases resolved"};
}

// --- protocol safety ------------------------------------------------------------

enum class Msg {
  HandNext, HandStale, HandLost, BeginHuman, BeginRobot, Anchor0, Anchor1, Anchor2, RobotConfig, RobotConfigBad,
  GoLive, RecordStart, RecordStop, ConfigOk, ConfigBad, KnnOk, KnnBadN, Unknown,
};
constexpr int kAlphabet = 18;

// Independent model of which messages a session accepts and where it goes.
struct Model {
  Phase phase = Phase::Idle;
  bool human_side = true;
  unsigned human = 0, robot = 0;  // bit per captured slot
  bool initial = false;
  std::optional<std::int64_t> last_t;

  bool complete() const { return human == 7 && robot == 7 && initial; }
  void maybe_live() {
    if (complete()) phase = Phase::Live;
  }

  // Returns false when the message must be rejected.
  bool apply(Msg m, std::int64_t t) {
    const bool setup = phase == Phase::Idle || phase == Phase::Calibrating;
    switch (m) {
      case Msg::HandNext:
      case Msg::HandStale:
      case Msg::HandLost:
        if (last_t && t <= *last_t) return false;
        if (m == Msg::HandLost && phase == Phase::Recording) return false;
        last_t = t;
        return true;
      case Msg::BeginHuman:
      case Msg::BeginRobot:
        if (!setup) return false;
        phase = Phase::Calibrating;
        human_side = m == Msg::BeginHuman;
        if (human_side) {
          human = 0;
        } else {
          robot = 0;
          initial = false;
        }
        return true;
      case Msg::Anchor0:
      case Msg::Anchor1:
      case Msg::Anchor2: {
        if (phase != Phase::Calibrating) return false;
        const unsigned bit = 1u << (static_cast<int>(m) - static_cast<int>(Msg::Anchor0));
        if (human_side) {
          human |= bit;
        } else {
          robot |= bit;
          initial = true;
        }
        maybe_live();
        return true;
      }
      case Msg::RobotConfig:
        if (!setup) return false;
        robot = 7;
        initial = true;
        if (phase == Phase::Calibrating) maybe_live();
        return true;
      case Msg::RobotConfigBad:
        return false;
      case Msg::GoLive:
        if (phase != Phase::Calibrating || !complete()) return false;
        phase = Phase::Live;
        return true;
      case Msg::RecordStart:
        if (phase != Phase::Live) return false;
        phase = Phase::Recording;
        return true;
      case Msg::RecordStop:
        if (phase != Phase::Recording) return false;
        phase = Phase::Live;
        return true;
      case Msg::ConfigOk:
        return phase != Phase::Recording;
      case Msg::ConfigBad:
      case Msg::KnnBadN:
      case Msg::Unknown:
        return false;
      case Msg::KnnOk:
        return true;
    }
    return false;
  }
};

struct Alphabet {
  Rig rig = default_rig();
  SceneSummary scene{2, 2, {1, 0, 0, 1}};

  json message(Msg m, std::int64_t t) const {
    using namespace protocol;
    const Pose hand{rig.human_point(0.5, 0.5, 0.2), rig.hand_rest};
    switch (m) {
      case Msg::HandNext:
      case Msg::HandStale:
        return to_json(HandSampleMsg{make_hand_sample(t, hand, kPinchOpen)});
      case Msg::HandLost: {
        auto s = make_hand_sample(t, hand, kPinchOpen);
        s.keypoints[Joint::RingTip] = {NAN, NAN, NAN};
        return to_json(HandSampleMsg{s});
      }
      case Msg::BeginHuman: return to_json(CalibrateBeginMsg{CalibSide::Human});
      case Msg::BeginRobot: return to_json(CalibrateBeginMsg{CalibSide::Robot});
      case Msg::Anchor0: return to_json(AnchorPointMsg{0, rig.human.a0});
      case Msg::Anchor1: return to_json(AnchorPointMsg{1, rig.human.a1});
      case Msg::Anchor2: return to_json(AnchorPointMsg{2, rig.human.a2});
      case Msg::RobotConfig: return to_json(RobotAnchorConfigMsg{rig.robot, rig.robot_initial});
      case Msg::RobotConfigBad:
        return to_json(RobotAnchorConfigMsg{{rig.robot.a0, rig.robot.a1, rig.robot.a1}, rig.robot_initial});
      case Msg::GoLive: return to_json(GoLiveMsg{});
      case Msg::RecordStart: return to_json(RecordStartMsg{"audit", scene});
      case Msg::RecordStop: return to_json(RecordStopMsg{});
      case Msg::ConfigOk: return to_json(SetConfigMsg{1.25, 0.4, 250.0, {}});
      case Msg::ConfigBad: return to_json(SetConfigMsg{{}, {}, 400.0, {}});
      case Msg::KnnOk: return to_json(KnnQueryMsg{scene, 1});
      case Msg::KnnBadN: return to_json(KnnQueryMsg{scene, 99});
      case Msg::Unknown: return json{{"type", "teleport"}};
    }
    return {};
  }
};

struct SafetyStats {
  std::size_t sequences = 0;
  std::size_t messages = 0;
  std::size_t rejected = 0;
  std::vector<std::string> failures;
};

// Lost joints are NaN and never compare equal, so they are pinned before comparing.
SessionState comparable(SessionState s) {
  if (s.last_sample) {
    for (Vec3& j : s.last_sample->keypoints.joints) {
      if (!j.finite()) j = {1e300, 1e300, 1e300};
    }
  }
  return s;
}

const std::vector<std::string> kOutboundTypes{"session_state", "anchor_captured", "robot_state", "telemetry",
                                              "knn_result", "error"};

void explore(const Alphabet& alpha, const Session& session, const Model& model, std::int64_t t, int depth,
             std::string path, SafetyStats& st, std::size_t& writes) {
  ++st.sequences;
  if (depth == 0) return;
  for (int i = 0; i < kAlphabet; ++i) {
    const Msg m = static_cast<Msg>(i);
    Session next = session;
    Model expect_model = model;
    const std::int64_t t_msg = m == Msg::HandStale ? 0 : t + kTickNs;
    const std::size_t writes_before = writes;
    const bool expect_accept = expect_model.apply(m, t_msg);
    std::vector<json> out;
    try {
      out = next.handle_message(alpha.message(m, t_msg));
    } catch (const std::exception& e) {
      st.failures.push_back(path + std::to_string(i) + ": exception " + e.what());
      continue;
    }
    ++st.messages;
    const std::string here = path + std::to_string(i);
    const bool rejected = out.size() == 1 && out[0]["type"] == "error";
    bool ok = !out.empty() || m == Msg::HandNext || m == Msg::HandStale || m == Msg::HandLost;
    for (const auto& o : out) {
      ok = ok && std::find(kOutboundTypes.begin(), kOutboundTypes.end(), o.value("type", "")) != kOutboundTypes.end();
      if (!rejected) ok = ok && o["type"] != "error";
    }
    if (rejected) {
      ++st.rejected;
      ok = ok && comparable(next.state()) == comparable(session.state()) && next.recording() == session.recording() && writes == writes_before;
    }
    ok = ok && rejected == !expect_accept && next.phase() == expect_model.phase;
    if (m == Msg::RecordStop && !rejected) ok = ok && writes == writes_before + 1;
    if (!ok) {
      if (st.failures.size() < 5) {
        st.failures.push_back(here + " phase " + std::string(to_string(next.phase())) + " expected " +
                              std::string(to_string(expect_model.phase)) + (rejected ? " (rejected " : " (") +
                              (out.empty() ? std::string("-") : out[0].dump().substr(0, 80)) + ")");
      }
      continue;
    }
    const bool advanced = !rejected && (m == Msg::HandNext || m == Msg::HandLost);
    explore(alpha, next, expect_model, advanced ? t_msg : t, depth - 1, here + ",", st, writes);
  }
}

Outcome protocol_safety() {
  const Alphabet alpha;
  std::size_t writes = 0;
  GridEmbedder e;
  auto index = std::make_shared<KnnIndex>(
      index_build({{e.embed(alpha.scene), "audit_0000", "audit", ""}, {e.embed({1, 1, {1}}), "other", "x", ""}}));
  SessionOptions opt;
  opt.index = index;
  opt.writer = [&writes](const fs::path&, const EpisodeManifest&, const std::vector<EpisodeRecord>&) { ++writes; };

  // Every length <= 4 sequence from the initial state, and from states
  // reached by a longer setup (the alphabet cannot finish calibration in four).
  struct Start {
    const char* name;
    std::vector<Msg> setup;
  };
  const std::vector<Start> starts{
      {"idle", {}},
      {"calibrating", {Msg::RobotConfig, Msg::BeginHuman, Msg::Anchor0}},
      {"live", {Msg::RobotConfig, Msg::BeginHuman, Msg::Anchor0, Msg::Anchor1, Msg::Anchor2, Msg::HandNext}},
      {"recording",
       {Msg::RobotConfig, Msg::BeginHuman, Msg::Anchor0, Msg::Anchor1, Msg::Anchor2, Msg::HandNext, Msg::RecordStart,
        Msg::HandNext}},
  };
  SafetyStats st;
  bool setup_ok = true;
  for (const Start& s : starts) {
    Session session(opt);
    Model model;
    std::int64_t t = 0;
    for (Msg m : s.setup) {
      const std::int64_t t_msg = t + kTickNs;
      const bool accept = model.apply(m, t_msg);
      const auto out = session.handle_message(alpha.message(m, t_msg));
      setup_ok = setup_ok && accept && !(out.size() == 1 && out[0]["type"] == "error");
      if (m == Msg::HandNext) t = t_msg;
    }
    setup_ok = setup_ok && session.phase() == model.phase;
    explore(alpha, session, model, t, 4, std::string(s.name) + ":", st, writes);
  }
  std::string detail = std::to_string(st.sequences) + " sequences, " + std::to_string(st.messages) + " messages, " +
                       std::to_string(st.rejected) + " rejections without mutation";
  for (const auto& f : st.failures) detail += "; " + f;
  return {setup_ok && st.failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"retarget-identity", 1.0, retarget_identity},
      {"mu-eta-contract", 5.0, mu_eta_contract},
      {"affine-oracle", 10.0, affine_oracle},
      {"conjugation-angle", 5.0, conjugation_angle},
      {"serial-latency", 5.0, serial_latency},
      {"closed-loop-tracking", 10.0, closed_loop},
      {"episode-round-trip", 30.0, episode_round_trip},
      {"self-consistency-replay", 0.0, self_consistency},
      {"knn-exactness", 10.0, knn_exactness},
      {"protocol-safety", 0.0, protocol_safety},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s == 0.0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string timing = fmt("%.2f s", secs);
    if (c.budget_s > 0.0) timing += fmt(" of %.0f s", c.budget_s);
    std::printf("%s %-24s %s [%s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
