#pragma once

// Randomized episode content shared by unit and acceptance tests.

#include <vector>

#include "h2r/episode.hpp"
#include "h2r/simulator.hpp"
#include "support/oracles.hpp"

namespace h2r::test {

inline ArmBlock random_arm(Rng& rng) {
  return to_arm_block({random_vec(rng), random_rotation(rng)}, uniform(rng, 0, 1) < 0.5 ? 0.0 : 1.0);
}

inline EpisodeRecord random_record(Rng& rng, std::int64_t frame) {
  EpisodeRecord r;
  r.timestamp_ns = tick_time_ns(frame);
  r.hand_transform = to_transform({random_vec(rng), random_rotation(rng)});
  for (auto& k : r.hand_keypoints) k = {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
  r.robot_state = random_arm(rng);
  for (double& v : r.joint_velocity) v = uniform(rng, -3, 3);
  r.action = random_arm(rng);
  r.frame_index = frame;
  return r;
}

inline EpisodeManifest random_manifest(Rng& rng, bool with_scene) {
  EpisodeManifest m;
  m.task_name = "task_" + std::to_string(rng() % 5);
  m.source = rng() % 2 ? EpisodeSource::Sim : EpisodeSource::Live;
  m.eta = uniform(rng, 0.2, 3.0);
  m.human_anchors = {random_vec(rng), random_vec(rng), random_vec(rng)};
  m.robot_anchors = {random_vec(rng), random_vec(rng), random_vec(rng)};
  m.created_at = static_cast<std::int64_t>(rng() % 1'000'000'000'000);
  m.robot_initial = {random_vec(rng), random_rotation(rng)};
  m.hand_reference = random_rotation(rng);
  m.tracked_point = static_cast<TrackedPointStrategy>(rng() % 3);
  m.gripper = {uniform(rng, 0.01, 0.03), uniform(rng, 0.06, 0.1), uniform(rng, 0, 0.02)};
  if (with_scene) {
    SceneSummary s{3, 4, {}};
    for (int i = 0; i < 12; ++i) s.values.push_back(uniform(rng, -1, 1));
    m.scene = s;
  }
  return m;
}

inline std::vector<EpisodeRecord> random_records(Rng& rng, std::size_t n) {
  std::vector<EpisodeRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_record(rng, static_cast<std::int64_t>(i)));
  return out;
}

}  // namespace h2r::test
