#include <algorithm>

#include "h2r/episode.hpp"
#include "h2r/error.hpp"

namespace h2r {

std::vector<std::filesystem::path> list_episodes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const std::string ext = kEpisodeExtension;
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
      out.push_back(entry.path());
    }
  }
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

EpisodeStats episode_stats(const std::filesystem::path& dir, FrameRange range) {
  EpisodeStats stats;
  for (const auto& path : list_episodes(dir)) {
    Episode ep;
    try {
      ep = read_episode_file(path);
    } catch (const Error& e) {
      stats.errors.emplace_back(path.string(), e.what());
      continue;
    }
    const std::int64_t frames = static_cast<std::int64_t>(ep.records.size());
    ++stats.episode_count;
    stats.total_frames += ep.records.size();
    ++stats.frame_histogram[(frames / 100) * 100];
    ++stats.per_task[ep.manifest.task_name];
    if (frames < range.min) stats.flagged.push_back({path.string(), frames, "below_range"});
    if (frames > range.max) stats.flagged.push_back({path.string(), frames, "above_range"});
  }
  return stats;
}

}  // namespace h2r
