#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "h2r/error.hpp"
#include "h2r/kernels/kernels.hpp"
#include "h2r/retrieval.hpp"

namespace h2r {

using nlohmann::json;

std::vector<double> normalized(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvariantViolation, "feature has non-finite values");
    sum += x * x;
  }
  const double n = std::sqrt(sum);
  if (!(n > 0.0)) throw Error(ErrorCode::InvariantViolation, "feature has zero norm");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

std::vector<double> KnnIndex::values(std::size_t i) const {
  return {rows_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
          rows_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_)};
}

KnnIndex index_build(std::vector<FeatureVector> features) {
  if (features.empty()) throw Error(ErrorCode::EmptyInput, "no features to index");
  const std::size_t dim = features.front().values.size();
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "features must be non-empty");
  for (const auto& f : features) {
    if (f.values.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "feature '" + f.episode_id + "' has dimension " +
                                                    std::to_string(f.values.size()) + ", expected " +
                                                    std::to_string(dim));
    }
  }
  std::sort(features.begin(), features.end(),
            [](const FeatureVector& a, const FeatureVector& b) { return a.episode_id < b.episode_id; });
  for (std::size_t i = 1; i < features.size(); ++i) {
    if (features[i].episode_id == features[i - 1].episode_id) {
      throw Error(ErrorCode::DuplicateId, "episode id '" + features[i].episode_id + "' appears twice");
    }
  }

  KnnIndex index;
  index.dim_ = dim;
  index.rows_.reserve(features.size() * dim);
  for (auto& f : features) {
    const auto unit = normalized(f.values);
    index.rows_.insert(index.rows_.end(), unit.begin(), unit.end());
    index.ids_.push_back(std::move(f.episode_id));
    index.labels_.push_back(std::move(f.task_label));
    index.paths_.push_back(std::move(f.path));
  }
  return index;
}

KnnResult knn_query(const KnnIndex& index, const std::vector<double>& query, std::size_t n) {
  if (index.empty()) throw Error(ErrorCode::EmptyInput, "index is empty");
  if (n < 1 || n > index.size()) {
    throw Error(ErrorCode::BadN, "n = " + std::to_string(n) + " outside [1, " +
                                     std::to_string(index.size()) + "]");
  }
  if (query.size() != index.dim_) {
    throw Error(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                                  ", index " + std::to_string(index.dim_));
  }
  const auto q = normalized(query);
  std::vector<double> sq(index.size());
  kernels::active().squared_l2_batch(index.rows_.data(), index.size(), index.dim_, q.data(), sq.data());

  // Entries are id-sorted, so breaking distance ties by position breaks them by id.
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) { return sq[a] < sq[b] || (sq[a] == sq[b] && a < b); });

  KnnResult result;
  std::map<std::string, std::size_t> counts;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    result.neighbors.push_back({index.ids_[i], index.labels_[i], std::sqrt(sq[i])});
    ++counts[index.labels_[i]];
  }
  std::size_t best = 0;
  for (const auto& [label, count] : counts) best = std::max(best, count);
  // First neighbour (by rank) whose label carries the top count: this is the
  // winning label's nearest episode, and label ties go to the best-ranked label.
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    if (counts[index.labels_[i]] == best) {
      result.chosen_episode_id = index.ids_[i];
      result.chosen_label = index.labels_[i];
      result.chosen_path = index.paths_[i];
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<double> GridEmbedder::embed(const SceneSummary& scene) const {
  if (scene.rows == 0 || scene.cols == 0 || scene.values.size() != scene.rows * scene.cols) {
    throw Error(ErrorCode::DimensionMismatch, "scene grid must hold rows * cols values");
  }
  auto at = [&](std::size_t r, std::size_t c) { return scene.values[r * scene.cols + c]; };
  // Pixel-centre alignment: output cell i samples source coordinate
  // (i + 0.5) * src / 8 - 0.5, clamped to the grid.
  auto coord = [](std::size_t i, std::size_t src) {
    const double x = (static_cast<double>(i) + 0.5) * static_cast<double>(src) / kGrid - 0.5;
    return std::clamp(x, 0.0, static_cast<double>(src - 1));
  };
  std::vector<double> out(kGrid * kGrid);
  for (std::size_t i = 0; i < kGrid; ++i) {
    const double y = coord(i, scene.rows);
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, scene.rows - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t j = 0; j < kGrid; ++j) {
      const double x = coord(j, scene.cols);
      const auto x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, scene.cols - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
      const double bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
      out[i * kGrid + j] = (1.0 - fy) * top + fy * bottom;
    }
  }
  return normalized(out);
}

SceneSummary first_frame_summary(const Episode& episode) {
  if (episode.manifest.scene) return *episode.manifest.scene;
  if (episode.records.empty()) {
    throw Error(ErrorCode::EmptyInput, "episode has neither a scene nor a first frame");
  }
  const ArmBlock& s = episode.records.front().robot_state;
  SceneSummary out{1, 13, {}};
  out.values.insert(out.values.end(), s.position.begin(), s.position.end());
  out.values.insert(out.values.end(), s.rotation.begin(), s.rotation.end());
  out.values.push_back(s.gripper);
  return out;
}

namespace {

std::string episode_id_of(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  const std::string ext = kEpisodeExtension;
  if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
    name.resize(name.size() - ext.size());
  }
  return name;
}

}  // namespace

std::vector<FeatureVector> corpus_features(const std::filesystem::path& dir, const Embedder& embedder) {
  std::vector<FeatureVector> out;
  for (const auto& path : list_episodes(dir)) {
    const Episode ep = read_episode_file(path);
    out.push_back({embedder.embed(first_frame_summary(ep)), episode_id_of(path), ep.manifest.task_name,
                   path.string()});
  }
  return out;
}

std::filesystem::path condition_lookup(const SceneSummary& scene, const Embedder& embedder,
                                       const KnnIndex& index, std::size_t n, KnnResult* result) {
  if (index.empty()) throw Error(ErrorCode::EmptyInput, "index is empty");
  KnnResult r = knn_query(index, embedder.embed(scene), n);
  const std::filesystem::path path = r.chosen_path;
  std::error_code ec;
  if (path.empty() || !std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::EpisodeMissing, "episode '" + r.chosen_episode_id + "' has no file");
  }
  if (result) *result = std::move(r);
  return path;
}

// ---------------------------------------------------------------------------

void write_features(const std::vector<FeatureVector>& features, std::ostream& sink) {
  for (const auto& f : features) {
    nlohmann::ordered_json j;
    j["episode_id"] = f.episode_id;
    j["task_label"] = f.task_label;
    j["values"] = f.values;
    if (!f.path.empty()) j["path"] = f.path;
    sink << j.dump() << '\n';
  }
  if (!sink) throw Error(ErrorCode::IoFailure, "feature sink write failed");
}

std::vector<FeatureVector> read_features(std::istream& source) {
  std::vector<FeatureVector> out;
  std::string text;
  std::int64_t line = 0;
  while (std::getline(source, text)) {
    ++line;
    if (text.empty()) continue;
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("episode_id") || !j.contains("values") ||
        !j["episode_id"].is_string() || !j["values"].is_array()) {
      throw Error(ErrorCode::MalformedLine, "feature line needs episode_id and values", line);
    }
    FeatureVector f;
    f.episode_id = j["episode_id"].get<std::string>();
    f.task_label = j.value("task_label", std::string{});
    f.path = j.value("path", std::string{});
    for (const auto& v : j["values"]) {
      if (!v.is_number()) throw Error(ErrorCode::MalformedLine, "feature values must be numbers", line);
      f.values.push_back(v.get<double>());
    }
    out.push_back(std::move(f));
  }
  return out;
}

SceneSummary read_scene_file(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  if (name.size() > std::string(kEpisodeExtension).size() &&
      name.ends_with(kEpisodeExtension)) {
    return first_frame_summary(read_episode_file(path));
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("values")) {
    throw Error(ErrorCode::MalformedLine, "scene file needs rows, cols and values", 1);
  }
  SceneSummary s;
  s.rows = j["rows"].get<std::size_t>();
  s.cols = j["cols"].get<std::size_t>();
  s.values = j["values"].get<std::vector<double>>();
  if (s.values.size() != s.rows * s.cols) {
    throw Error(ErrorCode::DimensionMismatch, "scene values must hold rows * cols numbers");
  }
  return s;
}

}  // namespace h2r
