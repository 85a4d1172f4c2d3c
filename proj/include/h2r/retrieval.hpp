#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "h2r/episode.hpp"

namespace h2r {

struct FeatureVector {
  std::vector<double> values;
  std::string episode_id;
  std::string task_label;
  std::string path;  // episode file, may be empty
};

struct Neighbor {
  std::string episode_id;
  std::string task_label;
  double distance = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct KnnResult {
  std::string chosen_episode_id;
  std::string chosen_label;
  std::string chosen_path;
  std::vector<Neighbor> neighbors;  // ascending distance, ties by id
};

// Exact nearest-neighbour index over unit-normalized first-frame features.
// Entries are stored sorted by episode id, so results do not depend on the
// order features were supplied in. Immutable after build.
class KnnIndex {
 public:
  KnnIndex() = default;

  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return dim_; }
  bool empty() const { return ids_.empty(); }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::string& path(std::size_t i) const { return paths_[i]; }
  // Normalized values of entry i.
  std::vector<double> values(std::size_t i) const;

 private:
  friend KnnIndex index_build(std::vector<FeatureVector> features);
  friend KnnResult knn_query(const KnnIndex& index, const std::vector<double>& query, std::size_t n);

  std::size_t dim_ = 0;
  std::vector<double> rows_;  // size() x dim_, row-major
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;
  std::vector<std::string> paths_;
};

// Throws EmptyInput, DimensionMismatch, DuplicateId, InvariantViolation (zero
// or non-finite vector).
KnnIndex index_build(std::vector<FeatureVector> features);

// n nearest entries by L2 distance in normalized space; the chosen episode is
// the nearest member of the most frequent label among them. Label-count ties
// go to the tied label whose best member ranks first (so the label of the
// overall nearest neighbour wins whenever it is tied).
// Throws EmptyInput, BadN, DimensionMismatch, InvariantViolation.
KnnResult knn_query(const KnnIndex& index, const std::vector<double>& query, std::size_t n);

// Unit-normalized copy; throws InvariantViolation for zero or non-finite input.
std::vector<double> normalized(const std::vector<double>& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::string_view name() const = 0;
  // Deterministic.
  virtual std::vector<double> embed(const SceneSummary& scene) const = 0;
};

// Bilinear downsample of the scene grid to 8x8 (pixel-centre sampling),
// flattened and unit-normalized.
class GridEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kGrid = 8;
  std::size_t dimension() const override { return kGrid * kGrid; }
  std::string_view name() const override { return "grid8"; }
  std::vector<double> embed(const SceneSummary& scene) const override;
};

// The manifest's scene when present, else a 1x13 row of the first record's
// robot state (position, rotation, gripper). Throws EmptyInput if neither.
SceneSummary first_frame_summary(const Episode& episode);

// One feature per readable episode in `dir` (episode id = file stem).
std::vector<FeatureVector> corpus_features(const std::filesystem::path& dir, const Embedder& embedder);

// Resolves the chosen episode for a new scene. Throws EpisodeMissing when the
// chosen id has no readable episode file, EmptyInput for an empty index.
std::filesystem::path condition_lookup(const SceneSummary& scene, const Embedder& embedder,
                                       const KnnIndex& index, std::size_t n,
                                       KnnResult* result = nullptr);

// Newline-delimited {"episode_id", "task_label", "values", "path"}.
void write_features(const std::vector<FeatureVector>& features, std::ostream& sink);
std::vector<FeatureVector> read_features(std::istream& source);

SceneSummary read_scene_file(const std::filesystem::path& path);

inline constexpr std::size_t kDefaultNeighbors = 5;

}  // namespace h2r
