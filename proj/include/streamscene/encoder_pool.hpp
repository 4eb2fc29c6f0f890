#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "streamscene/categories.hpp"
#include "streamscene/memory.hpp"

namespace streamscene {

using VoxelCoord = std::array<std::int64_t, 3>;

struct FeaturePatch {
  VoxelCoord voxel{};
  std::size_t members = 0;
  Vec3 centroid = Vec3::Zero();
  Eigen::VectorXd feature;
};

// Per-category embedding vectors of a common dimension.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension);

  std::size_t dimension() const { return dimension_; }
  void set(CategoryId id, Eigen::VectorXd vec);
  bool contains(CategoryId id) const { return table_.count(id) != 0; }
  const Eigen::VectorXd& at(CategoryId id) const;  // throws UnknownLabelError

  // Text format: first non-comment line is D; then one `label v1 ... vD` line
  // per category. Labels resolve through `vocab`; "background" maps to id 0.
  // Lines starting with '#' are ignored.
  static EmbeddingTable parse(std::string_view text, const CategoryVocabulary& vocab);
  static EmbeddingTable load(const std::filesystem::path& path, const CategoryVocabulary& vocab);

 private:
  std::size_t dimension_;
  std::map<CategoryId, Eigen::VectorXd> table_;
};

VoxelCoord voxel_of(const Vec3& p, double cell_size);

// One patch per occupied voxel: mean member feature, mean member position.
// Output sorted by voxel coordinate.
std::vector<FeaturePatch> voxel_pool(std::span<const Vec3> points,
                                     std::span<const Eigen::VectorXd> features, double cell_size);

// Pools the table embedding of every point's label.
std::vector<FeaturePatch> semantic_patches(const MemorySnapshot& memory,
                                           const EmbeddingTable& table, double cell_size);

// Geometric stand-in for learned point features: [mean color (3), centroid
// offset from the voxel center (3)] zero-padded to `dimension` (>= 6).
std::vector<FeaturePatch> point_patch_features(const MemorySnapshot& memory, double cell_size,
                                               std::size_t dimension);

// out.feature = point.feature + projection * sem.feature on identical voxel
// sets; throws AlignmentError listing the symmetric difference otherwise.
std::vector<FeaturePatch> fuse_features(std::span<const FeaturePatch> point_patches,
                                        std::span<const FeaturePatch> sem_patches,
                                        const Eigen::MatrixXd& projection);

// JSON array of {voxel, members, centroid, feature}.
std::string patches_to_json(std::span<const FeaturePatch> patches);

}  // namespace streamscene
