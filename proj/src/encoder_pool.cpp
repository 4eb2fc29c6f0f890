#include "streamscene/encoder_pool.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "streamscene/errors.hpp"

namespace streamscene {

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw ConfigError("embedding dimension must be positive");
}

void EmbeddingTable::set(CategoryId id, Eigen::VectorXd vec) {
  if (static_cast<std::size_t>(vec.size()) != dimension_) {
    throw DimensionError("embedding has dimension " + std::to_string(vec.size()) +
                         ", table expects " + std::to_string(dimension_));
  }
  if (!vec.allFinite()) throw ContractError("embedding entries must be finite");
  table_[id] = std::move(vec);
}

const Eigen::VectorXd& EmbeddingTable::at(CategoryId id) const {
  auto it = table_.find(id);
  if (it == table_.end()) {
    const auto& names = CategoryVocabulary::standard();
    if (id == kBackground) throw UnknownLabelError("background");
    if (id <= names.size()) throw UnknownLabelError(names.name_of(id));
    throw UnknownLabelError("#" + std::to_string(id));
  }
  return it->second;
}

EmbeddingTable EmbeddingTable::parse(std::string_view text, const CategoryVocabulary& vocab) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!table) {
      long long d = 0;
      if (!(ls >> d) || d <= 0) throw ParseError(line_no, 1, "expected embedding dimension");
      table.emplace(static_cast<std::size_t>(d));
      continue;
    }
    std::string label;
    ls >> label;
    CategoryId id = kBackground;
    if (to_lower(label) != "background") {
      auto found = vocab.find(label);
      if (!found) throw UnknownLabelError(label);
      id = *found;
    }
    Eigen::VectorXd vec(static_cast<Eigen::Index>(table->dimension()));
    for (Eigen::Index i = 0; i < vec.size(); ++i) {
      if (!(ls >> vec[i])) {
        throw ParseError(line_no, 1, "embedding for '" + label + "' has too few values");
      }
    }
    double extra;
    if (ls >> extra) throw ParseError(line_no, 1, "embedding for '" + label + "' has too many values");
    table->set(id, std::move(vec));
  }
  if (!table) throw ParseError(line_no, 1, "empty embedding table");
  return std::move(*table);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path,
                                    const CategoryVocabulary& vocab) {
  return parse(detail::read_file(path), vocab);
}

VoxelCoord voxel_of(const Vec3& p, double cell_size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_size)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_size)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_size))};
}

std::vector<FeaturePatch> voxel_pool(std::span<const Vec3> points,
                                     std::span<const Eigen::VectorXd> features,
                                     double cell_size) {
  if (points.size() != features.size()) {
    throw DimensionError("voxel_pool: points and features differ in length");
  }
  if (!(cell_size > 0)) throw ConfigError("cell size must be positive");
  if (points.empty()) return {};

  // Sort member indices by (voxel, position, feature) so accumulation order,
  // and therefore rounding, does not depend on input order.
  std::vector<std::size_t> order(points.size());
  std::vector<VoxelCoord> voxels(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    order[i] = i;
    voxels[i] = voxel_of(points[i], cell_size);
  }
  auto key_less = [&](std::size_t a, std::size_t b) {
    if (voxels[a] != voxels[b]) return voxels[a] < voxels[b];
    for (int k = 0; k < 3; ++k) {
      if (points[a][k] != points[b][k]) return points[a][k] < points[b][k];
    }
    const auto& fa = features[a];
    const auto& fb = features[b];
    return std::lexicographical_compare(fa.data(), fa.data() + fa.size(), fb.data(),
                                        fb.data() + fb.size());
  };
  std::sort(order.begin(), order.end(), key_less);

  std::vector<FeaturePatch> out;
  const Eigen::Index dim = features[order[0]].size();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    FeaturePatch patch;
    patch.voxel = voxels[order[i]];
    patch.feature = Eigen::VectorXd::Zero(dim);
    while (j < order.size() && voxels[order[j]] == patch.voxel) {
      const auto& f = features[order[j]];
      if (f.size() != dim) throw DimensionError("voxel_pool: features differ in dimension");
      patch.feature += f;
      patch.centroid += points[order[j]];
      ++j;
    }
    patch.members = j - i;
    patch.feature /= static_cast<double>(patch.members);
    patch.centroid /= static_cast<double>(patch.members);
    out.push_back(std::move(patch));
    i = j;
  }
  return out;
}

std::vector<FeaturePatch> semantic_patches(const MemorySnapshot& memory,
                                           const EmbeddingTable& table, double cell_size) {
  std::vector<Vec3> pts;
  std::vector<Eigen::VectorXd> feats;
  pts.reserve(memory.size());
  feats.reserve(memory.size());
  for (std::size_t i = 0; i < memory.size(); ++i) {
    pts.push_back(memory.points()[i].position);
    feats.push_back(table.at(memory.labels()[i]));
  }
  return voxel_pool(pts, feats, cell_size);
}

std::vector<FeaturePatch> point_patch_features(const MemorySnapshot& memory, double cell_size,
                                               std::size_t dimension) {
  if (dimension < 6) throw ConfigError("point feature dimension must be at least 6");
  if (!(cell_size > 0)) throw ConfigError("cell size must be positive");
  std::vector<Vec3> pts;
  std::vector<Eigen::VectorXd> colors;
  pts.reserve(memory.size());
  colors.reserve(memory.size());
  for (const auto& p : memory.points()) {
    pts.push_back(p.position);
    colors.push_back(p.color.cast<double>());
  }
  auto patches = voxel_pool(pts, colors, cell_size);
  for (auto& patch : patches) {
    const Vec3 cell_center(
        (static_cast<double>(patch.voxel[0]) + 0.5) * cell_size,
        (static_cast<double>(patch.voxel[1]) + 0.5) * cell_size,
        (static_cast<double>(patch.voxel[2]) + 0.5) * cell_size);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
    f.head<3>() = patch.feature;
    f.segment<3>(3) = patch.centroid - cell_center;
    patch.feature = std::move(f);
  }
  return patches;
}

std::vector<FeaturePatch> fuse_features(std::span<const FeaturePatch> point_patches,
                                        std::span<const FeaturePatch> sem_patches,
                                        const Eigen::MatrixXd& projection) {
  std::map<VoxelCoord, const FeaturePatch*> sem;
  for (const auto& s : sem_patches) sem[s.voxel] = &s;
  std::vector<VoxelCoord> only_point, only_sem;
  std::map<VoxelCoord, bool> seen;
  for (const auto& p : point_patches) {
    seen[p.voxel] = true;
    if (!sem.count(p.voxel)) only_point.push_back(p.voxel);
  }
  for (const auto& s : sem_patches) {
    if (!seen.count(s.voxel)) only_sem.push_back(s.voxel);
  }
  if (!only_point.empty() || !only_sem.empty()) {
    std::ostringstream msg;
    auto dump = [&msg](const std::vector<VoxelCoord>& v) {
      for (const auto& c : v) msg << " (" << c[0] << "," << c[1] << "," << c[2] << ")";
    };
    msg << "patch voxel sets differ; point-only:";
    dump(only_point);
    msg << "; semantic-only:";
    dump(only_sem);
    throw AlignmentError(msg.str());
  }
  std::vector<FeaturePatch> out;
  out.reserve(point_patches.size());
  for (const auto& p : point_patches) {
    const auto& s = *sem.at(p.voxel);
    if (projection.rows() != p.feature.size() || projection.cols() != s.feature.size()) {
      throw DimensionError("projection matrix shape does not match patch features");
    }
    FeaturePatch f = p;
    f.feature = p.feature + projection * s.feature;
    out.push_back(std::move(f));
  }
  return out;
}

std::string patches_to_json(std::span<const FeaturePatch> patches) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : patches) {
    arr.push_back({{"voxel", {p.voxel[0], p.voxel[1], p.voxel[2]}},
                   {"members", p.members},
                   {"centroid", {p.centroid.x(), p.centroid.y(), p.centroid.z()}},
                   {"feature", std::vector<double>(p.feature.data(),
                                                   p.feature.data() + p.feature.size())}});
  }
  return arr.dump(2);
}

}  // namespace streamscene
