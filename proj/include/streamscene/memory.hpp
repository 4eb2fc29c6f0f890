#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "streamscene/categories.hpp"
#include "streamscene/geometry.hpp"

namespace streamscene {

// Exact non-negative rational, kept in lowest terms.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Ratio&) const = default;
};

// Per-timestep sampling law for a memory that holds at most `capacity_frames`
// frames worth of `frame_budget` points each.
struct FusionSchedule {
  std::uint32_t capacity_frames = 32;  // N: the longest sampled sequence fits
  std::uint32_t frame_budget = 1024;  // p

  void validate() const;  // throws ConfigError

  // Points the t-th frame contributes before downsampling: round(alpha_t * p).
  std::size_t incoming_count(std::uint64_t t) const;
  // Memory size after fusing the t-th frame: min(t, N) * p.
  std::size_t target_size(std::uint64_t t) const;
};

// Fraction of the incoming frame kept at step t (1-based):
// 1 for t <= N, N / (t - 1) afterwards.
Ratio alpha(std::uint64_t t, std::uint64_t capacity);
// Fraction of the concatenation kept at step t: 1 for t <= N, (t - 1) / t afterwards.
Ratio beta(std::uint64_t t, std::uint64_t capacity);

enum class SamplingStrategy {
  kUniform,          // uniform without replacement
  kVoxelStratified,  // round-robin over occupied voxels, uniform inside each voxel
};

struct ColoredPoint {
  Vec3 position = Vec3::Zero();
  Eigen::Vector3f color = Eigen::Vector3f::Zero();  // RGB in [0, 1]
};

struct MemoryData {
  FusionSchedule schedule;
  std::uint64_t t = 0;       // timesteps consumed, including skipped frames
  std::uint64_t fused = 0;   // frames that contributed points
  std::vector<ColoredPoint> points;
  std::vector<CategoryId> labels;
  std::vector<std::uint32_t> origins;  // timestep each point came from
};

class MemorySnapshot;

enum class FuseOutcome { kFused, kPadded, kSkipped };

// Paired point / label store. |points| == |labels| == |origins| ==
// min(fused, N) * p after every fuse.
class SpatialMemory {
 public:
  explicit SpatialMemory(FusionSchedule schedule = {},
                         SamplingStrategy strategy = SamplingStrategy::kUniform);

  const FusionSchedule& schedule() const { return data_.schedule; }
  SamplingStrategy strategy() const { return strategy_; }
  std::uint64_t t() const { return data_.t; }
  std::uint64_t fused_frames() const { return data_.fused; }
  std::size_t size() const { return data_.points.size(); }
  bool empty() const { return data_.points.empty(); }
  const std::vector<ColoredPoint>& points() const { return data_.points; }
  const std::vector<CategoryId>& labels() const { return data_.labels; }
  const std::vector<std::uint32_t>& origins() const { return data_.origins; }
  const MemoryData& data() const { return data_; }

  // Voxel size used by kVoxelStratified.
  void set_stratification_cell(double meters);

  // Fuses one frame. Frames with fewer than p points are padded to p by
  // resampling with replacement; empty frames only advance t.
  FuseOutcome fuse(std::span<const ColoredPoint> frame_points,
                   std::span<const CategoryId> frame_labels, std::uint64_t seed);

  MemorySnapshot snapshot() const;

  static SpatialMemory from_data(MemoryData data,
                                 SamplingStrategy strategy = SamplingStrategy::kUniform);

 private:
  MemoryData data_;
  SamplingStrategy strategy_;
  double stratification_cell_ = 0.1;
};

// Functional form of SpatialMemory::fuse.
SpatialMemory fuse(SpatialMemory memory, std::span<const ColoredPoint> frame_points,
                   std::span<const CategoryId> frame_labels, std::uint64_t seed);

// Read-only copy handed to encoders and detectors. Cheap to copy; later
// changes to the source memory are not visible through it.
class MemorySnapshot {
 public:
  MemorySnapshot();
  explicit MemorySnapshot(MemoryData data);

  const MemoryData& data() const { return *data_; }
  const std::vector<ColoredPoint>& points() const { return data_->points; }
  const std::vector<CategoryId>& labels() const { return data_->labels; }
  const std::vector<std::uint32_t>& origins() const { return data_->origins; }
  std::size_t size() const { return data_->points.size(); }
  bool empty() const { return data_->points.empty(); }
  std::uint64_t t() const { return data_->t; }

 private:
  std::shared_ptr<const MemoryData> data_;
};

// Binary container (all little-endian):
//   char[4] "SMEM"; u32 version (1); u32 N; u32 p; u32 t; u32 fused; u32 count;
//   count x (f32 x, f32 y, f32 z, f32 r, f32 g, f32 b);
//   count x u16 label; count x u32 origin.
std::string encode_memory(const MemoryData& data);
MemoryData decode_memory(std::string_view bytes);
void write_memory(const std::filesystem::path& path, const MemoryData& data);
MemoryData read_memory(const std::filesystem::path& path);

// ASCII PLY with per-vertex x y z red green blue label origin.
void write_memory_ply(std::ostream& os, const MemoryData& data);

}  // namespace streamscene
