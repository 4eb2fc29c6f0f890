#include "streamscene/memory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

Ratio reduced(std::int64_t num, std::int64_t den) {
  const std::int64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

// Picks `count` distinct indices out of [0, n), ascending.
std::vector<std::size_t> uniform_subset(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (count >= n) return all;
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

// Round-robin over occupied voxels (visited in a random order), drawing
// uniformly without replacement inside each voxel.
std::vector<std::size_t> stratified_subset(const std::vector<ColoredPoint>& pts,
                                           std::size_t count, double cell,
                                           std::mt19937_64& rng) {
  if (count >= pts.size()) return uniform_subset(pts.size(), count, rng);
  std::map<std::array<std::int64_t, 3>, std::vector<std::size_t>> voxels;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i].position;
    voxels[{static_cast<std::int64_t>(std::floor(p.x() / cell)),
            static_cast<std::int64_t>(std::floor(p.y() / cell)),
            static_cast<std::int64_t>(std::floor(p.z() / cell))}]
        .push_back(i);
  }
  std::vector<std::vector<std::size_t>> buckets;
  buckets.reserve(voxels.size());
  for (auto& [_, members] : voxels) {
    std::shuffle(members.begin(), members.end(), rng);
    buckets.push_back(std::move(members));
  }
  std::shuffle(buckets.begin(), buckets.end(), rng);
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t round = 0; out.size() < count; ++round) {
    for (const auto& b : buckets) {
      if (round < b.size()) {
        out.push_back(b[round]);
        if (out.size() == count) break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void FusionSchedule::validate() const {
  if (capacity_frames < 1) throw ConfigError("memory capacity N must be at least 1");
  if (frame_budget < 1) throw ConfigError("per-frame budget p must be at least 1");
}

std::size_t FusionSchedule::incoming_count(std::uint64_t t) const {
  if (t <= capacity_frames) return frame_budget;
  // round(N * p / (t - 1)), halves rounded up.
  const std::uint64_t num = 2ull * capacity_frames * frame_budget + (t - 1);
  return static_cast<std::size_t>(num / (2 * (t - 1)));
}

std::size_t FusionSchedule::target_size(std::uint64_t t) const {
  return static_cast<std::size_t>(std::min<std::uint64_t>(t, capacity_frames)) * frame_budget;
}

Ratio alpha(std::uint64_t t, std::uint64_t capacity) {
  if (t < 1) throw ContractError("timestep must be >= 1");
  if (t <= capacity) return {1, 1};
  return reduced(static_cast<std::int64_t>(capacity), static_cast<std::int64_t>(t - 1));
}

Ratio beta(std::uint64_t t, std::uint64_t capacity) {
  if (t < 1) throw ContractError("timestep must be >= 1");
  if (t <= capacity) return {1, 1};
  return reduced(static_cast<std::int64_t>(t - 1), static_cast<std::int64_t>(t));
}

SpatialMemory::SpatialMemory(FusionSchedule schedule, SamplingStrategy strategy)
    : strategy_(strategy) {
  schedule.validate();
  data_.schedule = schedule;
}

void SpatialMemory::set_stratification_cell(double meters) {
  if (!(meters > 0)) throw ConfigError("stratification cell must be positive");
  stratification_cell_ = meters;
}

FuseOutcome SpatialMemory::fuse(std::span<const ColoredPoint> frame_points,
                                std::span<const CategoryId> frame_labels, std::uint64_t seed) {
  if (frame_points.size() != frame_labels.size()) {
    throw DimensionError("frame has " + std::to_string(frame_points.size()) + " points but " +
                         std::to_string(frame_labels.size()) + " labels");
  }
  const auto& sched = data_.schedule;
  const std::uint64_t timestep = data_.t + 1;
  data_.t = timestep;
  if (frame_points.empty()) {
    spdlog::warn("memory: frame at t={} is empty, skipped", timestep);
    return FuseOutcome::kSkipped;
  }

  std::mt19937_64 rng(seed);
  FuseOutcome outcome = FuseOutcome::kFused;

  // Candidate indices into the frame, padded to p with replacement.
  std::vector<std::size_t> candidates(frame_points.size());
  std::iota(candidates.begin(), candidates.end(), 0);
  if (candidates.size() < sched.frame_budget) {
    spdlog::info("memory: frame at t={} has {} points, padding to {}", timestep,
                 frame_points.size(), sched.frame_budget);
    std::uniform_int_distribution<std::size_t> pick(0, frame_points.size() - 1);
    while (candidates.size() < sched.frame_budget) candidates.push_back(pick(rng));
    outcome = FuseOutcome::kPadded;
  }

  const std::uint64_t k = data_.fused + 1;
  const std::size_t take = sched.incoming_count(k);
  std::vector<ColoredPoint> pts = std::move(data_.points);
  std::vector<CategoryId> labels = std::move(data_.labels);
  std::vector<std::uint32_t> origins = std::move(data_.origins);

  std::vector<ColoredPoint> cand_pts;
  cand_pts.reserve(candidates.size());
  for (auto i : candidates) cand_pts.push_back(frame_points[i]);
  const auto chosen = strategy_ == SamplingStrategy::kUniform
                          ? uniform_subset(candidates.size(), take, rng)
                          : stratified_subset(cand_pts, take, stratification_cell_, rng);
  for (auto c : chosen) {
    pts.push_back(cand_pts[c]);
    labels.push_back(frame_labels[candidates[c]]);
    origins.push_back(static_cast<std::uint32_t>(timestep));
  }

  const std::size_t target = sched.target_size(k);
  if (pts.size() > target) {
    const auto keep = strategy_ == SamplingStrategy::kUniform
                          ? uniform_subset(pts.size(), target, rng)
                          : stratified_subset(pts, target, stratification_cell_, rng);
    std::vector<ColoredPoint> kp;
    std::vector<CategoryId> kl;
    std::vector<std::uint32_t> ko;
    kp.reserve(target);
    kl.reserve(target);
    ko.reserve(target);
    for (auto i : keep) {
      kp.push_back(pts[i]);
      kl.push_back(labels[i]);
      ko.push_back(origins[i]);
    }
    pts = std::move(kp);
    labels = std::move(kl);
    origins = std::move(ko);
  }
  data_.points = std::move(pts);
  data_.labels = std::move(labels);
  data_.origins = std::move(origins);
  data_.fused = k;
  return outcome;
}

MemorySnapshot SpatialMemory::snapshot() const { return MemorySnapshot(data_); }

SpatialMemory SpatialMemory::from_data(MemoryData data, SamplingStrategy strategy) {
  SpatialMemory mem(data.schedule, strategy);
  if (data.labels.size() != data.points.size() || data.origins.size() != data.points.size()) {
    throw DimensionError("memory arrays have mismatched lengths");
  }
  if (data.points.size() != data.schedule.target_size(data.fused)) {
    throw ContractError("memory size does not match min(fused, N) * p");
  }
  mem.data_ = std::move(data);
  return mem;
}

SpatialMemory fuse(SpatialMemory memory, std::span<const ColoredPoint> frame_points,
                   std::span<const CategoryId> frame_labels, std::uint64_t seed) {
  memory.fuse(frame_points, frame_labels, seed);
  return memory;
}

MemorySnapshot::MemorySnapshot() : data_(std::make_shared<const MemoryData>()) {}

MemorySnapshot::MemorySnapshot(MemoryData data)
    : data_(std::make_shared<const MemoryData>(std::move(data))) {}

std::string encode_memory(const MemoryData& data) {
  using namespace detail;
  std::string out = "SMEM";
  put_u32(out, 1);
  put_u32(out, data.schedule.capacity_frames);
  put_u32(out, data.schedule.frame_budget);
  put_u32(out, static_cast<std::uint32_t>(data.t));
  put_u32(out, static_cast<std::uint32_t>(data.fused));
  put_u32(out, static_cast<std::uint32_t>(data.points.size()));
  out.reserve(out.size() + data.points.size() * 30);
  for (const auto& p : data.points) {
    for (int i = 0; i < 3; ++i) put_f32(out, static_cast<float>(p.position[i]));
    for (int i = 0; i < 3; ++i) put_f32(out, p.color[i]);
  }
  for (auto l : data.labels) put_u16(out, l);
  for (auto o : data.origins) put_u32(out, o);
  return out;
}

MemoryData decode_memory(std::string_view bytes) {
  detail::Reader r(bytes);
  if (r.take(4) != "SMEM") throw IoError("not a memory container (bad magic)");
  if (const auto v = r.u32(); v != 1) {
    throw IoError("unsupported memory container version " + std::to_string(v));
  }
  MemoryData d;
  d.schedule.capacity_frames = r.u32();
  d.schedule.frame_budget = r.u32();
  d.t = r.u32();
  d.fused = r.u32();
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * 30 != r.remaining()) {
    throw IoError("memory container payload size does not match point count");
  }
  d.points.resize(count);
  for (auto& p : d.points) {
    for (int i = 0; i < 3; ++i) p.position[i] = r.f32();
    for (int i = 0; i < 3; ++i) p.color[i] = r.f32();
  }
  d.labels.resize(count);
  for (auto& l : d.labels) l = r.u16();
  d.origins.resize(count);
  for (auto& o : d.origins) o = r.u32();
  return d;
}

void write_memory(const std::filesystem::path& path, const MemoryData& data) {
  detail::write_file(path, encode_memory(data));
}

MemoryData read_memory(const std::filesystem::path& path) {
  return decode_memory(detail::read_file(path));
}

void write_memory_ply(std::ostream& os, const MemoryData& data) {
  os << "ply\nformat ascii 1.0\n"
     << "comment t " << data.t << " N " << data.schedule.capacity_frames << " p "
     << data.schedule.frame_budget << "\n"
     << "element vertex " << data.points.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "property ushort label\nproperty uint origin\n"
     << "end_header\n";
  auto byte = [](float c) {
    return static_cast<int>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f));
  };
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    const auto& p = data.points[i];
    os << static_cast<float>(p.position.x()) << ' ' << static_cast<float>(p.position.y()) << ' '
       << static_cast<float>(p.position.z()) << ' ' << byte(p.color[0]) << ' '
       << byte(p.color[1]) << ' ' << byte(p.color[2]) << ' ' << data.labels[i] << ' '
       << data.origins[i] << '\n';
  }
}

}  // namespace streamscene
