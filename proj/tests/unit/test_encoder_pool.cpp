#include <algorithm>
#include <random>

#include <doctest.h>

#include "streamscene/encoder_pool.hpp"
#include "streamscene/errors.hpp"

namespace ss = streamscene;
using Eigen::VectorXd;

namespace {

ss::MemorySnapshot snapshot_of(const std::vector<ss::Vec3>& pts,
                               const std::vector<ss::CategoryId>& labels,
                               const Eigen::Vector3f& color = Eigen::Vector3f(0.2f, 0.4f, 0.6f)) {
  ss::MemoryData d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d.points.push_back({pts[i], color});
    d.labels.push_back(labels[i]);
    d.origins.push_back(1);
  }
  return ss::MemorySnapshot(std::move(d));
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

}  // namespace

TEST_CASE("voxel_pool examples") {
  SUBCASE("one cell gives the global mean") {
    std::vector<ss::Vec3> pts{{0.1, 0.1, 0.1}, {0.2, 0.3, 0.1}, {0.05, 0.4, 0.45}};
    std::vector<VectorXd> f{vec({1, 0}), vec({0, 3}), vec({2, 3})};
    const auto out = ss::voxel_pool(pts, f, 0.5);
    REQUIRE(out.size() == 1);
    CHECK(out[0].members == 3);
    CHECK((out[0].feature - vec({1, 2})).norm() < 1e-12);
    CHECK((out[0].centroid - ss::Vec3(0.35 / 3, 0.8 / 3, 0.65 / 3)).norm() < 1e-12);
  }
  SUBCASE("two cells keep exact features") {
    std::vector<ss::Vec3> pts{{0.1, 0.1, 0.1}, {-0.1, 0.1, 0.1}};
    std::vector<VectorXd> f{vec({1, 0}), vec({0, 1})};
    const auto out = ss::voxel_pool(pts, f, 0.5);
    REQUIRE(out.size() == 2);
    CHECK(out[0].voxel == ss::VoxelCoord{-1, 0, 0});  // sorted by voxel
    CHECK(out[0].feature == vec({0, 1}));
    CHECK(out[1].feature == vec({1, 0}));
  }
  SUBCASE("mismatched inputs") {
    std::vector<ss::Vec3> pts{{0, 0, 0}};
    std::vector<VectorXd> none;
    CHECK_THROWS_AS(ss::voxel_pool(pts, none, 0.5), ss::DimensionError);
  }
}

TEST_CASE("voxel_pool is permutation invariant") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ss::Vec3> pts;
  std::vector<VectorXd> f;
  for (int i = 0; i < 300; ++i) {
    pts.emplace_back(u(rng), u(rng), u(rng));
    f.push_back(vec({u(rng), u(rng), u(rng), u(rng)}));
  }
  const auto ref = ss::voxel_pool(pts, f, 0.4);
  std::vector<std::size_t> perm(pts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ss::Vec3> p2;
    std::vector<VectorXd> f2;
    for (auto i : perm) {
      p2.push_back(pts[i]);
      f2.push_back(f[i]);
    }
    const auto out = ss::voxel_pool(p2, f2, 0.4);
    REQUIRE(out.size() == ref.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(out[k].voxel == ref[k].voxel);
      CHECK(out[k].members == ref[k].members);
      CHECK(out[k].feature == ref[k].feature);
      CHECK(out[k].centroid == ref[k].centroid);
    }
  }
}

TEST_CASE("embedding table parse and semantic patches") {
  const auto& vocab = ss::CategoryVocabulary::standard();
  const auto table = ss::EmbeddingTable::parse(
      "# comment\n2\nbackground 0 0\nchair 1 0\ntable 0 1\n", vocab);
  CHECK(table.dimension() == 2);
  CHECK(table.at(vocab.id_of("table")) == vec({0, 1}));
  CHECK_THROWS_AS(table.at(vocab.id_of("sofa")), ss::UnknownLabelError);
  CHECK_THROWS_AS(ss::EmbeddingTable::parse("2\nchair 1\n", vocab), ss::ParseError);
  CHECK_THROWS_AS(ss::EmbeddingTable::parse("2\nunicorn 1 1\n", vocab), ss::UnknownLabelError);

  const auto chair = vocab.id_of("chair"), tbl = vocab.id_of("table");
  CHECK(ss::semantic_patches(ss::MemorySnapshot(), table, 0.5).empty());

  const auto single =
      ss::semantic_patches(snapshot_of({{0.1, 0.1, 0.1}, {2.1, 0.1, 0.1}}, {chair, chair}), table,
                           0.5);
  REQUIRE(single.size() == 2);
  for (const auto& p : single) CHECK(p.feature == vec({1, 0}));

  // Three chairs and one table in a cell: weights 3/4 and 1/4.
  const auto mixed = ss::semantic_patches(
      snapshot_of({{0.1, 0.1, 0.1}, {0.2, 0.1, 0.1}, {0.3, 0.1, 0.1}, {0.4, 0.1, 0.1}},
                  {chair, tbl, chair, chair}),
      table, 0.5);
  REQUIRE(mixed.size() == 1);
  CHECK((mixed[0].feature - vec({0.75, 0.25})).norm() < 1e-12);
}

TEST_CASE("point patch features") {
  CHECK_THROWS_AS(ss::point_patch_features(ss::MemorySnapshot(), 0.5, 5), ss::ConfigError);
  // Single point at a cell center: color part is the color, offset is zero.
  const auto p = ss::point_patch_features(
      snapshot_of({{0.25, 0.75, -0.25}}, {1}, Eigen::Vector3f(0.5f, 0.25f, 1.0f)), 0.5, 8);
  REQUIRE(p.size() == 1);
  CHECK(p[0].feature.size() == 8);
  CHECK((p[0].feature.head<3>() - ss::Vec3(0.5, 0.25, 1.0)).norm() < 1e-7);
  CHECK(p[0].feature.tail<5>().norm() < 1e-12);

  // Shifting every point by whole cells shifts voxels and keeps features.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ss::Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  std::vector<ss::Vec3> moved;
  for (const auto& q : pts) moved.push_back(q + ss::Vec3(2 * 0.25, -3 * 0.25, 0.25));
  const std::vector<ss::CategoryId> labels(pts.size(), 1);
  const auto a = ss::point_patch_features(snapshot_of(pts, labels), 0.25, 6);
  const auto b = ss::point_patch_features(snapshot_of(moved, labels), 0.25, 6);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(b[k].voxel == ss::VoxelCoord{a[k].voxel[0] + 2, a[k].voxel[1] - 3, a[k].voxel[2] + 1});
    CHECK((a[k].feature - b[k].feature).norm() < 1e-9);
  }
}

TEST_CASE("fuse_features") {
  ss::FeaturePatch p1{{0, 0, 0}, 2, ss::Vec3::Zero(), vec({1, 2, 3})};
  ss::FeaturePatch p2{{1, 0, 0}, 1, ss::Vec3::Zero(), vec({0, 0, 0})};
  ss::FeaturePatch s1{{0, 0, 0}, 2, ss::Vec3::Zero(), vec({1, -1})};
  ss::FeaturePatch s2{{1, 0, 0}, 1, ss::Vec3::Zero(), vec({4, 5})};
  std::vector<ss::FeaturePatch> pts{p1, p2}, sem{s1, s2};

  const auto zero = ss::fuse_features(pts, sem, Eigen::MatrixXd::Zero(3, 2));
  CHECK(zero[0].feature == p1.feature);
  CHECK(zero[1].feature == p2.feature);

  ss::FeaturePatch z1 = p1, z2 = p2;
  z1.feature = VectorXd::Zero(2);
  z2.feature = VectorXd::Zero(2);
  std::vector<ss::FeaturePatch> zeros{z1, z2};
  const auto ident = ss::fuse_features(zeros, sem, Eigen::MatrixXd::Identity(2, 2));
  CHECK(ident[0].feature == s1.feature);
  CHECK(ident[1].feature == s2.feature);

  // Linearity on a two-point cell: pooling then projecting equals projecting
  // each point's embedding then pooling.
  Eigen::MatrixXd w(3, 2);
  w << 1, 2, -1, 0.5, 3, -2;
  std::vector<ss::Vec3> cell{{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}};
  std::vector<VectorXd> e{vec({1, 3}), vec({-2, 5})};
  const auto pooled = ss::voxel_pool(cell, e, 1.0);
  ss::FeaturePatch pp{{0, 0, 0}, 2, ss::Vec3::Zero(), vec({0.5, 0.5, 0.5})};
  std::vector<ss::FeaturePatch> one{pp};
  const auto fused = ss::fuse_features(one, pooled, w);
  const VectorXd expect = pp.feature + 0.5 * (w * e[0] + w * e[1]);
  CHECK((fused[0].feature - expect).norm() < 1e-12);

  std::vector<ss::FeaturePatch> short_sem{s1};
  CHECK_THROWS_AS(ss::fuse_features(pts, short_sem, Eigen::MatrixXd::Zero(3, 2)),
                  ss::AlignmentError);
}

TEST_CASE("patches_to_json") {
  ss::FeaturePatch p{{1, -2, 3}, 4, ss::Vec3(0.5, 0.25, 0), vec({1, 2})};
  std::vector<ss::FeaturePatch> v{p};
  const auto json = ss::patches_to_json(v);
  CHECK(json.find("\"voxel\"") != std::string::npos);
  CHECK(json.find("\"members\"") != std::string::npos);
  CHECK(ss::patches_to_json({}).find("[]") != std::string::npos);
}
