#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "streamscene/dataset.hpp"
#include "streamscene/detector.hpp"
#include "streamscene/errors.hpp"
#include "streamscene/geometry.hpp"
#include "streamscene/harness.hpp"
#include "streamscene/matching.hpp"
#include "streamscene/memory.hpp"
#include "streamscene/metrics.hpp"
#include "streamscene/report.hpp"
#include "streamscene/scene_format.hpp"
#include "streamscene/simulator.hpp"

namespace py = pybind11;
namespace ss = streamscene;

namespace {

using PointArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<ss::Vec3> to_vec3(const PointArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("expected an (n, 3) array");
  auto r = a.unchecked<2>();
  std::vector<ss::Vec3> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out[i] = ss::Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

std::vector<ss::Vec2> to_vec2(const PointArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("expected an (n, 2) array");
  auto r = a.unchecked<2>();
  std::vector<ss::Vec2> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out[i] = ss::Vec2(r(i, 0), r(i, 1));
  return out;
}

py::tuple ratio(const ss::Ratio& r) { return py::make_tuple(r.num, r.den); }

ss::SamplingStrategy strategy_from(const std::string& s) {
  if (s == "uniform") return ss::SamplingStrategy::kUniform;
  if (s == "voxel") return ss::SamplingStrategy::kVoxelStratified;
  throw ss::ConfigError("unknown strategy: " + s);
}

const char* outcome_name(ss::FuseOutcome o) {
  switch (o) {
    case ss::FuseOutcome::kFused: return "fused";
    case ss::FuseOutcome::kPadded: return "padded";
    case ss::FuseOutcome::kSkipped: return "skipped";
  }
  return "";
}

py::dict record_dict(const ss::SceneRecord& rec) {
  py::dict d;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        d["id"] = r.id;
        if constexpr (std::is_same_v<T, ss::WallRec>) {
          d["kind"] = "wall";
          d["a"] = py::make_tuple(r.ax, r.ay, r.az);
          d["b"] = py::make_tuple(r.bx, r.by, r.bz);
          d["height"] = r.height;
          d["thickness"] = r.thickness;
        } else if constexpr (std::is_same_v<T, ss::BboxRec>) {
          d["kind"] = "bbox";
          d["label"] = r.label;
          d["position"] = py::make_tuple(r.position_x, r.position_y, r.position_z);
          d["angle_z"] = r.angle_z;
          d["scale"] = py::make_tuple(r.scale_x, r.scale_y, r.scale_z);
        } else {
          d["kind"] = std::is_same_v<T, ss::DoorRec> ? "door" : "window";
          d["wall_id"] = r.wall_id;
          d["position"] = py::make_tuple(r.position_x, r.position_y, r.position_z);
          d["width"] = r.width;
          d["height"] = r.height;
        }
      },
      rec);
  return d;
}

// Ground truth from a lenient box list plus the indices of its strict members.
ss::GroundTruthSets gt_sets(const std::vector<ss::OrientedBox3>& lenient,
                            const std::vector<std::size_t>& strict) {
  ss::GroundTruthSets gt;
  for (std::size_t i = 0; i < lenient.size(); ++i) {
    gt.lenient.push_back({"o" + std::to_string(i), lenient[i]});
  }
  for (std::size_t i : strict) {
    if (i >= lenient.size()) throw py::index_error("strict index out of range");
    gt.strict.push_back(gt.lenient[i]);
  }
  return gt;
}

ss::CategoryVocabulary vocabulary(const std::optional<std::vector<std::string>>& names) {
  return names ? ss::CategoryVocabulary(*names) : ss::CategoryVocabulary::standard();
}

std::string run_replays(const std::vector<ss::SceneDataset>& datasets, const std::string& config,
                        const std::optional<std::string>& command, double timeout_s,
                        std::size_t workers, const std::string& format) {
  const auto cfg = ss::ReplayConfig::from_json(config);
  ss::DetectorFactory factory;
  if (command) {
    const auto timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
    factory = [c = *command, timeout] { return std::make_unique<ss::ProcessDetector>(c, timeout); };
  } else {
    factory = [] { return std::make_unique<ss::OracleDetector>(); };
  }
  std::vector<ss::SceneResult> results;
  {
    py::gil_scoped_release release;
    results = ss::run_scenes(datasets, factory, cfg, workers);
  }
  if (format == "json") return ss::report_json(results);
  if (format == "csv") return ss::report_csv(results);
  throw py::value_error("format must be 'json' or 'csv'");
}

}  // namespace

PYBIND11_MODULE(_streamscene, m) {
  m.doc() = "Streaming 3D scene understanding: memory, matching, metrics and replay.";

  auto base = py::register_exception<ss::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ss::ContractError>(m, "ContractError", base);
  py::register_exception<ss::DegenerateOrientationError>(m, "DegenerateOrientationError", base);
  py::register_exception<ss::DegenerateGeometryError>(m, "DegenerateGeometryError", base);
  py::register_exception<ss::ConfigError>(m, "ConfigError", base);
  py::register_exception<ss::UnknownLabelError>(m, "UnknownLabelError", base);
  py::register_exception<ss::ParseError>(m, "ParseError", base);
  py::register_exception<ss::SchemaError>(m, "SchemaError", base);
  py::register_exception<ss::PlacementError>(m, "PlacementError", base);
  py::register_exception<ss::IoError>(m, "IoError", base);
  py::register_exception<ss::ProtocolError>(m, "ProtocolError", base);

  m.attr("CATEGORIES") = ss::CategoryVocabulary::standard().names();

  // geometry
  py::class_<ss::OrientedBox3>(m, "Box")
      .def(py::init<std::string, const ss::Vec3&, const ss::Vec3&, double>(), py::arg("label"),
           py::arg("center"), py::arg("dims"), py::arg("yaw") = 0.0)
      .def_readwrite("label", &ss::OrientedBox3::label)
      .def_readwrite("center", &ss::OrientedBox3::center)
      .def_readwrite("dims", &ss::OrientedBox3::dims)
      .def_readwrite("yaw", &ss::OrientedBox3::yaw)
      .def_property_readonly("volume", &ss::OrientedBox3::volume)
      .def("contains", &ss::OrientedBox3::contains)
      .def("corners",
           [](const ss::OrientedBox3& b) {
             const auto c = ss::box_corners(b);
             return std::vector<ss::Vec3>(c.begin(), c.end());
           })
      .def("__repr__", [](const ss::OrientedBox3& b) {
        return "Box(" + b.label + ", center=(" + std::to_string(b.center.x()) + ", " +
               std::to_string(b.center.y()) + ", " + std::to_string(b.center.z()) +
               "), yaw=" + std::to_string(b.yaw) + ")";
      });

  m.def("iou3d", &ss::iou3d, py::arg("a"), py::arg("b"));
  m.def("ground_align_transform",
        [](double pitch, double roll) {
          const auto t = ss::ground_align_transform(pitch, roll);
          return t.rotation;
        },
        py::arg("pitch"), py::arg("roll"), "Rotation taking camera axes to the z-up frame.");

  // memory
  m.def("alpha", [](std::uint64_t t, std::uint64_t n) { return ratio(ss::alpha(t, n)); },
        py::arg("t"), py::arg("capacity"), "Incoming-frame keep fraction as (num, den).");
  m.def("beta", [](std::uint64_t t, std::uint64_t n) { return ratio(ss::beta(t, n)); },
        py::arg("t"), py::arg("capacity"), "Concatenation keep fraction as (num, den).");

  py::class_<ss::SpatialMemory>(m, "SpatialMemory")
      .def(py::init([](std::uint32_t n, std::uint32_t p, const std::string& strategy) {
             ss::FusionSchedule s{n, p};
             s.validate();
             return ss::SpatialMemory(s, strategy_from(strategy));
           }),
           py::arg("capacity_frames") = 32, py::arg("frame_budget") = 1024,
           py::arg("strategy") = "uniform")
      .def("fuse",
           [](ss::SpatialMemory& mem, const PointArray& points,
              const std::vector<ss::CategoryId>& labels, std::uint64_t seed) {
             const auto pos = to_vec3(points);
             std::vector<ss::ColoredPoint> pts(pos.size());
             for (std::size_t i = 0; i < pos.size(); ++i) pts[i].position = pos[i];
             return std::string(outcome_name(mem.fuse(pts, labels, seed)));
           },
           py::arg("points"), py::arg("labels"), py::arg("seed") = 0)
      .def_property_readonly("t", &ss::SpatialMemory::t)
      .def_property_readonly("fused_frames", &ss::SpatialMemory::fused_frames)
      .def("__len__", [](const ss::SpatialMemory& mem) { return mem.points().size(); })
      .def("points",
           [](const ss::SpatialMemory& mem) {
             const auto& pts = mem.points();
             py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
             auto w = out.mutable_unchecked<2>();
             for (std::size_t i = 0; i < pts.size(); ++i) {
               for (int k = 0; k < 3; ++k) w(i, k) = pts[i].position[k];
             }
             return out;
           })
      .def("labels", &ss::SpatialMemory::labels)
      .def("origins", &ss::SpatialMemory::origins)
      .def("save", [](const ss::SpatialMemory& mem, const std::filesystem::path& path) {
        ss::write_memory(path, mem.data());
      });

  // scene description
  py::class_<ss::SceneDescription>(m, "SceneDescription")
      .def_property_readonly("records",
                             [](const ss::SceneDescription& d) {
                               py::list out;
                               for (const auto& r : d.records) out.append(record_dict(r));
                               return out;
                             })
      .def_property_readonly("bbox_count", &ss::SceneDescription::bbox_count)
      .def("boxes",
           [](const ss::SceneDescription& d, const std::optional<std::vector<std::string>>& cats) {
             return ss::to_boxes(d, vocabulary(cats)).boxes;
           },
           py::arg("categories") = std::nullopt)
      .def("serialize", [](const ss::SceneDescription& d) { return ss::serialize(d); })
      .def("__len__", [](const ss::SceneDescription& d) { return d.records.size(); });

  m.def("parse",
        [](const std::string& text, bool strict, double meters_per_unit, double radians_per_unit) {
          ss::ParseOptions opts;
          opts.strict = strict;
          opts.units = ss::UnitConfig{meters_per_unit, radians_per_unit};
          auto res = ss::parse_scene_description(text, opts);
          std::vector<py::tuple> diags;
          for (const auto& d : res.diagnostics) {
            diags.push_back(py::make_tuple(d.line, d.column, d.message));
          }
          return py::make_tuple(std::move(res.description), diags);
        },
        py::arg("text"), py::arg("strict") = false, py::arg("meters_per_unit") = 1.0,
        py::arg("radians_per_unit") = 1.0,
        "Returns (SceneDescription, [(line, column, message)]).");
  m.def("boxes_to_text",
        [](const std::vector<ss::OrientedBox3>& boxes) {
          return ss::serialize(ss::boxes_to_description(boxes));
        },
        py::arg("boxes"));

  // matching
  m.def("hungarian",
        [](const PointArray& costs) {
          if (costs.ndim() != 2) throw py::value_error("expected a 2-D cost matrix");
          auto r = costs.unchecked<2>();
          ss::CostMatrix cm(static_cast<std::size_t>(r.shape(0)),
                            static_cast<std::size_t>(r.shape(1)));
          for (py::ssize_t i = 0; i < r.shape(0); ++i) {
            for (py::ssize_t j = 0; j < r.shape(1); ++j) cm(i, j) = r(i, j);
          }
          const auto a = ss::hungarian(cm);
          return py::make_tuple(a.pairs, a.total_cost);
        },
        py::arg("costs"), "Returns ([(row, col)], total_cost); +inf marks forbidden pairs.");
  m.def("merge_detections", &ss::merge_detections, py::arg("existing"), py::arg("incoming"),
        py::arg("iou_threshold") = 0.25);

  // metrics
  m.def("fuzzy_score",
        [](const std::vector<ss::OrientedBox3>& preds, const std::vector<ss::OrientedBox3>& lenient,
           const std::vector<std::size_t>& strict, double thr) {
          const auto s = ss::fuzzy_score(preds, gt_sets(lenient, strict), thr);
          py::dict d;
          d["precision"] = s.precision;
          d["recall"] = s.recall;
          d["f1"] = s.f1;
          d["tp_strict"] = s.tp_strict;
          d["tp_lenient"] = s.tp_lenient;
          d["fp"] = s.fp;
          d["fn"] = s.fn;
          return d;
        },
        py::arg("preds"), py::arg("lenient"), py::arg("strict"),
        py::arg("iou_threshold") = ss::kDefaultIouThreshold,
        "`strict` indexes the members of `lenient` that are strictly visible.");
  m.def("vanilla_f1",
        [](const std::vector<ss::OrientedBox3>& preds, const std::vector<ss::OrientedBox3>& gts,
           double thr) { return ss::vanilla_f1(preds, gts, thr); },
        py::arg("preds"), py::arg("gts"), py::arg("iou_threshold") = ss::kDefaultIouThreshold);
  m.def("evaluate_json",
        [](const std::vector<ss::OrientedBox3>& preds, const std::vector<ss::OrientedBox3>& lenient,
           const std::vector<std::size_t>& strict,
           const std::optional<std::vector<std::string>>& cats, double thr) {
          return ss::eval_report_json(
              ss::evaluate_report(preds, gt_sets(lenient, strict), vocabulary(cats), thr));
        },
        py::arg("preds"), py::arg("lenient"), py::arg("strict"),
        py::arg("categories") = std::nullopt, py::arg("iou_threshold") = ss::kDefaultIouThreshold);

  // simulator
  m.def("min_area_rect",
        [](const PointArray& points) {
          const auto r = ss::min_area_rect(to_vec2(points));
          return py::make_tuple(r.center, r.dims, r.yaw);
        },
        py::arg("points"), "Returns (center, dims, yaw) of the minimum-area rectangle.");

  py::class_<ss::SceneDataset>(m, "Dataset")
      .def_readonly("scene_id", &ss::SceneDataset::scene_id)
      .def_property_readonly("frame_count",
                             [](const ss::SceneDataset& d) { return d.frames.size(); })
      .def_property_readonly("annotations",
                             [](const ss::SceneDataset& d) {
                               std::vector<std::pair<std::string, ss::OrientedBox3>> out;
                               for (const auto& a : d.annotations) out.emplace_back(a.id, a.box);
                               return out;
                             })
      .def("save", [](const ss::SceneDataset& d, const std::filesystem::path& dir) {
        ss::save_dataset(d, dir);
      });

  m.def("simulate",
        [](std::uint64_t seed, std::size_t n_objects, std::size_t frames,
           const std::optional<std::string>& scene_id) {
          const auto scene = ss::generate_scene(seed, n_objects);
          ss::OrbitOptions orbit;
          orbit.frames = frames;
          const auto poses = ss::orbit_trajectory(scene, orbit, seed).poses();
          return ss::make_dataset(scene, poses, ss::default_sim_intrinsics(),
                                  scene_id.value_or("sim_" + std::to_string(seed)));
        },
        py::arg("seed"), py::arg("n_objects") = 6, py::arg("frames") = 32,
        py::arg("scene_id") = std::nullopt, "Synthetic room rendered along an orbit.");
  m.def("load_dataset", &ss::load_dataset, py::arg("path"));

  // harness
  m.def("run", &run_replays, py::arg("datasets"), py::arg("config") = "{}",
        py::arg("detector_command") = std::nullopt, py::arg("timeout") = 60.0,
        py::arg("workers") = 0, py::arg("format") = "json",
        "Replays datasets with the built-in oracle detector or an external detector "
        "command; returns the report text.");
}
