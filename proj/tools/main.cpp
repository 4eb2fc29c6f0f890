// streamscene command-line tool.
//
// Exit codes: 0 ok, 1 evaluation / input failure, 2 detector protocol failure.

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "streamscene/dataset.hpp"
#include "streamscene/detector.hpp"
#include "streamscene/errors.hpp"
#include "streamscene/geometry.hpp"
#include "streamscene/harness.hpp"
#include "streamscene/metrics.hpp"
#include "streamscene/report.hpp"
#include "streamscene/scene_format.hpp"
#include "streamscene/simulator.hpp"

namespace ss = streamscene;

namespace {

constexpr int kExitEval = 1;
constexpr int kExitProtocol = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ss::IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ss::UnitConfig units_from_name(const std::string& name) {
  if (name == "m-rad") return ss::UnitConfig::meters_radians();
  if (name == "m-deg") return ss::UnitConfig::meters_degrees();
  if (name == "cm-rad") return ss::UnitConfig::centimeters_radians();
  if (name == "cm-deg") return ss::UnitConfig::centimeters_degrees();
  throw ss::ConfigError("unknown units '" + name + "' (m-rad, m-deg, cm-rad, cm-deg)");
}

// A box is either seven numbers "x y z dx dy dz yaw" (space or comma
// separated) or a single Bbox line of the scene format.
ss::OrientedBox3 parse_box_arg(const std::string& text) {
  if (text.find("Bbox") != std::string::npos) {
    ss::ParseOptions opts;
    opts.strict = true;
    const auto res = ss::parse_scene_description(text, opts);
    for (const auto& rec : res.description.records) {
      if (const auto* b = std::get_if<ss::BboxRec>(&rec)) {
        return ss::OrientedBox3(b->label, {b->position_x, b->position_y, b->position_z},
                                {b->scale_x, b->scale_y, b->scale_z}, b->angle_z);
      }
    }
    throw ss::ConfigError("no Bbox record in '" + text + "'");
  }
  std::string s = text;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  double v[7];
  for (double& x : v) {
    if (!(in >> x)) throw ss::ConfigError("box needs 7 numbers: x y z dx dy dz yaw");
  }
  std::string extra;
  if (in >> extra) throw ss::ConfigError("box has trailing input '" + extra + "'");
  return ss::OrientedBox3("box", {v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]);
}

ss::Vec3 vec3_of(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ss::ConfigError(where + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Ground truth for `eval`: {"objects": [{"id", "label", "center", "dims",
// "yaw", "strict": bool}]}. Every object is lenient; strict ones also count
// toward recall.
ss::GroundTruthSets load_gt(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw ss::ConfigError(path + ": " + e.what());
  }
  ss::GroundTruthSets gt;
  try {
    std::size_t i = 0;
    for (const auto& o : j.at("objects")) {
      const std::string where = "/objects/" + std::to_string(i++);
      ss::AnnotatedObject obj{o.value("id", "obj_" + std::to_string(i - 1)),
                              ss::OrientedBox3(o.at("label").get<std::string>(),
                                               vec3_of(o.at("center"), where + "/center"),
                                               vec3_of(o.at("dims"), where + "/dims"),
                                               o.value("yaw", 0.0))};
      if (o.value("strict", true)) gt.strict.push_back(obj);
      gt.lenient.push_back(std::move(obj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ss::ConfigError(path + ": " + e.what());
  }
  return gt;
}

struct RunArgs {
  std::vector<std::string> datasets;
  std::string detector;
  std::string config;
  std::string out;
  std::string format;
  std::size_t workers = 0;
};

int run_replay(const RunArgs& a, std::optional<ss::ReplayMode> force_mode) {
  ss::ReplayConfig cfg = a.config.empty() ? ss::ReplayConfig{} : ss::ReplayConfig::load(a.config);
  if (force_mode) cfg.mode = *force_mode;
  std::vector<ss::SceneDataset> datasets;
  for (const auto& d : a.datasets) datasets.push_back(ss::load_dataset(d));
  const std::string command = a.detector;
  auto results = ss::run_scenes(
      datasets, [&command] { return std::make_unique<ss::ProcessDetector>(command); }, cfg,
      a.workers);
  ss::ReportFormat fmt = ss::report_format_from_path(a.out);
  if (a.format == "json") fmt = ss::ReportFormat::kJson;
  if (a.format == "csv") fmt = ss::ReportFormat::kCsv;
  const auto& vocab = datasets.empty() ? ss::CategoryVocabulary::standard() : datasets[0].categories;
  if (a.out.empty() || a.out == "-") {
    std::cout << (fmt == ss::ReportFormat::kCsv ? ss::report_csv(results, vocab)
                                                : ss::report_json(results));
  } else {
    ss::write_report(a.out, results, fmt, vocab);
  }
  for (const auto& r : results) {
    if (!r.timesteps.empty()) {
      spdlog::info("{} ({}): {} steps, final average fuzzy F1 {:.4f}", r.scene_id,
                   ss::to_string(r.mode), r.timesteps.size(),
                   r.timesteps.back().report.average_fuzzy_f1);
    }
  }
  return 0;
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--dataset", a.datasets, "Dataset directory or manifest (repeatable)")
      ->required();
  cmd->add_option("--detector", a.detector, "Detector command, run via /bin/sh -c")->required();
  cmd->add_option("--config", a.config, "Replay config JSON");
  cmd->add_option("--out", a.out, "Report path (.json or .csv); '-' for stdout")->default_val("-");
  cmd->add_option("--format", a.format, "Force report format")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--workers", a.workers, "Parallel scene workers (default: $STREAMSCENE_WORKERS)");
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("streamscene"));
  CLI::App app{"Streaming 3D scene understanding toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunArgs replay_args;
  auto* replay_cmd = app.add_subcommand("replay", "Replay datasets through memory and a detector");
  add_run_options(replay_cmd, replay_args);

  RunArgs merge_args;
  auto* merge_cmd = app.add_subcommand("merge-baseline", "Per-frame detection + merge baseline");
  add_run_options(merge_cmd, merge_args);

  std::string preds_path, gt_path, eval_units = "m-rad";
  double eval_iou = ss::kDefaultIouThreshold;
  auto* eval_cmd = app.add_subcommand("eval", "Fuzzy F1 of a scene description against GT");
  eval_cmd->add_option("--preds", preds_path, "Predicted scene description")->required();
  eval_cmd->add_option("--gt", gt_path, "Ground-truth JSON")->required();
  eval_cmd->add_option("--iou", eval_iou, "IoU threshold")->default_val(ss::kDefaultIouThreshold);
  eval_cmd->add_option("--units", eval_units, "Units of the predictions")->default_val("m-rad");

  std::string box_a, box_b;
  auto* iou_cmd = app.add_subcommand("iou", "3D IoU of two oriented boxes");
  iou_cmd->add_option("--a", box_a, "x y z dx dy dz yaw, or a Bbox line")->required();
  iou_cmd->add_option("--b", box_b, "x y z dx dy dz yaw, or a Bbox line")->required();

  std::string parse_in, parse_units = "m-rad";
  bool parse_strict = false;
  auto* parse_cmd = app.add_subcommand("parse", "Parse and canonicalize a scene description");
  parse_cmd->add_option("--in", parse_in, "Input file ('-' for stdin)")->required();
  parse_cmd->add_flag("--strict", parse_strict, "Fail on the first malformed line");
  parse_cmd->add_option("--units", parse_units, "Units of the input")->default_val("m-rad");

  std::uint64_t sim_seed = 0;
  std::string sim_out;
  std::size_t sim_objects = 8, sim_frames = 32;
  double sim_flip = 0.0;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a synthetic dataset");
  sim_cmd->add_option("--seed", sim_seed, "Scene seed")->required();
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();
  sim_cmd->add_option("--objects", sim_objects, "Number of objects")->default_val(8);
  sim_cmd->add_option("--frames", sim_frames, "Orbit frames")->default_val(32);
  sim_cmd->add_option("--label-flip", sim_flip, "Per-pixel label flip probability")
      ->default_val(0.0)
      ->check(CLI::Range(0.0, 1.0));

  ss::OracleOptions oracle_opts;
  auto* oracle_cmd =
      app.add_subcommand("oracle-detector", "Serve the geometric oracle detector on stdin/stdout");
  oracle_cmd->add_option("--cluster-distance", oracle_opts.cluster_distance, "Meters")
      ->default_val(oracle_opts.cluster_distance);
  oracle_cmd->add_option("--min-points", oracle_opts.min_points, "Minimum cluster size")
      ->default_val(oracle_opts.min_points);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitEval;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*replay_cmd) return run_replay(replay_args, std::nullopt);
    if (*merge_cmd) return run_replay(merge_args, ss::ReplayMode::kMergeBaseline);

    if (*eval_cmd) {
      ss::ParseOptions opts;
      opts.units = units_from_name(eval_units);
      const auto parsed = ss::parse_scene_description(slurp(preds_path), opts);
      for (const auto& d : parsed.diagnostics) {
        spdlog::warn("{}:{}:{}: {}", preds_path, d.line, d.column, d.message);
      }
      const auto gt = load_gt(gt_path);
      gt.validate();
      const auto conv = ss::to_boxes(parsed.description, ss::CategoryVocabulary::standard());
      const auto report =
          ss::evaluate_report(conv.boxes, gt, ss::CategoryVocabulary::standard(), eval_iou);
      std::cout << ss::eval_report_json(report);
      return 0;
    }

    if (*iou_cmd) {
      const auto a = parse_box_arg(box_a);
      const auto b = parse_box_arg(box_b);
      std::printf("%.9f\n", ss::iou3d(a, b));
      return 0;
    }

    if (*parse_cmd) {
      ss::ParseOptions opts;
      opts.units = units_from_name(parse_units);
      opts.strict = parse_strict;
      std::string text;
      if (parse_in == "-") {
        std::stringstream buf;
        buf << std::cin.rdbuf();
        text = buf.str();
      } else {
        text = slurp(parse_in);
      }
      const auto res = ss::parse_scene_description(text, opts);
      for (const auto& d : res.diagnostics) {
        std::cerr << parse_in << ':' << d.line << ':' << d.column << ": " << d.message << '\n';
      }
      std::cout << ss::serialize(res.description);
      spdlog::info("{} records from {} non-blank lines, {} diagnostics",
                   res.description.records.size(), res.nonblank_lines, res.diagnostics.size());
      return 0;
    }

    if (*sim_cmd) {
      const auto scene = ss::generate_scene(sim_seed, sim_objects);
      ss::OrbitOptions orbit;
      orbit.frames = sim_frames;
      const auto poses = ss::orbit_trajectory(scene, orbit, sim_seed).poses();
      ss::RenderOptions render;
      render.label_flip_prob = sim_flip;
      render.seed = sim_seed;
      const auto ds = ss::make_dataset(scene, poses, ss::default_sim_intrinsics(),
                                       "sim_" + std::to_string(sim_seed), render);
      ss::save_dataset(ds, sim_out);
      std::vector<ss::OrientedBox3> gt_boxes;
      for (const auto& o : ds.annotations) gt_boxes.push_back(o.box);
      std::ofstream(std::filesystem::path(sim_out) / "scene.txt")
          << ss::serialize(ss::boxes_to_description(gt_boxes));
      spdlog::info("wrote {} frames, {} objects to {}", ds.frames.size(), ds.annotations.size(),
                   sim_out);
      return 0;
    }

    if (*oracle_cmd) {
      ss::OracleDetector detector(oracle_opts);
      return ss::serve_detector(detector, STDIN_FILENO, STDOUT_FILENO);
    }
  } catch (const ss::ProtocolError& e) {
    spdlog::error("detector protocol failure: {}", e.what());
    for (const auto& line : e.transcript()) spdlog::error("  {}", line);
    return kExitProtocol;
  } catch (const ss::SchemaError& e) {
    spdlog::error("{}", e.what());
    for (const auto& f : e.missing_files()) spdlog::error("  missing: {}", f);
    return kExitEval;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitEval;
  }
  return 0;
}
