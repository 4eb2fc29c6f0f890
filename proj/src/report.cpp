#include "streamscene/report.hpp"

#include <cstdio>

#include <json.hpp>

#include "binary_io.hpp"
#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

using ojson = nlohmann::ordered_json;

ojson class_json(const ClassReport& c) {
  return {{"label", c.label},         {"scored", c.scored},        {"precision", c.precision},
          {"recall", c.recall},       {"vanilla_f1", c.vanilla_f1}, {"fuzzy_f1", c.fuzzy_f1},
          {"n_pred", c.n_pred},       {"n_strict", c.n_strict},    {"n_lenient", c.n_lenient},
          {"tp_strict", c.tp_strict}, {"tp_lenient", c.tp_lenient}, {"fp", c.fp},
          {"fn", c.fn}};
}

ojson eval_json(const EvalReport& r) {
  ojson classes = ojson::array();
  for (const auto& c : r.classes) classes.push_back(class_json(c));
  return {{"average_fuzzy_f1", r.average_fuzzy_f1},
          {"scored_classes", r.scored_classes},
          {"no_op", r.no_op},
          {"tp_strict", r.tp_strict},
          {"tp_lenient", r.tp_lenient},
          {"fp", r.fp},
          {"fn", r.fn},
          {"classes", std::move(classes)}};
}

ojson step_json(const TimestepResult& ts) {
  ojson diags = ojson::array();
  for (const auto& d : ts.diagnostics) {
    diags.push_back({{"line", d.line}, {"column", d.column}, {"message", d.message}});
  }
  return {{"t", ts.t},
          {"frame_index", ts.frame_index},
          {"frame_points", ts.frame_points},
          {"memory_size", ts.memory_size},
          {"patch_count", ts.patch_count},
          {"n_detections", ts.boxes.size()},
          {"dropped_boxes", ts.dropped_boxes},
          {"n_strict", ts.n_strict},
          {"n_lenient", ts.n_lenient},
          {"detections", serialize(ts.detections)},
          {"diagnostics", std::move(diags)},
          {"eval", eval_json(ts.report)}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void csv_row(std::string& out, const SceneResult& scene, const char* block,
             const TimestepResult& ts, const CategoryVocabulary& categories) {
  const auto& r = ts.report;
  out += csv_field(scene.scene_id) + ',' + to_string(scene.mode) + ',' + block;
  for (std::size_t v : {ts.t, ts.frame_index, ts.frame_points, ts.memory_size, ts.patch_count,
                        ts.boxes.size(), ts.dropped_boxes, ts.diagnostics.size(), ts.n_strict,
                        ts.n_lenient, r.tp_strict, r.tp_lenient, r.fp, r.fn, r.scored_classes}) {
    out += ',' + std::to_string(v);
  }
  out += std::string(",") + (r.no_op ? "1" : "0") + ',' + fmt_double(r.average_fuzzy_f1);
  for (const auto& name : categories.names()) {
    out += ',';
    for (const auto& c : r.classes) {
      if (c.label == name && c.scored) out += fmt_double(c.fuzzy_f1);
    }
  }
  out += '\n';
}

}  // namespace

ReportFormat report_format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? ReportFormat::kCsv : ReportFormat::kJson;
}

std::string eval_report_json(const EvalReport& report) { return eval_json(report).dump(2) + "\n"; }

std::string report_json(std::span<const SceneResult> results) {
  ojson scenes = ojson::array();
  for (const auto& s : results) {
    ojson steps = ojson::array();
    for (const auto& ts : s.timesteps) steps.push_back(step_json(ts));
    ojson final_block = s.timesteps.empty() ? ojson(nullptr) : step_json(s.timesteps.back());
    scenes.push_back({{"scene_id", s.scene_id},
                      {"mode", to_string(s.mode)},
                      {"truncated", s.truncated},
                      {"timesteps", std::move(steps)},
                      {"final", std::move(final_block)}});
  }
  ojson doc = {{"format", "streamscene-report/1"}, {"scenes", std::move(scenes)}};
  return doc.dump(2) + "\n";
}

std::string report_csv(std::span<const SceneResult> results,
                       const CategoryVocabulary& categories) {
  std::string out =
      "scene_id,mode,block,t,frame_index,frame_points,memory_size,patch_count,n_detections,"
      "dropped_boxes,n_diagnostics,n_strict,n_lenient,tp_strict,tp_lenient,fp,fn,"
      "scored_classes,no_op,avg_fuzzy_f1";
  for (const auto& name : categories.names()) out += ",fuzzy_f1_" + csv_field(name);
  out += '\n';
  for (const auto& s : results) {
    for (const auto& ts : s.timesteps) csv_row(out, s, "step", ts, categories);
    if (!s.timesteps.empty()) csv_row(out, s, "final", s.timesteps.back(), categories);
  }
  return out;
}

void write_report(const std::filesystem::path& path, std::span<const SceneResult> results,
                  ReportFormat format, const CategoryVocabulary& categories) {
  detail::write_file(path, format == ReportFormat::kCsv ? report_csv(results, categories)
                                                        : report_json(results));
}

}  // namespace streamscene
