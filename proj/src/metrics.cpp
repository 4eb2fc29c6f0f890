#include "streamscene/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

std::vector<OrientedBox3> boxes_of(const std::vector<AnnotatedObject>& objs) {
  std::vector<OrientedBox3> out;
  out.reserve(objs.size());
  for (const auto& o : objs) out.push_back(o.box);
  return out;
}

}  // namespace

double object_visibility(const OrientedBox3& box, const RigidTransform& camera_to_frame,
                         const CameraIntrinsics& k, const DepthMap* depth,
                         const VisibilityOptions& options) {
  k.validate();
  if (options.samples_per_side < 1) throw ConfigError("samples_per_side must be positive");
  if (depth && (depth->width != k.width || depth->height != k.height)) {
    throw DimensionError("depth map size does not match intrinsics");
  }
  const RigidTransform frame_to_camera = camera_to_frame.inverse();
  const int s = options.samples_per_side;
  const double c = std::cos(box.yaw), sn = std::sin(box.yaw);
  const Vec3 half = 0.5 * box.dims;

  std::size_t visible = 0, total = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int sign = -1; sign <= 1; sign += 2) {
      for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) {
          Vec3 local;
          local[axis] = sign * half[axis];
          local[a1] = (-1.0 + (2.0 * i + 1.0) / s) * half[a1];
          local[a2] = (-1.0 + (2.0 * j + 1.0) / s) * half[a2];
          const Vec3 world(box.center.x() + c * local.x() - sn * local.y(),
                           box.center.y() + sn * local.x() + c * local.y(),
                           box.center.z() + local.z());
          ++total;
          const Vec3 cam = frame_to_camera.apply(world);
          if (!(cam.z() > 0)) continue;
          const double u = k.fx * cam.x() / cam.z() + k.cx;
          const double v = k.fy * cam.y() / cam.z() + k.cy;
          const long pu = std::lround(u), pv = std::lround(v);
          if (pu < 0 || pv < 0 || pu >= k.width || pv >= k.height) continue;
          if (depth) {
            const double d = depth->at(static_cast<int>(pu), static_cast<int>(pv));
            if (std::isfinite(d) && d > 0 && cam.z() > d + options.depth_tolerance) continue;
          }
          ++visible;
        }
      }
    }
  }
  return static_cast<double>(visible) / static_cast<double>(total);
}

void VisibilityRecord::add(double fraction) {
  per_frame.push_back(fraction);
  running_max = std::max(running_max, fraction);
}

void VisibilityTracker::add(const std::string& object_id, double fraction) {
  auto& rec = records_[object_id];
  rec.object_id = object_id;
  rec.add(fraction);
}

double VisibilityTracker::running_max(const std::string& object_id) const {
  auto it = records_.find(object_id);
  return it == records_.end() ? 0.0 : it->second.running_max;
}

std::map<std::string, double> VisibilityTracker::maxima() const {
  std::map<std::string, double> out;
  for (const auto& [id, rec] : records_) out[id] = rec.running_max;
  return out;
}

void GroundTruthSets::validate() const {
  std::set<std::string> lenient_ids;
  for (const auto& o : lenient) lenient_ids.insert(o.id);
  for (const auto& o : strict) {
    if (!lenient_ids.count(o.id)) {
      throw ContractError("strict object '" + o.id + "' is missing from the lenient set");
    }
  }
}

std::vector<OrientedBox3> GroundTruthSets::strict_boxes() const { return boxes_of(strict); }
std::vector<OrientedBox3> GroundTruthSets::lenient_boxes() const { return boxes_of(lenient); }

void GtThresholds::validate() const {
  if (!(0.0 < v_lenient && v_lenient <= v_strict && v_strict <= 1.0)) {
    throw ConfigError("visibility thresholds must satisfy 0 < v_lenient <= v_strict <= 1");
  }
  if (!(min_dim >= 0.0)) throw ConfigError("min_dim must be non-negative");
}

GroundTruthSets build_gt_sets(std::span<const AnnotatedObject> annotations,
                              const std::map<std::string, double>& visibility,
                              const GtThresholds& th) {
  th.validate();
  GroundTruthSets out;
  for (const auto& obj : annotations) {
    const auto& d = obj.box.dims;
    if (d.x() < th.min_dim && d.y() < th.min_dim && d.z() < th.min_dim) continue;
    auto it = visibility.find(obj.id);
    const double vis = it == visibility.end() ? 0.0 : it->second;
    if (vis >= th.v_lenient) out.lenient.push_back(obj);
    if (vis >= th.v_strict) out.strict.push_back(obj);
  }
  return out;
}

PrecisionRecall precision_recall(std::span<const OrientedBox3> preds,
                                 std::span<const OrientedBox3> gts, double iou_threshold) {
  PrecisionRecall out;
  out.matches = match_boxes(preds, gts, iou_threshold, true);
  const double tp = static_cast<double>(out.matches.size());
  out.precision = preds.empty() ? (gts.empty() ? 1.0 : 0.0) : tp / static_cast<double>(preds.size());
  out.recall = gts.empty() ? 1.0 : tp / static_cast<double>(gts.size());
  return out;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0 ? 2.0 * precision * recall / denom : 0.0;
}

double vanilla_f1(std::span<const OrientedBox3> preds, std::span<const OrientedBox3> gts,
                  double iou_threshold) {
  const auto pr = precision_recall(preds, gts, iou_threshold);
  return f1_score(pr.precision, pr.recall);
}

FuzzyScore fuzzy_score(std::span<const OrientedBox3> preds, const GroundTruthSets& gt,
                       double iou_threshold) {
  gt.validate();
  std::set<std::string> strict_ids;
  for (const auto& o : gt.strict) strict_ids.insert(o.id);
  const auto lenient = gt.lenient_boxes();
  const auto matches = match_boxes(preds, lenient, iou_threshold, true);

  FuzzyScore s;
  s.tp_lenient = matches.size();
  for (const auto& m : matches) {
    if (strict_ids.count(gt.lenient[m.gt].id)) ++s.tp_strict;
  }
  s.fp = preds.size() - s.tp_lenient;
  s.fn = gt.strict.size() - s.tp_strict;
  if (preds.empty()) {
    s.precision = gt.strict.empty() ? 1.0 : 0.0;
  } else {
    s.precision = static_cast<double>(s.tp_lenient) / static_cast<double>(preds.size());
  }
  s.recall = gt.strict.empty()
                 ? 1.0
                 : static_cast<double>(s.tp_strict) / static_cast<double>(gt.strict.size());
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

double fuzzy_f1(std::span<const OrientedBox3> preds, const GroundTruthSets& gt,
                double iou_threshold) {
  return fuzzy_score(preds, gt, iou_threshold).f1;
}

EvalReport evaluate_report(std::span<const OrientedBox3> preds, const GroundTruthSets& gt,
                           const CategoryVocabulary& categories, double iou_threshold) {
  gt.validate();
  EvalReport report;
  double sum = 0.0;
  for (const auto& name : categories.names()) {
    ClassReport cr;
    cr.label = name;
    std::vector<OrientedBox3> cls_preds;
    for (const auto& p : preds) {
      if (to_lower(p.label) == name) cls_preds.push_back(p);
    }
    GroundTruthSets cls_gt;
    for (const auto& o : gt.strict) {
      if (to_lower(o.box.label) == name) cls_gt.strict.push_back(o);
    }
    for (const auto& o : gt.lenient) {
      if (to_lower(o.box.label) == name) cls_gt.lenient.push_back(o);
    }
    cr.n_pred = cls_preds.size();
    cr.n_strict = cls_gt.strict.size();
    cr.n_lenient = cls_gt.lenient.size();
    // Lenient-only objects are optional: with no predictions there is nothing to score.
    cr.scored = cr.n_pred + cr.n_strict > 0;
    if (cr.scored) {
      const auto fs = fuzzy_score(cls_preds, cls_gt, iou_threshold);
      cr.precision = fs.precision;
      cr.recall = fs.recall;
      cr.fuzzy_f1 = fs.f1;
      cr.tp_strict = fs.tp_strict;
      cr.tp_lenient = fs.tp_lenient;
      cr.fp = fs.fp;
      cr.fn = fs.fn;
      cr.vanilla_f1 = vanilla_f1(cls_preds, cls_gt.strict_boxes(), iou_threshold);
      sum += cr.fuzzy_f1;
      ++report.scored_classes;
      report.tp_strict += cr.tp_strict;
      report.tp_lenient += cr.tp_lenient;
      report.fp += cr.fp;
      report.fn += cr.fn;
    }
    report.classes.push_back(std::move(cr));
  }
  report.no_op = report.scored_classes == 0;
  report.average_fuzzy_f1 = report.no_op ? 1.0 : sum / static_cast<double>(report.scored_classes);
  return report;
}

}  // namespace streamscene
