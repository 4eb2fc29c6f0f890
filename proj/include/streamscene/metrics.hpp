#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamscene/categories.hpp"
#include "streamscene/geometry.hpp"
#include "streamscene/matching.hpp"

namespace streamscene {

inline constexpr double kDefaultIouThreshold = 0.25;
inline constexpr double kDefaultStrictVisibility = 0.4;
inline constexpr double kDefaultLenientVisibility = 0.1;
inline constexpr double kDefaultMinObjectDim = 0.15;

struct AnnotatedObject {
  std::string id;
  OrientedBox3 box;
};

struct VisibilityOptions {
  int samples_per_side = 8;       // s x s grid per face
  double depth_tolerance = 0.05;  // meters
};

// Fraction of face samples that project into the image in front of the
// camera and, when `depth` is given, are not behind the depth map by more
// than the tolerance. `camera_to_frame` maps camera coordinates into the
// frame the box is expressed in.
double object_visibility(const OrientedBox3& box, const RigidTransform& camera_to_frame,
                         const CameraIntrinsics& intrinsics, const DepthMap* depth = nullptr,
                         const VisibilityOptions& options = {});

struct VisibilityRecord {
  std::string object_id;
  std::vector<double> per_frame;
  double running_max = 0.0;

  void add(double fraction);
};

// Running-max visibility for every object id seen so far.
class VisibilityTracker {
 public:
  void add(const std::string& object_id, double fraction);
  double running_max(const std::string& object_id) const;  // 0 when unseen
  const std::map<std::string, VisibilityRecord>& records() const { return records_; }
  std::map<std::string, double> maxima() const;

 private:
  std::map<std::string, VisibilityRecord> records_;
};

struct GroundTruthSets {
  std::vector<AnnotatedObject> strict;
  std::vector<AnnotatedObject> lenient;

  // Throws ContractError unless every strict id appears in lenient.
  void validate() const;
  std::vector<OrientedBox3> strict_boxes() const;
  std::vector<OrientedBox3> lenient_boxes() const;
};

struct GtThresholds {
  double v_strict = kDefaultStrictVisibility;
  double v_lenient = kDefaultLenientVisibility;
  double min_dim = kDefaultMinObjectDim;

  void validate() const;  // throws ConfigError
};

// Drops objects whose three dimensions are all below min_dim, then splits the
// rest by running-max visibility (ids missing from `visibility` count as 0).
GroundTruthSets build_gt_sets(std::span<const AnnotatedObject> annotations,
                              const std::map<std::string, double>& visibility,
                              const GtThresholds& thresholds = {});

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  std::vector<BoxMatch> matches;
};

// Class-constrained optimal matching. No predictions: precision 0, or 1 when
// there is also no ground truth. No ground truth: recall 1.
PrecisionRecall precision_recall(std::span<const OrientedBox3> preds,
                                 std::span<const OrientedBox3> gts,
                                 double iou_threshold = kDefaultIouThreshold);

double f1_score(double precision, double recall);

double vanilla_f1(std::span<const OrientedBox3> preds, std::span<const OrientedBox3> gts,
                  double iou_threshold = kDefaultIouThreshold);

struct FuzzyScore {
  double precision = 0.0;  // over the lenient set
  double recall = 0.0;     // over the strict set
  double f1 = 0.0;
  std::size_t tp_strict = 0;
  std::size_t tp_lenient = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;  // strict objects left unmatched
};

// One class-constrained matching of predictions against the lenient set;
// matches whose object is also strict count toward recall. With no
// predictions, precision is 1 when nothing was required (empty strict set)
// and 0 otherwise.
FuzzyScore fuzzy_score(std::span<const OrientedBox3> preds, const GroundTruthSets& gt,
                       double iou_threshold = kDefaultIouThreshold);

double fuzzy_f1(std::span<const OrientedBox3> preds, const GroundTruthSets& gt,
                double iou_threshold = kDefaultIouThreshold);

struct ClassReport {
  std::string label;
  bool scored = false;  // false without strict objects and predictions
  double precision = 0.0;
  double recall = 0.0;
  double vanilla_f1 = 0.0;  // against the strict set
  double fuzzy_f1 = 0.0;
  std::size_t n_pred = 0;
  std::size_t n_strict = 0;
  std::size_t n_lenient = 0;
  std::size_t tp_strict = 0;
  std::size_t tp_lenient = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  double average_fuzzy_f1 = 1.0;  // macro average over scored classes
  std::size_t scored_classes = 0;
  bool no_op = true;  // nothing to score in any class
  std::size_t tp_strict = 0;
  std::size_t tp_lenient = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Per-category fuzzy F1 plus the macro average. Predictions and objects with
// labels outside `categories` are ignored. An all-empty report is flagged
// no_op with average 1.
EvalReport evaluate_report(std::span<const OrientedBox3> preds, const GroundTruthSets& gt,
                           const CategoryVocabulary& categories,
                           double iou_threshold = kDefaultIouThreshold);

}  // namespace streamscene
