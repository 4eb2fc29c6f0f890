#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "streamscene/geometry.hpp"

namespace streamscene {

// Dense row-major cost matrix. Entries equal to kForbidden mark pairs that
// may never be assigned.
class CostMatrix {
 public:
  static constexpr double kForbidden = std::numeric_limits<double>::infinity();

  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  bool forbidden(std::size_t r, std::size_t c) const { return (*this)(r, c) == kForbidden; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), ascending rows
  double total_cost = 0.0;
};

// Minimum-cost assignment on a rectangular matrix (shortest augmenting path
// with potentials, O(n^2 m)). Among assignments it first maximizes the
// number of non-forbidden pairs, then minimizes their total cost. Forbidden
// pairs never appear in the result. Rows and columns are scanned in
// ascending order, so equal-cost optima resolve the same way every run.
// Throws ContractError on NaN or -inf entries.
Assignment hungarian(const CostMatrix& costs);

struct BoxMatch {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

// Optimal (cost = 1 - IoU) assignment, optionally within each class; pairs
// with IoU below `iou_threshold` are dropped after assignment. Output is
// sorted by prediction index.
std::vector<BoxMatch> match_boxes(std::span<const OrientedBox3> preds,
                                  std::span<const OrientedBox3> gts, double iou_threshold,
                                  bool class_constrained = true);

// Merge rule of the per-frame merge baseline: each incoming box is assigned
// to an existing box of the same class; when the matched IoU is strictly
// greater than `threshold`, the existing box is replaced by the incoming one,
// otherwise the incoming box is appended. Existing order is preserved;
// appended boxes keep their incoming order.
std::vector<OrientedBox3> merge_detections(std::span<const OrientedBox3> existing,
                                           std::span<const OrientedBox3> incoming,
                                           double threshold = 0.25);

}  // namespace streamscene
