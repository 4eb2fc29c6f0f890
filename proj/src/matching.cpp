#include "streamscene/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "streamscene/errors.hpp"

namespace streamscene {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("cost matrix rows differ in length");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

namespace {

// Dense solver for n <= m on finite costs; returns col index per row.
// 1-based potentials formulation.
std::vector<std::size_t> solve_dense(const std::vector<double>& a, std::size_t n, std::size_t m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment hungarian(const CostMatrix& costs) {
  Assignment out;
  if (costs.empty()) return out;
  const std::size_t rows = costs.rows(), cols = costs.cols();
  double max_abs = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = costs(r, c);
      if (std::isnan(v) || v == -std::numeric_limits<double>::infinity()) {
        throw ContractError("cost matrix entries must be finite or forbidden");
      }
      if (!costs.forbidden(r, c)) max_abs = std::max(max_abs, std::abs(v));
    }
  }
  // Any assignment using one more forbidden pair costs more than any using
  // one fewer.
  const std::size_t k = std::min(rows, cols);
  const double sentinel = 2.0 * static_cast<double>(k) * max_abs + 1.0;

  const bool transpose = rows > cols;
  const std::size_t n = transpose ? cols : rows;
  const std::size_t m = transpose ? rows : cols;
  std::vector<double> a(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double v = transpose ? costs(j, i) : costs(i, j);
      a[i * m + j] = v == CostMatrix::kForbidden ? sentinel : v;
    }
  }
  const auto assign = solve_dense(a, n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = transpose ? assign[i] : i;
    const std::size_t c = transpose ? i : assign[i];
    if (costs.forbidden(r, c)) continue;
    out.pairs.emplace_back(r, c);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (const auto& [r, c] : out.pairs) out.total_cost += costs(r, c);
  return out;
}

std::vector<BoxMatch> match_boxes(std::span<const OrientedBox3> preds,
                                  std::span<const OrientedBox3> gts, double iou_threshold,
                                  bool class_constrained) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ContractError("IoU threshold must lie in (0, 1)");
  }
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    groups[class_constrained ? preds[i].label : std::string()].first.push_back(i);
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    groups[class_constrained ? gts[j].label : std::string()].second.push_back(j);
  }
  std::vector<BoxMatch> out;
  for (const auto& [_, group] : groups) {
    const auto& [pi, gi] = group;
    if (pi.empty() || gi.empty()) continue;
    CostMatrix cost(pi.size(), gi.size());
    std::vector<double> ious(pi.size() * gi.size());
    for (std::size_t r = 0; r < pi.size(); ++r) {
      for (std::size_t c = 0; c < gi.size(); ++c) {
        const double iou = iou3d(preds[pi[r]], gts[gi[c]]);
        ious[r * gi.size() + c] = iou;
        cost(r, c) = 1.0 - iou;
      }
    }
    for (const auto& [r, c] : hungarian(cost).pairs) {
      const double iou = ious[r * gi.size() + c];
      if (iou >= iou_threshold) out.push_back({pi[r], gi[c], iou});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const BoxMatch& a, const BoxMatch& b) { return a.pred < b.pred; });
  return out;
}

std::vector<OrientedBox3> merge_detections(std::span<const OrientedBox3> existing,
                                           std::span<const OrientedBox3> incoming,
                                           double threshold) {
  std::vector<OrientedBox3> out(existing.begin(), existing.end());
  std::vector<char> absorbed(incoming.size(), 0);
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < incoming.size(); ++i) groups[incoming[i].label].first.push_back(i);
  for (std::size_t j = 0; j < existing.size(); ++j) groups[existing[j].label].second.push_back(j);
  for (const auto& [_, group] : groups) {
    const auto& [ii, ei] = group;
    if (ii.empty() || ei.empty()) continue;
    CostMatrix cost(ii.size(), ei.size());
    std::vector<double> ious(ii.size() * ei.size());
    for (std::size_t r = 0; r < ii.size(); ++r) {
      for (std::size_t c = 0; c < ei.size(); ++c) {
        const double iou = iou3d(incoming[ii[r]], existing[ei[c]]);
        ious[r * ei.size() + c] = iou;
        cost(r, c) = 1.0 - iou;
      }
    }
    for (const auto& [r, c] : hungarian(cost).pairs) {
      if (ious[r * ei.size() + c] > threshold) {
        out[ei[c]] = incoming[ii[r]];
        absorbed[ii[r]] = 1;
      }
    }
  }
  for (std::size_t i = 0; i < incoming.size(); ++i) {
    if (!absorbed[i]) out.push_back(incoming[i]);
  }
  return out;
}

}  // namespace streamscene
