#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "bevf/grid.hpp"

namespace bevf {

/// Row-major n x m cost matrix.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Minimum-cost matching of size min(n, m) (Kuhn-Munkres with potentials,
/// O(n^2 m)). Returns (row, col) pairs sorted by row.
std::vector<std::pair<int, int>> hungarian(const CostMatrix& cost);

struct MatchedPair {
  int estimate = 0;
  int target = 0;
  double distance = 0.0;
};

struct Assignment {
  std::vector<MatchedPair> pairs;
  std::vector<int> unmatched_estimates;
  std::vector<int> unmatched_targets;
};

/// Euclidean-distance matching. Pairs farther apart than `max_distance` are
/// released to the unmatched lists (no gating by default).
Assignment associate(const std::vector<WorldPoint>& estimates, const std::vector<WorldPoint>& targets,
                     double max_distance = std::numeric_limits<double>::infinity());

}  // namespace bevf
