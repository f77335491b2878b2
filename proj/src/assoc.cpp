#include "bevf/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bevf {
namespace {

// Requires rows <= cols. Returns the column assigned to each row.
std::vector<int> solve_wide(const CostMatrix& a) {
  const int n = a.rows();
  const int m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0);  // p[j]: row (1-based) matched to column j
  std::vector<int> way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

}  // namespace

std::vector<std::pair<int, int>> hungarian(const CostMatrix& cost) {
  std::vector<std::pair<int, int>> pairs;
  if (cost.rows() == 0 || cost.cols() == 0) return pairs;
  for (int r = 0; r < cost.rows(); ++r) {
    for (int c = 0; c < cost.cols(); ++c) {
      if (!std::isfinite(cost(r, c))) throw std::invalid_argument("hungarian: costs must be finite");
    }
  }
  if (cost.rows() <= cost.cols()) {
    const auto cols = solve_wide(cost);
    for (int r = 0; r < cost.rows(); ++r) pairs.emplace_back(r, cols[r]);
  } else {
    CostMatrix t(cost.cols(), cost.rows());
    for (int r = 0; r < cost.rows(); ++r) {
      for (int c = 0; c < cost.cols(); ++c) t(c, r) = cost(r, c);
    }
    const auto rows = solve_wide(t);
    for (int c = 0; c < cost.cols(); ++c) pairs.emplace_back(rows[c], c);
    std::sort(pairs.begin(), pairs.end());
  }
  return pairs;
}

Assignment associate(const std::vector<WorldPoint>& estimates, const std::vector<WorldPoint>& targets,
                     double max_distance) {
  const int n = static_cast<int>(estimates.size());
  const int m = static_cast<int>(targets.size());
  CostMatrix cost(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      cost(i, j) = std::hypot(estimates[i].x - targets[j].x, estimates[i].y - targets[j].y);
    }
  }
  Assignment out;
  std::vector<char> est_used(n, 0);
  std::vector<char> tgt_used(m, 0);
  for (const auto& [i, j] : hungarian(cost)) {
    if (cost(i, j) > max_distance) continue;
    out.pairs.push_back({i, j, cost(i, j)});
    est_used[i] = 1;
    tgt_used[j] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!est_used[i]) out.unmatched_estimates.push_back(i);
  }
  for (int j = 0; j < m; ++j) {
    if (!tgt_used[j]) out.unmatched_targets.push_back(j);
  }
  return out;
}

}  // namespace bevf
