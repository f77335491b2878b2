#include "bevf/extract.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bevf {

void ExtractConfig::validate() const {
  if (!(p_min > 0.0 && p_min < 1.0)) throw std::invalid_argument("extract: p_min must be in (0,1)");
  if (!(win_w > 0.0) || !(win_h > 0.0)) throw std::invalid_argument("extract: window sizes must be > 0");
}

PixelWindow window_pixels(const ExtractConfig& cfg, const GridSpec& spec) {
  return {static_cast<int>(std::lround(cfg.win_h / spec.y_m_per_px)),
          static_cast<int>(std::lround(cfg.win_w / spec.x_m_per_px))};
}

WorldPoint subpixel_location(const BevGrid& grid, int row, int col, PixelWindow win) {
  if (row < 0 || row >= grid.rows() || col < 0 || col >= grid.cols()) {
    throw std::out_of_range("subpixel_location: peak outside grid");
  }
  const int r0 = std::max(0, row - win.half_rows);
  const int r1 = std::min(grid.rows() - 1, row + win.half_rows);
  const int c0 = std::max(0, col - win.half_cols);
  const int c1 = std::min(grid.cols() - 1, col + win.half_cols);
  double mass = 0.0;
  double sum_r = 0.0;
  double sum_c = 0.0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double p = grid.at(r, c);
      mass += p;
      sum_r += p * r;
      sum_c += p * c;
    }
  }
  if (!(mass > 0.0)) throw std::domain_error("subpixel_location: window has zero probability mass");
  return pixel_to_world(sum_r / mass, sum_c / mass, grid.spec());
}

std::vector<PositionEstimate> extract_positions(const BevGrid& grid, const ExtractConfig& cfg) {
  cfg.validate();
  BevGrid work = grid;
  const PixelWindow win = window_pixels(cfg, grid.spec());
  std::vector<PositionEstimate> out;
  const auto values = work.values();
  while (true) {
    // max_element returns the first maximum, i.e. row-major tie-breaking.
    const auto it = std::max_element(values.begin(), values.end());
    if (it == values.end() || !(*it > cfg.p_min)) break;
    const auto idx = static_cast<int>(it - values.begin());
    const int row = idx / work.cols();
    const int col = idx % work.cols();
    const auto p = subpixel_location(work, row, col, win);
    out.push_back({p.x, p.y, *it, row, col});
    const int r0 = std::max(0, row - win.half_rows);
    const int r1 = std::min(work.rows() - 1, row + win.half_rows);
    const int c0 = std::max(0, col - win.half_cols);
    const int c1 = std::min(work.cols() - 1, col + win.half_cols);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) work.at(r, c) = 0.0;
    }
  }
  return out;
}

}  // namespace bevf
