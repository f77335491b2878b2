#pragma once

#include <vector>

#include "bevf/grid.hpp"

namespace bevf {

struct ExtractConfig {
  double p_min = 0.5;
  double win_w = 5.0;  // half-window along x, meters
  double win_h = 2.0;  // half-window along y, meters

  void validate() const;
};

struct PositionEstimate {
  double x = 0.0;  // meters, subpixel
  double y = 0.0;
  double peak_p = 0.0;
  int row = 0;  // discrete peak
  int col = 0;
};

/// Half-window in pixels: (rows, cols) = (round(win_h / y_res), round(win_w / x_res)).
struct PixelWindow {
  int half_rows = 0;
  int half_cols = 0;
};
PixelWindow window_pixels(const ExtractConfig& cfg, const GridSpec& spec);

/// Probability-weighted centroid of the window around (row, col), clipped to
/// the grid, in world coordinates. Throws std::domain_error on zero mass.
WorldPoint subpixel_location(const BevGrid& grid, int row, int col, PixelWindow win);

/// Repeatedly takes the global maximum (ties: lowest row, then lowest column)
/// while it exceeds p_min, refines it to subpixel and clears its window.
/// Results come in extraction order.
std::vector<PositionEstimate> extract_positions(const BevGrid& grid, const ExtractConfig& cfg);

}  // namespace bevf
