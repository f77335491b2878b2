#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bevf {

/// Raster geometry. Pixel (r, c) samples the world point
/// (origin_x + c * x_m_per_px, origin_y + r * y_m_per_px); there is no
/// half-pixel offset.
struct GridSpec {
  int width_px = 512;
  int height_px = 64;
  double x_m_per_px = 1.0;
  double y_m_per_px = 0.5;
  double origin_x = 0.0;
  double origin_y = 0.0;

  void validate() const;
  std::size_t pixels() const {
    return static_cast<std::size_t>(width_px) * static_cast<std::size_t>(height_px);
  }
  bool operator==(const GridSpec&) const = default;
};

struct PixelCoord {
  double r = 0.0;
  double c = 0.0;
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
};

// Real-valued; callers round where they need discrete indices.
PixelCoord world_to_pixel(double x, double y, const GridSpec& spec);
WorldPoint pixel_to_world(double r, double c, const GridSpec& spec);

/// Row-major occupancy raster with values in [0, 1].
class BevGrid {
 public:
  BevGrid() = default;
  explicit BevGrid(const GridSpec& spec);
  BevGrid(const GridSpec& spec, std::vector<double> values);

  const GridSpec& spec() const { return spec_; }
  int rows() const { return spec_.height_px; }
  int cols() const { return spec_.width_px; }

  double& at(int r, int c) { return values_[index(r, c)]; }
  double at(int r, int c) const { return values_[index(r, c)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const BevGrid&) const = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(spec_.width_px) +
           static_cast<std::size_t>(c);
  }

  GridSpec spec_{};
  std::vector<double> values_;
};

}  // namespace bevf
