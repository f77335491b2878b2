#include "bevf/bev.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "binary_io.hpp"
#include "bevf/error.hpp"
#include "bevf/parallel.hpp"

namespace bevf {

void GridSpec::validate() const {
  if (width_px < 1 || height_px < 1) throw std::invalid_argument("grid: dimensions must be >= 1");
  if (!(x_m_per_px > 0.0) || !(y_m_per_px > 0.0)) {
    throw std::invalid_argument("grid: resolutions must be > 0");
  }
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw std::invalid_argument("grid: origin must be finite");
  }
}

PixelCoord world_to_pixel(double x, double y, const GridSpec& spec) {
  return {(y - spec.origin_y) / spec.y_m_per_px, (x - spec.origin_x) / spec.x_m_per_px};
}

WorldPoint pixel_to_world(double r, double c, const GridSpec& spec) {
  return {spec.origin_x + c * spec.x_m_per_px, spec.origin_y + r * spec.y_m_per_px};
}

BevGrid::BevGrid(const GridSpec& spec) : spec_(spec), values_(spec.pixels(), 0.0) {
  spec.validate();
}

BevGrid::BevGrid(const GridSpec& spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
  spec.validate();
  if (values_.size() != spec.pixels()) throw ShapeError("grid: value count does not match spec");
}

double gaussian_at(const VehicleState& v, double x, double y) {
  const double dx = (x - v.cx) / (std::numbers::sqrt2 * v.w / 2.0);
  const double dy = (y - v.cy) / (std::numbers::sqrt2 * v.h / 2.0);
  return std::exp(-(dx * dx) - (dy * dy));
}

BevGrid render_frame(const Frame& frame, const GridSpec& spec) {
  BevGrid grid(spec);
  for (const auto& v : frame.vehicles) {
    const double reach_x = kRenderSupportSigmas * v.w / 2.0;
    const double reach_y = kRenderSupportSigmas * v.h / 2.0;
    const auto lo = world_to_pixel(v.cx - reach_x, v.cy - reach_y, spec);
    const auto hi = world_to_pixel(v.cx + reach_x, v.cy + reach_y, spec);
    const double r0 = std::max(0.0, std::ceil(std::min(lo.r, hi.r)));
    const double r1 = std::min(spec.height_px - 1.0, std::floor(std::max(lo.r, hi.r)));
    const double c0 = std::max(0.0, std::ceil(std::min(lo.c, hi.c)));
    const double c1 = std::min(spec.width_px - 1.0, std::floor(std::max(lo.c, hi.c)));
    if (r0 > r1 || c0 > c1) continue;
    for (int r = static_cast<int>(r0); r <= static_cast<int>(r1); ++r) {
      for (int c = static_cast<int>(c0); c <= static_cast<int>(c1); ++c) {
        const auto p = pixel_to_world(r, c, spec);
        double& cell = grid.at(r, c);
        cell = std::max(cell, gaussian_at(v, p.x, p.y));
      }
    }
  }
  return grid;
}

std::vector<BevGrid> render_frames(const std::vector<Frame>& frames, const GridSpec& spec,
                                   int threads) {
  std::vector<BevGrid> out(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) { out[i] = render_frame(frames[i], spec); });
  return out;
}

Frame restrict_to(const Frame& frame, const Frame& reference) {
  std::set<std::int64_t> ids;
  for (const auto& v : reference.vehicles) ids.insert(v.id);
  Frame out;
  out.t_index = frame.t_index;
  for (const auto& v : frame.vehicles) {
    if (ids.count(v.id) != 0) out.vehicles.push_back(v);
  }
  return out;
}

SampleStack build_sample(const SceneSequence& seq, std::size_t t, int d, const GridSpec& spec) {
  if (d < 1) throw std::invalid_argument("build_sample: d must be >= 1");
  const auto depth = static_cast<std::size_t>(d);
  if (t + 1 < depth) {
    throw RangeError("build_sample: t=" + std::to_string(t) + " has " + std::to_string(t) +
                     " frames of history, needs " + std::to_string(depth - 1));
  }
  if (t + depth >= seq.size()) {
    const std::size_t have = seq.size() > t ? seq.size() - t - 1 : 0;
    throw RangeError("build_sample: t=" + std::to_string(t) + " has " + std::to_string(have) +
                     " future frames, needs " + std::to_string(depth));
  }
  SampleStack s;
  s.d = d;
  s.dt_s = seq.dt_s();
  s.input.reserve(depth);
  s.target.reserve(depth);
  const Frame& last = seq.frames[t];
  for (std::size_t k = 0; k < depth; ++k) {
    s.input.push_back(render_frame(seq.frames[t + 1 - depth + k], spec));
  }
  for (std::size_t k = 1; k <= depth; ++k) {
    s.target.push_back(render_frame(restrict_to(seq.frames[t + k], last), spec));
  }
  return s;
}

std::string write_image(const BevGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.cols()) + " " + std::to_string(grid.rows()) +
                    "\n255\n";
  out.reserve(out.size() + grid.values().size());
  for (double p : grid.values()) {
    const double scaled = std::floor(255.0 * std::clamp(p, 0.0, 1.0) + 0.5);
    out.push_back(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  return out;
}

BevGrid read_image(std::string_view bytes, const GridSpec& geometry) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      const char ch = bytes[pos];
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      if (++digits > 9) throw FormatError("pgm: header value too large");
    }
    if (digits == 0) throw FormatError("pgm: malformed header");
    return value;
  };
  if (bytes.substr(0, 2) != "P5") throw FormatError("pgm: expected binary P5 image");
  pos = 2;
  const long width = number();
  const long height = number();
  const long maxval = number();
  if (width < 1 || height < 1) throw FormatError("pgm: empty image");
  if (maxval != 255) throw FormatError("pgm: only 8-bit images (maxval 255) are supported");
  ++pos;  // single whitespace before raster
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + n) throw FormatError("pgm: truncated raster");
  GridSpec spec = geometry;
  spec.width_px = static_cast<int>(width);
  spec.height_px = static_cast<int>(height);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  }
  return BevGrid(spec, std::move(values));
}

std::string write_stack(const SampleStack& stack) {
  if (stack.input.size() != static_cast<std::size_t>(stack.d) ||
      stack.target.size() != static_cast<std::size_t>(stack.d)) {
    throw ShapeError("stack: input and target must both hold d grids");
  }
  detail::Writer w;
  w.raw("BEVS");
  w.put<std::uint32_t>(kStackFormatVersion);
  const GridSpec& spec = stack.input.empty() ? GridSpec{} : stack.input.front().spec();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(stack.d));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.height_px));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.width_px));
  w.put_f64(stack.dt_s);
  for (const auto* channels : {&stack.input, &stack.target}) {
    for (const auto& g : *channels) {
      if (g.rows() != spec.height_px || g.cols() != spec.width_px) {
        throw ShapeError("stack: all grids must share one size");
      }
      for (double p : g.values()) w.put_f32(p);
    }
  }
  return w.take();
}

SampleStack read_stack(std::string_view bytes, const GridSpec& geometry) {
  detail::Reader r(bytes);
  if (r.raw(4) != "BEVS") throw FormatError("stack: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (r.truncated()) throw FormatError("stack: truncated header");
  if (version != kStackFormatVersion) {
    throw FormatError("stack: unsupported version " + std::to_string(version));
  }
  SampleStack s;
  s.d = static_cast<int>(r.get<std::uint32_t>());
  GridSpec spec = geometry;
  spec.height_px = static_cast<int>(r.get<std::uint32_t>());
  spec.width_px = static_cast<int>(r.get<std::uint32_t>());
  s.dt_s = r.get_f64();
  if (r.truncated()) throw FormatError("stack: truncated header");
  if (s.d < 0 || spec.height_px < 1 || spec.width_px < 1) throw FormatError("stack: bad dimensions");
  const std::size_t need = 2 * static_cast<std::size_t>(s.d) * spec.pixels() * sizeof(float);
  if (r.remaining() < need) throw FormatError("stack: truncated payload");
  for (auto* channels : {&s.input, &s.target}) {
    for (int k = 0; k < s.d; ++k) {
      std::vector<double> values(spec.pixels());
      for (auto& v : values) v = r.get_f32();
      channels->emplace_back(spec, std::move(values));
    }
  }
  return s;
}

}  // namespace bevf
