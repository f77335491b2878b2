#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bevf/grid.hpp"
#include "bevf/scenes.hpp"

namespace bevf {

/// Separable Gaussian footprint of a vehicle with sigma = half the box extent:
/// exp(-((x-cx)/(sqrt2*w/2))^2 - ((y-cy)/(sqrt2*h/2))^2).
double gaussian_at(const VehicleState& v, double x, double y);

/// Per-vehicle footprints are truncated beyond this many sigmas.
inline constexpr double kRenderSupportSigmas = 4.0;

/// Max-merge of all vehicle footprints; an empty frame renders to zeros.
BevGrid render_frame(const Frame& frame, const GridSpec& spec);

/// Renders every frame; `threads` <= 0 selects the default worker count.
std::vector<BevGrid> render_frames(const std::vector<Frame>& frames, const GridSpec& spec,
                                   int threads = 1);

/// d past channels (oldest first, ending at t) and d future channels
/// (t+1 ... t+d). Future channels only contain vehicles present at t.
struct SampleStack {
  std::vector<BevGrid> input;
  std::vector<BevGrid> target;
  int d = 0;
  double dt_s = 0.0;
};

/// Requires t >= d-1 and t+d < seq.size(); throws RangeError otherwise.
SampleStack build_sample(const SceneSequence& seq, std::size_t t, int d, const GridSpec& spec);

/// Drops every vehicle whose id is absent from `reference`.
Frame restrict_to(const Frame& frame, const Frame& reference);

/// Binary PGM (P5), 8 bit, value = floor(255 * p + 0.5).
std::string write_image(const BevGrid& grid);

/// Reads a P5 image into a grid with `geometry`'s resolution and origin; the
/// image dimensions replace width/height.
BevGrid read_image(std::string_view bytes, const GridSpec& geometry);

// Stack file, little-endian:
//   char[4] "BEVS", u32 version (1), u32 d, u32 h, u32 w, f64 dt_s,
//   then d input grids followed by d target grids, each h*w row-major f32.
inline constexpr std::uint32_t kStackFormatVersion = 1;
std::string write_stack(const SampleStack& stack);
SampleStack read_stack(std::string_view bytes, const GridSpec& geometry);

}  // namespace bevf
