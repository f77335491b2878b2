#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bevf {

/// One vehicle at one sample. Positions are box centers in the world frame
/// (x longitudinal, y lateral); `w` is the longitudinal extent, `h` the lateral one.
struct VehicleState {
  std::int64_t id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  double vx = 0.0;
  double vy = 0.0;

  bool valid() const;
  bool operator==(const VehicleState&) const = default;
};

struct Frame {
  std::int64_t t_index = 0;
  std::vector<VehicleState> vehicles;

  const VehicleState* find(std::int64_t id) const;
  bool operator==(const Frame&) const = default;
};

struct SceneSequence {
  std::vector<Frame> frames;
  double rate_hz = 25.0;
  double extent_x = 0.0;
  double extent_y = 0.0;

  std::size_t size() const { return frames.size(); }
  double dt_s() const { return 1.0 / rate_hz; }
  bool operator==(const SceneSequence&) const = default;
};

/// Synthetic two-stream highway. The upper lanes (small y) flow towards -x,
/// the lower lanes towards +x. `n_vehicles` is the number of vehicles kept on
/// the road: a vehicle that leaves the study area is replaced by a new one
/// entering at the upstream edge of a random lane.
struct SynthConfig {
  int n_vehicles = 20;
  int n_lanes = 3;  // per direction
  double lane_width = 3.75;
  double speed_min = 25.0;
  double speed_max = 35.0;
  double lane_change_prob = 0.0;  // per second
  double duration_s = 60.0;
  double rate_hz = 5.0;
  double extent_x = 512.0;
  double extent_y = 32.0;
  double length_min = 4.0;
  double length_max = 5.0;
  double width_min = 1.8;
  double width_max = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Lane changes ramp the lateral position linearly over this duration.
inline constexpr double kLaneChangeDurationS = 3.0;

/// Parses a HighD-style tracks table. Required columns: frame, id, x, y,
/// width, height (x/y are the upper-left box corner). xVelocity/yVelocity are
/// picked up when present. Output frames are sorted by frame, vehicles by id.
SceneSequence ingest_tracks(std::string_view tracks_csv, double rate_hz);

/// Keeps frames 0, k, 2k, ... and reindexes t_index consecutively.
SceneSequence downsample(const SceneSequence& seq, int keep_every);

struct Partition {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> unused;
};

/// Partitions recording ids, preserving the order of `seq_ids`.
Partition split(const std::vector<int>& seq_ids, const std::vector<int>& train_ids,
                const std::vector<int>& test_ids);

SceneSequence synth_highway(const SynthConfig& cfg);

// Newline-delimited record file:
//   bevf-sequence 1
//   rate_hz <r> extent_x <x> extent_y <y> frames <n>
//   frame <t_index> <vehicle count>
//   <id> <cx> <cy> <w> <h> <vx> <vy>      (one line per vehicle)
// Numbers are written in shortest round-trip decimal form.
void write_sequence(std::ostream& os, const SceneSequence& seq);
SceneSequence read_sequence(std::istream& is);

}  // namespace bevf
