#include "bevf/scenes.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bevf/error.hpp"
#include "bevf/random.hpp"

namespace bevf {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void sort_canonical(Frame& f) {
  std::sort(f.vehicles.begin(), f.vehicles.end(),
            [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
}

}  // namespace

bool VehicleState::valid() const {
  return w > 0.0 && h > 0.0 && std::isfinite(cx) && std::isfinite(cy);
}

const VehicleState* Frame::find(std::int64_t id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

void SynthConfig::validate() const {
  if (n_vehicles < 0) throw std::invalid_argument("synth: n_vehicles must be >= 0");
  if (n_lanes < 1) throw std::invalid_argument("synth: n_lanes must be >= 1");
  if (!(lane_width > 0.0)) throw std::invalid_argument("synth: lane_width must be > 0");
  if (!(speed_min >= 0.0) || !(speed_min <= speed_max)) {
    throw std::invalid_argument("synth: speed range must satisfy 0 <= min <= max");
  }
  if (!(lane_change_prob >= 0.0 && lane_change_prob <= 1.0)) {
    throw std::invalid_argument("synth: lane_change_prob must be in [0,1]");
  }
  if (!(duration_s >= 0.0)) throw std::invalid_argument("synth: duration_s must be >= 0");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("synth: rate_hz must be > 0");
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) {
    throw std::invalid_argument("synth: extents must be > 0");
  }
  if (2.0 * n_lanes * lane_width > extent_y) {
    throw std::invalid_argument("synth: lanes do not fit into extent_y");
  }
  if (!(length_min > 0.0 && length_min <= length_max) ||
      !(width_min > 0.0 && width_min <= width_max)) {
    throw std::invalid_argument("synth: vehicle size ranges must be positive and ordered");
  }
}

SceneSequence ingest_tracks(std::string_view tracks_csv, double rate_hz) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("ingest: rate_hz must be > 0");

  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < tracks_csv.size()) {
      const auto nl = tracks_csv.find('\n', pos);
      line = tracks_csv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? tracks_csv.size() : nl + 1;
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  std::string_view header;
  if (!next_line(header)) throw FormatError("tracks csv: missing header row");
  const auto names = split_fields(header);
  auto column = [&](std::string_view name, bool required) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    if (required) throw FormatError("tracks csv: missing column '" + std::string(name) + "'");
    return std::nullopt;
  };
  const std::size_t c_frame = *column("frame", true);
  const std::size_t c_id = *column("id", true);
  const std::size_t c_x = *column("x", true);
  const std::size_t c_y = *column("y", true);
  const std::size_t c_w = *column("width", true);
  const std::size_t c_h = *column("height", true);
  const auto c_vx = column("xVelocity", false);
  const auto c_vy = column("yVelocity", false);

  std::map<std::int64_t, Frame> frames;
  std::string_view line;
  while (next_line(line)) {
    const auto fields = split_fields(line);
    auto get = [&](std::size_t col, const char* name) {
      double v = 0.0;
      if (col >= fields.size() || !parse_double(fields[col], v)) {
        throw ParseError(std::string("tracks csv: non-numeric value in column '") + name + "'",
                         line_no);
      }
      return v;
    };
    const double frame = get(c_frame, "frame");
    const double id = get(c_id, "id");
    if (frame != std::floor(frame) || id != std::floor(id)) {
      throw ParseError("tracks csv: frame and id must be integers", line_no);
    }
    VehicleState v;
    v.id = static_cast<std::int64_t>(id);
    v.w = get(c_w, "width");
    v.h = get(c_h, "height");
    v.cx = get(c_x, "x") + v.w / 2.0;
    v.cy = get(c_y, "y") + v.h / 2.0;
    if (c_vx) v.vx = get(*c_vx, "xVelocity");
    if (c_vy) v.vy = get(*c_vy, "yVelocity");
    if (!v.valid()) throw ParseError("tracks csv: width and height must be positive", line_no);

    auto& f = frames[static_cast<std::int64_t>(frame)];
    f.t_index = static_cast<std::int64_t>(frame);
    if (f.find(v.id) != nullptr) {
      throw ParseError("tracks csv: duplicate id " + std::to_string(v.id) + " in frame", line_no);
    }
    f.vehicles.push_back(v);
  }

  SceneSequence seq;
  seq.rate_hz = rate_hz;
  double max_x = 0.0;
  double max_y = 0.0;
  for (auto& [_, f] : frames) {
    sort_canonical(f);
    for (const auto& v : f.vehicles) {
      max_x = std::max(max_x, v.cx + v.w / 2.0);
      max_y = std::max(max_y, v.cy + v.h / 2.0);
    }
    seq.frames.push_back(std::move(f));
  }
  seq.extent_x = max_x;
  seq.extent_y = max_y;
  return seq;
}

SceneSequence downsample(const SceneSequence& seq, int keep_every) {
  if (keep_every < 1) throw std::invalid_argument("downsample: keep_every must be >= 1");
  SceneSequence out;
  out.rate_hz = seq.rate_hz / keep_every;
  out.extent_x = seq.extent_x;
  out.extent_y = seq.extent_y;
  std::int64_t t = 0;
  for (std::size_t i = 0; i < seq.frames.size(); i += static_cast<std::size_t>(keep_every)) {
    Frame f = seq.frames[i];
    f.t_index = t++;
    out.frames.push_back(std::move(f));
  }
  return out;
}

Partition split(const std::vector<int>& seq_ids, const std::vector<int>& train_ids,
                const std::vector<int>& test_ids) {
  const std::set<int> train(train_ids.begin(), train_ids.end());
  const std::set<int> test(test_ids.begin(), test_ids.end());
  for (int id : train) {
    if (test.count(id) != 0) {
      throw std::invalid_argument("split: id " + std::to_string(id) +
                                  " is in both train and test sets");
    }
  }
  Partition p;
  for (int id : seq_ids) {
    if (train.count(id) != 0) {
      p.train.push_back(id);
    } else if (test.count(id) != 0) {
      p.test.push_back(id);
    } else {
      p.unused.push_back(id);
    }
  }
  return p;
}

namespace {

struct SimVehicle {
  VehicleState state;
  int lane = 0;
  int direction = 1;
  // Lane change in progress: lateral ramp from `from_y` to `to_y`.
  int change_steps_left = 0;
  int change_steps_total = 0;
  double from_y = 0.0;
  double to_y = 0.0;
  int target_lane = 0;
};

class HighwaySim {
 public:
  explicit HighwaySim(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    dt_ = 1.0 / cfg.rate_hz;
    lane_top_ = (cfg.extent_y - 2.0 * cfg.n_lanes * cfg.lane_width) / 2.0;
    change_steps_ = std::max(1, static_cast<int>(std::lround(kLaneChangeDurationS * cfg.rate_hz)));
    // Per-frame probability equivalent to the per-second rate.
    change_prob_frame_ = 1.0 - std::pow(1.0 - cfg.lane_change_prob, dt_);
  }

  SceneSequence run() {
    SceneSequence seq;
    seq.rate_hz = cfg_.rate_hz;
    seq.extent_x = cfg_.extent_x;
    seq.extent_y = cfg_.extent_y;
    place_initial();
    const auto n_frames = static_cast<std::int64_t>(std::llround(cfg_.duration_s * cfg_.rate_hz));
    for (std::int64_t t = 0; t < n_frames; ++t) {
      Frame f;
      f.t_index = t;
      for (const auto& v : vehicles_) f.vehicles.push_back(v.state);
      sort_canonical(f);
      seq.frames.push_back(std::move(f));
      step();
    }
    return seq;
  }

 private:
  double lane_center(int lane) const { return lane_top_ + (lane + 0.5) * cfg_.lane_width; }
  int lane_direction(int lane) const { return lane < cfg_.n_lanes ? -1 : 1; }

  double min_gap(double length) const { return 2.0 * length + 5.0; }

  bool lane_free(int lane, double x, double length) const {
    for (const auto& v : vehicles_) {
      const bool shares = v.lane == lane || (v.change_steps_left > 0 && v.target_lane == lane);
      if (shares && std::abs(v.state.cx - x) < min_gap(std::max(length, v.state.w))) return false;
    }
    return true;
  }

  SimVehicle make_vehicle(int lane, double x) {
    SimVehicle v;
    v.lane = lane;
    v.target_lane = lane;
    v.direction = lane_direction(lane);
    v.state.id = next_id_++;
    v.state.w = rng_.uniform(cfg_.length_min, cfg_.length_max);
    v.state.h = rng_.uniform(cfg_.width_min, cfg_.width_max);
    v.state.cx = x;
    v.state.cy = lane_center(lane);
    v.state.vx = v.direction * rng_.uniform(cfg_.speed_min, cfg_.speed_max);
    v.state.vy = 0.0;
    return v;
  }

  void place_initial() {
    const int n_lanes_total = 2 * cfg_.n_lanes;
    for (int i = 0; i < cfg_.n_vehicles; ++i) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const int lane = static_cast<int>(rng_.below(n_lanes_total));
        const double x = rng_.uniform(0.0, cfg_.extent_x);
        if (lane_free(lane, x, cfg_.length_max)) {
          vehicles_.push_back(make_vehicle(lane, x));
          break;
        }
      }
    }
  }

  void maybe_start_lane_change(SimVehicle& v) {
    if (cfg_.n_lanes < 2 || v.change_steps_left > 0) return;
    if (!rng_.bernoulli(change_prob_frame_)) return;
    const int group_start = v.lane < cfg_.n_lanes ? 0 : cfg_.n_lanes;
    const int local = v.lane - group_start;
    int target = local;
    if (local == 0) {
      target = 1;
    } else if (local == cfg_.n_lanes - 1) {
      target = local - 1;
    } else {
      target = rng_.bernoulli(0.5) ? local - 1 : local + 1;
    }
    v.target_lane = group_start + target;
    v.from_y = v.state.cy;
    v.to_y = lane_center(v.target_lane);
    v.change_steps_total = change_steps_;
    v.change_steps_left = change_steps_;
    v.state.vy = (v.to_y - v.from_y) / kLaneChangeDurationS;
  }

  void step() {
    for (auto& v : vehicles_) {
      v.state.cx += v.state.vx * dt_;
      if (v.change_steps_left > 0) {
        --v.change_steps_left;
        const double progress = 1.0 - static_cast<double>(v.change_steps_left) / v.change_steps_total;
        v.state.cy = v.from_y + (v.to_y - v.from_y) * progress;
        if (v.change_steps_left == 0) {
          v.lane = v.target_lane;
          v.state.cy = v.to_y;
          v.state.vy = 0.0;
        }
      } else {
        maybe_start_lane_change(v);
      }
    }
    std::erase_if(vehicles_, [&](const SimVehicle& v) {
      return v.state.cx < 0.0 || v.state.cx > cfg_.extent_x;
    });
    const int missing = cfg_.n_vehicles - static_cast<int>(vehicles_.size());
    for (int i = 0; i < missing; ++i) {
      const int lane = static_cast<int>(rng_.below(2 * cfg_.n_lanes));
      const double x = lane_direction(lane) > 0 ? 0.0 : cfg_.extent_x;
      // Blocked entries are retried on a later frame.
      if (lane_free(lane, x, cfg_.length_max)) vehicles_.push_back(make_vehicle(lane, x));
    }
  }

  SynthConfig cfg_;
  Rng rng_;
  double dt_ = 0.2;
  double lane_top_ = 0.0;
  int change_steps_ = 15;
  double change_prob_frame_ = 0.0;
  std::int64_t next_id_ = 1;
  std::vector<SimVehicle> vehicles_;
};

}  // namespace

SceneSequence synth_highway(const SynthConfig& cfg) {
  cfg.validate();
  return HighwaySim(cfg).run();
}

void write_sequence(std::ostream& os, const SceneSequence& seq) {
  os << "bevf-sequence 1\n";
  os << "rate_hz " << format_double(seq.rate_hz) << " extent_x " << format_double(seq.extent_x)
     << " extent_y " << format_double(seq.extent_y) << " frames " << seq.frames.size() << '\n';
  for (const auto& f : seq.frames) {
    os << "frame " << f.t_index << ' ' << f.vehicles.size() << '\n';
    for (const auto& v : f.vehicles) {
      os << v.id << ' ' << format_double(v.cx) << ' ' << format_double(v.cy) << ' '
         << format_double(v.w) << ' ' << format_double(v.h) << ' ' << format_double(v.vx) << ' '
         << format_double(v.vy) << '\n';
    }
  }
}

SceneSequence read_sequence(std::istream& is) {
  std::size_t line_no = 0;
  std::string line;
  auto next = [&]() -> std::istringstream {
    if (!std::getline(is, line)) throw FormatError("sequence file: unexpected end of input");
    ++line_no;
    return std::istringstream(line);
  };
  auto expect = [&](std::istringstream& ss, const char* word) {
    std::string tok;
    if (!(ss >> tok) || tok != word) {
      throw ParseError(std::string("sequence file: expected '") + word + "'", line_no);
    }
  };

  auto head = next();
  std::string magic;
  int version = 0;
  if (!(head >> magic >> version) || magic != "bevf-sequence") {
    throw FormatError("sequence file: bad magic");
  }
  if (version != 1) throw FormatError("sequence file: unsupported version " + std::to_string(version));

  SceneSequence seq;
  std::size_t n_frames = 0;
  auto meta = next();
  expect(meta, "rate_hz");
  meta >> seq.rate_hz;
  expect(meta, "extent_x");
  meta >> seq.extent_x;
  expect(meta, "extent_y");
  meta >> seq.extent_y;
  expect(meta, "frames");
  if (!(meta >> n_frames) || !(seq.rate_hz > 0.0)) {
    throw ParseError("sequence file: bad metadata line", line_no);
  }

  seq.frames.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    auto fl = next();
    expect(fl, "frame");
    Frame f;
    std::size_t n = 0;
    if (!(fl >> f.t_index >> n)) throw ParseError("sequence file: bad frame header", line_no);
    if (!seq.frames.empty() && f.t_index <= seq.frames.back().t_index) {
      throw ParseError("sequence file: frames must be strictly increasing", line_no);
    }
    for (std::size_t j = 0; j < n; ++j) {
      auto vl = next();
      VehicleState v;
      if (!(vl >> v.id >> v.cx >> v.cy >> v.w >> v.h >> v.vx >> v.vy) || !v.valid()) {
        throw ParseError("sequence file: bad vehicle record", line_no);
      }
      f.vehicles.push_back(v);
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace bevf
