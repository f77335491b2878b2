#include <doctest.h>

#include <cmath>

#include "bevf/bev.hpp"
#include "bevf/error.hpp"
#include "bevf/random.hpp"

using namespace bevf;

namespace {

const VehicleState kTable2{1, 6.63, 3.21, 5.0, 2.0, 0.0, 0.0};

GridSpec unit_grid(int w, int h) {
  GridSpec g;
  g.width_px = w;
  g.height_px = h;
  g.x_m_per_px = 1.0;
  g.y_m_per_px = 1.0;
  return g;
}

Frame frame_of(std::vector<VehicleState> vs, std::int64_t t = 0) {
  Frame f;
  f.t_index = t;
  f.vehicles = std::move(vs);
  return f;
}

}  // namespace

TEST_CASE("gaussian footprint values") {
  CHECK(gaussian_at(kTable2, 6.63, 3.21) == 1.0);
  CHECK(gaussian_at(kTable2, 6.63 + std::sqrt(2.0) * 2.5, 3.21) == doctest::Approx(std::exp(-1.0)));
  const double dx = 0.37 / (2.5 * std::sqrt(2.0));
  const double dy = 0.21 / (1.0 * std::sqrt(2.0));
  CHECK(gaussian_at(kTable2, 7.0, 3.0) == doctest::Approx(std::exp(-dx * dx - dy * dy)));
}

TEST_CASE("world and pixel coordinates") {
  GridSpec g;
  const auto p = world_to_pixel(0.0, 0.0, g);
  CHECK(p.r == 0.0);
  CHECK(p.c == 0.0);
  CHECK(world_to_pixel(6.63, 0.0, unit_grid(16, 8)).c == doctest::Approx(6.63));
  CHECK(std::lround(world_to_pixel(6.63, 0.0, unit_grid(16, 8)).c) == 7);
  CHECK(world_to_pixel(0.0, 3.21, g).r == doctest::Approx(6.42));
  const auto w = pixel_to_world(6.42, 6.63, g);
  CHECK(w.x == doctest::Approx(6.63));
  CHECK(w.y == doctest::Approx(3.21));
}

TEST_CASE("render: empty frame, peak location, idempotent merge") {
  const auto spec = unit_grid(16, 8);
  const auto empty = render_frame(Frame{}, spec);
  for (double v : empty.values()) CHECK(v == 0.0);

  const auto one = render_frame(frame_of({kTable2}), spec);
  int br = 0, bc = 0;
  for (int r = 0; r < one.rows(); ++r)
    for (int c = 0; c < one.cols(); ++c)
      if (one.at(r, c) > one.at(br, bc)) br = r, bc = c;
  CHECK(br == 3);
  CHECK(bc == 7);

  VehicleState twin = kTable2;
  twin.id = 2;
  CHECK(render_frame(frame_of({kTable2, twin}), spec) == one);
}

TEST_CASE("render matches the direct max-merge oracle and stays in [0,1]") {
  Rng rng(17);
  GridSpec spec;
  spec.width_px = 64;
  spec.height_px = 32;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<VehicleState> vs;
    for (int i = 0; i < 6; ++i) {
      vs.push_back({i, rng.uniform(0, 64), rng.uniform(0, 16), rng.uniform(3, 6), rng.uniform(1.5, 2.5), 0, 0});
    }
    const auto grid = render_frame(frame_of(vs), spec);
    for (int r = 0; r < spec.height_px; ++r) {
      for (int c = 0; c < spec.width_px; ++c) {
        const double x = c * spec.x_m_per_px;
        const double y = r * spec.y_m_per_px;
        double expect = 0.0;
        for (const auto& v : vs) {
          const double sx = std::sqrt(2.0) * v.w / 2.0;
          const double sy = std::sqrt(2.0) * v.h / 2.0;
          expect = std::max(expect, std::exp(-std::pow((x - v.cx) / sx, 2) - std::pow((y - v.cy) / sy, 2)));
        }
        const double got = grid.at(r, c);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
        // Support truncation at 4 sigma drops values below exp(-8).
        CHECK(std::abs(got - expect) <= std::exp(-8.0));
      }
    }
  }
}

TEST_CASE("parallel rendering equals serial rendering") {
  SynthConfig sc;
  sc.seed = 2;
  sc.duration_s = 6;
  const auto seq = synth_highway(sc);
  GridSpec spec;
  const auto serial = render_frames(seq.frames, spec, 1);
  const auto parallel = render_frames(seq.frames, spec, 4);
  CHECK(serial == parallel);
}

TEST_CASE("build_sample channel semantics") {
  SceneSequence seq;
  seq.rate_hz = 5.0;
  for (int t = 0; t < 40; ++t) {
    std::vector<VehicleState> vs{{1, 10.0 + t, 4.0, 4.0, 2.0, 5.0, 0.0}};
    if (t >= 22) vs.push_back({2, 40.0, 14.0, 4.0, 2.0, 0.0, 0.0});  // appears at anchor + 2
    seq.frames.push_back(frame_of(vs, t));
  }
  GridSpec spec;
  const int d = 15;
  const std::size_t t = 20;
  const auto s = build_sample(seq, t, d, spec);
  REQUIRE(s.input.size() == 15);
  REQUIRE(s.target.size() == 15);
  CHECK(s.dt_s == doctest::Approx(0.2));
  // History spans 14 intervals = 2.8 s, targets 0.2 s .. 3.0 s.
  CHECK((d - 1) * s.dt_s == doctest::Approx(2.8));
  CHECK(d * s.dt_s == doctest::Approx(3.0));
  CHECK(s.input.back() == render_frame(seq.frames[t], spec));
  CHECK(s.input.front() == render_frame(seq.frames[t - 14], spec));
  for (int k = 0; k < d; ++k) {
    const auto expect = render_frame(restrict_to(seq.frames[t + 1 + k], seq.frames[t]), spec);
    CHECK(s.target[k] == expect);
    // the late vehicle never shows up in the targets
    CHECK(s.target[k].at(28, 40) == 0.0);
  }
  CHECK_THROWS_AS(build_sample(seq, 13, d, spec), RangeError);
  CHECK_THROWS_AS(build_sample(seq, 25, d, spec), RangeError);
}

TEST_CASE("PGM quantization") {
  GridSpec spec = unit_grid(3, 1);
  BevGrid g(spec);
  g.at(0, 0) = 0.0;
  g.at(0, 1) = 1.0;
  g.at(0, 2) = 0.5;
  const auto bytes = write_image(g);
  const std::string header = "P5\n3 1\n255\n";
  REQUIRE(bytes.size() == header.size() + 3);
  CHECK(bytes.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(bytes[header.size()]) == 0);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 1]) == 255);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 2]) == 128);

  const auto back = read_image(bytes, spec);
  CHECK(back.at(0, 1) == 1.0);
  CHECK(back.at(0, 2) == doctest::Approx(128.0 / 255.0));
  CHECK_THROWS_AS(read_image("P2\n1 1\n255\n0", spec), FormatError);
  CHECK_THROWS_AS(read_image(header + "a", spec), FormatError);
}

TEST_CASE("stack file round trip and errors") {
  SynthConfig sc;
  sc.seed = 4;
  sc.duration_s = 8;
  const auto seq = synth_highway(sc);
  GridSpec spec;
  spec.width_px = 128;
  spec.height_px = 64;
  const auto s = build_sample(seq, 14, 15, spec);
  const auto bytes = write_stack(s);
  const auto back = read_stack(bytes, spec);
  CHECK(back.d == 15);
  CHECK(back.dt_s == s.dt_s);
  for (int k = 0; k < 15; ++k) {
    for (std::size_t i = 0; i < spec.pixels(); ++i) {
      CHECK(back.input[k].values()[i] == static_cast<double>(static_cast<float>(s.input[k].values()[i])));
    }
  }
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(read_stack(bad, spec), FormatError);
  CHECK_THROWS_AS(read_stack(bytes.substr(0, bytes.size() - 3), spec), FormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(read_stack(bad, spec), FormatError);
}
