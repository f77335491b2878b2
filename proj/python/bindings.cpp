#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

#include "bevf/assoc.hpp"
#include "bevf/bev.hpp"
#include "bevf/extract.hpp"
#include "bevf/net.hpp"
#include "bevf/scenes.hpp"

namespace py = pybind11;
using namespace bevf;

namespace {

py::array_t<double> to_array(const BevGrid& g) {
  py::array_t<double> out({g.rows(), g.cols()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

BevGrid from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a, const GridSpec& spec) {
  if (a.ndim() != 2 || a.shape(0) != spec.height_px || a.shape(1) != spec.width_px) {
    throw std::invalid_argument("array shape does not match the grid spec");
  }
  return BevGrid(spec, std::vector<double>(a.data(), a.data() + a.size()));
}

}  // namespace

PYBIND11_MODULE(_bevf, m) {
  m.doc() = "Gaussian bird's-eye-view rasterization, encoder-decoder sizing and position extraction";

  py::class_<VehicleState>(m, "VehicleState")
      .def(py::init<>())
      .def(py::init([](int id, double cx, double cy, double w, double h, double vx, double vy) {
             return VehicleState{id, cx, cy, w, h, vx, vy};
           }),
           py::arg("id"), py::arg("cx"), py::arg("cy"), py::arg("w"), py::arg("h"), py::arg("vx") = 0.0,
           py::arg("vy") = 0.0)
      .def_readwrite("id", &VehicleState::id)
      .def_readwrite("cx", &VehicleState::cx)
      .def_readwrite("cy", &VehicleState::cy)
      .def_readwrite("w", &VehicleState::w)
      .def_readwrite("h", &VehicleState::h)
      .def_readwrite("vx", &VehicleState::vx)
      .def_readwrite("vy", &VehicleState::vy);

  py::class_<Frame>(m, "Frame")
      .def(py::init<>())
      .def_readwrite("t_index", &Frame::t_index)
      .def_readwrite("vehicles", &Frame::vehicles);

  py::class_<SceneSequence>(m, "SceneSequence")
      .def_readonly("frames", &SceneSequence::frames)
      .def_readonly("rate_hz", &SceneSequence::rate_hz)
      .def_readonly("extent_x", &SceneSequence::extent_x)
      .def_readonly("extent_y", &SceneSequence::extent_y)
      .def("__len__", &SceneSequence::size)
      .def("to_text", [](const SceneSequence& s) {
        std::ostringstream out;
        write_sequence(out, s);
        return out.str();
      });

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_vehicles", &SynthConfig::n_vehicles)
      .def_readwrite("n_lanes", &SynthConfig::n_lanes)
      .def_readwrite("lane_width", &SynthConfig::lane_width)
      .def_readwrite("speed_min", &SynthConfig::speed_min)
      .def_readwrite("speed_max", &SynthConfig::speed_max)
      .def_readwrite("lane_change_prob", &SynthConfig::lane_change_prob)
      .def_readwrite("duration_s", &SynthConfig::duration_s)
      .def_readwrite("rate_hz", &SynthConfig::rate_hz)
      .def_readwrite("extent_x", &SynthConfig::extent_x)
      .def_readwrite("extent_y", &SynthConfig::extent_y)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<>())
      .def(py::init([](int width, int height, double xres, double yres) {
             GridSpec g;
             g.width_px = width;
             g.height_px = height;
             g.x_m_per_px = xres;
             g.y_m_per_px = yres;
             return g;
           }),
           py::arg("width"), py::arg("height"), py::arg("x_m_per_px") = 1.0, py::arg("y_m_per_px") = 0.5)
      .def_readwrite("width_px", &GridSpec::width_px)
      .def_readwrite("height_px", &GridSpec::height_px)
      .def_readwrite("x_m_per_px", &GridSpec::x_m_per_px)
      .def_readwrite("y_m_per_px", &GridSpec::y_m_per_px)
      .def_readwrite("origin_x", &GridSpec::origin_x)
      .def_readwrite("origin_y", &GridSpec::origin_y);

  py::class_<ExtractConfig>(m, "ExtractConfig")
      .def(py::init<>())
      .def_readwrite("p_min", &ExtractConfig::p_min)
      .def_readwrite("win_w", &ExtractConfig::win_w)
      .def_readwrite("win_h", &ExtractConfig::win_h);

  py::class_<PositionEstimate>(m, "PositionEstimate")
      .def_readonly("x", &PositionEstimate::x)
      .def_readonly("y", &PositionEstimate::y)
      .def_readonly("peak_p", &PositionEstimate::peak_p)
      .def_readonly("row", &PositionEstimate::row)
      .def_readonly("col", &PositionEstimate::col);

  py::class_<MatchedPair>(m, "MatchedPair")
      .def_readonly("estimate", &MatchedPair::estimate)
      .def_readonly("target", &MatchedPair::target)
      .def_readonly("distance", &MatchedPair::distance);

  py::class_<Assignment>(m, "Assignment")
      .def_readonly("pairs", &Assignment::pairs)
      .def_readonly("unmatched_estimates", &Assignment::unmatched_estimates)
      .def_readonly("unmatched_targets", &Assignment::unmatched_targets);

  m.def("synth_highway", &synth_highway, py::arg("config"));
  m.def("ingest_tracks", &ingest_tracks, py::arg("csv"), py::arg("rate_hz"));
  m.def("downsample", &downsample, py::arg("seq"), py::arg("keep_every"));

  m.def("gaussian_at", &gaussian_at, py::arg("vehicle"), py::arg("x"), py::arg("y"));
  m.def(
      "render_frame",
      [](const std::vector<VehicleState>& vehicles, const GridSpec& spec) {
        Frame f;
        f.vehicles = vehicles;
        return to_array(render_frame(f, spec));
      },
      py::arg("vehicles"), py::arg("spec"), "Render vehicles into an (height, width) probability array.");
  m.def(
      "extract_positions",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> grid, const GridSpec& spec,
         const ExtractConfig& cfg) { return extract_positions(from_array(grid, spec), cfg); },
      py::arg("grid"), py::arg("spec"), py::arg("config") = ExtractConfig{});

  m.def("receptive_field", &receptive_field, py::arg("depth"));
  m.def("min_input_size", &min_input_size, py::arg("depth"));
  m.def(
      "count_params",
      [](int depth, int base_features, int channels) {
        NetSpec s;
        s.depth = depth;
        s.base_features = base_features;
        s.in_channels = s.out_channels = channels;
        return count_params(build_network(s, 0));
      },
      py::arg("depth"), py::arg("base_features") = 4, py::arg("channels") = 15);
  m.def(
      "predict",
      [](int depth, int base_features, std::uint64_t seed,
         py::array_t<double, py::array::c_style | py::array::forcecast> input) {
        if (input.ndim() != 3) throw std::invalid_argument("input must be (channels, rows, cols)");
        NetSpec s;
        s.depth = depth;
        s.base_features = base_features;
        s.in_channels = s.out_channels = static_cast<int>(input.shape(0));
        const auto net = build_network(s, seed);
        Tensor t(static_cast<int>(input.shape(0)), static_cast<int>(input.shape(1)),
                 static_cast<int>(input.shape(2)));
        std::copy(input.data(), input.data() + input.size(), t.data().begin());
        const Tensor out = forward(net, t);
        py::array_t<double> result({out.channels(), out.rows(), out.cols()});
        std::copy(out.data().begin(), out.data().end(), result.mutable_data());
        return result;
      },
      py::arg("depth"), py::arg("base_features"), py::arg("seed"), py::arg("input"),
      "Forward pass of a freshly initialized network (useful for shape checks).");

  m.def(
      "hungarian",
      [](const std::vector<std::vector<double>>& cost) {
        const int rows = static_cast<int>(cost.size());
        const int cols = rows == 0 ? 0 : static_cast<int>(cost.front().size());
        CostMatrix c(rows, cols);
        for (int r = 0; r < rows; ++r) {
          if (static_cast<int>(cost[r].size()) != cols) throw std::invalid_argument("ragged cost matrix");
          for (int k = 0; k < cols; ++k) c(r, k) = cost[r][k];
        }
        return hungarian(c);
      },
      py::arg("cost"));
  m.def(
      "associate",
      [](const std::vector<std::pair<double, double>>& est, const std::vector<std::pair<double, double>>& tgt,
         double max_distance) {
        std::vector<WorldPoint> e, t;
        for (auto [x, y] : est) e.push_back({x, y});
        for (auto [x, y] : tgt) t.push_back({x, y});
        return associate(e, t, max_distance);
      },
      py::arg("estimates"), py::arg("targets"), py::arg("max_distance") = std::numeric_limits<double>::infinity());
}
