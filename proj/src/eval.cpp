#include "bevf/eval.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <stdexcept>

#include "bevf/error.hpp"
#include "bevf/parallel.hpp"

namespace bevf {

ChannelMatch match_channel(std::vector<WorldPoint> estimates, std::vector<WorldPoint> targets,
                           double max_distance) {
  ChannelMatch m;
  m.assignment = associate(estimates, targets, max_distance);
  m.estimates = std::move(estimates);
  m.targets = std::move(targets);
  return m;
}

HorizonAccumulator::HorizonAccumulator(int channels) : sums_(static_cast<std::size_t>(channels)) {}

void HorizonAccumulator::add(const std::vector<ChannelMatch>& channels) {
  if (sums_.size() < channels.size()) sums_.resize(channels.size());
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const auto& ch = channels[k];
    auto& s = sums_[k];
    for (const auto& pair : ch.assignment.pairs) {
      s.abs_x += std::abs(ch.estimates[pair.estimate].x - ch.targets[pair.target].x);
      s.abs_y += std::abs(ch.estimates[pair.estimate].y - ch.targets[pair.target].y);
    }
    s.matched += static_cast<int>(ch.assignment.pairs.size());
    s.missed += static_cast<int>(ch.assignment.unmatched_targets.size());
    s.spurious += static_cast<int>(ch.assignment.unmatched_estimates.size());
  }
}

std::vector<HorizonMetrics> HorizonAccumulator::finish(double dt_s) const {
  std::vector<HorizonMetrics> out;
  out.reserve(sums_.size());
  for (std::size_t k = 0; k < sums_.size(); ++k) {
    const auto& s = sums_[k];
    HorizonMetrics h;
    h.horizon_s = static_cast<double>(k + 1) * dt_s;
    if (s.matched > 0) {
      h.eps_x = s.abs_x / s.matched;
      h.eps_y = s.abs_y / s.matched;
    }
    h.n_matched = s.matched;
    h.n_missed = s.missed;
    h.n_spurious = s.spurious;
    out.push_back(h);
  }
  return out;
}

std::vector<HorizonMetrics> horizon_errors(const std::vector<ChannelMatch>& channels, double dt_s) {
  HorizonAccumulator acc(static_cast<int>(channels.size()));
  acc.add(channels);
  return acc.finish(dt_s);
}

std::vector<Frame> constant_velocity_oracle(const std::vector<Frame>& history, double dt_s,
                                            const std::vector<double>& horizons_s) {
  if (history.size() < 2) throw std::invalid_argument("constant_velocity_oracle: needs >= 2 history frames");
  if (!(dt_s > 0.0)) throw std::invalid_argument("constant_velocity_oracle: dt_s must be > 0");
  const Frame& last = history.back();
  const Frame& prev = history[history.size() - 2];
  std::vector<Frame> out;
  out.reserve(horizons_s.size());
  for (std::size_t k = 0; k < horizons_s.size(); ++k) {
    Frame f;
    f.t_index = last.t_index + static_cast<std::int64_t>(k) + 1;
    for (const auto& v : last.vehicles) {
      VehicleState p = v;
      const VehicleState* before = prev.find(v.id);
      p.vx = before != nullptr ? (v.cx - before->cx) / dt_s : 0.0;
      p.vy = before != nullptr ? (v.cy - before->cy) / dt_s : 0.0;
      p.cx = v.cx + p.vx * horizons_s[k];
      p.cy = v.cy + p.vy * horizons_s[k];
      f.vehicles.push_back(p);
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Tensor> recursive_predict(const Network& net, const Tensor& input, int steps) {
  if (steps < 1) throw std::invalid_argument("recursive_predict: steps must be >= 1");
  std::vector<Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(steps));
  Tensor current = input;
  for (int s = 0; s < steps; ++s) {
    Tensor out = forward(net, current);
    if (out.rows() != current.rows() || out.cols() != current.cols() || out.channels() < 1) {
      throw ShapeError("recursive_predict: output shape does not match input");
    }
    if (s + 1 < steps) {
      Tensor next(current.channels(), current.rows(), current.cols());
      for (int ch = 0; ch + 1 < current.channels(); ++ch) {
        auto src = current.channel(ch + 1);
        std::copy(src.begin(), src.end(), next.channel(ch).begin());
      }
      auto first = out.channel(0);
      std::copy(first.begin(), first.end(), next.channel(current.channels() - 1).begin());
      current = std::move(next);
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

Predictor network_predictor(const Network& net) {
  return [&net](const SceneSequence&, std::size_t, const SampleStack& s) {
    return forward(net, stack_grids(s.input));
  };
}

Predictor zero_motion_predictor() {
  return [](const SceneSequence&, std::size_t, const SampleStack& s) {
    std::vector<BevGrid> out(s.target.size(), s.input.back());
    return stack_grids(out);
  };
}

Predictor constant_velocity_predictor(const GridSpec& spec) {
  return [spec](const SceneSequence& seq, std::size_t t, const SampleStack& s) {
    std::vector<Frame> history{seq.frames[t - 1], seq.frames[t]};
    std::vector<double> horizons;
    for (int k = 1; k <= s.d; ++k) horizons.push_back(k * seq.dt_s());
    return stack_grids(render_frames(constant_velocity_oracle(history, seq.dt_s(), horizons), spec));
  };
}

Predictor target_predictor() {
  return [](const SceneSequence&, std::size_t, const SampleStack& s) { return stack_grids(s.target); };
}

namespace {

bool inside(const GridSpec& spec, double x, double y) {
  const auto p = world_to_pixel(x, y, spec);
  return p.r >= 0.0 && p.c >= 0.0 && p.r <= spec.height_px - 1.0 && p.c <= spec.width_px - 1.0;
}

}  // namespace

EvalReport evaluate(const SceneSequence& seq, const EvalConfig& cfg, const Predictor& predict) {
  cfg.grid.validate();
  cfg.extract.validate();
  const auto anchors = SequenceSamples::valid_anchors(seq, cfg.d, cfg.stride);
  if (anchors.empty()) {
    throw RangeError("evaluate: sequence of " + std::to_string(seq.size()) +
                     " frames is too short for d=" + std::to_string(cfg.d) + " (needs " +
                     std::to_string(2 * cfg.d) + ")");
  }

  std::vector<std::vector<ChannelMatch>> per_sample(anchors.size());
  parallel_for(anchors.size(), cfg.threads, [&](std::size_t i) {
    const std::size_t t = anchors[i];
    const SampleStack sample = build_sample(seq, t, cfg.d, cfg.grid);
    const Tensor pred = predict(seq, t, sample);
    if (pred.channels() != cfg.d) throw ShapeError("evaluate: predictor returned wrong channel count");
    const auto grids = unstack_grids(pred, cfg.grid);
    const Frame& anchor = seq.frames[t];
    auto& channels = per_sample[i];
    for (int k = 0; k < cfg.d; ++k) {
      std::vector<WorldPoint> estimates;
      for (const auto& e : extract_positions(grids[static_cast<std::size_t>(k)], cfg.extract)) {
        estimates.push_back({e.x, e.y});
      }
      std::vector<WorldPoint> targets;
      const Frame future = restrict_to(seq.frames[t + 1 + static_cast<std::size_t>(k)], anchor);
      for (const auto& v : future.vehicles) {
        if (inside(cfg.grid, v.cx, v.cy)) targets.push_back({v.cx, v.cy});
      }
      channels.push_back(match_channel(std::move(estimates), std::move(targets), cfg.max_distance));
    }
  });

  // Reduced in anchor order so results do not depend on the thread count.
  HorizonAccumulator acc(cfg.d);
  for (const auto& channels : per_sample) acc.add(channels);

  EvalReport report;
  report.samples = anchors.size();
  report.horizons = acc.finish(seq.dt_s());
  double sum_x = 0.0;
  double sum_y = 0.0;
  for (const auto& h : report.horizons) {
    if (h.eps_x) {
      sum_x += *h.eps_x * h.n_matched;
      sum_y += *h.eps_y * h.n_matched;
    }
    report.n_matched += h.n_matched;
    report.n_missed += h.n_missed;
    report.n_spurious += h.n_spurious;
  }
  if (report.n_matched > 0) {
    report.eps_x = sum_x / report.n_matched;
    report.eps_y = sum_y / report.n_matched;
  }
  return report;
}

EvalReport evaluate(const Checkpoint& ckpt, const SceneSequence& seq, const EvalConfig& cfg) {
  return evaluate(seq, cfg, network_predictor(ckpt.net));
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
  auto opt = [&](const std::optional<double>& v) {
    if (v) {
      os << std::setprecision(6) << *v;
    } else {
      os << "NA";
    }
  };
  os << "horizon_s,eps_x,eps_y,matched,missed,spurious\n";
  for (const auto& h : report.horizons) {
    os << std::setprecision(6) << h.horizon_s << ',';
    opt(h.eps_x);
    os << ',';
    opt(h.eps_y);
    os << ',' << h.n_matched << ',' << h.n_missed << ',' << h.n_spurious << '\n';
  }
}

}  // namespace bevf
