#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "bevf/assoc.hpp"
#include "bevf/bev.hpp"
#include "bevf/extract.hpp"
#include "bevf/net.hpp"
#include "bevf/train.hpp"

namespace bevf {

/// Errors for one output channel. eps_x / eps_y are mean absolute errors over
/// matched pairs and are absent when nothing matched; missed targets and
/// spurious estimates are only counted.
struct HorizonMetrics {
  double horizon_s = 0.0;
  std::optional<double> eps_x;
  std::optional<double> eps_y;
  int n_matched = 0;
  int n_missed = 0;
  int n_spurious = 0;
};

/// Association result for one channel, with the positions it refers to.
struct ChannelMatch {
  std::vector<WorldPoint> estimates;
  std::vector<WorldPoint> targets;
  Assignment assignment;
};

ChannelMatch match_channel(std::vector<WorldPoint> estimates, std::vector<WorldPoint> targets,
                           double max_distance = std::numeric_limits<double>::infinity());

/// Channel k is reported at horizon (k+1) * dt_s.
std::vector<HorizonMetrics> horizon_errors(const std::vector<ChannelMatch>& channels, double dt_s);

/// Running sums over many samples; finish() yields the pooled per-horizon means.
class HorizonAccumulator {
 public:
  explicit HorizonAccumulator(int channels = 0);
  void add(const std::vector<ChannelMatch>& channels);
  std::vector<HorizonMetrics> finish(double dt_s) const;

 private:
  struct Sums {
    double abs_x = 0.0;
    double abs_y = 0.0;
    int matched = 0;
    int missed = 0;
    int spurious = 0;
  };
  std::vector<Sums> sums_;
};

/// Per-vehicle velocity from the last two history frames, extrapolated
/// linearly; a vehicle missing from the second-to-last frame stays at rest.
/// Returns one frame per horizon containing the vehicles of the last frame.
std::vector<Frame> constant_velocity_oracle(const std::vector<Frame>& history, double dt_s,
                                            const std::vector<double>& horizons_s);

/// Feeds the first output channel back as the newest input channel.
/// Returns every intermediate output stack.
std::vector<Tensor> recursive_predict(const Network& net, const Tensor& input, int steps);

/// Maps the anchor index and its rendered sample to d predicted channels.
using Predictor = std::function<Tensor(const SceneSequence&, std::size_t t, const SampleStack&)>;

Predictor network_predictor(const Network& net);
/// Repeats the last input channel at every horizon.
Predictor zero_motion_predictor();
/// Renders the constant-velocity extrapolation of the ground truth.
Predictor constant_velocity_predictor(const GridSpec& spec);
/// Returns the rendered targets themselves; isolates extraction error.
Predictor target_predictor();

struct EvalConfig {
  GridSpec grid;
  int d = 15;
  ExtractConfig extract;
  std::size_t stride = 1;
  int threads = 1;
  double max_distance = std::numeric_limits<double>::infinity();
};

struct EvalReport {
  std::vector<HorizonMetrics> horizons;
  std::size_t samples = 0;
  std::optional<double> eps_x;  // pooled over every horizon
  std::optional<double> eps_y;
  int n_matched = 0;
  int n_missed = 0;
  int n_spurious = 0;
};

/// Targets per channel are the positions of vehicles present at the anchor
/// frame whose centers lie inside the grid.
EvalReport evaluate(const SceneSequence& seq, const EvalConfig& cfg, const Predictor& predict);
EvalReport evaluate(const Checkpoint& ckpt, const SceneSequence& seq, const EvalConfig& cfg);

/// CSV: horizon_s,eps_x,eps_y,matched,missed,spurious; absent errors as NA.
void write_report_csv(std::ostream& os, const EvalReport& report);

}  // namespace bevf
