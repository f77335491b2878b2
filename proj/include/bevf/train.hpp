#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bevf/bev.hpp"
#include "bevf/net.hpp"

namespace bevf {

/// How the squared errors of one sample are reduced into the training
/// objective. `mean` divides by the element count; `sum` adds them up per
/// sample, so gradients do not shrink with grid size.
enum class LossReduction : std::uint8_t { mean, sum };

std::string_view to_string(LossReduction r);
LossReduction parse_loss_reduction(std::string_view name);

struct TrainConfig {
  double lr = 1e-6;
  double momentum = 0.9;
  double grad_threshold = 1.0;
  int minibatch = 1;
  int epochs = 1;
  std::uint64_t seed = 0;
  int log_every = 100;
  LossReduction reduction = LossReduction::sum;

  void validate() const;
};

/// One vector per Network::params entry.
using Gradients = std::vector<std::vector<double>>;

double mse_loss(const Tensor& pred, const Tensor& target);

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Reverse-mode gradient of the squared error between forward(net, input)
/// and target. `loss` is always the MSE; the gradient follows `reduction`.
LossAndGradients backward(const Network& net, const Tensor& input, const Tensor& target,
                          LossReduction reduction = LossReduction::mean);
LossAndGradients backward(const Network& net, const SampleStack& sample,
                          LossReduction reduction = LossReduction::mean);

double global_norm(const Gradients& grads);

/// Rescales to `threshold` when the global L2 norm exceeds it.
Gradients clip_gradients(Gradients grads, double threshold);

struct OptimizerState {
  Gradients velocity;
  std::uint64_t iteration = 0;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer_state(const Network& net);

/// Classical momentum: v <- momentum*v + g; theta <- theta - lr*v. Parameters
/// and velocities are kept on the single-precision grid.
void sgd_momentum_step(Network& net, const Gradients& grads, const TrainConfig& cfg,
                       OptimizerState& state);

struct Checkpoint {
  Network net;
  OptimizerState optimizer;

  bool operator==(const Checkpoint&) const = default;
};

/// Random access over training samples.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual SampleStack sample(std::size_t i) const = 0;
};

/// Samples rendered on demand from a sequence at the given anchor indices.
class SequenceSamples final : public SampleSource {
 public:
  SequenceSamples(const SceneSequence& seq, GridSpec spec, int d, std::vector<std::size_t> anchors);

  /// Every valid anchor t in [d-1, size-d), stepping by `stride`.
  static std::vector<std::size_t> valid_anchors(const SceneSequence& seq, int d, std::size_t stride = 1);

  std::size_t size() const override { return anchors_.size(); }
  SampleStack sample(std::size_t i) const override;

 private:
  const SceneSequence& seq_;
  GridSpec spec_;
  int d_;
  std::vector<std::size_t> anchors_;
};

struct TrainLogEntry {
  std::uint64_t step = 0;  // optimizer steps completed
  double loss = 0.0;       // mean loss over the last log window
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;

/// Minibatch-1 SGD with global-norm clipping; samples are visited in a
/// seeded shuffled order each epoch. Continues from `start`'s optimizer state.
Checkpoint train(Checkpoint start, const SampleSource& data, const TrainConfig& cfg,
                 const TrainLogger& logger = {});

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, version, truncated, shape };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Little-endian: char[4] "BEVF", u32 version, u32 depth, base_features,
// in_channels, out_channels, head, u64 iteration, u32 tensor count, then per
// parameter tensor: u32 rank, u32 dims[rank], f32 values; then the momentum
// buffers in the same layout and order.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::string_view bytes);

}  // namespace bevf
