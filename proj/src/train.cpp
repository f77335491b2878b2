#include "bevf/train.hpp"

#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "bevf/error.hpp"
#include "bevf/random.hpp"
#include "layers.hpp"

namespace bevf {
namespace {

double to_float_grid(double v) { return static_cast<double>(static_cast<float>(v)); }

Gradients zeros_like(const Network& net) {
  Gradients g;
  g.reserve(net.params.size());
  for (const auto& p : net.params) g.emplace_back(p.values.size(), 0.0);
  return g;
}

}  // namespace

std::string_view to_string(LossReduction r) { return r == LossReduction::mean ? "mean" : "sum"; }

LossReduction parse_loss_reduction(std::string_view name) {
  if (name == "mean") return LossReduction::mean;
  if (name == "sum") return LossReduction::sum;
  throw std::invalid_argument("unknown loss reduction '" + std::string(name) + "' (expected mean or sum)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0,1)");
  if (!(grad_threshold > 0.0)) throw std::invalid_argument("train: grad_threshold must be > 0");
  if (minibatch != 1) throw std::invalid_argument("train: only minibatch 1 is supported");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (log_every < 1) throw std::invalid_argument("train: log_every must be >= 1");
}

double mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ShapeError("mse_loss: shapes differ");
  if (pred.size() == 0) return 0.0;
  auto p = pred.data();
  auto t = target.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - t[i];
    sum += e * e;
  }
  return sum / static_cast<double>(p.size());
}

LossAndGradients backward(const Network& net, const Tensor& input, const Tensor& target,
                          LossReduction reduction) {
  ForwardTape tape;
  const Tensor out = forward(net, input, &tape);
  if (!out.same_shape(target)) throw ShapeError("backward: target shape does not match output");

  LossAndGradients result;
  result.loss = mse_loss(out, target);
  result.grads = zeros_like(net);

  Tensor g(out.channels(), out.rows(), out.cols());
  {
    const double scale = reduction == LossReduction::mean ? 2.0 / static_cast<double>(out.size()) : 2.0;
    auto gs = g.data();
    auto o = out.data();
    auto t = target.data();
    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = scale * (o[i] - t[i]);
  }

  std::vector<Tensor> skip_grads;
  std::size_t pool_index = tape.pool_argmax.size();
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& layer = net.layers[li];
    const Tensor& x = tape.inputs[li];
    switch (layer.kind) {
      case LayerKind::conv: {
        Tensor gx(x.channels(), x.rows(), x.cols());
        detail::conv_backward(x, g, net.params[layer.weight].values, layer.kernel, &gx,
                              result.grads[layer.weight], result.grads[layer.bias]);
        g = std::move(gx);
        break;
      }
      case LayerKind::relu:
        g = detail::relu_backward(x, g);
        break;
      case LayerKind::max_pool: {
        Tensor gx = detail::max_pool_backward(x, g, tape.pool_argmax[--pool_index]);
        const Tensor& skip = skip_grads.back();
        auto dst = gx.data();
        auto src = skip.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        skip_grads.pop_back();
        g = std::move(gx);
        break;
      }
      case LayerKind::up_conv: {
        Tensor gx(x.channels(), x.rows(), x.cols());
        detail::up_conv_backward(x, g, net.params[layer.weight].values, &gx,
                                 result.grads[layer.weight], result.grads[layer.bias]);
        g = std::move(gx);
        break;
      }
      case LayerKind::concat_skip: {
        // g covers [skip, x]; x is this layer's second operand.
        const int skip_channels = g.channels() - x.channels();
        Tensor gs(skip_channels, g.rows(), g.cols());
        Tensor gx(x.channels(), g.rows(), g.cols());
        auto all = g.data();
        std::copy(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(gs.size()), gs.data().begin());
        std::copy(all.begin() + static_cast<std::ptrdiff_t>(gs.size()), all.end(), gx.data().begin());
        skip_grads.push_back(std::move(gs));
        g = std::move(gx);
        break;
      }
      case LayerKind::head:
        g = detail::head_backward(x, g, net.spec.head);
        break;
    }
  }
  return result;
}

LossAndGradients backward(const Network& net, const SampleStack& sample, LossReduction reduction) {
  return backward(net, stack_grids(sample.input), stack_grids(sample.target), reduction);
}

double global_norm(const Gradients& grads) {
  double sum = 0.0;
  for (const auto& g : grads) {
    for (double v : g) sum += v * v;
  }
  return std::sqrt(sum);
}

Gradients clip_gradients(Gradients grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_gradients: threshold must be > 0");
  const double norm = global_norm(grads);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (auto& g : grads) {
      for (double& v : g) v *= scale;
    }
  }
  return grads;
}

OptimizerState make_optimizer_state(const Network& net) { return {zeros_like(net), 0}; }

void sgd_momentum_step(Network& net, const Gradients& grads, const TrainConfig& cfg,
                       OptimizerState& state) {
  if (grads.size() != net.params.size()) throw ShapeError("sgd: gradient count mismatch");
  if (state.velocity.empty()) state = make_optimizer_state(net);
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    auto& theta = net.params[p].values;
    auto& v = state.velocity[p];
    const auto& g = grads[p];
    if (g.size() != theta.size() || v.size() != theta.size()) throw ShapeError("sgd: tensor size mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = to_float_grid(cfg.momentum * v[i] + g[i]);
      theta[i] = to_float_grid(theta[i] - cfg.lr * v[i]);
    }
  }
  ++state.iteration;
}

SequenceSamples::SequenceSamples(const SceneSequence& seq, GridSpec spec, int d,
                                 std::vector<std::size_t> anchors)
    : seq_(seq), spec_(spec), d_(d), anchors_(std::move(anchors)) {}

std::vector<std::size_t> SequenceSamples::valid_anchors(const SceneSequence& seq, int d,
                                                        std::size_t stride) {
  std::vector<std::size_t> out;
  const auto depth = static_cast<std::size_t>(d);
  if (d < 1 || stride == 0) return out;
  for (std::size_t t = depth - 1; t + depth < seq.size(); t += stride) out.push_back(t);
  return out;
}

SampleStack SequenceSamples::sample(std::size_t i) const {
  return build_sample(seq_, anchors_.at(i), d_, spec_);
}

Checkpoint train(Checkpoint start, const SampleSource& data, const TrainConfig& cfg,
                 const TrainLogger& logger) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train: dataset is empty");
  Checkpoint ckpt = std::move(start);
  if (ckpt.optimizer.velocity.empty()) ckpt.optimizer = make_optimizer_state(ckpt.net);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  double window_sum = 0.0;
  int window_count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const SampleStack sample = data.sample(idx);
      LossAndGradients lg = backward(ckpt.net, sample, cfg.reduction);
      sgd_momentum_step(ckpt.net, clip_gradients(std::move(lg.grads), cfg.grad_threshold), cfg,
                        ckpt.optimizer);
      window_sum += lg.loss;
      ++window_count;
      if (window_count == cfg.log_every) {
        if (logger) logger({ckpt.optimizer.iteration, window_sum / window_count});
        window_sum = 0.0;
        window_count = 0;
      }
    }
  }
  if (window_count > 0 && logger) logger({ckpt.optimizer.iteration, window_sum / window_count});
  return ckpt;
}

namespace {

void write_tensors(detail::Writer& w, const std::vector<ParamTensor>& params, const Gradients* values) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& shape = params[p].shape;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (int dim : shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
    const auto& data = values != nullptr ? (*values)[p] : params[p].values;
    for (double v : data) w.put_f32(v);
  }
}

std::vector<std::vector<double>> read_tensors(detail::Reader& r, const std::vector<ParamTensor>& expected) {
  std::vector<std::vector<double>> out;
  out.reserve(expected.size());
  for (const auto& param : expected) {
    const auto rank = r.get<std::uint32_t>();
    if (r.truncated()) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint: truncated");
    if (rank != param.shape.size()) {
      throw CheckpointError(CheckpointError::Kind::shape, "checkpoint: tensor rank mismatch");
    }
    for (int dim : param.shape) {
      if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(dim)) {
        if (r.truncated()) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint: truncated");
        throw CheckpointError(CheckpointError::Kind::shape, "checkpoint: tensor shape mismatch");
      }
    }
    if (r.remaining() < param.values.size() * sizeof(float)) {
      throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint: truncated tensor data");
    }
    std::vector<double> values(param.values.size());
    for (double& v : values) v = r.get_f32();
    out.push_back(std::move(values));
  }
  return out;
}

}  // namespace

std::string save_checkpoint(const Checkpoint& ckpt) {
  const NetSpec& s = ckpt.net.spec;
  detail::Writer w;
  w.raw("BEVF");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.depth));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.base_features));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.in_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.out_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.head));
  w.put<std::uint64_t>(ckpt.optimizer.iteration);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.net.params.size()));
  write_tensors(w, ckpt.net.params, nullptr);
  const Gradients velocity =
      ckpt.optimizer.velocity.empty() ? zeros_like(ckpt.net) : ckpt.optimizer.velocity;
  write_tensors(w, ckpt.net.params, &velocity);
  return w.take();
}

Checkpoint load_checkpoint(std::string_view bytes) {
  using Kind = CheckpointError::Kind;
  detail::Reader r(bytes);
  const auto magic = r.raw(4);
  if (r.truncated()) throw CheckpointError(Kind::truncated, "checkpoint: truncated header");
  if (magic != "BEVF") throw CheckpointError(Kind::bad_magic, "checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (r.truncated()) throw CheckpointError(Kind::truncated, "checkpoint: truncated header");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version, "checkpoint: unsupported version " + std::to_string(version));
  }
  NetSpec spec;
  spec.depth = static_cast<int>(r.get<std::uint32_t>());
  spec.base_features = static_cast<int>(r.get<std::uint32_t>());
  spec.in_channels = static_cast<int>(r.get<std::uint32_t>());
  spec.out_channels = static_cast<int>(r.get<std::uint32_t>());
  spec.head = static_cast<Head>(r.get<std::uint32_t>());
  Checkpoint ckpt;
  ckpt.optimizer.iteration = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  if (r.truncated()) throw CheckpointError(Kind::truncated, "checkpoint: truncated header");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::shape, std::string("checkpoint: ") + e.what());
  }
  ckpt.net = build_network(spec, 0);
  if (count != ckpt.net.params.size()) throw CheckpointError(Kind::shape, "checkpoint: tensor count mismatch");
  auto params = read_tensors(r, ckpt.net.params);
  for (std::size_t p = 0; p < params.size(); ++p) ckpt.net.params[p].values = std::move(params[p]);
  ckpt.optimizer.velocity = read_tensors(r, ckpt.net.params);
  if (r.remaining() != 0) throw CheckpointError(Kind::shape, "checkpoint: trailing bytes");
  return ckpt;
}

}  // namespace bevf
