#include <doctest.h>

#include <cmath>

#include "bevf/random.hpp"
#include "bevf/train.hpp"
#include "oracles.hpp"

using namespace bevf;

namespace {

NetSpec toy_spec(Head head = Head::linear) {
  NetSpec s;
  s.depth = 2;
  s.base_features = 2;
  s.in_channels = 2;
  s.out_channels = 2;
  s.head = head;
  return s;
}

Tensor random_tensor(int ch, int rows, int cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(ch, rows, cols);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void randomize(Network& net, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& p : net.params)
    for (double& v : p.values) v = scale * rng.normal();
}

Tensor filled(int ch, int rows, int cols, std::vector<double> values) {
  Tensor t(ch, rows, cols);
  std::copy(values.begin(), values.end(), t.data().begin());
  return t;
}

// A tiny in-memory sample source built from rendered toy scenes.
class FixedSamples final : public SampleSource {
 public:
  explicit FixedSamples(std::vector<SampleStack> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  SampleStack sample(std::size_t i) const override { return samples_[i]; }

 private:
  std::vector<SampleStack> samples_;
};

SampleStack moving_vehicle_sample(double x0, double v, int d, const GridSpec& spec) {
  SceneSequence seq;
  seq.rate_hz = 5;
  for (int t = 0; t < 2 * d; ++t) {
    Frame f;
    f.t_index = t;
    f.vehicles.push_back({1, x0 + v * 0.2 * t, 4.0, 4.5, 1.9, v, 0.0});
    seq.frames.push_back(f);
  }
  return build_sample(seq, static_cast<std::size_t>(d - 1), d, spec);
}

GridSpec toy_grid() {
  GridSpec g;
  g.width_px = 32;
  g.height_px = 16;
  return g;
}

}  // namespace

TEST_CASE("mse loss arithmetic") {
  const auto a = filled(1, 1, 2, {0.0, 1.0});
  const auto b = filled(1, 1, 2, {1.0, 1.0});
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(filled(1, 1, 2, {1, 1}), filled(1, 1, 2, {0, 0})) == 1.0);
  CHECK(mse_loss(a, b) == 0.5);
}

TEST_CASE("gradients vanish at a perfect fit") {
  auto net = build_network(toy_spec(), 2);
  const auto x = random_tensor(2, 4, 4, 3);
  const auto y = forward(net, x);
  const auto lg = backward(net, x, y);
  CHECK(lg.loss == 0.0);
  for (const auto& g : lg.grads)
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("finite-difference gradient oracle") {
  SUBCASE("whole toy U-net, every head") {
    for (Head h : {Head::linear, Head::tanh, Head::clipped_relu}) {
      auto net = build_network(toy_spec(h), 5);
      randomize(net, 7 + static_cast<int>(h), 0.5);
      const auto x = random_tensor(2, 4, 8, 11);
      const auto t = random_tensor(2, 4, 8, 12);
      CHECK(oracle::gradient_check(net, x, t) < 1e-4);
    }
  }
  SUBCASE("single 3x3 conv") {
    auto net = make_network(toy_spec(), {{LayerKind::conv, 2, 3, 3}});
    randomize(net, 1, 1.0);
    CHECK(oracle::gradient_check(net, random_tensor(2, 5, 6, 2, -1, 1), random_tensor(3, 5, 6, 3)) < 1e-4);
  }
  SUBCASE("conv then relu") {
    auto net = make_network(toy_spec(), {{LayerKind::conv, 2, 3, 3}, {LayerKind::relu, 3, 3}});
    randomize(net, 4, 1.0);
    CHECK(oracle::gradient_check(net, random_tensor(2, 5, 6, 5, -1, 1), random_tensor(3, 5, 6, 6)) < 1e-4);
  }
  SUBCASE("pool, transposed conv and skip concat") {
    auto net = make_network(toy_spec(), {{LayerKind::conv, 2, 2, 3},
                                         {LayerKind::max_pool, 2, 2},
                                         {LayerKind::up_conv, 2, 3, 2},
                                         {LayerKind::concat_skip, 5, 5},
                                         {LayerKind::conv, 5, 2, 1}});
    randomize(net, 8, 1.0);
    CHECK(oracle::gradient_check(net, random_tensor(2, 4, 6, 9, -1, 1), random_tensor(2, 4, 6, 10)) < 1e-4);
  }
}

TEST_CASE("sum reduction scales the mean gradient by the element count") {
  auto net = build_network(toy_spec(), 5);
  const auto x = random_tensor(2, 4, 8, 1);
  const auto t = random_tensor(2, 4, 8, 2);
  const auto mean = backward(net, x, t, LossReduction::mean);
  const auto sum = backward(net, x, t, LossReduction::sum);
  CHECK(mean.loss == sum.loss);
  const double n = 2 * 4 * 8;
  for (std::size_t p = 0; p < mean.grads.size(); ++p)
    for (std::size_t i = 0; i < mean.grads[p].size(); ++i)
      CHECK(sum.grads[p][i] == doctest::Approx(n * mean.grads[p][i]));
}

TEST_CASE("tanh head gradient is bounded by the upstream gradient") {
  // One pixel through an identity 1x1 conv: the bias gradient is dL/d(pre-activation).
  NetSpec s = toy_spec(Head::tanh);
  s.in_channels = s.out_channels = 1;
  auto net = make_network(s, {{LayerKind::conv, 1, 1, 1}, {LayerKind::head, 1, 1}});
  net.params[0].values = {1.0};
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto x = filled(1, 1, 1, {rng.uniform(-5, 5)});
    const auto t = filled(1, 1, 1, {rng.uniform(-1, 1)});
    const double y = forward(net, x).data()[0];
    const double upstream = 2.0 * (y - t.data()[0]);
    CHECK(std::abs(backward(net, x, t).grads[1][0]) <= std::abs(upstream) + 1e-15);
  }
}

TEST_CASE("gradient clipping") {
  Gradients small{{0.3, 0.4}};
  CHECK(clip_gradients(small, 1.0) == small);
  Gradients big{{4.0, 0.0}, {0.0}};
  const auto c = clip_gradients(big, 1.0);
  CHECK(global_norm(c) == doctest::Approx(1.0));
  CHECK(c[0][0] == doctest::Approx(1.0));
  Gradients dir{{3.0, 4.0}};
  const auto d = clip_gradients(dir, 1.0);
  CHECK(d[0][0] / d[0][1] == doctest::Approx(0.75));
}

TEST_CASE("momentum update") {
  auto net = make_network(toy_spec(), {{LayerKind::conv, 1, 1, 1}});
  net.params[0].values = {1.0};
  net.params[1].values = {0.0};
  TrainConfig cfg;
  cfg.lr = 1.0;
  SUBCASE("plain SGD") {
    cfg.momentum = 0.0;
    auto state = make_optimizer_state(net);
    sgd_momentum_step(net, {{0.25}, {0.0}}, cfg, state);
    CHECK(net.params[0].values[0] == 0.75);
  }
  SUBCASE("zero gradient, zero velocity") {
    auto state = make_optimizer_state(net);
    sgd_momentum_step(net, {{0.0}, {0.0}}, cfg, state);
    CHECK(net.params[0].values[0] == 1.0);
  }
  SUBCASE("two steps with constant gradient move g + 1.9 g") {
    cfg.momentum = 0.9;
    auto state = make_optimizer_state(net);
    sgd_momentum_step(net, {{0.125}, {0.0}}, cfg, state);
    sgd_momentum_step(net, {{0.125}, {0.0}}, cfg, state);
    CHECK(net.params[0].values[0] == doctest::Approx(1.0 - 0.125 * 2.9));
    CHECK(state.iteration == 2);
  }
}

TEST_CASE("one sample, one epoch is one optimizer step") {
  const auto spec = toy_grid();
  NetSpec ns = toy_spec();
  ns.in_channels = ns.out_channels = 3;
  FixedSamples data({moving_vehicle_sample(8.0, 5.0, 3, spec)});
  TrainConfig cfg;
  cfg.lr = 1e-3;
  const auto out = train({build_network(ns, 1), {}}, data, cfg);
  CHECK(out.optimizer.iteration == 1);
}

TEST_CASE("repeated single sample: loss never increases over 100 steps") {
  const auto spec = toy_grid();
  NetSpec ns = toy_spec();
  ns.depth = 3;
  ns.base_features = 4;
  ns.in_channels = ns.out_channels = 4;
  const auto sample = moving_vehicle_sample(6.0, 10.0, 4, spec);
  FixedSamples data({sample});
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.log_every = 1;
  cfg.epochs = 100;
  std::vector<double> losses;
  train({build_network(ns, 3), {}}, data, cfg, [&](const TrainLogEntry& e) { losses.push_back(e.loss); });
  REQUIRE(losses.size() == 100);
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1]);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("training is deterministic and checkpoints round-trip bitwise") {
  const auto spec = toy_grid();
  NetSpec ns = toy_spec();
  ns.in_channels = ns.out_channels = 3;
  std::vector<SampleStack> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(moving_vehicle_sample(4.0 + 2.0 * i, 5.0 + i, 3, spec));
  FixedSamples data(samples);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 3;
  cfg.seed = 99;
  const auto a = train({build_network(ns, 1), {}}, data, cfg);
  const auto b = train({build_network(ns, 1), {}}, data, cfg);
  CHECK(a == b);
  CHECK(a.optimizer.iteration == 18);
  const auto bytes = save_checkpoint(a);
  CHECK(save_checkpoint(b) == bytes);
  CHECK(load_checkpoint(bytes) == a);
  CHECK(bytes.substr(0, 4) == "BEVF");
}

TEST_CASE("checkpoint errors are distinct") {
  const Checkpoint ck{build_network(toy_spec(), 1), {}};
  const auto bytes = save_checkpoint(ck);
  auto kind_of = [](const std::string& b) {
    try {
      load_checkpoint(b);
    } catch (const CheckpointError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  std::string magic = bytes;
  magic[1] = 'X';
  CHECK(kind_of(magic) == static_cast<int>(CheckpointError::Kind::bad_magic));
  std::string version = bytes;
  version[4] = 7;
  CHECK(kind_of(version) == static_cast<int>(CheckpointError::Kind::version));
  CHECK(kind_of(bytes.substr(0, bytes.size() - 1)) == static_cast<int>(CheckpointError::Kind::truncated));
  CHECK(kind_of(bytes.substr(0, 10)) == static_cast<int>(CheckpointError::Kind::truncated));
  CHECK(kind_of(bytes + "xx") == static_cast<int>(CheckpointError::Kind::shape));
}

TEST_CASE("valid anchors") {
  SceneSequence seq;
  seq.frames.resize(40);
  const auto a = SequenceSamples::valid_anchors(seq, 15);
  REQUIRE(!a.empty());
  CHECK(a.front() == 14);
  CHECK(a.back() == 24);
  CHECK(SequenceSamples::valid_anchors(seq, 15, 5) == std::vector<std::size_t>{14, 19, 24});
  seq.frames.resize(20);
  CHECK(SequenceSamples::valid_anchors(seq, 15).empty());
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.lr = -1;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.momentum = 1.0;
  CHECK_THROWS(cfg.validate());
  CHECK(parse_loss_reduction("mean") == LossReduction::mean);
  CHECK_THROWS(parse_loss_reduction("max"));
}
