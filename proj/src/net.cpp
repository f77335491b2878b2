#include "bevf/net.hpp"

#include <cmath>
#include <stdexcept>

#include "bevf/error.hpp"
#include "bevf/random.hpp"
#include "layers.hpp"

namespace bevf {

std::string_view to_string(Head head) {
  switch (head) {
    case Head::linear:
      return "linear";
    case Head::tanh:
      return "tanh";
    case Head::clipped_relu:
      return "clipped_relu";
  }
  return "unknown";
}

Head parse_head(std::string_view name) {
  if (name == "linear") return Head::linear;
  if (name == "tanh") return Head::tanh;
  if (name == "clipped_relu") return Head::clipped_relu;
  throw std::invalid_argument("unknown head '" + std::string(name) +
                              "' (expected linear, tanh or clipped_relu)");
}

void NetSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("net: depth must be >= 1");
  if (depth > 12) throw std::invalid_argument("net: depth must be <= 12");
  if (base_features < 1) throw std::invalid_argument("net: base_features must be >= 1");
  if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("net: channel counts must be >= 1");
  if (static_cast<std::uint32_t>(head) > 2) throw std::invalid_argument("net: unknown head");
}

Tensor stack_grids(std::span<const BevGrid> grids) {
  if (grids.empty()) return {};
  const int rows = grids.front().rows();
  const int cols = grids.front().cols();
  Tensor t(static_cast<int>(grids.size()), rows, cols);
  for (std::size_t k = 0; k < grids.size(); ++k) {
    if (grids[k].rows() != rows || grids[k].cols() != cols) {
      throw ShapeError("stack_grids: grids differ in size");
    }
    auto src = grids[k].values();
    std::copy(src.begin(), src.end(), t.channel(static_cast<int>(k)).begin());
  }
  return t;
}

std::vector<BevGrid> unstack_grids(const Tensor& t, const GridSpec& spec) {
  GridSpec s = spec;
  s.height_px = t.rows();
  s.width_px = t.cols();
  std::vector<BevGrid> out;
  out.reserve(static_cast<std::size_t>(t.channels()));
  for (int ch = 0; ch < t.channels(); ++ch) {
    auto src = t.channel(ch);
    out.emplace_back(s, std::vector<double>(src.begin(), src.end()));
  }
  return out;
}

Network make_network(const NetSpec& spec, std::vector<Layer> layers) {
  Network net;
  net.spec = spec;
  int pools = 0;
  for (auto& layer : layers) {
    switch (layer.kind) {
      case LayerKind::conv: {
        const int k = layer.kernel;
        if (k < 1 || k % 2 == 0) throw std::invalid_argument("conv kernel must be odd");
        layer.weight = static_cast<int>(net.params.size());
        net.params.push_back({{layer.out_channels, layer.in_channels, k, k},
                              std::vector<double>(static_cast<std::size_t>(layer.out_channels) *
                                                  layer.in_channels * k * k)});
        layer.bias = static_cast<int>(net.params.size());
        net.params.push_back({{layer.out_channels},
                              std::vector<double>(static_cast<std::size_t>(layer.out_channels))});
        break;
      }
      case LayerKind::up_conv:
        layer.kernel = 2;
        layer.weight = static_cast<int>(net.params.size());
        net.params.push_back({{layer.in_channels, layer.out_channels, 2, 2},
                              std::vector<double>(static_cast<std::size_t>(layer.in_channels) *
                                                  layer.out_channels * 4)});
        layer.bias = static_cast<int>(net.params.size());
        net.params.push_back({{layer.out_channels},
                              std::vector<double>(static_cast<std::size_t>(layer.out_channels))});
        break;
      case LayerKind::max_pool:
        ++pools;
        break;
      default:
        break;
    }
  }
  net.layers = std::move(layers);
  net.input_multiple = 1 << pools;
  return net;
}

Network build_network(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n = spec.depth;
  const int k = spec.base_features;
  auto features = [k](int level) { return k << level; };
  std::vector<Layer> layers;
  auto conv_relu = [&](int in, int out) {
    layers.push_back({LayerKind::conv, in, out, 3});
    layers.push_back({LayerKind::relu, out, out, 0});
  };

  int channels = spec.in_channels;
  for (int level = 0; level < n - 1; ++level) {
    conv_relu(channels, features(level));
    conv_relu(features(level), features(level));
    channels = features(level);
    layers.push_back({LayerKind::max_pool, channels, channels, 2});
  }
  conv_relu(channels, features(n - 1));
  conv_relu(features(n - 1), features(n - 1));
  channels = features(n - 1);
  for (int level = n - 2; level >= 0; --level) {
    layers.push_back({LayerKind::up_conv, channels, features(level), 2});
    layers.push_back({LayerKind::concat_skip, 2 * features(level), 2 * features(level), 0});
    conv_relu(2 * features(level), features(level));
    conv_relu(features(level), features(level));
    channels = features(level);
  }
  layers.push_back({LayerKind::conv, channels, spec.out_channels, 1});
  layers.push_back({LayerKind::head, spec.out_channels, spec.out_channels, 0});

  Network net = make_network(spec, std::move(layers));
  net.input_multiple = min_input_size(n);
  init_params(net, seed);
  return net;
}

void init_params(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer& layer = net.layers[li];
    if (layer.weight < 0) continue;
    const bool feeds_relu = li + 1 < net.layers.size() && net.layers[li + 1].kind == LayerKind::relu;
    // Transposed 2x2/stride-2 convs: each output pixel sees one tap per input channel.
    const double fan_in = layer.kind == LayerKind::up_conv
                              ? static_cast<double>(layer.in_channels)
                              : static_cast<double>(layer.in_channels) * layer.kernel * layer.kernel;
    const double stddev = std::sqrt((feeds_relu ? 2.0 : 1.0) / fan_in);
    for (double& w : net.params[static_cast<std::size_t>(layer.weight)].values) {
      w = static_cast<double>(static_cast<float>(stddev * rng.normal()));
    }
    auto& bias = net.params[static_cast<std::size_t>(layer.bias)].values;
    std::fill(bias.begin(), bias.end(), 0.0);
  }
}

void check_input_shape(const Network& net, int rows, int cols) {
  const int m = net.input_multiple;
  if (rows < m || cols < m || rows % m != 0 || cols % m != 0) {
    throw ShapeError("input size " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " must be a positive multiple of " + std::to_string(m) + " in both axes");
  }
}

Tensor forward(const Network& net, const Tensor& input, ForwardTape* tape) {
  check_input_shape(net, input.rows(), input.cols());
  if (!net.layers.empty() && input.channels() != net.layers.front().in_channels) {
    throw ShapeError("input has " + std::to_string(input.channels()) + " channels, network expects " +
                     std::to_string(net.layers.front().in_channels));
  }
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->pool_argmax.clear();
  }
  std::vector<Tensor> skips;
  Tensor x = input;
  for (const Layer& layer : net.layers) {
    if (tape != nullptr) tape->inputs.push_back(x);
    switch (layer.kind) {
      case LayerKind::conv:
        x = detail::conv_forward(x, net.params[layer.weight].values, net.params[layer.bias].values,
                                 layer.out_channels, layer.kernel);
        break;
      case LayerKind::relu:
        x = detail::relu_forward(x);
        break;
      case LayerKind::max_pool: {
        std::vector<std::uint32_t>* argmax = nullptr;
        if (tape != nullptr) argmax = &tape->pool_argmax.emplace_back();
        skips.push_back(x);
        x = detail::max_pool_forward(x, argmax);
        break;
      }
      case LayerKind::up_conv:
        x = detail::up_conv_forward(x, net.params[layer.weight].values, net.params[layer.bias].values,
                                    layer.out_channels);
        break;
      case LayerKind::concat_skip:
        if (skips.empty()) throw ShapeError("concat_skip without a pending skip connection");
        x = detail::concat(skips.back(), x);
        skips.pop_back();
        break;
      case LayerKind::head:
        x = detail::head_forward(x, net.spec.head);
        break;
    }
  }
  return x;
}

int receptive_field(int depth) {
  if (depth < 1) throw std::invalid_argument("receptive_field: depth must be >= 1");
  int sum = 3;
  for (int i = 2; i <= depth; ++i) sum += 5 * (1 << (i - 2));
  return 2 * sum;
}

int min_input_size(int depth) {
  if (depth < 1) throw std::invalid_argument("min_input_size: depth must be >= 1");
  return 1 << depth;
}

std::size_t count_params(const Network& net) {
  std::size_t n = 0;
  for (const auto& p : net.params) n += p.values.size();
  return n;
}

}  // namespace bevf
