#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bevf/tensor.hpp"

namespace bevf {

enum class Head : std::uint32_t { linear = 0, tanh = 1, clipped_relu = 2 };

std::string_view to_string(Head head);
Head parse_head(std::string_view name);

struct NetSpec {
  int depth = 6;          // encoder-decoder levels, bottleneck included
  int base_features = 4;  // channels produced by the first level
  int in_channels = 15;
  int out_channels = 15;
  Head head = Head::linear;

  void validate() const;
  bool operator==(const NetSpec&) const = default;
};

enum class LayerKind : std::uint8_t {
  conv,         // kernel x kernel, unit stride, zero padding keeps the size
  relu,
  max_pool,     // 2x2 stride 2; pushes its input as a skip connection
  up_conv,      // 2x2 transposed convolution, stride 2
  concat_skip,  // pops the latest skip: [skip channels, current channels]
  head,         // elementwise output transform from NetSpec::head
};

struct Layer {
  LayerKind kind = LayerKind::relu;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int weight = -1;  // index into Network::params
  int bias = -1;

  bool operator==(const Layer&) const = default;
};

/// Weights are [out, in, k, k] for conv and [in, out, 2, 2] for up_conv.
struct ParamTensor {
  std::vector<int> shape;
  std::vector<double> values;

  bool operator==(const ParamTensor&) const = default;
};

struct Network {
  NetSpec spec;
  std::vector<Layer> layers;
  std::vector<ParamTensor> params;
  int input_multiple = 1;  // spatial dims must be multiples of this

  bool operator==(const Network&) const = default;
};

/// Per-layer inputs kept for the backward pass.
struct ForwardTape {
  std::vector<Tensor> inputs;
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // one per max_pool layer
};

/// U-net: first level maps in_channels to k features, each further encoder
/// level doubles them behind a 2x2 max-pool, the bottleneck is level n-1; the
/// decoder mirrors with transposed convolutions and skip concatenation, then a
/// 1x1 convolution to out_channels and the head. Every 3x3 convolution is
/// followed by a ReLU.
Network build_network(const NetSpec& spec, std::uint64_t seed);

/// Wraps an arbitrary layer list; parameters are allocated zeroed.
Network make_network(const NetSpec& spec, std::vector<Layer> layers);

/// Variance-scaled normal init (fan-in), biases zero, values on the float grid.
void init_params(Network& net, std::uint64_t seed);

Tensor forward(const Network& net, const Tensor& input, ForwardTape* tape = nullptr);

/// Half-width of the input region that can influence one output pixel.
int receptive_field(int depth);
int min_input_size(int depth);
std::size_t count_params(const Network& net);

/// Throws ShapeError unless rows/cols are positive multiples of input_multiple.
void check_input_shape(const Network& net, int rows, int cols);

}  // namespace bevf
