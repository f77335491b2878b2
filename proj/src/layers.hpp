#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bevf/net.hpp"

// Kernels for the fixed layer set. Backward kernels accumulate into their
// gradient outputs.
namespace bevf::detail {

Tensor conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                    int out_channels, int kernel);
void conv_backward(const Tensor& x, const Tensor& gy, std::span<const double> w, int kernel,
                   Tensor* gx, std::span<double> gw, std::span<double> gb);

Tensor up_conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                       int out_channels);
void up_conv_backward(const Tensor& x, const Tensor& gy, std::span<const double> w, Tensor* gx,
                      std::span<double> gw, std::span<double> gb);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& gy);

Tensor max_pool_forward(const Tensor& x, std::vector<std::uint32_t>* argmax);
Tensor max_pool_backward(const Tensor& x, const Tensor& gy, const std::vector<std::uint32_t>& argmax);

Tensor concat(const Tensor& first, const Tensor& second);

Tensor head_forward(const Tensor& x, Head head);
Tensor head_backward(const Tensor& x, const Tensor& gy, Head head);

}  // namespace bevf::detail
