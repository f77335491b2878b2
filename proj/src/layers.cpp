#include "layers.hpp"

#include <algorithm>
#include <cmath>

#include "bevf/error.hpp"

namespace bevf::detail {

Tensor conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                    int out_channels, int kernel) {
  const int in_channels = x.channels();
  const int rows = x.rows();
  const int cols = x.cols();
  const int pad = kernel / 2;
  Tensor y(out_channels, rows, cols);
  for (int o = 0; o < out_channels; ++o) {
    auto yo = y.channel(o);
    std::fill(yo.begin(), yo.end(), b[o]);
    for (int i = 0; i < in_channels; ++i) {
      auto xi = x.channel(i);
      for (int kr = 0; kr < kernel; ++kr) {
        const int dr = kr - pad;
        const int r_lo = std::max(0, -dr);
        const int r_hi = std::min(rows, rows - dr);
        for (int kc = 0; kc < kernel; ++kc) {
          const int dc = kc - pad;
          const int c_lo = std::max(0, -dc);
          const int c_hi = std::min(cols, cols - dc);
          const double wv = w[((static_cast<std::size_t>(o) * in_channels + i) * kernel + kr) * kernel + kc];
          if (wv == 0.0) continue;
          for (int r = r_lo; r < r_hi; ++r) {
            double* yrow = yo.data() + static_cast<std::size_t>(r) * cols;
            const double* xrow = xi.data() + static_cast<std::size_t>(r + dr) * cols + dc;
            for (int c = c_lo; c < c_hi; ++c) yrow[c] += wv * xrow[c];
          }
        }
      }
    }
  }
  return y;
}

void conv_backward(const Tensor& x, const Tensor& gy, std::span<const double> w, int kernel,
                   Tensor* gx, std::span<double> gw, std::span<double> gb) {
  const int in_channels = x.channels();
  const int out_channels = gy.channels();
  const int rows = x.rows();
  const int cols = x.cols();
  const int pad = kernel / 2;
  for (int o = 0; o < out_channels; ++o) {
    auto go = gy.channel(o);
    double sum = 0.0;
    for (double v : go) sum += v;
    gb[o] += sum;
    for (int i = 0; i < in_channels; ++i) {
      auto xi = x.channel(i);
      for (int kr = 0; kr < kernel; ++kr) {
        const int dr = kr - pad;
        const int r_lo = std::max(0, -dr);
        const int r_hi = std::min(rows, rows - dr);
        for (int kc = 0; kc < kernel; ++kc) {
          const int dc = kc - pad;
          const int c_lo = std::max(0, -dc);
          const int c_hi = std::min(cols, cols - dc);
          const std::size_t wi = ((static_cast<std::size_t>(o) * in_channels + i) * kernel + kr) * kernel + kc;
          const double wv = w[wi];
          double acc = 0.0;
          for (int r = r_lo; r < r_hi; ++r) {
            const double* grow = go.data() + static_cast<std::size_t>(r) * cols;
            const double* xrow = xi.data() + static_cast<std::size_t>(r + dr) * cols + dc;
            for (int c = c_lo; c < c_hi; ++c) acc += grow[c] * xrow[c];
          }
          gw[wi] += acc;
          if (gx == nullptr || wv == 0.0) continue;
          auto gxi = gx->channel(i);
          for (int r = r_lo; r < r_hi; ++r) {
            const double* grow = go.data() + static_cast<std::size_t>(r) * cols;
            double* gxrow = gxi.data() + static_cast<std::size_t>(r + dr) * cols + dc;
            for (int c = c_lo; c < c_hi; ++c) gxrow[c] += wv * grow[c];
          }
        }
      }
    }
  }
}

Tensor up_conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                       int out_channels) {
  const int in_channels = x.channels();
  const int rows = x.rows();
  const int cols = x.cols();
  Tensor y(out_channels, rows * 2, cols * 2);
  for (int o = 0; o < out_channels; ++o) {
    auto yo = y.channel(o);
    std::fill(yo.begin(), yo.end(), b[o]);
    for (int i = 0; i < in_channels; ++i) {
      auto xi = x.channel(i);
      for (int kr = 0; kr < 2; ++kr) {
        for (int kc = 0; kc < 2; ++kc) {
          const double wv = w[((static_cast<std::size_t>(i) * out_channels + o) * 2 + kr) * 2 + kc];
          for (int r = 0; r < rows; ++r) {
            double* yrow = yo.data() + static_cast<std::size_t>(2 * r + kr) * (2 * cols) + kc;
            const double* xrow = xi.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) yrow[2 * c] += wv * xrow[c];
          }
        }
      }
    }
  }
  return y;
}

void up_conv_backward(const Tensor& x, const Tensor& gy, std::span<const double> w, Tensor* gx,
                      std::span<double> gw, std::span<double> gb) {
  const int in_channels = x.channels();
  const int out_channels = gy.channels();
  const int rows = x.rows();
  const int cols = x.cols();
  for (int o = 0; o < out_channels; ++o) {
    auto go = gy.channel(o);
    double sum = 0.0;
    for (double v : go) sum += v;
    gb[o] += sum;
    for (int i = 0; i < in_channels; ++i) {
      auto xi = x.channel(i);
      for (int kr = 0; kr < 2; ++kr) {
        for (int kc = 0; kc < 2; ++kc) {
          const std::size_t wi = ((static_cast<std::size_t>(i) * out_channels + o) * 2 + kr) * 2 + kc;
          const double wv = w[wi];
          double acc = 0.0;
          for (int r = 0; r < rows; ++r) {
            const double* grow = go.data() + static_cast<std::size_t>(2 * r + kr) * (2 * cols) + kc;
            const double* xrow = xi.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) acc += grow[2 * c] * xrow[c];
          }
          gw[wi] += acc;
          if (gx == nullptr) continue;
          auto gxi = gx->channel(i);
          for (int r = 0; r < rows; ++r) {
            const double* grow = go.data() + static_cast<std::size_t>(2 * r + kr) * (2 * cols) + kc;
            double* gxrow = gxi.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) gxrow[c] += wv * grow[2 * c];
          }
        }
      }
    }
  }
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& gy) {
  Tensor gx = gy;
  auto xs = x.data();
  auto gs = gx.data();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (!(xs[i] > 0.0)) gs[i] = 0.0;
  }
  return gx;
}

Tensor max_pool_forward(const Tensor& x, std::vector<std::uint32_t>* argmax) {
  if (x.rows() % 2 != 0 || x.cols() % 2 != 0) {
    throw ShapeError("max_pool: spatial size must be even");
  }
  const int rows = x.rows() / 2;
  const int cols = x.cols() / 2;
  Tensor y(x.channels(), rows, cols);
  if (argmax != nullptr) argmax->assign(y.size(), 0);
  std::size_t k = 0;
  for (int ch = 0; ch < x.channels(); ++ch) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c, ++k) {
        // Ties keep the first element in row-major window order.
        int best_r = 2 * r;
        int best_c = 2 * c;
        double best = x.at(ch, best_r, best_c);
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            const double v = x.at(ch, 2 * r + dr, 2 * c + dc);
            if (v > best) {
              best = v;
              best_r = 2 * r + dr;
              best_c = 2 * c + dc;
            }
          }
        }
        y.at(ch, r, c) = best;
        if (argmax != nullptr) {
          (*argmax)[k] = static_cast<std::uint32_t>(best_r * x.cols() + best_c);
        }
      }
    }
  }
  return y;
}

Tensor max_pool_backward(const Tensor& x, const Tensor& gy, const std::vector<std::uint32_t>& argmax) {
  Tensor gx(x.channels(), x.rows(), x.cols());
  std::size_t k = 0;
  for (int ch = 0; ch < gy.channels(); ++ch) {
    auto gxc = gx.channel(ch);
    auto gyc = gy.channel(ch);
    for (std::size_t i = 0; i < gyc.size(); ++i, ++k) gxc[argmax[k]] += gyc[i];
  }
  return gx;
}

Tensor concat(const Tensor& first, const Tensor& second) {
  if (first.rows() != second.rows() || first.cols() != second.cols()) {
    throw ShapeError("concat: spatial sizes differ");
  }
  Tensor y(first.channels() + second.channels(), first.rows(), first.cols());
  auto out = y.data();
  std::copy(first.data().begin(), first.data().end(), out.begin());
  std::copy(second.data().begin(), second.data().end(), out.begin() + static_cast<std::ptrdiff_t>(first.size()));
  return y;
}

Tensor head_forward(const Tensor& x, Head head) {
  Tensor y = x;
  switch (head) {
    case Head::linear:
      break;
    case Head::tanh:
      for (double& v : y.data()) v = std::tanh(v);
      break;
    case Head::clipped_relu:
      for (double& v : y.data()) v = std::clamp(v, 0.0, 1.0);
      break;
  }
  return y;
}

Tensor head_backward(const Tensor& x, const Tensor& gy, Head head) {
  Tensor gx = gy;
  auto xs = x.data();
  auto gs = gx.data();
  switch (head) {
    case Head::linear:
      break;
    case Head::tanh:
      for (std::size_t i = 0; i < gs.size(); ++i) {
        const double t = std::tanh(xs[i]);
        gs[i] *= 1.0 - t * t;
      }
      break;
    case Head::clipped_relu:
      for (std::size_t i = 0; i < gs.size(); ++i) {
        if (!(xs[i] > 0.0 && xs[i] < 1.0)) gs[i] = 0.0;
      }
      break;
  }
  return gx;
}

}  // namespace bevf::detail
