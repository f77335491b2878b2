#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bevf/grid.hpp"

namespace bevf {

/// Dense channels x rows x cols activation volume, row-major per channel.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int rows, int cols, double fill = 0.0)
      : channels_(channels),
        rows_(rows),
        cols_(cols),
        data_(static_cast<std::size_t>(channels) * rows * cols, fill) {}

  int channels() const { return channels_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t plane() const { return static_cast<std::size_t>(rows_) * cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(int ch, int r, int c) { return data_[offset(ch, r, c)]; }
  double at(int ch, int r, int c) const { return data_[offset(ch, r, c)]; }

  std::span<double> channel(int ch) { return {data_.data() + ch * plane(), plane()}; }
  std::span<const double> channel(int ch) const { return {data_.data() + ch * plane(), plane()}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset(int ch, int r, int c) const {
    return (static_cast<std::size_t>(ch) * rows_ + r) * cols_ + c;
  }

  int channels_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Stacks grids as channels; all grids must share one size.
Tensor stack_grids(std::span<const BevGrid> grids);

/// Splits channels back into grids carrying `spec`'s geometry.
std::vector<BevGrid> unstack_grids(const Tensor& t, const GridSpec& spec);

}  // namespace bevf
