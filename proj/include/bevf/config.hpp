#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "bevf/extract.hpp"
#include "bevf/grid.hpp"
#include "bevf/net.hpp"
#include "bevf/train.hpp"

namespace bevf {

/// Effective experiment settings. The text form is one `key=value` per line;
/// blank lines and lines starting with '#' are ignored.
struct Config {
  GridSpec grid;
  int stack_d = 15;
  double stack_dt_s = 0.2;
  NetSpec net;
  std::uint64_t net_seed = 0;
  TrainConfig train;
  ExtractConfig extract;
  std::size_t eval_stride = 1;
  double eval_max_distance = std::numeric_limits<double>::infinity();

  /// Throws std::invalid_argument on unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);

  /// Checks every module invariant, including grid sizes being multiples of
  /// 2^depth and the network channels matching stack.d.
  void validate() const;

  /// Network spec with in/out channels taken from stack.d.
  NetSpec network_spec() const;

  static std::vector<std::string> keys();
};

Config parse_config(std::string_view text, Config base = {});
std::string dump_config(const Config& cfg);

}  // namespace bevf
