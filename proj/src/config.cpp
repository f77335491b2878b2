#include "bevf/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

namespace bevf {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument("config: bad value '" + std::string(value) + "' for " + std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  if constexpr (std::is_floating_point_v<T>) {
    if (std::isnan(out)) bad_value(key, value);
  }
  return out;
}

std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

using Setter = std::function<void(Config&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const Config&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T, typename Member>
Field number_field(Member member) {
  return {[member](Config& c, std::string_view k, std::string_view v) { member(c) = parse_number<T>(k, v); },
          [member](const Config& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(member(c));
            } else {
              return std::to_string(member(c));
            }
          }};
}

// Ordered as written by dump_config.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"grid.width", number_field<int>([](auto& c) -> auto& { return c.grid.width_px; })},
      {"grid.height", number_field<int>([](auto& c) -> auto& { return c.grid.height_px; })},
      {"grid.x_m_per_px", number_field<double>([](auto& c) -> auto& { return c.grid.x_m_per_px; })},
      {"grid.y_m_per_px", number_field<double>([](auto& c) -> auto& { return c.grid.y_m_per_px; })},
      {"grid.origin_x", number_field<double>([](auto& c) -> auto& { return c.grid.origin_x; })},
      {"grid.origin_y", number_field<double>([](auto& c) -> auto& { return c.grid.origin_y; })},
      {"stack.d", number_field<int>([](auto& c) -> auto& { return c.stack_d; })},
      {"stack.dt_s", number_field<double>([](auto& c) -> auto& { return c.stack_dt_s; })},
      {"net.depth", number_field<int>([](auto& c) -> auto& { return c.net.depth; })},
      {"net.base_features", number_field<int>([](auto& c) -> auto& { return c.net.base_features; })},
      {"net.head",
       {[](Config& c, std::string_view, std::string_view v) { c.net.head = parse_head(v); },
        [](const Config& c) { return std::string(to_string(c.net.head)); }}},
      {"net.seed", number_field<std::uint64_t>([](auto& c) -> auto& { return c.net_seed; })},
      {"train.lr", number_field<double>([](auto& c) -> auto& { return c.train.lr; })},
      {"train.momentum", number_field<double>([](auto& c) -> auto& { return c.train.momentum; })},
      {"train.grad_threshold", number_field<double>([](auto& c) -> auto& { return c.train.grad_threshold; })},
      {"train.minibatch", number_field<int>([](auto& c) -> auto& { return c.train.minibatch; })},
      {"train.epochs", number_field<int>([](auto& c) -> auto& { return c.train.epochs; })},
      {"train.seed", number_field<std::uint64_t>([](auto& c) -> auto& { return c.train.seed; })},
      {"train.log_every", number_field<int>([](auto& c) -> auto& { return c.train.log_every; })},
      {"train.reduction",
       {[](Config& c, std::string_view, std::string_view v) { c.train.reduction = parse_loss_reduction(v); },
        [](const Config& c) { return std::string(to_string(c.train.reduction)); }}},
      {"extract.p_min", number_field<double>([](auto& c) -> auto& { return c.extract.p_min; })},
      {"extract.win_w", number_field<double>([](auto& c) -> auto& { return c.extract.win_w; })},
      {"extract.win_h", number_field<double>([](auto& c) -> auto& { return c.extract.win_h; })},
      {"eval.stride", number_field<std::size_t>([](auto& c) -> auto& { return c.eval_stride; })},
      {"eval.max_distance", number_field<double>([](auto& c) -> auto& { return c.eval_max_distance; })},
  };
  return table;
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

void Config::validate() const {
  grid.validate();
  if (stack_d < 1) throw std::invalid_argument("config: stack.d must be >= 1");
  if (!(stack_dt_s > 0.0)) throw std::invalid_argument("config: stack.dt_s must be > 0");
  network_spec().validate();
  const int multiple = min_input_size(net.depth);
  if (grid.width_px % multiple != 0 || grid.height_px % multiple != 0) {
    throw std::invalid_argument("config: grid " + std::to_string(grid.width_px) + "x" +
                                std::to_string(grid.height_px) + " is not a multiple of 2^depth = " +
                                std::to_string(multiple));
  }
  train.validate();
  extract.validate();
  if (eval_stride < 1) throw std::invalid_argument("config: eval.stride must be >= 1");
  if (!(eval_max_distance > 0.0)) throw std::invalid_argument("config: eval.max_distance must be > 0");
}

NetSpec Config::network_spec() const {
  NetSpec s = net;
  s.in_channels = stack_d;
  s.out_channels = stack_d;
  return s;
}

std::vector<std::string> Config::keys() {
  std::vector<std::string> out;
  for (const auto& [name, _] : fields()) out.push_back(name);
  return out;
}

Config parse_config(std::string_view text, Config base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) + " is not key=value");
    }
    base.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

std::string dump_config(const Config& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(cfg) + "\n";
  return out;
}

}  // namespace bevf
