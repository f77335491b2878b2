#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace bevf::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_f32(double v) { put(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

// Reads past the end set `truncated()` and return zeros; callers check once.
class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T get() {
    if (in_.size() - pos_ < sizeof(T)) {
      truncated_ = true;
      pos_ = in_.size();
      return T{};
    }
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  double get_f32() { return static_cast<double>(std::bit_cast<float>(get<std::uint32_t>())); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view raw(std::size_t n) {
    if (in_.size() - pos_ < n) {
      truncated_ = true;
      pos_ = in_.size();
      return {};
    }
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool truncated() const { return truncated_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
  bool truncated_ = false;
};

}  // namespace bevf::detail
