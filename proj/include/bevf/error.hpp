#pragma once

#include <stdexcept>
#include <string>

namespace bevf {

// Malformed input layout (missing column, bad header, wrong magic in a text format).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value could not be parsed; `row` is the 1-based line number in the source.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Not enough frames / channels around an index.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Tensor or grid dimensions incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bevf
