#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pouf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix shapes. `node()` names the offending graph node when known.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what, std::string node = {})
      : Error(node.empty() ? what : "node '" + node + "': " + what), node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

/// A computation left the finite domain (log of a non-positive value, NaN logits, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments or configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `offset()` is a byte offset for binary files and a 1-based line for text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace pouf
