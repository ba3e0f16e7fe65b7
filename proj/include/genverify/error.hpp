#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace genverify {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input (image header, hex string, CSV record, manifest).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_ = 0;
};

/// Well-formed input using a feature this library does not decode.
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

/// Precondition violation on caller-supplied arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace genverify
