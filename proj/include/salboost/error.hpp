#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace salboost {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents. The message carries the file
/// path and the line (text formats) or byte offset (binary payloads).
class ParseError : public Error {
 public:
  using Error::Error;

  static ParseError at_line(const std::string& path, std::size_t line, const std::string& what) {
    return ParseError(path + ":" + std::to_string(line) + ": " + what);
  }
  static ParseError at_byte(const std::string& path, std::size_t offset, const std::string& what) {
    return ParseError(path + ": byte " + std::to_string(offset) + ": " + what);
  }
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Input violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Geometric configuration cannot produce a unique answer (collinear
/// correspondences, coincident points, too few neighbors).
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

}  // namespace salboost
