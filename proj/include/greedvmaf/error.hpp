#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace greedvmaf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Shapes of two inputs that must agree do not.
class GeometryMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed stream header; carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Stream ended inside a frame.
class TruncationError : public Error {
 public:
  explicit TruncationError(std::size_t frame_index)
      : Error("truncated stream inside frame " + std::to_string(frame_index)),
        frame_index_(frame_index) {}
  std::size_t frame_index() const noexcept { return frame_index_; }

 private:
  std::size_t frame_index_;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

}  // namespace greedvmaf
