#pragma once

#include <stdexcept>
#include <string>

namespace lane3d {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. The message names the offending JSON path.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Not enough anchors to satisfy the requested positive/negative counts.
class InsufficientAnchors : public Error {
 public:
  InsufficientAnchors(std::size_t required, std::size_t available)
      : Error("insufficient anchors: need " + std::to_string(required) + ", have " +
              std::to_string(available) + " (shortfall " +
              std::to_string(required - available) + ")"),
        required_(required),
        available_(available) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t available() const noexcept { return available_; }
  std::size_t shortfall() const noexcept { return required_ - available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

/// Every frame of a segment was filtered out before focal fitting.
class UninformativeSegment : public Error {
 public:
  UninformativeSegment()
      : Error("segment uninformative, lower rz_min or extend segment") {}
};

/// Loss evaluated over an empty validity mask.
class NoValidPixels : public Error {
 public:
  NoValidPixels() : Error("no valid pixels in mask") {}
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace lane3d
