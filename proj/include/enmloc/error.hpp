#pragma once

#include <stdexcept>
#include <string>

namespace enmloc {

/// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,  // caller passed something outside an operation's domain
  kState,            // object used in the wrong lifecycle state
  kIo,               // file could not be opened, read or written
  kData,             // input parsed but violates the expected schema/format
  kNumeric,          // degenerate numerics (all weights zero, divergence)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorKind::kInvalidArgument, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::kInvalidArgument, w) {}
};
struct StateError : Error {
  explicit StateError(const std::string& w) : Error(ErrorKind::kState, w) {}
};
struct OutOfBounds : Error {
  explicit OutOfBounds(const std::string& w) : Error(ErrorKind::kInvalidArgument, w) {}
};
struct EmptyScan : Error {
  explicit EmptyScan(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct EmptyBatch : Error {
  explicit EmptyBatch(const std::string& w) : Error(ErrorKind::kInvalidArgument, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& w)
      : Error(ErrorKind::kData, "line " + std::to_string(line) + ": " + w), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct CorruptionError : Error {
  explicit CorruptionError(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct EmptyOverlap : Error {
  explicit EmptyOverlap(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct DegenerateWeights : Error {
  explicit DegenerateWeights(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};

}  // namespace enmloc
