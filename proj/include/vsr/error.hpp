#pragma once

#include <stdexcept>
#include <string>

namespace vsr {

// Base of every error raised by the library. The CLI maps these to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class AutogradError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind { BadMagic, BadVersion, BadDtype, BadNdim, Truncated, BadName };

class FormatError : public IoError {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : IoError(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

// Frame directory with a hole in the numbering.
class MissingFrameError : public IoError {
 public:
  explicit MissingFrameError(long index)
      : IoError("missing frame " + std::to_string(index)), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

}  // namespace vsr
