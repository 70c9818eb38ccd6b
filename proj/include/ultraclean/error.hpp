#pragma once

#include <stdexcept>
#include <string>

namespace ultraclean {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or incompatible on-disk data.
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, Corrupt, ShapeMismatch };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Caller violated a precondition, such as a bad parameter or an untrained model.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A metric whose denominator is empty.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace ultraclean
