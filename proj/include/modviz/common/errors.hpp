#pragma once

#include <stdexcept>
#include <string>

namespace modviz {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or configuration violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Container decoding failure. `kind()` distinguishes the failure modes so
/// callers (and tests) can tell a foreign file from a damaged one.
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, TruncatedPayload, Malformed };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Non-finite loss, gradient or objective during an iterative procedure.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Requested a feature-map tap on a model that has none (LSTM).
class NoTapPoint : public Error {
 public:
  NoTapPoint() : Error("no tap point") {}
};

}  // namespace modviz
