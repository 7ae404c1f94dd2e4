#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace discsent {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: bad JSON Lines record, bad checkpoint, bad vector file.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
  FormatError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  /// 1-based line number, or 0 when the error is not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Invalid configuration value or option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value reached a parameter update.
class NumericsError : public Error {
 public:
  using Error::Error;
};

class EmptySentence : public Error {
 public:
  EmptySentence() : Error("sentence has no tokens") {}
  using Error::Error;
};

class CardinalityError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class ProbeError : public Error {
 public:
  using Error::Error;
};

}  // namespace discsent
