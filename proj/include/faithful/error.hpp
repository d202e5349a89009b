#pragma once

#include <stdexcept>
#include <cstddef>
#include <string>
#include <utility>

namespace faithful {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown label, malformed graph, or a violated precondition on an argument.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An exhaustive enumeration was asked to run past its configured cap.
class SizeLimit : public Error {
 public:
  using Error::Error;
};

/// Coefficients leave no positive error variance at some vertex.
class NotStandardizable : public Error {
 public:
  NotStandardizable(std::string vertex, double error_variance)
      : Error("model is not standardizable at vertex '" + vertex +
              "' (solved error variance " + std::to_string(error_variance) + ")"),
        vertex_(std::move(vertex)),
        error_variance_(error_variance) {}

  const std::string& vertex() const noexcept { return vertex_; }
  double error_variance() const noexcept { return error_variance_; }

 private:
  std::string vertex_;
  double error_variance_;
};

/// Singular or indefinite matrix where an invertible one is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Closed-form correlation matrix that is not positive definite.
class InvalidParameters : public Error {
 public:
  using Error::Error;
};

/// Data that cannot support the requested statistic (constant column, n too small).
class DegenerateData : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The adversarial search ran out of scales without producing a verified pair.
class ConstructionFailed : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based; 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid experiment configuration; the message starts with the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace faithful
