#ifndef GFLAB_ERRORS_HPP
#define GFLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gflab {

/// Base class for every error raised by the library. The `kind()` string is
/// what the CLI prints in its machine-readable error object.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidParameter : public Error {
 public:
  explicit InvalidParameter(const std::string& what) : Error("invalid-parameter", what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain-error", what) {}
};

class MalformedPath : public Error {
 public:
  explicit MalformedPath(const std::string& what) : Error("malformed-path", what) {}
};

class NumericFailure : public Error {
 public:
  explicit NumericFailure(const std::string& what) : Error("numeric-failure", what) {}
};

class InsufficientSample : public Error {
 public:
  explicit InsufficientSample(const std::string& what) : Error("insufficient-sample", what) {}
};

class OutOfHorizon : public Error {
 public:
  explicit OutOfHorizon(const std::string& what) : Error("out-of-horizon", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config-error", what) {}
};

}  // namespace gflab

#endif  // GFLAB_ERRORS_HPP
