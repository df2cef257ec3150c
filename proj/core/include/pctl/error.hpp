#pragma once

#include <stdexcept>
#include <string>

namespace pctl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration document failed to parse or validate. `path()` is the
/// dotted location of the offending field, empty for whole-document errors.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A simulated state or objective became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A required input (solution file, observed state) is absent.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace pctl
