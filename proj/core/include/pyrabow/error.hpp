#pragma once

#include <stdexcept>
#include <string>

namespace pyrabow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An image file could not be decoded. The message carries the path.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// A configuration document failed validation. `field()` names the
/// offending dotted key (e.g. "pca.num_components").
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pyrabow
