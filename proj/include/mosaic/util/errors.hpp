#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mosaic {

/// Base for every error the platform raises deliberately.
class MosaicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input from a caller: config documents, arguments, API bodies.
class ValidationError : public MosaicError {
 public:
  ValidationError(std::string field_path, const std::string& message)
      : MosaicError(field_path.empty() ? message : field_path + ": " + message),
        field_path_(std::move(field_path)) {}
  const std::string& field_path() const { return field_path_; }

 private:
  std::string field_path_;
};

/// Operation not legal in the object's current state.
class StateError : public MosaicError {
 public:
  using MosaicError::MosaicError;
};

class NotFoundError : public MosaicError {
 public:
  using MosaicError::MosaicError;
};

}  // namespace mosaic
