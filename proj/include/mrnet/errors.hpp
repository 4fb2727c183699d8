#pragma once

#include <stdexcept>
#include <string>

namespace mrnet {

/// Raised when a caller breaks an operation's precondition (shapes, ranges, ordering).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN or Inf showed up in a loss, gradient or parameter.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometric domain problems, e.g. a projective horizon inside the rendered area.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model file failures. Each failure mode has its own type so callers can
// tell a damaged file from one written by a newer tool.
class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

class VersionError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

class TruncationError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace mrnet
