#pragma once

#include <stdexcept>
#include <string>

namespace kfstab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by its inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical kernel failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A linear matrix equation has no unique solution.
class SingularEquationError : public Error {
 public:
  using Error::Error;
};

/// Observability was too weak to build a well-conditioned embedding.
class ObservabilityError : public Error {
 public:
  using Error::Error;
};

/// Random sampling of a minimal system kept failing.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// An integrated trajectory left the finite range.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}

  double time() const { return time_; }

 private:
  double time_;
};

/// Data do not carry enough excitation for synthesis.
class ExcitationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace kfstab
