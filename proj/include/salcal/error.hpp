#pragma once

#include <stdexcept>
#include <string>

namespace salcal {

enum class ErrorKind {
  InvalidArgument,
  InvalidMapping,
  InvalidPoint,
  EmptyTarget,
  NonConvergence,
  Contract,
  DimensionMismatch,
  DatasetExhausted,
  Divergence,
  Parse,
  Unreachable,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when the reinitialization solver hits max_iters.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(ErrorKind::NonConvergence, what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : Error(ErrorKind::Divergence, what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Byte offset is -1 when the failure is not tied to a position in the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long long offset = -1)
      : Error(ErrorKind::Parse, what), offset_(offset) {}

  long long offset() const noexcept { return offset_; }

 private:
  long long offset_;
};

}  // namespace salcal
