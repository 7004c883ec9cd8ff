#include "salcal/error.hpp"

namespace salcal {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidMapping: return "invalid-mapping";
    case ErrorKind::InvalidPoint: return "invalid-point";
    case ErrorKind::EmptyTarget: return "empty-target";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::DatasetExhausted: return "dataset-exhausted";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Unreachable: return "unreachable";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace salcal
