#include "avsplat/common.hpp"

namespace avsplat {

const char *to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidParameter:
    return "invalid parameter";
  case ErrorCode::DegenerateGaussian:
    return "degenerate gaussian";
  case ErrorCode::InvalidSkeleton:
    return "invalid skeleton";
  case ErrorCode::InvalidDirection:
    return "invalid direction";
  case ErrorCode::Configuration:
    return "configuration error";
  case ErrorCode::DimensionMismatch:
    return "dimension mismatch";
  case ErrorCode::Io:
    return "i/o error";
  case ErrorCode::Schema:
    return "schema error";
  case ErrorCode::Corrupt:
    return "corrupt data";
  case ErrorCode::UnsupportedVersion:
    return "unsupported version";
  case ErrorCode::Internal:
    return "internal error";
  case ErrorCode::Numeric:
    return "numeric failure";
  }
  return "error";
}

} // namespace avsplat
