#include "cropref/error.hpp"

namespace cropref {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::EmptyGrid: return "empty grid";
    case ErrorCode::UnsupportedLatitude: return "unsupported latitude";
    case ErrorCode::NotFound: return "not found";
    case ErrorCode::Decode: return "decode error";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Transport: return "transport error";
    case ErrorCode::GeoreferenceMismatch: return "georeference mismatch";
    case ErrorCode::OutOfExtent: return "out of extent";
    case ErrorCode::MissingBand: return "missing band";
    case ErrorCode::UnusablePixel: return "unusable pixel";
    case ErrorCode::Shape: return "shape error";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Structure: return "structural error";
    case ErrorCode::UndefinedMetric: return "undefined metric";
    case ErrorCode::LengthMismatch: return "length mismatch";
    case ErrorCode::UnknownLabel: return "unknown label";
    case ErrorCode::Stratification: return "stratification error";
    case ErrorCode::MissingClass: return "missing class";
  }
  return "unknown error";
}

}  // namespace cropref
