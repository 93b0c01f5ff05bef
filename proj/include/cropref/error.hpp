#pragma once

#include <stdexcept>
#include <string>

namespace cropref {

// Error categories shared by all modules. The CLI maps every cropref::Error
// to the data/validation exit code; anything else is an internal failure.
enum class ErrorCode {
  InvalidArgument,
  EmptyGrid,
  UnsupportedLatitude,
  NotFound,
  Decode,
  Parse,
  Io,
  Transport,
  GeoreferenceMismatch,
  OutOfExtent,
  MissingBand,
  UnusablePixel,
  Shape,
  Divergence,
  Structure,
  UndefinedMetric,
  LengthMismatch,
  UnknownLabel,
  Stratification,
  MissingClass,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// HTTP failures keep the status so callers can distinguish 403 from 404.
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& what)
      : Error(ErrorCode::Transport, what), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace cropref
