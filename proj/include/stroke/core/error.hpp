#pragma once

#include <stdexcept>
#include <string>

namespace stroke {

// Error categories used across the pipeline. The CLI maps these onto
// process exit codes (config -> 1, data-shaped -> 2, everything else -> 3).
enum class ErrorKind {
  Config,       // bad configuration or arguments
  Data,         // unusable input data (NaN voxels, missing files, empty populations)
  Format,       // malformed on-disk container (bad magic, bad header fields)
  Unsupported,  // well-formed but outside the supported subset
  Schema,       // label id not covered by the active label schema
  Bounds,       // index out of range
  Shape,        // grid/tensor extent mismatch
  Contract,     // caller violated a documented precondition
  Spec,         // invalid phantom specification
  Aggregation,  // aggregate requested over an empty case set
  Divergence,   // non-finite values produced during optimization
  Runtime,      // anything else
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Format: return "format";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Spec: return "spec";
    case ErrorKind::Aggregation: return "aggregation";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Runtime: return "runtime";
  }
  return "runtime";
}

}  // namespace stroke
