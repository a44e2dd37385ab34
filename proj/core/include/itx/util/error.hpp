#pragma once

#include <stdexcept>
#include <string>

namespace itx {

// Base class for every error thrown by the library.  Subclasses exist where
// callers need to distinguish failure modes programmatically.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Parsing / serialization problems (config files, point clouds, checkpoints,
// pose files).
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// A checkpoint whose format version or architecture does not match what the
// caller expects.
struct CheckpointError : IoError {
  explicit CheckpointError(const std::string& msg) : IoError(msg) {}
};

// Bad run configuration: unknown keys, malformed values, missing files.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace itx
