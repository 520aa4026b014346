#pragma once

#include <stdexcept>
#include <string>

namespace shapnav {

enum class ErrorKind { config, numeric, io, contract, corrupt_checkpoint, version };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& w) : Error(ErrorKind::contract, w) {}
};
struct CorruptCheckpoint : Error {
  explicit CorruptCheckpoint(const std::string& w) : Error(ErrorKind::corrupt_checkpoint, w) {}
};
struct VersionError : Error {
  explicit VersionError(const std::string& w) : Error(ErrorKind::version, w) {}
};

// Process exit codes used by the command-line tool.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::numeric: return 3;
    case ErrorKind::io:
    case ErrorKind::corrupt_checkpoint:
    case ErrorKind::version: return 4;
    case ErrorKind::contract: return 5;
  }
  return 1;
}

}  // namespace shapnav
