#pragma once

#include <stdexcept>
#include <string>

namespace comment_judge {

/// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kData = 2,
  kEndpoint = 3,
};

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

/// Malformed, inconsistent, or otherwise unusable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// File system failure (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

/// Generative endpoint unreachable, rejecting requests, or returning garbage.
class EndpointError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kEndpoint; }
};

class AuthenticationError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

}  // namespace comment_judge
