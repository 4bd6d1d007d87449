#pragma once

#include <stdexcept>
#include <string>

namespace bellsim {

/// Process exit codes shared by the CLI and the error hierarchy below.
enum class ExitCode : int {
  success = 0,
  validation = 2,
  runtime = 3,
  io = 4,
};

/// Bad input: violated precondition, malformed file or body, degenerate counts.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical trouble or a sequencing conflict discovered while running.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

/// A second step was requested while one is still in flight on the same session.
class SequencingError : public RuntimeError {
 public:
  explicit SequencingError(const std::string& what) : RuntimeError(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Maps an in-flight exception to the CLI exit code.
ExitCode exit_code_for(const std::exception& e) noexcept;

}  // namespace bellsim
