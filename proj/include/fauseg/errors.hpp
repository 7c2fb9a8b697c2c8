#pragma once

#include <stdexcept>
#include <string>

namespace fauseg {

// Each error family maps onto one CLI exit code.
enum class ExitCode : int { Ok = 0, Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual ExitCode exit_code() const noexcept = 0;
};

/// Invalid hyperparameters, unknown architecture names, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::Usage; }
};

/// Tensor or grid shapes that violate an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::Data; }
};

/// Malformed files, unknown label values, missing dataset pieces.
class DataError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::Data; }
};

/// Non-finite losses or otherwise diverged numerics.
class NumericError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::Numeric; }
};

}  // namespace fauseg
