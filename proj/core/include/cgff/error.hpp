#pragma once

#include <stdexcept>
#include <string>

namespace cgff {

/// Error raised by any module; the message is prefixed with the module name
/// so that errors propagated through the CLI stay attributable.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// An iterative solver ran out of iterations; carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& message, double residual)
      : Error(std::move(module), message), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace cgff
