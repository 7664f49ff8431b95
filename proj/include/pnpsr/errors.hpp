#pragma once

#include <stdexcept>
#include <string>

namespace pnpsr {

/// Caller passed something the operation cannot accept (bad shape, bad
/// parameter range, infeasible constraint set).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed in a way that indicates a bug or a
/// pathological instance (iteration cap without convergence, etc.).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure talking to an external denoiser. `phase()` names the protocol
/// step that failed ("connect", "handshake", "denoise", "vjp").
class TransportError : public std::runtime_error {
 public:
  TransportError(std::string phase, const std::string& what)
      : std::runtime_error(phase + ": " + what), phase_(std::move(phase)) {}

  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

}  // namespace pnpsr
