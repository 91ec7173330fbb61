#pragma once

#include <stdexcept>
#include <string>

namespace mtflock {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The simulation produced a non-finite state; `step` is the first bad index.
struct DivergedError : std::runtime_error {
  DivergedError(long step_, const std::string& message)
      : std::runtime_error(message), step(step_) {}
  long step;
};

/// A trajectory did not contract enough for asymptotic-velocity extraction.
struct NotConvergedError : std::runtime_error {
  NotConvergedError(double final_dv, const std::string& message)
      : std::runtime_error(message), final_dv_frob(final_dv) {}
  double final_dv_frob;
};

}  // namespace mtflock
