#pragma once

#include <stdexcept>
#include <string>

namespace hapsim {

// Base for all recoverable hapsim failures.  The CLI maps each concrete
// type onto a documented exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- physics ---
struct UnsupportedShapePair : Error { using Error::Error; };
struct NumericalDivergence : Error { using Error::Error; };

// --- file parsing (scenes, trajectories, event logs, configs) ---
struct ParseError : Error {
  int line = 0;
  int column = 0;
  explicit ParseError(const std::string& what) : Error(what), reason_(what) {}
  ParseError(const std::string& what, int line_, int column_)
      : Error(what + " (line " + std::to_string(line_) + ", column " +
              std::to_string(column_) + ")"),
        line(line_), column(column_), reason_(what) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};
struct NonMonotonicTimestamps : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// --- signal path ---
struct UnknownChannel : Error { using Error::Error; };
struct NegativeForce : Error { using Error::Error; };
struct OutOfRangeCurrent : Error { using Error::Error; };
struct ZeroRadius : Error { using Error::Error; };
struct ChannelOutOfRange : Error { using Error::Error; };

// --- scenarios ---
struct ControllerNeverHeld : Error { using Error::Error; };
struct NoSlipOccurred : Error { using Error::Error; };
struct Timeout : Error { using Error::Error; };

}  // namespace hapsim
