#pragma once

#include <stdexcept>
#include <string>

namespace mirnav {

// Caller broke a precondition (bad shapes, stepping a finished episode, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Goal cannot be reached from the queried pose or cell.
struct Unreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Procedural generation gave up after its retry budget.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or scene/spec values (CLI exit 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Task sampling constraints cannot be met (CLI exit 3).
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training aborted on persistent non-finite losses (CLI exit 4).
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace mirnav
