#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "twam/machine.hpp"

// The SWAM virtual machine: small-step operational semantics over a
// union-find heap, trail with unwinding, dynamic unification with occurs
// check, and backtracking. Checked execution mode additionally carries the
// LF context, the variable-to-location mapping, and register types, and
// asserts the machine-state invariants after every step.

namespace twam {

struct RunStats {
  uint64_t steps = 0;
  uint64_t backtracks = 0;
  uint64_t closures_allocated = 0;
  uint64_t tuples_allocated = 0;
  uint64_t cells_allocated = 0;
  uint64_t unify_calls = 0;
};

struct Outcome {
  enum class Tag {
    Success,
    Failure,
    OutOfFuel,
    Stuck,               // ill-typed input only; never on checked programs
    InvariantViolation,  // checked mode assertion failed (a bug detector)
  };
  Tag tag = Tag::Failure;
  // One (variable, rendered term) pair per query variable, in manifest
  // order; unbound cells render as _G<k> with consistent sharing.
  std::vector<std::pair<std::string, std::string>> answers;
  RunStats stats;
  std::string detail;
};

struct VmOptions {
  uint64_t fuel = 10'000'000;
  bool checked = false;           // requires a dependent program
  std::ostream* trace = nullptr;  // one line per step when set
};

Outcome run(const Program& p, const VmOptions& opts = {});

}  // namespace twam
