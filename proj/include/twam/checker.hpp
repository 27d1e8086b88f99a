#pragma once

#include <map>
#include <vector>

#include "twam/machine.hpp"

// The TWAM typechecker (trusted core): per-block instruction typing, Prolog
// and tuple spine typing, operand typing, whole-program checking. Running
// the same engine on an erased program gives the simply-typed SWAM
// rechecker.

namespace twam {

struct CheckResult {
  std::vector<Diag> errors;
  std::vector<Diag> warnings;  // vacuous (dead-code) regions

  bool ok() const { return errors.empty(); }
};

CheckResult check_program(const Program& p);

// Per-block entry point, used by tests that assemble blocks by hand.
// `xi` maps labels to continuation types; `delta`/`gamma` are the block's
// parameter context and register file type.
CheckResult check_block(const Program& p,
                        const std::map<std::string, MachineType>& xi,
                        const std::string& label, const lf::Context& delta,
                        const RegFileType& gamma,
                        const std::vector<Instruction>& body);

// Operand typing against an explicit state; diagnostic on failure.
Res<MachineType> check_operand(const Program& p,
                               const std::map<std::string, MachineType>& xi,
                               const lf::Context& delta,
                               const RegFileType& gamma, const Operand& op);

}  // namespace twam
