#pragma once

#include <string>

#include "twam/machine.hpp"

// Textual .twam / .swam program format. print_ir . parse_ir is the identity
// on ASTs; spine membership is determined by instruction counting, never by
// layout.

namespace twam {

std::string print_ir(const Program& p);
Program parse_ir(const std::string& text);  // throws ParseError

}  // namespace twam
