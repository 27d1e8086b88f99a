#include "twam/common.hpp"

#include <cctype>
#include <sstream>

namespace twam {

std::string Diag::to_string() const {
  std::ostringstream out;
  out << (severity == Severity::Error ? "error" : "warning");
  if (loc.valid()) out << " at " << loc.line << ":" << loc.col;
  if (!label.empty()) {
    out << " in " << label;
    if (instr_index >= 0) out << " (instruction " << instr_index + 1 << ")";
  }
  if (!rule.empty()) out << " [" << rule << "]";
  out << ": " << message;
  return out.str();
}

namespace {

// Splits a numbered register like "r12" into its number, or -1.
long reg_number(const std::string& s) {
  if (s.size() < 2 || s[0] != 'r') return -1;
  for (size_t i = 1; i < s.size(); ++i)
    if (!isdigit(static_cast<unsigned char>(s[i]))) return -1;
  return std::stol(s.substr(1));
}

}  // namespace

int reg_compare(const std::string& a, const std::string& b) {
  long na = reg_number(a), nb = reg_number(b);
  if (na >= 0 && nb >= 0) return na < nb ? -1 : (na > nb ? 1 : 0);
  if (na >= 0) return -1;
  if (nb >= 0) return 1;
  auto rank = [](const std::string& s) {
    if (s == "env") return 0;
    if (s == "ret") return 1;
    return 2;
  };
  int ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  return a < b ? -1 : (a > b ? 1 : 0);
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace twam
