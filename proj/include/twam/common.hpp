#pragma once

#include <string>
#include <vector>
#include <variant>
#include <optional>
#include <stdexcept>

namespace twam {

struct SourceLoc {
  int line = -1;
  int col = -1;
  bool valid() const { return line >= 0; }
};

enum class Severity { Error, Warning };

// One diagnostic record: parser/elaborator diagnostics carry line/col,
// checker diagnostics carry label + instruction index + rule name.
struct Diag {
  Severity severity = Severity::Error;
  std::string message;
  SourceLoc loc;
  std::string label;      // code label, when inside a block
  int instr_index = -1;   // 0-based instruction index within the block
  std::string rule;       // typing rule or judgment that failed

  std::string to_string() const;
};

// Thrown by parsers on the first syntax error.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(Diag d) : std::runtime_error(d.to_string()), diag(std::move(d)) {}
  Diag diag;
};

// Poor man's expected<T, Diag>.
template <class T>
struct Res {
  std::variant<T, Diag> v;
  Res(T t) : v(std::move(t)) {}
  Res(Diag d) : v(std::move(d)) {}
  bool ok() const { return v.index() == 0; }
  T& value() { return std::get<0>(v); }
  const T& value() const { return std::get<0>(v); }
  const Diag& diag() const { return std::get<1>(v); }
};

// Register-name ordering: r1 < r2 < ... < r10, then env, then ret, then
// anything else lexicographically. Keeps printed register files stable.
int reg_compare(const std::string& a, const std::string& b);

std::string quoted(const std::string& s);

}  // namespace twam
