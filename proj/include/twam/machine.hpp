#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twam/lf.hpp"

// The TWAM intermediate representation: machine types, operands,
// instructions, code values and whole programs. The same structures carry
// both the dependently-annotated form and its type-erased (SWAM) image;
// `Program::dependent` says which one a given program is.

namespace twam {

// ------------------------------------------------------------ machine types

struct RegEntry;

// tau ::= S(M : a) | a | PI x1:A1...xn:An. not Gamma | x(tau1, ..., taun)
struct MachineType {
  enum class Tag { Sing, Atomic, Cont, Tuple } tag = Tag::Atomic;

  lf::Term term;     // Sing
  std::string atom;  // Sing / Atomic: data type name

  std::vector<lf::Param> params;  // Cont: LF parameter telescope
  std::vector<RegEntry> rf;       // Cont: register file type (sorted)

  std::vector<MachineType> elems;  // Tuple

  MachineType();
  MachineType(const MachineType&);
  MachineType(MachineType&&) noexcept;
  MachineType& operator=(const MachineType&);
  MachineType& operator=(MachineType&&) noexcept;
  ~MachineType();
};

struct RegEntry {
  std::string reg;
  MachineType type;
};

MachineType sing(lf::Term m, std::string atom);
MachineType atomic(std::string atom);
MachineType cont(std::vector<lf::Param> params, std::vector<RegEntry> rf);
MachineType tuple(std::vector<MachineType> elems);

// Register file type: finite map register -> MachineType, kept sorted.
struct RegFileType {
  std::vector<RegEntry> entries;

  const MachineType* find(const std::string& reg) const;
  void set(const std::string& reg, MachineType type);
  bool empty() const { return entries.empty(); }
};

bool alpha_equal(const MachineType& a, const MachineType& b);
bool rf_equal(const std::vector<RegEntry>& a, const std::vector<RegEntry>& b);
// Gamma' <= Gamma: every entry of Gamma' is present and equal in Gamma.
bool rf_subsumes(const std::vector<RegEntry>& smaller,
                 const std::vector<RegEntry>& larger);

MachineType apply(const lf::Subst& s, const MachineType& t);
std::vector<RegEntry> apply(const lf::Subst& s, std::vector<RegEntry> rf);

std::string show(const MachineType& t);
std::string show_rf(const std::vector<RegEntry>& rf);

// ---------------------------------------------------------------- operands

// op ::= lam x1:A1...xk:Ak. base M1 ... Mn   with base a label or register.
// Erased operands have no binders and no arguments.
struct Operand {
  enum class Base { Label, Reg } base = Base::Reg;
  std::vector<lf::Param> binders;
  std::string name;
  std::vector<lf::Term> args;
};

Operand op_reg(std::string name);
Operand op_label(std::string name, std::vector<lf::Term> args = {});

Operand apply(const lf::Subst& s, const Operand& op);
std::string show(const Operand& op, bool parens_if_compound = true);

// ------------------------------------------------------------- instructions

struct Instruction {
  enum class Op {
    PutVar,    // put_var r, x:a        (erased: put_var r, a)
    GetVal,    // get_val r1, r2
    GetStr,    // get_str c/n, r
    PutStr,    // put_str c/n, r
    UnifyVar,  // unify_var r, x:a      (erased: unify_var r, a)
    UnifyVal,  // unify_val r
    Mov,       // mov rd, op
    Jmp,       // jmp op
    Close,     // close rd, re, op
    PushBt,    // push_bt re, op
    PutTuple,  // put_tuple rd, n
    SetVal,    // set_val r
    Proj,      // proj rd, rs, i
    Succeed,   // succeed [M : A]       (erased: succeed)
  };

  Op op;
  std::string r1, r2;    // destination / source registers
  std::string con;       // constructor name for get_str/put_str
  int num = 0;           // constructor arity, tuple length, or proj index
  std::string bind_var;  // LF variable for put_var/unify_var (dependent only)
  std::string bind_type; // atomic data type for put_var/unify_var
  Operand operand;       // mov/jmp/close/push_bt
  lf::Term proof;        // succeed annotation (dependent only)
  lf::Family proof_type;
  SourceLoc loc;
};

std::string show(const Instruction& ins, bool dependent);

// --------------------------------------------------------------- code values

// code[ x1:A1, ..., xk:Ak ]{ Gamma }( I )
struct CodeValue {
  std::vector<lf::Param> params;
  RegFileType rf;
  std::vector<Instruction> body;
};

// The continuation type PI params. not rf of a code value.
MachineType code_type(const CodeValue& cv);

struct Program {
  bool dependent = true;
  lf::Signature sig;
  std::vector<std::pair<std::string, MachineType>> xi;  // code-section type
  std::vector<std::pair<std::string, CodeValue>> code;  // ordered
  std::string entry;                                    // query entry label
  // Answer manifest: query variable name -> register holding its cell at
  // the entry block's terminal jmp.
  std::vector<std::pair<std::string, std::string>> query_vars;

  const CodeValue* find(const std::string& label) const;
  const MachineType* xi_find(const std::string& label) const;
};

// -------------------------------------------------------------- substitution

// Capture-avoiding substitution through an instruction suffix; put_var and
// unify_var bind their variable for the remaining instructions.
std::vector<Instruction> subst_instructions(const lf::Subst& s,
                                            std::vector<Instruction> instrs,
                                            size_t from = 0);

// ------------------------------------------------------------------- erasure

// Drops all LF content: singletons decay to atomics, continuation
// telescopes vanish, operand applications collapse to their base, succeed
// loses its annotation. Instruction count and order are preserved.
Program erase(const Program& p);

}  // namespace twam
