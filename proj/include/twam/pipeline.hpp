#pragma once

#include <string>
#include <vector>

#include "twam/checker.hpp"
#include "twam/frontend.hpp"
#include "twam/machine.hpp"

// Compiler middle-end and driver: flattening, clause/query compilation to
// continuation-passing TWAM with proof annotations, hoisting, tail-call
// optimization, certification, erasure and recheck.

namespace twam::pipeline {

// ------------------------------------------------------------- flat clauses

struct FlatGoal {
  enum class Tag { Constraint, Call } tag = Tag::Call;
  // Constraint: var = con(args); every argument is a variable.
  std::string var;
  std::string con;
  std::vector<std::string> args;
  // Call: pred(args)
  std::string pred;
};

struct HeadArg {
  bool is_con = false;
  std::string name;  // variable name, or constructor name
  std::vector<std::string> child_vars;
};

struct FlatClause {
  std::string pred;
  std::vector<HeadArg> head_args;
  std::vector<FlatGoal> goals;
  std::map<std::string, std::string> var_types;  // includes intermediates
};

struct FlatProgram {
  // (predicate name, arg types, flat clauses), declaration order
  struct Pred {
    std::string name;
    std::vector<std::string> arg_types;
    std::vector<FlatClause> clauses;
  };
  std::vector<Pred> preds;
  FlatClause query;  // head empty; goals are the query constraints + call
  std::vector<std::string> query_vars;  // first-occurrence order
};

FlatProgram flatten(const front::ProgramAst& ast);
std::string print_flat(const FlatProgram& fp);

// --------------------------------------------------------------- compilation

// TWAM code generation over a flattened, elaborated program. Produces an
// unhoisted form: continuation code values hang off the block that created
// them.
struct PreBlock {
  std::string label;
  CodeValue cv;
  std::vector<PreBlock> nested;
};

struct PreProgram {
  lf::Signature sig;
  std::vector<PreBlock> blocks;
  std::string entry;
  std::vector<std::pair<std::string, std::string>> query_vars;
};

PreProgram compile(const front::ProgramAst& ast, const FlatProgram& fp);

// Lifts nested continuations to one flat, mutually recursive code section.
Program hoist(const PreProgram& pre);

// Rewrites final-subgoal trampolines into a proof-transforming mov.
Program apply_tco(Program p);

// ------------------------------------------------------------------- driver

enum class Stage { Parse, Elaborate, Codegen, Certify, Recheck, Done };

struct Options {
  bool tco = true;
  front::ParseOptions parse;
};

struct Result {
  Stage failed = Stage::Done;
  std::vector<Diag> diags;
  std::vector<Diag> warnings;

  front::ProgramAst ast;
  lf::Signature lfsig;
  FlatProgram flat;
  Program twam;
  Program swam;

  bool ok() const { return failed == Stage::Done; }
};

// Full pipeline: parse, elaborate, translate, flatten, compile, hoist,
// [tco], certify, erase, recheck.
Result compile_source(const std::string& source, const Options& opts = {});

}  // namespace twam::pipeline
