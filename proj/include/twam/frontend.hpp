#pragma once

#include <map>
#include <string>
#include <vector>

#include "twam/lf.hpp"

// T-Prolog frontend: parsing, elaboration (unique simple type per
// identifier), and the translation to an LF signature.

namespace twam::front {

struct SrcTerm {
  bool is_var = false;
  std::string name;
  std::vector<SrcTerm> args;
  SourceLoc loc;
};

struct Clause {
  SrcTerm head;
  std::vector<SrcTerm> subgoals;
  SourceLoc loc;
  // variable -> atomic type, filled by elaborate
  std::map<std::string, std::string> var_types;
};

struct TypeDecl {
  std::string name;
  SourceLoc loc;
};

struct ConDecl {
  std::string name;
  std::vector<std::string> arg_types;
  std::string result_type;
  SourceLoc loc;
};

struct PredDecl {
  std::string name;
  std::vector<std::string> arg_types;
  std::vector<Clause> clauses;
  SourceLoc loc;
};

struct ProgramAst {
  std::vector<TypeDecl> types;
  std::vector<ConDecl> cons;
  std::vector<PredDecl> preds;
  struct DeclRef {
    enum class Kind { Type, Con, Pred } kind;
    size_t index;
  };
  std::vector<DeclRef> order;  // source declaration order

  std::vector<SrcTerm> query;  // singleton unless goal sequences are enabled
  std::map<std::string, std::string> query_var_types;
  SourceLoc query_loc;

  const PredDecl* find_pred(const std::string& name) const;
  const ConDecl* find_con(const std::string& name) const;
};

struct ParseOptions {
  // Accepts `?- g1, g2, ... .` as a conservative extension when set.
  bool allow_goal_seq = false;
};

// Syntax, name resolution (declare-before-use, no duplicates, identifier
// kinds), and arity-annotation checks. Throws ParseError.
ProgramAst parse(const std::string& source, const ParseOptions& opts = {});

struct ElabResult {
  std::vector<Diag> errors;
  bool ok() const { return errors.empty(); }
};

// Typechecks every term and assigns every unification variable its unique
// atomic type; fills Clause::var_types and ProgramAst::query_var_types.
ElabResult elaborate(ProgramAst& p);

// Signature translation. Clause constants are named `<pred>-<k>` (1-based,
// source order). Requires an elaborated program.
lf::Signature translate_to_lf(const ProgramAst& p);

// The LF type family of one goal, with unification variables left free.
lf::Family goal_family(const SrcTerm& goal);
lf::Term term_to_lf(const SrcTerm& t);

// Query variables in first-occurrence order.
std::vector<std::string> goal_vars(const SrcTerm& goal);

}  // namespace twam::front
