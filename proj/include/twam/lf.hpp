#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "twam/common.hpp"

// First-order LF kernel: terms, type families in telescope normal form,
// kinds, signatures, contexts, capture-avoiding simultaneous substitution,
// occurs check, and static first-order unification.
//
// Everything here is immutable after construction; all operations are pure.

namespace twam::lf {

// ---------------------------------------------------------------- terms

// M ::= x | c | c M1 ... Mn   (spine form; heads of applications are
// constants — variables have atomic type and are never applied).
struct Term {
  enum class Tag { Var, Const } tag = Tag::Var;
  std::string name;
  std::vector<Term> args;  // empty unless tag == Const

  bool is_var() const { return tag == Tag::Var; }
};

Term var(std::string name);
Term con(std::string name, std::vector<Term> args = {});

bool operator==(const Term& a, const Term& b);
inline bool operator!=(const Term& a, const Term& b) { return !(a == b); }

std::string show(const Term& m);

// ------------------------------------------------------- families, kinds

struct Param;

// A ::= Pi x1:A1. ... Pi xn:An. p M1 ... Mk
// Telescope normal form: params empty means atomic.
struct Family {
  std::vector<Param> params;
  std::string head;
  std::vector<Term> args;

  bool atomic() const { return params.empty(); }
};

struct Param {
  std::string name;
  Family type;
};

Family atom(std::string head, std::vector<Term> args = {});
Family pi(std::vector<Param> params, Family body);

// K ::= Pi x1:A1. ... Pi xn:An. type
struct Kind {
  std::vector<Param> params;
};

// Binder-site comparison is positional; surface names are for printing only.
bool alpha_equal(const Family& a, const Family& b);
bool alpha_equal(const Kind& a, const Kind& b);

std::string show(const Family& a);
std::string show(const Kind& k);

// ------------------------------------------------------------- signature

struct SigEntry {
  enum class Tag {
    Data,    // Prolog term type: 0-ary family constant
    Pred,    // predicate: family constant of kind a1 -> ... -> an -> type
    Con,     // term constructor: c : a1 -> ... -> an -> a
    Clause,  // clause constant: Pi-typed proof-term constructor
  };
  Tag tag;
  std::string name;
  Kind kind;    // Data / Pred
  Family type;  // Con / Clause

  bool is_family() const { return tag == Tag::Data || tag == Tag::Pred; }
};

struct Signature {
  std::vector<SigEntry> entries;
  std::unordered_map<std::string, size_t> index;

  const SigEntry* find(const std::string& name) const;
  // Returns a diagnostic on duplicate declaration.
  std::optional<Diag> add(SigEntry e);
  bool is_data_type(const std::string& name) const;
  // Constructor arity as recorded by Sigma(c) = a1 -> ... -> an -> a.
  int arity(const std::string& con_name) const;
};

// ---------------------------------------------------------------- context

// Ordered list of x : A with distinct names.
struct Context {
  std::vector<Param> entries;

  const Family* find(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }
  void push(std::string name, Family type);
  size_t size() const { return entries.size(); }
};

// ------------------------------------------------------------ substitution

// Finite map from variable names to terms, applied simultaneously.
struct Subst {
  std::map<std::string, Term> items;  // ordered for deterministic printing

  bool empty() const { return items.empty(); }
  bool binds(const std::string& x) const { return items.count(x) != 0; }
  const Term* find(const std::string& x) const;
  std::string show() const;
};

// Simultaneous composition [s2, s1]: apply s1 first, then s2 to its range;
// bindings of s2 for variables not bound by s1 are kept.
Subst compose(const Subst& s2, const Subst& s1);

Term apply(const Subst& s, const Term& m);
Family apply(const Subst& s, const Family& a);
Kind apply(const Subst& s, const Kind& k);
// [sigma]Delta: entries in dom(sigma) are removed, the rest substituted.
Context apply(const Subst& s, const Context& ctx);

void free_vars(const Term& m, std::set<std::string>& out);
void free_vars(const Family& a, std::set<std::string>& out);
std::set<std::string> free_vars(const Term& m);
std::set<std::string> free_vars(const Family& a);

// Fresh name based on `base` not satisfying `taken`.
std::string fresh_name(const std::string& base,
                       const std::set<std::string>& taken);

// Substitutes under a telescope, renaming binders as needed to avoid
// capture; `body_subst` is invoked on the body with the adjusted map.
std::vector<Param> subst_telescope(const Subst& s, std::vector<Param> params,
                                   Subst& inner);

// ------------------------------------------------------------ occurs check

bool occurs(const std::string& x, const Term& m);

// --------------------------------------------------------------- unification

struct UnifyResult {
  bool bottom = false;
  Subst mgu;  // meaningful only when !bottom

  static UnifyResult fail() { return UnifyResult{true, {}}; }
};

// Most general unifier of two same-typed terms, or bottom. Constructor
// arguments thread substitutions left to right; when both sides are
// distinct variables the left one is bound.
UnifyResult static_unify(const Context& ctx, const Term& m1, const Term& m2);

// ------------------------------------------------------------ typechecking

// Synthesizes the type of a term, or reports why it has none.
Res<Family> check_term(const Signature& sig, const Context& ctx, const Term& m);

// Checks a family is well-formed (fully applied, well-kinded head).
std::optional<Diag> check_family(const Signature& sig, const Context& ctx,
                                 const Family& a);

// Checks every declaration against the preceding prefix of the signature.
std::optional<Diag> check_signature(const Signature& sig);

// --------------------------------------------------------------- text form

// One declaration per line: `name : classifier.` with Pi written {x:A} and
// -> for non-dependent products. Round-trips through parse_signature.
std::string print_signature(const Signature& sig);
Signature parse_signature(const std::string& text);  // throws ParseError

}  // namespace twam::lf
