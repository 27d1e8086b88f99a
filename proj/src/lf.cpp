#include "twam/lf.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace twam::lf {

// ---------------------------------------------------------------- terms

Term var(std::string name) {
  Term m;
  m.tag = Term::Tag::Var;
  m.name = std::move(name);
  return m;
}

Term con(std::string name, std::vector<Term> args) {
  Term m;
  m.tag = Term::Tag::Const;
  m.name = std::move(name);
  m.args = std::move(args);
  return m;
}

bool operator==(const Term& a, const Term& b) {
  if (a.tag != b.tag || a.name != b.name || a.args.size() != b.args.size())
    return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!(a.args[i] == b.args[i])) return false;
  return true;
}

std::string show(const Term& m) {
  if (m.args.empty()) return m.name;
  std::string out = "(" + m.name;
  for (auto& a : m.args) out += " " + show(a);
  out += ")";
  return out;
}

Family atom(std::string head, std::vector<Term> args) {
  Family a;
  a.head = std::move(head);
  a.args = std::move(args);
  return a;
}

Family pi(std::vector<Param> params, Family body) {
  Family a = std::move(body);
  a.params.insert(a.params.begin(), std::make_move_iterator(params.begin()),
                  std::make_move_iterator(params.end()));
  return a;
}

// ------------------------------------------------------ alpha equivalence

namespace {

// Positional comparison: `ren` maps a-side binder names to b-side names.
bool alpha_eq_term(const Term& a, const Term& b,
                   const std::map<std::string, std::string>& ren) {
  if (a.tag != b.tag || a.args.size() != b.args.size()) return false;
  if (a.is_var()) {
    auto it = ren.find(a.name);
    const std::string& want = it == ren.end() ? a.name : it->second;
    return want == b.name;
  }
  if (a.name != b.name) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!alpha_eq_term(a.args[i], b.args[i], ren)) return false;
  return true;
}

bool alpha_eq_family(const Family& a, const Family& b,
                     std::map<std::string, std::string> ren) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i) {
    if (!alpha_eq_family(a.params[i].type, b.params[i].type, ren)) return false;
    ren[a.params[i].name] = b.params[i].name;
  }
  if (a.head != b.head || a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!alpha_eq_term(a.args[i], b.args[i], ren)) return false;
  return true;
}

}  // namespace

bool alpha_equal(const Family& a, const Family& b) {
  return alpha_eq_family(a, b, {});
}

bool alpha_equal(const Kind& a, const Kind& b) {
  if (a.params.size() != b.params.size()) return false;
  std::map<std::string, std::string> ren;
  for (size_t i = 0; i < a.params.size(); ++i) {
    if (!alpha_eq_family(a.params[i].type, b.params[i].type, ren)) return false;
    ren[a.params[i].name] = b.params[i].name;
  }
  return true;
}

// --------------------------------------------------------------- printing

namespace {

std::string show_atom(const Family& a) {
  std::string out = a.head;
  for (auto& m : a.args) out += " " + show(m);
  return out;
}

}  // namespace

std::string show(const Family& a) {
  std::string out;
  for (size_t i = 0; i < a.params.size(); ++i) {
    Family rest;
    rest.params.assign(a.params.begin() + i + 1, a.params.end());
    rest.head = a.head;
    rest.args = a.args;
    bool used = free_vars(rest).count(a.params[i].name) != 0;
    if (a.params[i].type.atomic() && !used)
      out += show_atom(a.params[i].type) + " -> ";
    else
      out += "{" + a.params[i].name + " : " + show(a.params[i].type) + "} ";
  }
  out += show_atom(a);
  return out;
}

std::string show(const Kind& k) {
  std::string out;
  for (auto& p : k.params) out += show_atom(p.type) + " -> ";
  return out + "type";
}

// -------------------------------------------------------------- signature

const SigEntry* Signature::find(const std::string& name) const {
  auto it = index.find(name);
  return it == index.end() ? nullptr : &entries[it->second];
}

std::optional<Diag> Signature::add(SigEntry e) {
  if (index.count(e.name))
    return Diag{Severity::Error, "duplicate constant \"" + e.name + "\""};
  index[e.name] = entries.size();
  entries.push_back(std::move(e));
  return std::nullopt;
}

bool Signature::is_data_type(const std::string& name) const {
  const SigEntry* e = find(name);
  return e && e->tag == SigEntry::Tag::Data;
}

int Signature::arity(const std::string& con_name) const {
  const SigEntry* e = find(con_name);
  if (!e || e->is_family()) return -1;
  return static_cast<int>(e->type.params.size());
}

const Family* Context::find(const std::string& name) const {
  for (auto& p : entries)
    if (p.name == name) return &p.type;
  return nullptr;
}

void Context::push(std::string name, Family type) {
  entries.push_back(Param{std::move(name), std::move(type)});
}

// ------------------------------------------------------------ substitution

const Term* Subst::find(const std::string& x) const {
  auto it = items.find(x);
  return it == items.end() ? nullptr : &it->second;
}

std::string Subst::show() const {
  std::string out = "[";
  bool first = true;
  for (auto& [x, m] : items) {
    if (!first) out += ", ";
    first = false;
    out += lf::show(m) + "/" + x;
  }
  return out + "]";
}

Term apply(const Subst& s, const Term& m) {
  if (m.is_var()) {
    const Term* r = s.find(m.name);
    return r ? *r : m;
  }
  Term out = con(m.name);
  out.args.reserve(m.args.size());
  for (auto& a : m.args) out.args.push_back(apply(s, a));
  return out;
}

Subst compose(const Subst& s2, const Subst& s1) {
  Subst out;
  for (auto& [x, m] : s1.items) out.items[x] = apply(s2, m);
  for (auto& [x, m] : s2.items)
    if (!out.items.count(x)) out.items[x] = m;
  return out;
}

void free_vars(const Term& m, std::set<std::string>& out) {
  if (m.is_var()) {
    out.insert(m.name);
    return;
  }
  for (auto& a : m.args) free_vars(a, out);
}

namespace {

void fv_term_scoped(const Term& m, const std::set<std::string>& bound,
                    std::set<std::string>& out) {
  if (m.is_var()) {
    if (!bound.count(m.name)) out.insert(m.name);
    return;
  }
  for (auto& a : m.args) fv_term_scoped(a, bound, out);
}

void fv_family_scoped(const Family& a, std::set<std::string> bound,
                      std::set<std::string>& out) {
  for (auto& p : a.params) {
    fv_family_scoped(p.type, bound, out);
    bound.insert(p.name);
  }
  for (auto& m : a.args) fv_term_scoped(m, bound, out);
}

}  // namespace

void free_vars(const Family& a, std::set<std::string>& out) {
  fv_family_scoped(a, {}, out);
}

std::set<std::string> free_vars(const Term& m) {
  std::set<std::string> out;
  free_vars(m, out);
  return out;
}

std::set<std::string> free_vars(const Family& a) {
  std::set<std::string> out;
  free_vars(a, out);
  return out;
}

std::string fresh_name(const std::string& base,
                       const std::set<std::string>& taken) {
  if (!taken.count(base)) return base;
  for (int k = 1;; ++k) {
    std::string cand = base + "'" + (k == 1 ? "" : std::to_string(k));
    if (!taken.count(cand)) return cand;
  }
}

std::vector<Param> subst_telescope(const Subst& s, std::vector<Param> params,
                                   Subst& inner) {
  inner = s;
  std::set<std::string> range_fv;
  for (auto& [x, m] : s.items) free_vars(m, range_fv);
  std::set<std::string> param_names;
  for (auto& p : params) param_names.insert(p.name);
  for (auto& p : params) {
    p.type = apply(inner, p.type);
    if (inner.binds(p.name)) inner.items.erase(p.name);  // shadowed
    if (range_fv.count(p.name)) {
      // rename the binder to avoid capturing a substituted term's variable
      std::set<std::string> taken = range_fv;
      for (auto& [x, m] : inner.items) taken.insert(x);
      for (auto& n : param_names) taken.insert(n);
      std::string nn = fresh_name(p.name, taken);
      inner.items[p.name] = var(nn);
      range_fv.insert(nn);
      p.name = nn;
    }
  }
  return params;
}

Family apply(const Subst& s, const Family& a) {
  if (s.empty()) return a;
  Family out;
  Subst inner;
  out.params = subst_telescope(s, a.params, inner);
  out.head = a.head;
  out.args.reserve(a.args.size());
  for (auto& m : a.args) out.args.push_back(apply(inner, m));
  return out;
}

Kind apply(const Subst& s, const Kind& k) {
  Kind out;
  Subst inner;
  out.params = subst_telescope(s, k.params, inner);
  return out;
}

Context apply(const Subst& s, const Context& ctx) {
  Context out;
  for (auto& p : ctx.entries) {
    if (s.binds(p.name)) continue;
    out.push(p.name, apply(s, p.type));
  }
  return out;
}

// ------------------------------------------------------------ occurs check

bool occurs(const std::string& x, const Term& m) {
  if (m.is_var()) return m.name == x;
  for (auto& a : m.args)
    if (occurs(x, a)) return true;
  return false;
}

// --------------------------------------------------------------- unification

namespace {

// Binds x := m into an idempotent accumulator. (Named to dodge std::bind,
// which otherwise wins overload resolution through ADL.)
void bind_mgu(Subst& acc, const std::string& x, const Term& m) {
  Subst one;
  one.items[x] = m;
  for (auto& [y, t] : acc.items) t = apply(one, t);
  acc.items[x] = m;
}

bool unify_go(Subst& acc, const Term& lhs, const Term& rhs) {
  Term m1 = apply(acc, lhs);
  Term m2 = apply(acc, rhs);

  if (m1.is_var() && m2.is_var() && m1.name == m2.name) return true;
  if (m1.is_var()) {
    if (occurs(m1.name, m2)) return false;
    bind_mgu(acc, m1.name, m2);
    return true;
  }
  if (m2.is_var()) {
    if (occurs(m2.name, m1)) return false;
    bind_mgu(acc, m2.name, m1);
    return true;
  }
  if (m1.name != m2.name || m1.args.size() != m2.args.size()) return false;
  for (size_t i = 0; i < m1.args.size(); ++i)
    if (!unify_go(acc, m1.args[i], m2.args[i])) return false;
  return true;
}

}  // namespace

UnifyResult static_unify(const Context& ctx, const Term& m1, const Term& m2) {
  (void)ctx;
  UnifyResult r;
  if (!unify_go(r.mgu, m1, m2)) return UnifyResult::fail();
  return r;
}

// ------------------------------------------------------------ typechecking

Res<Family> check_term(const Signature& sig, const Context& ctx,
                       const Term& m) {
  if (m.is_var()) {
    const Family* a = ctx.find(m.name);
    if (!a) return Diag{Severity::Error, "unbound variable \"" + m.name + "\""};
    return *a;
  }
  const SigEntry* e = sig.find(m.name);
  if (!e) return Diag{Severity::Error, "unbound constant \"" + m.name + "\""};
  if (e->is_family())
    return Diag{Severity::Error,
                "\"" + m.name + "\" is a type family, not a term constant"};
  Family ty = e->type;
  for (size_t i = 0; i < m.args.size(); ++i) {
    if (ty.params.empty())
      return Diag{Severity::Error, "applying non-product: \"" + m.name +
                                       "\" takes " +
                                       std::to_string(i) + " argument(s), got " +
                                       std::to_string(m.args.size())};
    Param p = ty.params.front();
    ty.params.erase(ty.params.begin());
    if (!p.type.atomic())
      return Diag{Severity::Error,
                  "argument of product type is outside the first-order "
                  "fragment (constant \"" + m.name + "\")"};
    Res<Family> arg_ty = check_term(sig, ctx, m.args[i]);
    if (!arg_ty.ok()) return arg_ty.diag();
    if (!alpha_equal(arg_ty.value(), p.type))
      return Diag{Severity::Error,
                  "argument " + std::to_string(i + 1) + " of \"" + m.name +
                      "\" has type " + show(arg_ty.value()) + ", expected " +
                      show(p.type)};
    Subst s;
    s.items[p.name] = m.args[i];
    ty = apply(s, ty);
  }
  return ty;
}

std::optional<Diag> check_family(const Signature& sig, const Context& ctx,
                                 const Family& a) {
  Context ext = ctx;
  for (auto& p : a.params) {
    if (ext.contains(p.name))
      return Diag{Severity::Error,
                  "binder \"" + p.name + "\" shadows an existing variable"};
    if (auto d = check_family(sig, ext, p.type)) return d;
    ext.push(p.name, p.type);
  }
  const SigEntry* e = sig.find(a.head);
  if (!e) return Diag{Severity::Error, "unbound constant \"" + a.head + "\""};
  if (!e->is_family())
    return Diag{Severity::Error,
                "\"" + a.head + "\" is a term constant, not a type family"};
  Kind k = e->kind;
  if (a.args.size() != k.params.size())
    return Diag{Severity::Error,
                "family \"" + a.head + "\" expects " +
                    std::to_string(k.params.size()) + " argument(s), got " +
                    std::to_string(a.args.size())};
  for (size_t i = 0; i < a.args.size(); ++i) {
    Res<Family> arg_ty = check_term(sig, ext, a.args[i]);
    if (!arg_ty.ok()) return arg_ty.diag();
    Param p = k.params.front();
    if (!alpha_equal(arg_ty.value(), p.type))
      return Diag{Severity::Error,
                  "argument " + std::to_string(i + 1) + " of family \"" +
                      a.head + "\" has type " + show(arg_ty.value()) +
                      ", expected " + show(p.type)};
    k.params.erase(k.params.begin());
    Subst s;
    s.items[p.name] = a.args[i];
    k = apply(s, k);
  }
  return std::nullopt;
}

namespace {

std::optional<Diag> check_kind(const Signature& sig, const Kind& k) {
  Context ctx;
  for (auto& p : k.params) {
    if (auto d = check_family(sig, ctx, p.type)) return d;
    ctx.push(p.name, p.type);
  }
  return std::nullopt;
}

Diag at_constant(Diag d, const std::string& name) {
  d.message = "in declaration of \"" + name + "\": " + d.message;
  return d;
}

}  // namespace

std::optional<Diag> check_signature(const Signature& sig) {
  Signature prefix;
  for (auto& e : sig.entries) {
    switch (e.tag) {
      case SigEntry::Tag::Data:
        if (!e.kind.params.empty())
          return at_constant(
              Diag{Severity::Error, "data types take no arguments"}, e.name);
        break;
      case SigEntry::Tag::Pred: {
        if (auto d = check_kind(prefix, e.kind)) return at_constant(*d, e.name);
        for (auto& p : e.kind.params)
          if (!p.type.atomic() || !prefix.is_data_type(p.type.head))
            return at_constant(Diag{Severity::Error,
                                    "predicate argument types must be "
                                    "declared data types"},
                               e.name);
        break;
      }
      case SigEntry::Tag::Con: {
        Context ctx;
        if (auto d = check_family(prefix, ctx, e.type))
          return at_constant(*d, e.name);
        for (auto& p : e.type.params)
          if (!p.type.atomic() || !prefix.is_data_type(p.type.head))
            return at_constant(Diag{Severity::Error,
                                    "constructor argument types must be "
                                    "declared data types"},
                               e.name);
        if (!prefix.is_data_type(e.type.head))
          return at_constant(Diag{Severity::Error,
                                  "constructor result must be a declared "
                                  "data type"},
                             e.name);
        break;
      }
      case SigEntry::Tag::Clause: {
        Context ctx;
        if (auto d = check_family(prefix, ctx, e.type))
          return at_constant(*d, e.name);
        const SigEntry* head = prefix.find(e.type.head);
        if (!head || head->tag != SigEntry::Tag::Pred)
          return at_constant(Diag{Severity::Error,
                                  "clause constant must end in a predicate "
                                  "application"},
                             e.name);
        break;
      }
    }
    prefix.add(e);
  }
  return std::nullopt;
}

// --------------------------------------------------------------- text form

std::string print_signature(const Signature& sig) {
  std::ostringstream out;
  for (auto& e : sig.entries) {
    out << e.name << " : ";
    if (e.is_family())
      out << show(e.kind);
    else
      out << show(e.type);
    out << ".\n";
  }
  return out.str();
}

// A small recursive-descent parser for the one-declaration-per-line format.
namespace {

struct LfLexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit LfLexer(const std::string& s) : src(s) {}

  void skip_ws() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '%') {
        while (pos < src.size() && src[pos] != '\n') ++pos;
      } else if (c == '\n') {
        ++line;
        col = 1;
        ++pos;
      } else if (isspace(static_cast<unsigned char>(c))) {
        ++col;
        ++pos;
      } else {
        break;
      }
    }
  }

  bool ident_char(char c) const {
    return isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' ||
           c == '#';
  }

  // Tokens: IDENT : . { } ( ) -> end
  std::string next() {
    skip_ws();
    if (pos >= src.size()) return "";
    char c = src[pos];
    auto adv = [&](size_t n) {
      pos += n;
      col += static_cast<int>(n);
    };
    if (c == '-' && pos + 1 < src.size() && src[pos + 1] == '>') {
      adv(2);
      return "->";
    }
    if (std::string(":.{}()").find(c) != std::string::npos) {
      adv(1);
      return std::string(1, c);
    }
    if (isalnum(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < src.size()) {
        char d = src[pos];
        if (ident_char(d)) {
          adv(1);
        } else if (d == '-' && pos + 1 < src.size() && src[pos + 1] != '>') {
          adv(1);
        } else {
          break;
        }
      }
      return src.substr(start, pos - start);
    }
    throw ParseError(Diag{Severity::Error,
                          std::string("unexpected character '") + c + "'",
                          SourceLoc{line, col}});
  }

  std::string peek() {
    size_t p = pos;
    int l = line, co = col;
    std::string t = next();
    pos = p;
    line = l;
    col = co;
    return t;
  }

  void expect(const std::string& t) {
    std::string got = next();
    if (got != t)
      throw ParseError(Diag{Severity::Error,
                            "expected \"" + t + "\", got \"" + got + "\"",
                            SourceLoc{line, col}});
  }
};

bool token_is_punct(const std::string& t) {
  return t == ":" || t == "." || t == "{" || t == "}" || t == "(" ||
         t == ")" || t == "->" || t.empty();
}

Term parse_term(LfLexer& lx);

Term parse_term_atom(LfLexer& lx) {
  std::string t = lx.next();
  if (t == "(") {
    Term m = parse_term(lx);
    lx.expect(")");
    return m;
  }
  if (token_is_punct(t))
    throw ParseError(Diag{Severity::Error, "expected term, got \"" + t + "\"",
                          SourceLoc{lx.line, lx.col}});
  return var(t);  // var vs const resolved later against binders
}

Term parse_term(LfLexer& lx) {
  Term head = parse_term_atom(lx);
  std::vector<Term> args;
  while (true) {
    std::string t = lx.peek();
    if (token_is_punct(t) && t != "(") break;
    args.push_back(parse_term_atom(lx));
  }
  if (args.empty()) return head;
  if (!head.args.empty())
    throw ParseError(Diag{Severity::Error,
                          "application head must be an identifier",
                          SourceLoc{lx.line, lx.col}});
  return con(head.name, std::move(args));
}

// Marks identifiers bound in `bound` as variables, the rest as constants.
Term resolve_term(const Term& m, const std::set<std::string>& bound) {
  if (m.args.empty()) {
    if (bound.count(m.name)) return var(m.name);
    return con(m.name);
  }
  Term out = con(m.name);
  for (auto& a : m.args) out.args.push_back(resolve_term(a, bound));
  return out;
}

Family parse_family(LfLexer& lx, std::set<std::string>& bound);

Family parse_classifier_body(LfLexer& lx, std::set<std::string>& bound) {
  // atom [-> rest]
  std::string head = lx.next();
  if (token_is_punct(head))
    throw ParseError(Diag{Severity::Error,
                          "expected type family, got \"" + head + "\"",
                          SourceLoc{lx.line, lx.col}});
  std::vector<Term> args;
  while (true) {
    std::string t = lx.peek();
    if (token_is_punct(t) && t != "(") break;
    args.push_back(parse_term_atom(lx));
  }
  Family a = atom(head);
  for (auto& m : args) a.args.push_back(resolve_term(m, bound));
  if (lx.peek() == "->") {
    lx.next();
    std::string anon = fresh_name("_t", bound);
    bound.insert(anon);
    Family rest = parse_family(lx, bound);
    bound.erase(anon);
    std::vector<Param> ps;
    ps.push_back(Param{anon, a});
    return pi(std::move(ps), rest);
  }
  return a;
}

Family parse_family(LfLexer& lx, std::set<std::string>& bound) {
  if (lx.peek() == "{") {
    lx.next();
    std::string name = lx.next();
    lx.expect(":");
    Family dom = parse_family(lx, bound);
    lx.expect("}");
    bool was_bound = bound.count(name) != 0;
    bound.insert(name);
    Family body = parse_family(lx, bound);
    if (!was_bound) bound.erase(name);
    std::vector<Param> ps;
    ps.push_back(Param{name, dom});
    return pi(std::move(ps), body);
  }
  return parse_classifier_body(lx, bound);
}

}  // namespace

Signature parse_signature(const std::string& text) {
  LfLexer lx(text);
  Signature sig;
  while (true) {
    lx.skip_ws();
    if (lx.pos >= text.size()) break;
    std::string name = lx.next();
    if (token_is_punct(name))
      throw ParseError(Diag{Severity::Error,
                            "expected declaration name, got \"" + name + "\"",
                            SourceLoc{lx.line, lx.col}});
    lx.expect(":");
    std::set<std::string> bound;
    SigEntry e;
    e.name = name;
    if (lx.peek() == "type") {
      lx.next();
      e.tag = SigEntry::Tag::Data;
      lx.expect(".");
    } else {
      Family a = parse_family(lx, bound);
      lx.expect(".");
      // classifier ends in `type`? then it is a family declaration
      if (a.head == "type") {
        Kind k;
        for (auto& p : a.params) k.params.push_back(p);
        e.tag = k.params.empty() ? SigEntry::Tag::Data : SigEntry::Tag::Pred;
        e.kind = std::move(k);
      } else {
        bool data_domains = true;
        for (auto& p : a.params) {
          const SigEntry* d = sig.find(p.type.head);
          if (!p.type.atomic() || !d || d->tag != SigEntry::Tag::Data)
            data_domains = false;
        }
        const SigEntry* codo = sig.find(a.head);
        bool data_codomain = codo && codo->tag == SigEntry::Tag::Data;
        e.tag = (data_domains && data_codomain) ? SigEntry::Tag::Con
                                                : SigEntry::Tag::Clause;
        e.type = std::move(a);
      }
    }
    if (auto d = sig.add(std::move(e))) throw ParseError(*d);
  }
  return sig;
}

}  // namespace twam::lf
