#include "twam/frontend.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace twam::front {

const PredDecl* ProgramAst::find_pred(const std::string& name) const {
  for (auto& p : preds)
    if (p.name == name) return &p;
  return nullptr;
}

const ConDecl* ProgramAst::find_con(const std::string& name) const {
  for (auto& c : cons)
    if (c.name == name) return &c;
  return nullptr;
}

// --------------------------------------------------------------------- lexer

namespace {

struct Token {
  enum class Kind { Ident, Var, Num, Punct, End } kind = Kind::End;
  std::string text;
  long value = 0;
  SourceLoc loc;
};

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;
  Token look;
  bool has_look = false;

  explicit Lexer(const std::string& s) : src(s) {}

  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_ws() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '%') {
        while (pos < src.size() && src[pos] != '\n') advance();
      } else if (isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Token lex() {
    skip_ws();
    Token t;
    t.loc = SourceLoc{line, col};
    if (pos >= src.size()) return t;
    char c = src[pos];
    if (c == '?' && pos + 1 < src.size() && src[pos + 1] == '-') {
      advance();
      advance();
      t.kind = Token::Kind::Punct;
      t.text = "?-";
      return t;
    }
    if (c == ':' && pos + 1 < src.size() && src[pos + 1] == '-') {
      advance();
      advance();
      t.kind = Token::Kind::Punct;
      t.text = ":-";
      return t;
    }
    if (c == '-' && pos + 1 < src.size() && src[pos + 1] == '>') {
      advance();
      advance();
      t.kind = Token::Kind::Punct;
      t.text = "->";
      return t;
    }
    static const std::string puncts = ":.,()/";
    if (puncts.find(c) != std::string::npos) {
      advance();
      t.kind = Token::Kind::Punct;
      t.text = std::string(1, c);
      return t;
    }
    if (isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos;
      while (pos < src.size() && isdigit(static_cast<unsigned char>(src[pos])))
        advance();
      t.kind = Token::Kind::Num;
      t.text = src.substr(start, pos - start);
      t.value = std::stol(t.text);
      return t;
    }
    if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < src.size() &&
             (isalnum(static_cast<unsigned char>(src[pos])) ||
              src[pos] == '_'))
        advance();
      t.text = src.substr(start, pos - start);
      t.kind = (isupper(static_cast<unsigned char>(c)) || c == '_')
                   ? Token::Kind::Var
                   : Token::Kind::Ident;
      return t;
    }
    throw ParseError(Diag{Severity::Error,
                          std::string("unexpected character '") + c + "'",
                          t.loc});
  }

  Token next() {
    if (has_look) {
      has_look = false;
      return look;
    }
    return lex();
  }

  const Token& peek() {
    if (!has_look) {
      look = lex();
      has_look = true;
    }
    return look;
  }

  bool at(const std::string& text) {
    return peek().kind != Token::Kind::End && peek().text == text;
  }

  void expect(const std::string& text) {
    Token t = next();
    if (t.text != text)
      throw ParseError(Diag{Severity::Error,
                            "expected \"" + text + "\", got \"" +
                                (t.kind == Token::Kind::End ? "<eof>" : t.text) +
                                "\"",
                            t.loc});
  }
};

struct Parser {
  Lexer lx;
  ParseOptions opts;
  ProgramAst prog;

  enum class NameKind { Type, Con, Pred };
  std::map<std::string, NameKind> names;

  Parser(const std::string& src, const ParseOptions& o) : lx(src), opts(o) {}

  [[noreturn]] void fail(const std::string& msg, SourceLoc loc) {
    throw ParseError(Diag{Severity::Error, msg, loc});
  }

  void declare(const std::string& name, NameKind k, SourceLoc loc) {
    if (names.count(name))
      fail("identifier \"" + name + "\" is declared twice", loc);
    names[name] = k;
  }

  SrcTerm term() {
    Token t = lx.next();
    SrcTerm out;
    out.loc = t.loc;
    if (t.kind == Token::Kind::Var) {
      if (t.text == "_")
        fail("anonymous variables are not supported; name the variable",
             t.loc);
      out.is_var = true;
      out.name = t.text;
      return out;
    }
    if (t.kind != Token::Kind::Ident)
      fail("expected a term, got \"" + t.text + "\"", t.loc);
    out.name = t.text;
    auto it = names.find(t.text);
    if (it == names.end()) fail("unbound identifier \"" + t.text + "\"", t.loc);
    if (it->second == NameKind::Type)
      fail("\"" + t.text + "\" is a type, not a term", t.loc);
    if (lx.at("(")) {
      lx.next();
      while (true) {
        out.args.push_back(term());
        if (lx.at(",")) {
          lx.next();
          continue;
        }
        break;
      }
      lx.expect(")");
    }
    return out;
  }

  // The head position of a clause body goal or query goal.
  SrcTerm goal() {
    SrcTerm g = term();
    if (g.is_var) fail("goals must be predicate applications", g.loc);
    if (names[g.name] != NameKind::Pred)
      fail("\"" + g.name + "\" is not a predicate", g.loc);
    return g;
  }

  // ident [/k] : idents separated by -> ending in type/prop/typename
  void declaration(Token first) {
    std::string name = first.text;
    std::optional<long> arity;
    if (lx.at("/")) {
      lx.next();
      Token n = lx.next();
      if (n.kind != Token::Kind::Num)
        fail("expected arity after '/'", n.loc);
      arity = n.value;
    }
    lx.expect(":");
    std::vector<Token> parts;
    while (true) {
      Token t = lx.next();
      if (t.kind != Token::Kind::Ident)
        fail("expected a type name, got \"" + t.text + "\"", t.loc);
      parts.push_back(t);
      if (lx.at("->")) {
        lx.next();
        continue;
      }
      break;
    }
    lx.expect(".");
    const Token& last = parts.back();
    if (last.text == "type") {
      if (parts.size() != 1)
        fail("type declarations take no arguments", last.loc);
      if (arity && *arity != 0)
        fail("arity annotation " + std::to_string(*arity) +
                 " on a type declaration",
             first.loc);
      declare(name, NameKind::Type, first.loc);
      prog.types.push_back(TypeDecl{name, first.loc});
      prog.order.push_back(
          {ProgramAst::DeclRef::Kind::Type, prog.types.size() - 1});
      return;
    }
    // argument types must be declared type names
    std::vector<std::string> arg_types;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      check_type_name(parts[i]);
      arg_types.push_back(parts[i].text);
    }
    if (last.text == "prop") {
      if (arity && *arity != static_cast<long>(arg_types.size()))
        fail("arity annotation " + std::to_string(*arity) + " != " +
                 std::to_string(arg_types.size()),
             first.loc);
      declare(name, NameKind::Pred, first.loc);
      prog.preds.push_back(PredDecl{name, std::move(arg_types), {}, first.loc});
      prog.order.push_back(
          {ProgramAst::DeclRef::Kind::Pred, prog.preds.size() - 1});
      return;
    }
    check_type_name(last);
    if (arity && *arity != static_cast<long>(arg_types.size()))
      fail("arity annotation " + std::to_string(*arity) + " != " +
               std::to_string(arg_types.size()),
           first.loc);
    declare(name, NameKind::Con, first.loc);
    prog.cons.push_back(
        ConDecl{name, std::move(arg_types), last.text, first.loc});
    prog.order.push_back({ProgramAst::DeclRef::Kind::Con, prog.cons.size() - 1});
  }

  void check_type_name(const Token& t) {
    auto it = names.find(t.text);
    if (it == names.end())
      fail("unbound type \"" + t.text + "\"", t.loc);
    if (it->second != NameKind::Type)
      fail("\"" + t.text + "\" is not a type", t.loc);
  }

  void clause(Token first) {
    // first is the head identifier; the caller saw Ident followed by ( or
    // a clause terminator
    auto it = names.find(first.text);
    if (it == names.end())
      fail("unbound identifier \"" + first.text + "\"", first.loc);
    if (it->second != NameKind::Pred)
      fail("clause head \"" + first.text + "\" is not a predicate", first.loc);
    SrcTerm head;
    head.loc = first.loc;
    head.name = first.text;
    if (lx.at("(")) {
      lx.next();
      while (true) {
        head.args.push_back(term());
        if (lx.at(",")) {
          lx.next();
          continue;
        }
        break;
      }
      lx.expect(")");
    }
    Clause c;
    c.head = std::move(head);
    c.loc = first.loc;
    if (lx.at(":-")) {
      lx.next();
      while (true) {
        c.subgoals.push_back(goal());
        if (lx.at(",")) {
          lx.next();
          continue;
        }
        break;
      }
    }
    lx.expect(".");
    for (auto& p : prog.preds) {
      if (p.name == c.head.name) {
        p.clauses.push_back(std::move(c));
        return;
      }
    }
  }

  ProgramAst parse() {
    bool saw_query = false;
    while (true) {
      const Token& t = lx.peek();
      if (t.kind == Token::Kind::End) break;
      if (saw_query)
        fail("nothing may follow the query", t.loc);
      if (t.text == "?-") {
        lx.next();
        prog.query_loc = t.loc;
        while (true) {
          prog.query.push_back(goal());
          if (lx.at(",")) {
            if (!opts.allow_goal_seq)
              fail("queries take a single goal (goal sequences are disabled)",
                   lx.peek().loc);
            lx.next();
            continue;
          }
          break;
        }
        lx.expect(".");
        saw_query = true;
        continue;
      }
      Token first = lx.next();
      if (first.kind != Token::Kind::Ident)
        fail("expected a declaration or clause, got \"" + first.text + "\"",
             first.loc);
      // `ident :` or `ident/k :` is a declaration; otherwise a clause head
      if (lx.at(":") || lx.at("/"))
        declaration(first);
      else
        clause(first);
    }
    if (!saw_query)
      fail("program must end with a query `?- goal.`",
           SourceLoc{lx.line, lx.col});
    return std::move(prog);
  }
};

}  // namespace

ProgramAst parse(const std::string& source, const ParseOptions& opts) {
  Parser p(source, opts);
  return p.parse();
}

// --------------------------------------------------------------- elaboration

namespace {

struct Elaborator {
  const ProgramAst& prog;
  std::vector<Diag>& errors;

  void type_error(const std::string& msg, SourceLoc loc) {
    errors.push_back(Diag{Severity::Error, msg, loc});
  }

  // Checks `t` at the expected atomic type, unifying variable types.
  void check(const SrcTerm& t, const std::string& expected,
             std::map<std::string, std::string>& var_types) {
    if (t.is_var) {
      auto it = var_types.find(t.name);
      if (it == var_types.end()) {
        var_types[t.name] = expected;
      } else if (it->second != expected) {
        type_error("variable " + t.name + " is used at type " + it->second +
                       " and at type " + expected,
                   t.loc);
      }
      return;
    }
    const ConDecl* c = prog.find_con(t.name);
    if (!c) {
      type_error("\"" + t.name + "\" is not a constructor", t.loc);
      return;
    }
    if (c->result_type != expected)
      type_error("constructor " + t.name + " builds a " + c->result_type +
                     ", expected " + expected,
                 t.loc);
    if (c->arg_types.size() != t.args.size()) {
      type_error("constructor " + t.name + " expects " +
                     std::to_string(c->arg_types.size()) + " argument(s), got " +
                     std::to_string(t.args.size()),
                 t.loc);
      return;
    }
    for (size_t i = 0; i < t.args.size(); ++i)
      check(t.args[i], c->arg_types[i], var_types);
  }

  void check_goal(const SrcTerm& g,
                  std::map<std::string, std::string>& var_types) {
    const PredDecl* p = prog.find_pred(g.name);
    if (!p) {
      type_error("\"" + g.name + "\" is not a predicate", g.loc);
      return;
    }
    if (p->arg_types.size() != g.args.size()) {
      type_error("predicate " + g.name + " expects " +
                     std::to_string(p->arg_types.size()) + " argument(s), got " +
                     std::to_string(g.args.size()),
                 g.loc);
      return;
    }
    for (size_t i = 0; i < g.args.size(); ++i)
      check(g.args[i], p->arg_types[i], var_types);
  }
};

}  // namespace

ElabResult elaborate(ProgramAst& p) {
  ElabResult res;
  Elaborator el{p, res.errors};
  for (auto& pred : p.preds) {
    for (auto& c : pred.clauses) {
      c.var_types.clear();
      el.check_goal(c.head, c.var_types);
      for (auto& sg : c.subgoals) el.check_goal(sg, c.var_types);
    }
  }
  p.query_var_types.clear();
  for (auto& g : p.query) el.check_goal(g, p.query_var_types);
  return res;
}

// --------------------------------------------------------------- translation

lf::Term term_to_lf(const SrcTerm& t) {
  if (t.is_var) return lf::var(t.name);
  std::vector<lf::Term> args;
  for (auto& a : t.args) args.push_back(term_to_lf(a));
  return lf::con(t.name, std::move(args));
}

lf::Family goal_family(const SrcTerm& goal) {
  std::vector<lf::Term> args;
  for (auto& a : goal.args) args.push_back(term_to_lf(a));
  return lf::atom(goal.name, std::move(args));
}

namespace {

void collect_vars(const SrcTerm& t, std::vector<std::string>& out,
                  std::set<std::string>& seen) {
  if (t.is_var) {
    if (seen.insert(t.name).second) out.push_back(t.name);
    return;
  }
  for (auto& a : t.args) collect_vars(a, out, seen);
}

}  // namespace

std::vector<std::string> goal_vars(const SrcTerm& goal) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  collect_vars(goal, out, seen);
  return out;
}

lf::Signature translate_to_lf(const ProgramAst& p) {
  lf::Signature sig;
  for (auto& ref : p.order) {
    switch (ref.kind) {
      case ProgramAst::DeclRef::Kind::Type: {
        lf::SigEntry e;
        e.tag = lf::SigEntry::Tag::Data;
        e.name = p.types[ref.index].name;
        sig.add(std::move(e));
        break;
      }
      case ProgramAst::DeclRef::Kind::Con: {
        const ConDecl& c = p.cons[ref.index];
        lf::SigEntry e;
        e.tag = lf::SigEntry::Tag::Con;
        e.name = c.name;
        std::vector<lf::Param> params;
        for (size_t i = 0; i < c.arg_types.size(); ++i)
          params.push_back(
              lf::Param{"_a" + std::to_string(i + 1), lf::atom(c.arg_types[i])});
        e.type = lf::pi(std::move(params), lf::atom(c.result_type));
        sig.add(std::move(e));
        break;
      }
      case ProgramAst::DeclRef::Kind::Pred: {
        const PredDecl& pred = p.preds[ref.index];
        lf::SigEntry e;
        e.tag = lf::SigEntry::Tag::Pred;
        e.name = pred.name;
        for (size_t i = 0; i < pred.arg_types.size(); ++i)
          e.kind.params.push_back(
              lf::Param{"_a" + std::to_string(i + 1),
                        lf::atom(pred.arg_types[i])});
        sig.add(std::move(e));
        break;
      }
    }
  }
  // Clause constants go after all declarations so that clause types may
  // mention any predicate (bodies can call forward).
  for (auto& pred : p.preds) {
    for (size_t k = 0; k < pred.clauses.size(); ++k) {
      const Clause& c = pred.clauses[k];
      lf::SigEntry ce;
      ce.tag = lf::SigEntry::Tag::Clause;
      ce.name = pred.name + "-" + std::to_string(k + 1);
      // free variables, first textual occurrence, head then subgoals
      std::vector<std::string> vars;
      std::set<std::string> seen;
      collect_vars(c.head, vars, seen);
      for (auto& sg : c.subgoals) collect_vars(sg, vars, seen);
      std::vector<lf::Param> params;
      for (auto& v : vars)
        params.push_back(lf::Param{v, lf::atom(c.var_types.at(v))});
      int dn = 0;
      for (auto& sg : c.subgoals) {
        std::set<std::string> taken = seen;
        for (auto& par : params) taken.insert(par.name);
        std::string d = lf::fresh_name("D" + std::to_string(++dn), taken);
        params.push_back(lf::Param{d, goal_family(sg)});
      }
      ce.type = lf::pi(std::move(params), goal_family(c.head));
      sig.add(std::move(ce));
    }
  }
  return sig;
}

}  // namespace twam::front
