#include "twam/ir_text.hpp"

#include <cctype>
#include <sstream>

namespace twam {

// ------------------------------------------------------------------ printing

namespace {

std::string show_params(const std::vector<lf::Param>& params) {
  std::string out;
  for (size_t i = 0; i < params.size(); ++i) {
    if (i) out += ", ";
    out += params[i].name + " : " + lf::show(params[i].type);
  }
  return out;
}

}  // namespace

std::string print_ir(const Program& p) {
  std::ostringstream o;
  o << (p.dependent ? "twam" : "swam") << "\n\n";

  o << "sig {\n";
  for (auto& e : p.sig.entries) {
    switch (e.tag) {
      case lf::SigEntry::Tag::Data:
        o << "  data " << e.name << ".\n";
        break;
      case lf::SigEntry::Tag::Pred:
        o << "  pred " << e.name << " : " << lf::show(e.kind) << ".\n";
        break;
      case lf::SigEntry::Tag::Con:
        o << "  con " << e.name << " : " << lf::show(e.type) << ".\n";
        break;
      case lf::SigEntry::Tag::Clause:
        o << "  clause " << e.name << " : " << lf::show(e.type) << ".\n";
        break;
    }
  }
  o << "}\n\n";

  o << "xi {\n";
  for (auto& [l, t] : p.xi) o << "  " << l << " : " << show(t) << ".\n";
  o << "}\n\n";

  o << "query " << p.entry;
  if (!p.query_vars.empty()) {
    o << " vars [";
    for (size_t i = 0; i < p.query_vars.size(); ++i) {
      if (i) o << ", ";
      o << p.query_vars[i].first << " -> " << p.query_vars[i].second;
    }
    o << "]";
  }
  o << "\n\n";

  for (auto& [l, cv] : p.code) {
    o << "code " << l << " = code[" << show_params(cv.params) << "]"
      << show_rf(cv.rf.entries) << "(\n";
    int spine_left = 0;
    for (auto& ins : cv.body) {
      o << (spine_left > 0 ? "    " : "  ") << show(ins, p.dependent) << ";\n";
      if (spine_left > 0) --spine_left;
      if (ins.op == Instruction::Op::GetStr ||
          ins.op == Instruction::Op::PutStr ||
          ins.op == Instruction::Op::PutTuple)
        spine_left = ins.num;
    }
    o << ")\n\n";
  }
  return o.str();
}

// ------------------------------------------------------------------- lexing

namespace {

struct Token {
  enum class Kind { Ident, Num, Punct, End } kind = Kind::End;
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

  void advance(size_t n) {
    for (size_t i = 0; i < n; ++i) {
      if (src[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++pos;
    }
  }

  void skip_ws() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '#') {
        while (pos < src.size() && src[pos] != '\n') advance(1);
      } else if (isspace(static_cast<unsigned char>(c))) {
        advance(1);
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
    if (c == '-' && pos + 1 < src.size() && src[pos + 1] == '>') {
      advance(2);
      t.kind = Token::Kind::Punct;
      t.text = "->";
      return t;
    }
    static const std::string puncts = "{}()[],;:./\\=";
    if (puncts.find(c) != std::string::npos) {
      advance(1);
      t.kind = Token::Kind::Punct;
      t.text = std::string(1, c);
      return t;
    }
    if (isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos;
      while (pos < src.size() && isdigit(static_cast<unsigned char>(src[pos])))
        advance(1);
      t.kind = Token::Kind::Num;
      t.text = src.substr(start, pos - start);
      t.value = std::stol(t.text);
      return t;
    }
    if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < src.size()) {
        char d = src[pos];
        if (isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '\'' ||
            d == '#') {
          advance(1);
        } else if (d == '-' && pos + 1 < src.size() && src[pos + 1] != '>') {
          advance(1);
        } else {
          break;
        }
      }
      t.kind = Token::Kind::Ident;
      t.text = src.substr(start, pos - start);
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
    const Token& t = peek();
    return (t.kind == Token::Kind::Punct || t.kind == Token::Kind::Ident) &&
           t.text == text;
  }

  Token expect_kind(Token::Kind k, const std::string& what) {
    Token t = next();
    if (t.kind != k)
      throw ParseError(Diag{Severity::Error,
                            "expected " + what + ", got \"" + t.text + "\"",
                            t.loc});
    return t;
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

  std::string ident(const std::string& what = "identifier") {
    return expect_kind(Token::Kind::Ident, what).text;
  }

  long num() { return expect_kind(Token::Kind::Num, "number").value; }
};

struct IrParser {
  Lexer lx;
  Program prog;
  std::set<std::string> labels;  // filled from the xi section

  explicit IrParser(const std::string& text) : lx(text) {}

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(Diag{Severity::Error, msg, SourceLoc{lx.line, lx.col}});
  }

  // label := IDENT [ '/' NUM ]
  std::string label() {
    std::string l = lx.ident("label");
    if (lx.at("/")) {
      lx.next();
      l += "/" + std::to_string(lx.num());
    }
    return l;
  }

  // --- terms and families, with variable resolution against `bound` ---

  lf::Term term_atom(const std::set<std::string>& bound) {
    if (lx.at("(")) {
      lx.next();
      lf::Term m = term(bound);
      lx.expect(")");
      return m;
    }
    std::string name = lx.ident("term");
    return resolve(name, bound, {});
  }

  lf::Term resolve(const std::string& name, const std::set<std::string>& bound,
                   std::vector<lf::Term> args) {
    if (bound.count(name)) {
      if (!args.empty()) fail("variable \"" + name + "\" cannot be applied");
      return lf::var(name);
    }
    if (!prog.sig.find(name))
      fail("unknown identifier \"" + name + "\" in term");
    return lf::con(name, std::move(args));
  }

  bool term_follows() {
    const Token& t = lx.peek();
    return t.kind == Token::Kind::Ident || (t.kind == Token::Kind::Punct &&
                                            t.text == "(");
  }

  lf::Term term(const std::set<std::string>& bound) {
    if (lx.at("(")) {
      lx.next();
      lf::Term m = term(bound);
      lx.expect(")");
      return m;
    }
    std::string head = lx.ident("term");
    std::vector<lf::Term> args;
    while (term_follows()) args.push_back(term_atom(bound));
    return resolve(head, bound, std::move(args));
  }

  // family := '{' x ':' family '}' family | atomhead term* [ '->' family ]
  lf::Family family(std::set<std::string>& bound) {
    if (lx.at("{")) {
      lx.next();
      std::string name = lx.ident("binder");
      lx.expect(":");
      lf::Family dom = family(bound);
      lx.expect("}");
      bool was = bound.count(name) != 0;
      bound.insert(name);
      lf::Family body = family(bound);
      if (!was) bound.erase(name);
      std::vector<lf::Param> ps;
      ps.push_back(lf::Param{name, std::move(dom)});
      return lf::pi(std::move(ps), std::move(body));
    }
    std::string head = lx.ident("type family");
    std::vector<lf::Term> args;
    while (term_follows()) args.push_back(term_atom(bound));
    lf::Family a = lf::atom(head, std::move(args));
    if (lx.at("->")) {
      lx.next();
      std::string anon = lf::fresh_name("_t", bound);
      bound.insert(anon);
      lf::Family rest = family(bound);
      bound.erase(anon);
      std::vector<lf::Param> ps;
      ps.push_back(lf::Param{anon, std::move(a)});
      return lf::pi(std::move(ps), std::move(rest));
    }
    return a;
  }

  std::vector<lf::Param> param_list(std::set<std::string>& bound,
                                    const std::string& terminator) {
    std::vector<lf::Param> ps;
    if (lx.at(terminator)) return ps;
    while (true) {
      std::string name = lx.ident("parameter");
      lx.expect(":");
      lf::Family ty = family(bound);
      ps.push_back(lf::Param{name, std::move(ty)});
      bound.insert(name);
      if (lx.at(",")) {
        lx.next();
        continue;
      }
      break;
    }
    return ps;
  }

  // --- machine types ---

  MachineType mtype(std::set<std::string> bound) {
    if (lx.at("PI")) {
      lx.next();
      std::vector<lf::Param> params = param_list(bound, ".");
      lx.expect(".");
      MachineType body = mtype(bound);
      if (body.tag != MachineType::Tag::Cont)
        fail("PI binders are only valid on continuation types");
      body.params.insert(body.params.begin(), params.begin(), params.end());
      return body;
    }
    if (lx.at("not")) {
      lx.next();
      lx.expect("{");
      std::vector<RegEntry> rf = rf_entries(bound);
      lx.expect("}");
      return cont({}, std::move(rf));
    }
    if (lx.at("S")) {
      lx.next();
      lx.expect("(");
      lf::Term m = term(bound);
      lx.expect(":");
      std::string a = lx.ident("atomic type");
      lx.expect(")");
      return sing(std::move(m), std::move(a));
    }
    std::string name = lx.ident("machine type");
    if (name == "x" && lx.at("(")) {
      lx.next();
      std::vector<MachineType> elems;
      if (!lx.at(")")) {
        while (true) {
          elems.push_back(mtype(bound));
          if (lx.at(",")) {
            lx.next();
            continue;
          }
          break;
        }
      }
      lx.expect(")");
      return tuple(std::move(elems));
    }
    return atomic(std::move(name));
  }

  std::vector<RegEntry> rf_entries(const std::set<std::string>& bound) {
    std::vector<RegEntry> rf;
    if (lx.at("}")) return rf;
    while (true) {
      std::string reg = lx.ident("register");
      lx.expect(":");
      MachineType t = mtype(bound);
      rf.push_back(RegEntry{std::move(reg), std::move(t)});
      if (lx.at(",")) {
        lx.next();
        continue;
      }
      break;
    }
    return rf;
  }

  // --- operands ---

  Operand operand_base(const std::set<std::string>& bound) {
    std::string name = lx.ident("operand");
    if (lx.at("/")) {
      lx.next();
      name += "/" + std::to_string(lx.num());
    }
    Operand op;
    op.base = labels.count(name) ? Operand::Base::Label : Operand::Base::Reg;
    op.name = std::move(name);
    (void)bound;
    return op;
  }

  Operand operand_inner(std::set<std::string> bound) {
    if (lx.at("\\")) {
      lx.next();
      std::string name = lx.ident("binder");
      lx.expect(":");
      lf::Family dom = family(bound);
      lx.expect(".");
      bound.insert(name);
      Operand body = operand_inner(bound);
      body.binders.insert(body.binders.begin(),
                          lf::Param{std::move(name), std::move(dom)});
      return body;
    }
    Operand op = operand_base(bound);
    while (term_follows()) op.args.push_back(term_atom(bound));
    return op;
  }

  Operand operand(const std::set<std::string>& bound) {
    if (lx.at("(")) {
      lx.next();
      Operand op = operand_inner(bound);
      lx.expect(")");
      return op;
    }
    return operand_base(bound);
  }

  // --- instructions ---

  // `bound` accumulates LF variables introduced by put_var/unify_var.
  Instruction instruction(std::set<std::string>& bound) {
    Token t = lx.expect_kind(Token::Kind::Ident, "instruction");
    Instruction ins;
    ins.loc = t.loc;
    using Op = Instruction::Op;
    const std::string& k = t.text;
    if (k == "put_var" || k == "unify_var") {
      ins.op = k == "put_var" ? Op::PutVar : Op::UnifyVar;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      std::string a = lx.ident("name");
      if (lx.at(":")) {
        lx.next();
        ins.bind_var = a;
        ins.bind_type = lx.ident("atomic type");
        bound.insert(ins.bind_var);
      } else {
        ins.bind_type = a;  // erased form carries only the type
      }
    } else if (k == "get_val") {
      ins.op = Op::GetVal;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      ins.r2 = lx.ident("register");
    } else if (k == "get_str" || k == "put_str") {
      ins.op = k == "get_str" ? Op::GetStr : Op::PutStr;
      ins.con = lx.ident("constructor");
      lx.expect("/");
      ins.num = static_cast<int>(lx.num());
      lx.expect(",");
      ins.r1 = lx.ident("register");
    } else if (k == "unify_val") {
      ins.op = Op::UnifyVal;
      ins.r1 = lx.ident("register");
    } else if (k == "mov") {
      ins.op = Op::Mov;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      ins.operand = operand(bound);
    } else if (k == "jmp") {
      ins.op = Op::Jmp;
      ins.operand = operand(bound);
    } else if (k == "close") {
      ins.op = Op::Close;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      ins.r2 = lx.ident("register");
      lx.expect(",");
      ins.operand = operand(bound);
    } else if (k == "push_bt") {
      ins.op = Op::PushBt;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      ins.operand = operand(bound);
    } else if (k == "put_tuple") {
      ins.op = Op::PutTuple;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      ins.num = static_cast<int>(lx.num());
    } else if (k == "set_val") {
      ins.op = Op::SetVal;
      ins.r1 = lx.ident("register");
    } else if (k == "proj") {
      ins.op = Op::Proj;
      ins.r1 = lx.ident("register");
      lx.expect(",");
      ins.r2 = lx.ident("register");
      lx.expect(",");
      ins.num = static_cast<int>(lx.num());
    } else if (k == "succeed") {
      ins.op = Op::Succeed;
      if (lx.at("[")) {
        lx.next();
        ins.proof = term(bound);
        lx.expect(":");
        std::string head = lx.ident("type family");
        std::vector<lf::Term> args;
        while (term_follows()) args.push_back(term_atom(bound));
        ins.proof_type = lf::atom(std::move(head), std::move(args));
        lx.expect("]");
      }
    } else {
      throw ParseError(
          Diag{Severity::Error, "unknown instruction \"" + k + "\"", t.loc});
    }
    lx.expect(";");
    return ins;
  }

  // --- sections ---

  void sig_section() {
    lx.expect("sig");
    lx.expect("{");
    while (!lx.at("}")) {
      std::string kw = lx.ident("declaration keyword");
      lf::SigEntry e;
      if (kw == "data") {
        e.tag = lf::SigEntry::Tag::Data;
        e.name = lx.ident("name");
        lx.expect(".");
      } else if (kw == "pred") {
        e.tag = lf::SigEntry::Tag::Pred;
        e.name = lx.ident("name");
        lx.expect(":");
        std::set<std::string> bound;
        lf::Family a = family(bound);
        if (a.head != "type") fail("predicate kinds must end in `type`");
        for (auto& p : a.params) e.kind.params.push_back(p);
        lx.expect(".");
      } else if (kw == "con" || kw == "clause") {
        e.tag = kw == "con" ? lf::SigEntry::Tag::Con : lf::SigEntry::Tag::Clause;
        e.name = lx.ident("name");
        lx.expect(":");
        std::set<std::string> bound;
        e.type = family(bound);
        lx.expect(".");
      } else {
        fail("expected data/con/pred/clause, got \"" + kw + "\"");
      }
      if (auto d = prog.sig.add(std::move(e))) throw ParseError(*d);
    }
    lx.expect("}");
  }

  void xi_section() {
    lx.expect("xi");
    lx.expect("{");
    while (!lx.at("}")) {
      std::string l = label();
      lx.expect(":");
      MachineType t = mtype({});
      lx.expect(".");
      if (t.tag != MachineType::Tag::Cont)
        fail("code-section types must be continuation types");
      labels.insert(l);
      prog.xi.emplace_back(std::move(l), std::move(t));
    }
    lx.expect("}");
  }

  void query_section() {
    lx.expect("query");
    prog.entry = label();
    if (lx.at("vars")) {
      lx.next();
      lx.expect("[");
      while (!lx.at("]")) {
        std::string v = lx.ident("variable");
        lx.expect("->");
        std::string r = lx.ident("register");
        prog.query_vars.emplace_back(std::move(v), std::move(r));
        if (lx.at(",")) lx.next();
      }
      lx.expect("]");
    }
  }

  void code_section() {
    while (lx.at("code")) {
      lx.next();
      std::string l = label();
      lx.expect("=");
      lx.expect("code");
      lx.expect("[");
      std::set<std::string> bound;
      CodeValue cv;
      cv.params = param_list(bound, "]");
      lx.expect("]");
      lx.expect("{");
      cv.rf.entries = rf_entries(bound);
      std::sort(cv.rf.entries.begin(), cv.rf.entries.end(),
                [](const RegEntry& a, const RegEntry& b) {
                  return reg_compare(a.reg, b.reg) < 0;
                });
      lx.expect("}");
      lx.expect("(");
      while (!lx.at(")")) cv.body.push_back(instruction(bound));
      lx.expect(")");
      prog.code.emplace_back(std::move(l), std::move(cv));
    }
  }

  Program parse() {
    std::string kind = lx.ident("program kind (twam/swam)");
    if (kind == "twam")
      prog.dependent = true;
    else if (kind == "swam")
      prog.dependent = false;
    else
      fail("expected `twam` or `swam`, got \"" + kind + "\"");
    sig_section();
    xi_section();
    query_section();
    code_section();
    Token t = lx.next();
    if (t.kind != Token::Kind::End)
      throw ParseError(
          Diag{Severity::Error, "trailing input \"" + t.text + "\"", t.loc});
    if (prog.entry.empty() || !prog.find(prog.entry))
      fail("no query entry: label \"" + prog.entry + "\" is not defined");
    return std::move(prog);
  }
};

}  // namespace

Program parse_ir(const std::string& text) {
  IrParser p(text);
  return p.parse();
}

}  // namespace twam
