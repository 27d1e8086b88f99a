#include "twam/machine.hpp"

#include <algorithm>
#include <sstream>

namespace twam {

MachineType::MachineType() = default;
MachineType::MachineType(const MachineType&) = default;
MachineType::MachineType(MachineType&&) noexcept = default;
MachineType& MachineType::operator=(const MachineType&) = default;
MachineType& MachineType::operator=(MachineType&&) noexcept = default;
MachineType::~MachineType() = default;

MachineType sing(lf::Term m, std::string atom) {
  MachineType t;
  t.tag = MachineType::Tag::Sing;
  t.term = std::move(m);
  t.atom = std::move(atom);
  return t;
}

MachineType atomic(std::string atom) {
  MachineType t;
  t.tag = MachineType::Tag::Atomic;
  t.atom = std::move(atom);
  return t;
}

MachineType cont(std::vector<lf::Param> params, std::vector<RegEntry> rf) {
  MachineType t;
  t.tag = MachineType::Tag::Cont;
  t.params = std::move(params);
  t.rf = std::move(rf);
  std::sort(t.rf.begin(), t.rf.end(), [](const RegEntry& a, const RegEntry& b) {
    return reg_compare(a.reg, b.reg) < 0;
  });
  return t;
}

MachineType tuple(std::vector<MachineType> elems) {
  MachineType t;
  t.tag = MachineType::Tag::Tuple;
  t.elems = std::move(elems);
  return t;
}

const MachineType* RegFileType::find(const std::string& reg) const {
  for (auto& e : entries)
    if (e.reg == reg) return &e.type;
  return nullptr;
}

void RegFileType::set(const std::string& reg, MachineType type) {
  for (auto& e : entries) {
    if (e.reg == reg) {
      e.type = std::move(type);
      return;
    }
  }
  RegEntry ne{reg, std::move(type)};
  auto it = std::lower_bound(entries.begin(), entries.end(), ne,
                             [](const RegEntry& a, const RegEntry& b) {
                               return reg_compare(a.reg, b.reg) < 0;
                             });
  entries.insert(it, std::move(ne));
}

// ------------------------------------------------------------------ equality

namespace {

bool mt_alpha_eq(const MachineType& a, const MachineType& b,
                 std::map<std::string, std::string> ren);

bool term_alpha_eq(const lf::Term& a, const lf::Term& b,
                   const std::map<std::string, std::string>& ren) {
  if (a.tag != b.tag || a.args.size() != b.args.size()) return false;
  if (a.is_var()) {
    auto it = ren.find(a.name);
    return (it == ren.end() ? a.name : it->second) == b.name;
  }
  if (a.name != b.name) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!term_alpha_eq(a.args[i], b.args[i], ren)) return false;
  return true;
}

bool family_alpha_eq(const lf::Family& a, const lf::Family& b,
                     std::map<std::string, std::string> ren) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i) {
    if (!family_alpha_eq(a.params[i].type, b.params[i].type, ren)) return false;
    ren[a.params[i].name] = b.params[i].name;
  }
  if (a.head != b.head || a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!term_alpha_eq(a.args[i], b.args[i], ren)) return false;
  return true;
}

bool rf_alpha_eq(const std::vector<RegEntry>& a, const std::vector<RegEntry>& b,
                 const std::map<std::string, std::string>& ren) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].reg != b[i].reg) return false;
    if (!mt_alpha_eq(a[i].type, b[i].type, ren)) return false;
  }
  return true;
}

bool mt_alpha_eq(const MachineType& a, const MachineType& b,
                 std::map<std::string, std::string> ren) {
  if (a.tag != b.tag) return false;
  switch (a.tag) {
    case MachineType::Tag::Sing:
      return a.atom == b.atom && term_alpha_eq(a.term, b.term, ren);
    case MachineType::Tag::Atomic:
      return a.atom == b.atom;
    case MachineType::Tag::Cont: {
      if (a.params.size() != b.params.size()) return false;
      for (size_t i = 0; i < a.params.size(); ++i) {
        if (!family_alpha_eq(a.params[i].type, b.params[i].type, ren))
          return false;
        ren[a.params[i].name] = b.params[i].name;
      }
      return rf_alpha_eq(a.rf, b.rf, ren);
    }
    case MachineType::Tag::Tuple: {
      if (a.elems.size() != b.elems.size()) return false;
      for (size_t i = 0; i < a.elems.size(); ++i)
        if (!mt_alpha_eq(a.elems[i], b.elems[i], ren)) return false;
      return true;
    }
  }
  return false;
}

}  // namespace

bool alpha_equal(const MachineType& a, const MachineType& b) {
  return mt_alpha_eq(a, b, {});
}

bool rf_equal(const std::vector<RegEntry>& a, const std::vector<RegEntry>& b) {
  return rf_alpha_eq(a, b, {});
}

bool rf_subsumes(const std::vector<RegEntry>& smaller,
                 const std::vector<RegEntry>& larger) {
  for (auto& e : smaller) {
    const MachineType* t = nullptr;
    for (auto& f : larger)
      if (f.reg == e.reg) t = &f.type;
    if (!t || !alpha_equal(e.type, *t)) return false;
  }
  return true;
}

// -------------------------------------------------------------- substitution

MachineType apply(const lf::Subst& s, const MachineType& t) {
  if (s.empty()) return t;
  MachineType out = t;
  switch (t.tag) {
    case MachineType::Tag::Sing:
      out.term = lf::apply(s, t.term);
      break;
    case MachineType::Tag::Atomic:
      break;
    case MachineType::Tag::Cont: {
      lf::Subst inner;
      out.params = lf::subst_telescope(s, t.params, inner);
      out.rf = twam::apply(inner, t.rf);
      break;
    }
    case MachineType::Tag::Tuple:
      for (auto& e : out.elems) e = apply(s, e);
      break;
  }
  return out;
}

std::vector<RegEntry> apply(const lf::Subst& s, std::vector<RegEntry> rf) {
  for (auto& e : rf) e.type = apply(s, e.type);
  return rf;
}

// ------------------------------------------------------------------ printing

std::string show(const MachineType& t) {
  switch (t.tag) {
    case MachineType::Tag::Sing:
      return "S(" + lf::show(t.term) + " : " + t.atom + ")";
    case MachineType::Tag::Atomic:
      return t.atom;
    case MachineType::Tag::Cont: {
      std::string out;
      if (!t.params.empty()) {
        out += "PI ";
        for (size_t i = 0; i < t.params.size(); ++i) {
          if (i) out += ", ";
          out += t.params[i].name + " : " + lf::show(t.params[i].type);
        }
        out += ". ";
      }
      out += "not " + show_rf(t.rf);
      return out;
    }
    case MachineType::Tag::Tuple: {
      std::string out = "x(";
      for (size_t i = 0; i < t.elems.size(); ++i) {
        if (i) out += ", ";
        out += show(t.elems[i]);
      }
      return out + ")";
    }
  }
  return "?";
}

std::string show_rf(const std::vector<RegEntry>& rf) {
  std::string out = "{";
  for (size_t i = 0; i < rf.size(); ++i) {
    if (i) out += ", ";
    out += rf[i].reg + " : " + show(rf[i].type);
  }
  return out + "}";
}

// ------------------------------------------------------------------ operands

Operand op_reg(std::string name) {
  Operand op;
  op.base = Operand::Base::Reg;
  op.name = std::move(name);
  return op;
}

Operand op_label(std::string name, std::vector<lf::Term> args) {
  Operand op;
  op.base = Operand::Base::Label;
  op.name = std::move(name);
  op.args = std::move(args);
  return op;
}

Operand apply(const lf::Subst& s, const Operand& op) {
  if (s.empty()) return op;
  Operand out = op;
  lf::Subst inner;
  out.binders = lf::subst_telescope(s, op.binders, inner);
  for (auto& m : out.args) m = lf::apply(inner, m);
  return out;
}

std::string show(const Operand& op, bool parens_if_compound) {
  bool compound = !op.binders.empty() || !op.args.empty();
  std::string out;
  for (auto& b : op.binders)
    out += "\\" + b.name + " : " + lf::show(b.type) + ". ";
  out += op.name;
  for (auto& m : op.args) out += " " + lf::show(m);
  if (compound && parens_if_compound) return "(" + out + ")";
  return out;
}

// --------------------------------------------------------------- instructions

std::string show(const Instruction& ins, bool dependent) {
  using Op = Instruction::Op;
  std::ostringstream o;
  switch (ins.op) {
    case Op::PutVar:
      o << "put_var " << ins.r1 << ", ";
      if (dependent) o << ins.bind_var << " : ";
      o << ins.bind_type;
      break;
    case Op::GetVal:
      o << "get_val " << ins.r1 << ", " << ins.r2;
      break;
    case Op::GetStr:
      o << "get_str " << ins.con << "/" << ins.num << ", " << ins.r1;
      break;
    case Op::PutStr:
      o << "put_str " << ins.con << "/" << ins.num << ", " << ins.r1;
      break;
    case Op::UnifyVar:
      o << "unify_var " << ins.r1 << ", ";
      if (dependent) o << ins.bind_var << " : ";
      o << ins.bind_type;
      break;
    case Op::UnifyVal:
      o << "unify_val " << ins.r1;
      break;
    case Op::Mov:
      o << "mov " << ins.r1 << ", " << show(ins.operand);
      break;
    case Op::Jmp:
      o << "jmp " << show(ins.operand);
      break;
    case Op::Close:
      o << "close " << ins.r1 << ", " << ins.r2 << ", " << show(ins.operand);
      break;
    case Op::PushBt:
      o << "push_bt " << ins.r1 << ", " << show(ins.operand);
      break;
    case Op::PutTuple:
      o << "put_tuple " << ins.r1 << ", " << ins.num;
      break;
    case Op::SetVal:
      o << "set_val " << ins.r1;
      break;
    case Op::Proj:
      o << "proj " << ins.r1 << ", " << ins.r2 << ", " << ins.num;
      break;
    case Op::Succeed:
      o << "succeed";
      if (dependent)
        o << " [" << lf::show(ins.proof) << " : " << lf::show(ins.proof_type)
          << "]";
      break;
  }
  return o.str();
}

MachineType code_type(const CodeValue& cv) {
  return cont(cv.params, cv.rf.entries);
}

const CodeValue* Program::find(const std::string& label) const {
  for (auto& [l, cv] : code)
    if (l == label) return &cv;
  return nullptr;
}

const MachineType* Program::xi_find(const std::string& label) const {
  for (auto& [l, t] : xi)
    if (l == label) return &t;
  return nullptr;
}

// -------------------------------------------------------------- substitution

std::vector<Instruction> subst_instructions(const lf::Subst& s,
                                            std::vector<Instruction> instrs,
                                            size_t from) {
  if (s.empty()) return instrs;
  lf::Subst cur = s;
  std::set<std::string> range_fv;
  for (auto& [x, m] : cur.items) lf::free_vars(m, range_fv);
  for (size_t i = from; i < instrs.size(); ++i) {
    Instruction& ins = instrs[i];
    using Op = Instruction::Op;
    switch (ins.op) {
      case Op::PutVar:
      case Op::UnifyVar: {
        if (!ins.bind_var.empty()) {
          if (cur.binds(ins.bind_var)) cur.items.erase(ins.bind_var);
          if (range_fv.count(ins.bind_var)) {
            std::set<std::string> taken = range_fv;
            for (auto& [x, m] : cur.items) taken.insert(x);
            std::string nn = lf::fresh_name(ins.bind_var, taken);
            cur.items[ins.bind_var] = lf::var(nn);
            range_fv.insert(nn);
            ins.bind_var = nn;
          }
        }
        break;
      }
      case Op::Mov:
      case Op::Jmp:
      case Op::Close:
      case Op::PushBt:
        ins.operand = apply(cur, ins.operand);
        break;
      case Op::Succeed:
        ins.proof = lf::apply(cur, ins.proof);
        ins.proof_type = lf::apply(cur, ins.proof_type);
        break;
      default:
        break;
    }
    if (cur.empty()) break;
  }
  return instrs;
}

// ------------------------------------------------------------------- erasure

namespace {

MachineType erase_type(const MachineType& t) {
  switch (t.tag) {
    case MachineType::Tag::Sing:
    case MachineType::Tag::Atomic:
      return atomic(t.atom);
    case MachineType::Tag::Cont: {
      std::vector<RegEntry> rf;
      for (auto& e : t.rf) rf.push_back(RegEntry{e.reg, erase_type(e.type)});
      return cont({}, std::move(rf));
    }
    case MachineType::Tag::Tuple: {
      std::vector<MachineType> elems;
      for (auto& e : t.elems) elems.push_back(erase_type(e));
      return tuple(std::move(elems));
    }
  }
  return atomic("?");
}

Operand erase_operand(const Operand& op) {
  Operand out;
  out.base = op.base;
  out.name = op.name;
  return out;
}

Instruction erase_instr(Instruction ins) {
  using Op = Instruction::Op;
  switch (ins.op) {
    case Op::PutVar:
    case Op::UnifyVar:
      ins.bind_var.clear();
      break;
    case Op::Mov:
    case Op::Jmp:
    case Op::Close:
    case Op::PushBt:
      ins.operand = erase_operand(ins.operand);
      break;
    case Op::Succeed:
      ins.proof = lf::Term{};
      ins.proof_type = lf::Family{};
      break;
    default:
      break;
  }
  return ins;
}

}  // namespace

Program erase(const Program& p) {
  Program out;
  out.dependent = false;
  out.entry = p.entry;
  out.query_vars = p.query_vars;
  // the erased signature keeps data types and constructors only
  for (auto& e : p.sig.entries)
    if (e.tag == lf::SigEntry::Tag::Data || e.tag == lf::SigEntry::Tag::Con)
      out.sig.add(e);
  for (auto& [l, t] : p.xi) out.xi.emplace_back(l, erase_type(t));
  for (auto& [l, cv] : p.code) {
    CodeValue ecv;
    ecv.rf.entries = erase_type(code_type(cv)).rf;
    for (auto& ins : cv.body) ecv.body.push_back(erase_instr(ins));
    out.code.emplace_back(l, std::move(ecv));
  }
  return out;
}

}  // namespace twam
