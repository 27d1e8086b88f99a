#include "twam/checker.hpp"

#include <algorithm>
#include <sstream>

namespace twam {

namespace {

using Op = Instruction::Op;

struct BlockChecker {
  const Program& p;
  const std::map<std::string, MachineType>& xi;
  std::string label;
  CheckResult& result;

  lf::Context delta;
  RegFileType gamma;
  std::vector<Instruction> instrs;
  size_t i = 0;  // current instruction index

  bool dep() const { return p.dependent; }

  Diag err(const std::string& rule, const std::string& msg) {
    Diag d{Severity::Error, msg};
    d.label = label;
    d.instr_index = static_cast<int>(i);
    d.rule = rule;
    if (i < instrs.size()) d.loc = instrs[i].loc;
    return d;
  }

  void warn_vacuous(const std::string& rule) {
    Diag d{Severity::Warning,
           "remaining instructions are unreachable: static unification "
           "failed here (dead code)"};
    d.label = label;
    d.instr_index = static_cast<int>(i);
    d.rule = rule;
    result.warnings.push_back(d);
  }

  std::set<std::string> names_in_scope() const {
    std::set<std::string> out;
    for (auto& e : delta.entries) out.insert(e.name);
    for (auto& e : gamma.entries) collect_type_fv(e.type, out);
    return out;
  }

  // Renames the binder of instruction `at` (PutVar/UnifyVar) if it would
  // shadow an existing variable; later occurrences follow the new name.
  void unshadow_binder(size_t at) {
    Instruction& ins = instrs[at];
    if (ins.bind_var.empty() || !delta.contains(ins.bind_var)) return;
    std::set<std::string> taken = names_in_scope();
    std::string nn = lf::fresh_name(ins.bind_var, taken);
    lf::Subst ren;
    ren.items[ins.bind_var] = lf::var(nn);
    instrs = subst_instructions(ren, std::move(instrs), at + 1);
    ins.bind_var = nn;
  }

  void apply_subst(const lf::Subst& s) {
    if (s.empty()) return;
    delta = lf::apply(s, delta);
    gamma.entries = twam::apply(s, gamma.entries);
    instrs = subst_instructions(s, std::move(instrs), i + 1);
  }

  std::optional<Diag> require_data(const std::string& atom,
                                   const std::string& rule) {
    if (!p.sig.is_data_type(atom))
      return err(rule, "\"" + atom + "\" is not a declared data type");
    return std::nullopt;
  }

  // ---- operands -----------------------------------------------------

  Res<MachineType> operand_type(const Operand& op) {
    lf::Context ext = delta;
    for (auto& b : op.binders) {
      if (!dep())
        return err("op", "lambda operands do not exist after erasure");
      if (auto d = lf::check_family(p.sig, ext, b.type)) {
        Diag e = err("op-lam", d->message);
        return e;
      }
      if (!b.type.atomic())
        return err("op-lam", "operand binders must have atomic type");
      if (ext.contains(b.name))
        return err("op-lam", "binder \"" + b.name + "\" shadows a variable");
      ext.push(b.name, b.type);
    }
    MachineType t;
    if (op.base == Operand::Base::Reg) {
      const MachineType* rt = gamma.find(op.name);
      if (!rt) return err("op-r", "register \"" + op.name + "\" has no type");
      t = *rt;
    } else {
      auto it = xi.find(op.name);
      if (it == xi.end())
        return err("op-l", "unknown code label \"" + op.name + "\"");
      t = it->second;
    }
    for (auto& m : op.args) {
      if (!dep())
        return err("op", "operand applications do not exist after erasure");
      if (t.tag != MachineType::Tag::Cont || t.params.empty())
        return err("op-app",
                   "operand applies an argument to a non-product type " +
                       show(t));
      lf::Param param = t.params.front();
      if (!param.type.atomic())
        return err("op-app", "operand argument domain is not atomic");
      Res<lf::Family> mt = lf::check_term(p.sig, ext, m);
      if (!mt.ok()) {
        Diag d = err("op-app", mt.diag().message);
        return d;
      }
      if (!lf::alpha_equal(mt.value(), param.type))
        return err("op-app", "operand argument " + lf::show(m) + " has type " +
                                 lf::show(mt.value()) + ", expected " +
                                 lf::show(param.type));
      MachineType rest = cont(
          std::vector<lf::Param>(t.params.begin() + 1, t.params.end()), t.rf);
      lf::Subst s;
      s.items[param.name] = m;
      t = apply(s, rest);
    }
    if (!op.binders.empty()) {
      if (t.tag != MachineType::Tag::Cont)
        return err("op-lam", "lambda operand body must be a continuation");
      t.params.insert(t.params.begin(), op.binders.begin(), op.binders.end());
    }
    return t;
  }

  // Renames a continuation type's parameters away from the given set.
  MachineType freshen_cont(MachineType t, std::set<std::string> avoid) {
    if (t.tag != MachineType::Tag::Cont) return t;
    lf::Subst ren;
    for (auto& par : t.params) {
      if (avoid.count(par.name)) {
        std::string nn = lf::fresh_name(par.name, avoid);
        ren.items[par.name] = lf::var(nn);
        avoid.insert(nn);
        par.name = nn;
      } else {
        avoid.insert(par.name);
      }
      par.type = lf::apply(ren, par.type);
    }
    t.rf = twam::apply(ren, t.rf);
    return t;
  }

  // ---- spines --------------------------------------------------------

  // Checks the n spinal instructions following a get_str/put_str at `i`.
  // `lhs` is the unificand known before the spine; returns false when the
  // block is rejected (error already recorded). `con` and `con_type` are
  // taken by value: the instruction vector is reallocated under our feet
  // whenever a substitution or binder rename is applied.
  bool prolog_spine(std::string con, lf::Family con_type, lf::Term lhs) {
    std::vector<lf::Term> rhs_args;
    std::vector<std::string> binder_types;
    for (auto& par : con_type.params) binder_types.push_back(par.type.head);
    size_t n = binder_types.size();
    std::set<std::string> taken = names_in_scope();
    std::vector<std::string> binders;
    for (size_t k = 0; k < n; ++k) {
      std::string b = lf::fresh_name("s#" + std::to_string(k), taken);
      taken.insert(b);
      binders.push_back(b);
      rhs_args.push_back(lf::var(b));
    }
    for (size_t k = 0; k < n; ++k) {
      ++i;
      if (i >= instrs.size()) {
        --i;
        result.errors.push_back(
            err("spine", "spine left open at block end (constructor " + con +
                             " needs " + std::to_string(n) + " argument(s))"));
        return false;
      }
      Instruction& ins = instrs[i];
      const std::string& want = binder_types[k];
      if (ins.op == Op::UnifyVar) {
        if (dep() && ins.bind_var.empty()) {
          result.errors.push_back(err("Unifyvar", "missing LF variable"));
          return false;
        }
        if (ins.bind_type != want) {
          result.errors.push_back(
              err("Unifyvar", "spine argument " + std::to_string(k + 1) +
                                  " has type " + want + ", annotation says " +
                                  ins.bind_type));
          return false;
        }
        if (dep()) {
          unshadow_binder(i);
          lf::Subst ren;
          ren.items[binders[k]] = lf::var(instrs[i].bind_var);
          for (auto& m : rhs_args) m = lf::apply(ren, m);
          delta.push(instrs[i].bind_var, lf::atom(want));
          gamma.set(instrs[i].r1, sing(lf::var(instrs[i].bind_var), want));
        } else {
          gamma.set(ins.r1, atomic(want));
        }
      } else if (ins.op == Op::UnifyVal) {
        const MachineType* rt = gamma.find(ins.r1);
        if (!rt) {
          result.errors.push_back(err(
              "Unifyval", "register \"" + ins.r1 + "\" has no type"));
          return false;
        }
        if (dep()) {
          if (rt->tag != MachineType::Tag::Sing || rt->atom != want) {
            result.errors.push_back(
                err("Unifyval", "register \"" + ins.r1 +
                                    "\" is not a Prolog term of type " + want));
            return false;
          }
          lf::Subst s;
          s.items[binders[k]] = rt->term;
          for (auto& m : rhs_args) m = lf::apply(s, m);
        } else {
          if (rt->tag != MachineType::Tag::Atomic || rt->atom != want) {
            result.errors.push_back(
                err("Unifyval", "register \"" + ins.r1 +
                                    "\" is not a Prolog term of type " + want));
            return false;
          }
        }
      } else {
        result.errors.push_back(
            err("spine", "expected unify_var/unify_val inside spine"));
        return false;
      }
    }
    if (dep()) {
      lf::UnifyResult u =
          lf::static_unify(delta, lhs, lf::con(con, rhs_args));
      if (u.bottom) {
        warn_vacuous("spine-bottom");
        i = instrs.size();  // vacuously accept the remainder
        return true;
      }
      apply_subst(u.mgu);
    }
    return true;
  }

  bool tuple_spine(const std::string& rd, int n) {
    std::vector<MachineType> elems;
    for (int k = 0; k < n; ++k) {
      ++i;
      if (i >= instrs.size()) {
        --i;
        result.errors.push_back(err(
            "TSpine", "tuple spine left open at block end (expected " +
                          std::to_string(n) + " set_val instruction(s))"));
        return false;
      }
      Instruction& ins = instrs[i];
      if (ins.op != Op::SetVal) {
        result.errors.push_back(
            err("TSpine", "expected set_val inside tuple spine"));
        return false;
      }
      const MachineType* rt = gamma.find(ins.r1);
      if (!rt) {
        result.errors.push_back(
            err("TSpine-SetVal", "register \"" + ins.r1 + "\" has no type"));
        return false;
      }
      elems.push_back(*rt);
    }
    gamma.set(rd, tuple(std::move(elems)));
    return true;
  }

  // ---- main loop -----------------------------------------------------

  void run() {
    bool terminated = false;
    for (i = 0; i < instrs.size(); ++i) {
      Instruction& ins = instrs[i];
      if (terminated) {
        result.errors.push_back(
            err("block", "unreachable instruction after jmp/succeed"));
        return;
      }
      switch (ins.op) {
        case Op::PutVar: {
          if (dep() && ins.bind_var.empty()) {
            result.errors.push_back(err("Putvar", "missing LF variable"));
            return;
          }
          if (auto d = require_data(ins.bind_type, "Putvar")) {
            result.errors.push_back(*d);
            return;
          }
          if (dep()) {
            unshadow_binder(i);
            delta.push(instrs[i].bind_var, lf::atom(instrs[i].bind_type));
            gamma.set(instrs[i].r1,
                      sing(lf::var(instrs[i].bind_var), instrs[i].bind_type));
          } else {
            gamma.set(ins.r1, atomic(ins.bind_type));
          }
          break;
        }
        case Op::GetVal: {
          const MachineType* t1 = gamma.find(ins.r1);
          const MachineType* t2 = gamma.find(ins.r2);
          if (!t1 || !t2) {
            result.errors.push_back(err(
                "GetVal", "register \"" + (t1 ? ins.r2 : ins.r1) +
                              "\" has no type"));
            return;
          }
          auto want = dep() ? MachineType::Tag::Sing : MachineType::Tag::Atomic;
          if (t1->tag != want || t2->tag != want || t1->atom != t2->atom) {
            result.errors.push_back(
                err("GetVal", "get_val operands must be Prolog terms of the "
                              "same atomic type, got " +
                                  show(*t1) + " and " + show(*t2)));
            return;
          }
          if (dep()) {
            lf::UnifyResult u = lf::static_unify(delta, t1->term, t2->term);
            if (u.bottom) {
              warn_vacuous("GetVal-F");
              return;  // vacuously well-typed
            }
            apply_subst(u.mgu);
          }
          break;
        }
        case Op::GetStr:
        case Op::PutStr: {
          const lf::SigEntry* c = p.sig.find(ins.con);
          if (!c || c->tag != lf::SigEntry::Tag::Con) {
            result.errors.push_back(
                err("spine", "\"" + ins.con + "\" is not a constructor"));
            return;
          }
          if (static_cast<int>(c->type.params.size()) != ins.num) {
            result.errors.push_back(err(
                "spine", "constructor " + ins.con + " has arity " +
                             std::to_string(c->type.params.size()) +
                             ", instruction says " + std::to_string(ins.num)));
            return;
          }
          const std::string& a0 = c->type.head;
          lf::Term lhs;
          if (ins.op == Op::GetStr) {
            const MachineType* rt = gamma.find(ins.r1);
            if (!rt) {
              result.errors.push_back(
                  err("Getstr", "register \"" + ins.r1 + "\" has no type"));
              return;
            }
            if (dep()) {
              if (rt->tag != MachineType::Tag::Sing || rt->atom != a0) {
                result.errors.push_back(err(
                    "Getstr", "register \"" + ins.r1 +
                                  "\" is not a Prolog term of type " + a0));
                return;
              }
              lhs = rt->term;
            } else if (rt->tag != MachineType::Tag::Atomic || rt->atom != a0) {
              result.errors.push_back(err(
                  "Getstr", "register \"" + ins.r1 +
                                "\" is not a Prolog term of type " + a0));
              return;
            }
          } else {
            if (dep()) {
              std::set<std::string> taken = names_in_scope();
              std::string x = lf::fresh_name("w#", taken);
              delta.push(x, lf::atom(a0));
              gamma.set(ins.r1, sing(lf::var(x), a0));
              lhs = lf::var(x);
            } else {
              gamma.set(ins.r1, atomic(a0));
            }
          }
          if (!prolog_spine(ins.con, c->type, lhs)) return;
          if (i == instrs.size()) return;  // vacuous remainder
          break;
        }
        case Op::UnifyVar:
        case Op::UnifyVal:
          result.errors.push_back(
              err("spine", "spinal instruction outside a spine"));
          return;
        case Op::SetVal:
          result.errors.push_back(
              err("TSpine", "set_val outside a tuple spine"));
          return;
        case Op::Mov: {
          Res<MachineType> t = operand_type(ins.operand);
          if (!t.ok()) {
            result.errors.push_back(t.diag());
            return;
          }
          gamma.set(ins.r1, t.value());
          break;
        }
        case Op::Jmp: {
          Res<MachineType> t = operand_type(ins.operand);
          if (!t.ok()) {
            result.errors.push_back(t.diag());
            return;
          }
          if (t.value().tag != MachineType::Tag::Cont ||
              !t.value().params.empty()) {
            result.errors.push_back(
                err("Jmp", "jmp target must be a fully applied continuation, "
                           "got " +
                               show(t.value())));
            return;
          }
          if (!rf_subsumes(t.value().rf, gamma.entries)) {
            result.errors.push_back(
                err("Jmp", "register file " + show_rf(gamma.entries) +
                               " does not subsume the target's " +
                               show_rf(t.value().rf)));
            return;
          }
          terminated = true;
          break;
        }
        case Op::Close: {
          if (ins.operand.base != Operand::Base::Label ||
              !ins.operand.binders.empty()) {
            result.errors.push_back(err(
                "Close", "closure operands are restricted to a label applied "
                         "to LF terms"));
            return;
          }
          const MachineType* te = gamma.find(ins.r2);
          if (!te) {
            result.errors.push_back(
                err("Close", "register \"" + ins.r2 + "\" has no type"));
            return;
          }
          Res<MachineType> t = operand_type(ins.operand);
          if (!t.ok()) {
            result.errors.push_back(t.diag());
            return;
          }
          if (t.value().tag != MachineType::Tag::Cont) {
            result.errors.push_back(
                err("Close", "closure target is not a continuation"));
            return;
          }
          std::set<std::string> avoid = names_in_scope();
          std::set<std::string> fv_te;
          collect_type_fv(*te, fv_te);
          avoid.insert(fv_te.begin(), fv_te.end());
          MachineType tc = freshen_cont(t.value(), avoid);
          std::vector<RegEntry> inner_rf;
          bool env_seen = false;
          for (auto& e : tc.rf) {
            if (e.reg == "env") {
              env_seen = true;
              if (!alpha_equal(e.type, *te)) {
                result.errors.push_back(err(
                    "Close", "environment register has type " + show(*te) +
                                 ", continuation expects " + show(e.type)));
                return;
              }
            } else {
              inner_rf.push_back(e);
            }
          }
          (void)env_seen;  // a continuation may ignore its environment
          gamma.set(ins.r1, cont(tc.params, std::move(inner_rf)));
          break;
        }
        case Op::PushBt: {
          if (ins.operand.base != Operand::Base::Label ||
              !ins.operand.binders.empty()) {
            result.errors.push_back(
                err("BT", "failure continuations are restricted to a label "
                          "applied to LF terms"));
            return;
          }
          const MachineType* te = gamma.find(ins.r1);
          if (!te) {
            result.errors.push_back(
                err("BT", "register \"" + ins.r1 + "\" has no type"));
            return;
          }
          Res<MachineType> t = operand_type(ins.operand);
          if (!t.ok()) {
            result.errors.push_back(t.diag());
            return;
          }
          const MachineType& tc = t.value();
          if (tc.tag != MachineType::Tag::Cont || !tc.params.empty()) {
            result.errors.push_back(err(
                "BT", "failure continuation must be fully applied, got " +
                          show(tc)));
            return;
          }
          if (tc.rf.size() != 1 || tc.rf[0].reg != "env" ||
              !alpha_equal(tc.rf[0].type, *te)) {
            result.errors.push_back(
                err("BT", "failure continuation must expect exactly {env : " +
                              show(*te) + "}, got " + show_rf(tc.rf)));
            return;
          }
          break;
        }
        case Op::PutTuple: {
          if (ins.num < 0) {
            result.errors.push_back(err("PutTuple", "negative tuple length"));
            return;
          }
          if (!tuple_spine(ins.r1, ins.num)) return;
          break;
        }
        case Op::Proj: {
          const MachineType* rt = gamma.find(ins.r2);
          if (!rt || rt->tag != MachineType::Tag::Tuple) {
            result.errors.push_back(
                err("Proj", "register \"" + ins.r2 + "\" is not a tuple"));
            return;
          }
          if (ins.num < 1 || ins.num > static_cast<int>(rt->elems.size())) {
            result.errors.push_back(
                err("Proj", "tuple index " + std::to_string(ins.num) +
                                " out of range (tuple has " +
                                std::to_string(rt->elems.size()) +
                                " element(s))"));
            return;
          }
          gamma.set(ins.r1, rt->elems[ins.num - 1]);
          break;
        }
        case Op::Succeed: {
          if (dep()) {
            if (auto d = lf::check_family(p.sig, delta, ins.proof_type)) {
              result.errors.push_back(err("Succeed", d->message));
              return;
            }
            Res<lf::Family> mt = lf::check_term(p.sig, delta, ins.proof);
            if (!mt.ok()) {
              result.errors.push_back(err("Succeed", mt.diag().message));
              return;
            }
            if (!lf::alpha_equal(mt.value(), ins.proof_type)) {
              result.errors.push_back(err(
                  "Succeed", "proof term " + lf::show(ins.proof) +
                                 " has type " + lf::show(mt.value()) +
                                 ", annotation says " +
                                 lf::show(ins.proof_type)));
              return;
            }
          }
          terminated = true;
          break;
        }
      }
    }
    if (!terminated)
      result.errors.push_back(
          err("block", "block must end in jmp or succeed"));
  }

  static void collect_type_fv(const MachineType& t, std::set<std::string>& out) {
    switch (t.tag) {
      case MachineType::Tag::Sing:
        lf::free_vars(t.term, out);
        break;
      case MachineType::Tag::Atomic:
        break;
      case MachineType::Tag::Cont: {
        std::set<std::string> inner;
        for (auto& par : t.params) lf::free_vars(par.type, inner);
        for (auto& e : t.rf) collect_type_fv(e.type, inner);
        for (auto& par : t.params) inner.erase(par.name);
        out.insert(inner.begin(), inner.end());
        break;
      }
      case MachineType::Tag::Tuple:
        for (auto& e : t.elems) collect_type_fv(e, out);
        break;
    }
  }
};

// Well-formedness of a machine type in a context.
std::optional<Diag> mtype_wf(const Program& p, const lf::Context& ctx,
                             const MachineType& t) {
  switch (t.tag) {
    case MachineType::Tag::Sing: {
      if (!p.dependent)
        return Diag{Severity::Error, "singleton types do not survive erasure"};
      if (!p.sig.is_data_type(t.atom))
        return Diag{Severity::Error,
                    "\"" + t.atom + "\" is not a declared data type"};
      Res<lf::Family> mt = lf::check_term(p.sig, ctx, t.term);
      if (!mt.ok()) return mt.diag();
      if (!lf::alpha_equal(mt.value(), lf::atom(t.atom)))
        return Diag{Severity::Error, "singleton term " + lf::show(t.term) +
                                         " has type " + lf::show(mt.value()) +
                                         ", not " + t.atom};
      return std::nullopt;
    }
    case MachineType::Tag::Atomic: {
      if (p.dependent)
        return Diag{Severity::Error,
                    "bare atomic types are the erased form of singletons"};
      if (!p.sig.is_data_type(t.atom))
        return Diag{Severity::Error,
                    "\"" + t.atom + "\" is not a declared data type"};
      return std::nullopt;
    }
    case MachineType::Tag::Cont: {
      lf::Context ext = ctx;
      for (auto& par : t.params) {
        if (!p.dependent)
          return Diag{Severity::Error,
                      "continuation parameters do not survive erasure"};
        if (auto d = lf::check_family(p.sig, ext, par.type)) return d;
        if (!par.type.atomic())
          return Diag{Severity::Error,
                      "continuation parameters must have atomic type"};
        if (ext.contains(par.name))
          return Diag{Severity::Error,
                      "parameter \"" + par.name + "\" shadows a variable"};
        ext.push(par.name, par.type);
      }
      for (auto& e : t.rf)
        if (auto d = mtype_wf(p, ext, e.type)) return d;
      return std::nullopt;
    }
    case MachineType::Tag::Tuple: {
      for (auto& e : t.elems)
        if (auto d = mtype_wf(p, ctx, e)) return d;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

Res<MachineType> check_operand(const Program& p,
                               const std::map<std::string, MachineType>& xi,
                               const lf::Context& delta,
                               const RegFileType& gamma, const Operand& op) {
  CheckResult scratch;
  BlockChecker bc{p, xi, "<operand>", scratch};
  bc.delta = delta;
  bc.gamma = gamma;
  return bc.operand_type(op);
}

CheckResult check_block(const Program& p,
                        const std::map<std::string, MachineType>& xi,
                        const std::string& label, const lf::Context& delta,
                        const RegFileType& gamma,
                        const std::vector<Instruction>& body) {
  CheckResult result;
  BlockChecker bc{p, xi, label, result};
  bc.delta = delta;
  bc.gamma = gamma;
  bc.instrs = body;
  bc.run();
  return result;
}

CheckResult check_program(const Program& p) {
  CheckResult result;
  auto program_error = [&](const std::string& rule, const std::string& msg) {
    Diag d{Severity::Error, msg};
    d.rule = rule;
    result.errors.push_back(d);
  };

  if (auto d = lf::check_signature(p.sig)) {
    Diag e = *d;
    e.rule = "signature";
    result.errors.push_back(e);
    return result;
  }

  // Code-section type: derived from annotations, cross-checked against the
  // xi header. Mutual recursion is resolved by collecting all labels first.
  std::map<std::string, MachineType> xi;
  for (auto& [l, cv] : p.code) {
    if (xi.count(l)) {
      program_error("Code-Sec", "duplicate code label \"" + l + "\"");
      return result;
    }
    xi[l] = code_type(cv);
  }
  for (auto& [l, t] : p.xi) {
    auto it = xi.find(l);
    if (it == xi.end()) {
      program_error("Code-Sec",
                    "xi header declares \"" + l + "\" but no code value has "
                    "that label");
      return result;
    }
    if (!alpha_equal(t, it->second)) {
      program_error("Code-Sec", "xi header type for \"" + l +
                                    "\" disagrees with the code value "
                                    "annotation");
      return result;
    }
  }
  for (auto& [l, t] : xi) {
    if (!p.xi_find(l)) {
      program_error("Code-Sec",
                    "code value \"" + l + "\" is missing from the xi header");
      return result;
    }
    lf::Context empty;
    if (auto d = mtype_wf(p, empty, t)) {
      Diag e = *d;
      e.label = l;
      e.rule = e.rule.empty() ? "Code" : e.rule;
      result.errors.push_back(e);
      return result;
    }
  }

  const MachineType* entry_t = nullptr;
  auto it = xi.find(p.entry);
  if (it == xi.end()) {
    program_error("Code-Sec", "query entry \"" + p.entry + "\" is not defined");
    return result;
  }
  entry_t = &it->second;
  if (!entry_t->params.empty() || !entry_t->rf.empty()) {
    program_error("Code-Sec",
                  "query entry must have type `not {}`, got " + show(*entry_t));
    return result;
  }

  for (auto& [l, cv] : p.code) {
    lf::Context delta;
    for (auto& par : cv.params) delta.push(par.name, par.type);
    CheckResult r = check_block(p, xi, l, delta, cv.rf, cv.body);
    result.errors.insert(result.errors.end(), r.errors.begin(),
                         r.errors.end());
    result.warnings.insert(result.warnings.end(), r.warnings.begin(),
                           r.warnings.end());
  }
  return result;
}

}  // namespace twam
