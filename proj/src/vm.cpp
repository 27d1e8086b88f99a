#include "twam/vm.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include "twam/checker.hpp"
#include "twam/store.hpp"

namespace twam {

namespace {

using Op = Instruction::Op;

struct VmError {
  Outcome::Tag tag;
  std::string detail;
};

struct Machine {
  const Program& p;
  const VmOptions& opts;

  Store store;
  std::map<std::string, Word> regs;

  std::vector<Instruction> block;
  size_t ip = 0;
  std::string cur_label;

  enum class Mode { Normal, Read, Write, TupleWrite } mode = Mode::Normal;
  // read spine
  std::vector<size_t> pending;
  // write spine
  std::string w_con;
  size_t w_dest = 0;
  std::vector<size_t> w_built;
  // tuple spine
  std::string tw_reg;
  int tw_remaining = 0;
  std::vector<Word> tw_built;

  RunStats stats;
  bool in_entry = true;
  std::vector<std::pair<std::string, size_t>> answer_cells;

  // checked mode
  bool checked = false;
  lf::Context delta;
  std::vector<std::pair<std::string, size_t>> mu;  // variable -> location
  RegFileType gamma;
  std::map<std::string, MachineType> xi;
  uint64_t name_counter = 0;
  std::vector<lf::Term> read_expected;  // terms each pending location encodes
  lf::Term w_dest_term;                 // destination singleton term
  std::vector<lf::Term> w_built_terms;
  std::vector<MachineType> tw_types;
  bool heap_dirty = false;  // a binding happened during this step

  Machine(const Program& prog, const VmOptions& o) : p(prog), opts(o) {
    checked = o.checked;
    if (checked)
      for (auto& [l, cv] : p.code) xi[l] = code_type(cv);
  }

  [[noreturn]] void stuck(const std::string& msg) {
    throw VmError{Outcome::Tag::Stuck,
                  "stuck at " + cur_label + " instruction " +
                      std::to_string(ip + 1) + ": " + msg};
  }

  [[noreturn]] void violation(const std::string& msg) {
    throw VmError{Outcome::Tag::InvariantViolation,
                  "invariant violation at " + cur_label + " instruction " +
                      std::to_string(ip + 1) + ": " + msg};
  }

  // ---- registers -------------------------------------------------------

  const Word& reg(const std::string& r) {
    auto it = regs.find(r);
    if (it == regs.end()) stuck("register \"" + r + "\" holds no value");
    return it->second;
  }

  size_t reg_loc(const std::string& r) {
    const Word& w = reg(r);
    if (w.is_code) stuck("register \"" + r + "\" holds a code label");
    if (!w.binders.empty() || !w.args.empty())
      stuck("register \"" + r + "\" holds a non-location word");
    return w.loc;
  }

  // ---- checked-mode bookkeeping -----------------------------------------

  std::string runtime_fresh(const std::string& base) {
    return base + "@" + std::to_string(++name_counter);
  }

  void delta_remove(const std::string& x) {
    for (size_t i = 0; i < delta.entries.size(); ++i)
      if (delta.entries[i].name == x) {
        delta.entries.erase(delta.entries.begin() + i);
        break;
      }
    for (size_t i = 0; i < mu.size(); ++i)
      if (mu[i].first == x) {
        mu.erase(mu.begin() + i);
        break;
      }
  }

  void note_bound_vars(const std::vector<std::string>& vars) {
    if (!checked) return;
    for (auto& x : vars) delta_remove(x);
  }

  void subst_rest(const lf::Subst& s, size_t from) {
    block = subst_instructions(s, std::move(block), from);
  }

  static void word_subst(const lf::Subst& s, Word& w) {
    lf::Subst inner;
    w.binders = lf::subst_telescope(s, w.binders, inner);
    for (auto& m : w.args) m = lf::apply(inner, m);
  }

  // A most-general unifier acts on the live state: register and heap words
  // carry LF terms, closures carry the static arguments of their label.
  // Trail frames are exempt: backtracking restores the annotations they
  // were pushed with (see the snapshot fields of TrailFrame).
  void apply_state_subst(const lf::Subst& s) {
    if (s.empty()) return;
    gamma.entries = twam::apply(s, gamma.entries);
    subst_rest(s, ip + 1);
    for (auto& m : read_expected) m = lf::apply(s, m);
    w_dest_term = lf::apply(s, w_dest_term);
    for (auto& m : w_built_terms) m = lf::apply(s, m);
    for (auto& t : tw_types) t = twam::apply(s, t);
    for (auto& [r, w] : regs) word_subst(s, w);
    for (auto& hv : store.heap) {
      if (hv.tag == HeapValue::Tag::Closure) {
        word_subst(s, hv.env);
        for (auto& m : hv.label_args) m = lf::apply(s, m);
      } else if (hv.tag == HeapValue::Tag::Tuple) {
        for (auto& w : hv.elems) word_subst(s, w);
      }
    }
  }

  const MachineType* gamma_find(const std::string& r) const {
    return gamma.find(r);
  }

  lf::Term singleton_term(const std::string& r) {
    const MachineType* t = gamma_find(r);
    if (!t || t->tag != MachineType::Tag::Sing)
      violation("register \"" + r + "\" is not singleton-typed");
    return t->term;
  }

  // Static/dynamic agreement for one unification step.
  void checked_unify(const lf::Term& m1, const lf::Term& m2, bool dyn_ok) {
    lf::UnifyResult u = lf::static_unify(delta, m1, m2);
    if (u.bottom == dyn_ok)
      violation("static unification " + lf::show(m1) + " against " +
                lf::show(m2) + (u.bottom ? " fails" : " succeeds") +
                " but runtime unification " +
                (dyn_ok ? "succeeded" : "failed"));
    if (dyn_ok) apply_state_subst(u.mgu);
  }

  void enter_block(const std::string& label,
                   const std::vector<lf::Term>& args) {
    const CodeValue* cv = p.find(label);
    if (!cv) stuck("jump to unknown label \"" + label + "\"");
    cur_label = label;
    block = cv->body;
    ip = 0;
    if (checked) {
      if (args.size() != cv->params.size())
        violation("label \"" + label + "\" expects " +
                  std::to_string(cv->params.size()) +
                  " LF argument(s), got " + std::to_string(args.size()));
      lf::Subst s;
      for (size_t i = 0; i < args.size(); ++i)
        s.items[cv->params[i].name] = args[i];
      if (!s.empty()) block = subst_instructions(s, std::move(block), 0);
      gamma.entries = twam::apply(s, cv->rf.entries);
    }
  }

  // ---- operand evaluation ------------------------------------------------

  Word eval_operand(const Operand& op) {
    Word w;
    if (op.base == Operand::Base::Label) {
      w.is_code = true;
      w.label = op.name;
    } else {
      w = reg(op.name);
    }
    // apply arguments, beta-reducing under lambda binders; runtime binder
    // names are fresh, so naive substitution cannot capture
    for (auto& m : op.args) {
      if (!w.binders.empty()) {
        lf::Subst s;
        s.items[w.binders.front().name] = m;
        w.binders.erase(w.binders.begin());
        for (auto& a : w.args) a = lf::apply(s, a);
      } else {
        w.args.push_back(m);
      }
    }
    if (!op.binders.empty())
      w.binders.insert(w.binders.begin(), op.binders.begin(),
                       op.binders.end());
    return w;
  }

  // ---- backtracking --------------------------------------------------------

  // Restores the top trail frame and resumes at its failure continuation;
  // false when the trail is empty (query failure).
  bool backtrack() {
    std::optional<TrailFrame> frame = store.pop_and_unwind();
    if (!frame) return false;
    ++stats.backtracks;
    if (checked) {
      for (auto& rec : frame->records) {
        delta.push(rec.var_name, lf::atom(rec.type_name));
        mu.emplace_back(rec.var_name, rec.loc);
      }
    }
    regs.clear();
    regs["env"] = frame->env;
    mode = Mode::Normal;
    pending.clear();
    read_expected.clear();
    w_built.clear();
    w_built_terms.clear();
    tw_built.clear();
    tw_types.clear();
    enter_block(frame->label, frame->label_args);
    heap_dirty = true;
    return true;
  }

  // ---- invariant assertions (checked mode) ---------------------------------

  void assert_acyclic() {
    std::vector<int> color(store.heap.size(), 0);
    std::vector<std::pair<size_t, size_t>> stack;
    auto children = [&](size_t l) {
      std::vector<size_t> out;
      const HeapValue& v = store.heap[l];
      switch (v.tag) {
        case HeapValue::Tag::Bound:
          out.push_back(v.target);
          break;
        case HeapValue::Tag::Structure:
          out = v.str_args;
          break;
        case HeapValue::Tag::Closure:
          if (!v.env.is_code) out.push_back(v.env.loc);
          break;
        case HeapValue::Tag::Tuple:
          for (auto& w : v.elems)
            if (!w.is_code) out.push_back(w.loc);
          break;
        default:
          break;
      }
      return out;
    };
    for (size_t root = 0; root < store.heap.size(); ++root) {
      if (color[root]) continue;
      stack.emplace_back(root, 0);
      color[root] = 1;
      while (!stack.empty()) {
        auto& [node, next] = stack.back();
        auto kids = children(node);
        if (next >= kids.size()) {
          color[node] = 2;
          stack.pop_back();
          continue;
        }
        size_t k = kids[next++];
        if (color[k] == 1)
          violation("heap cycle through location " + std::to_string(k));
        if (color[k] == 0) {
          color[k] = 1;
          stack.emplace_back(k, 0);
        }
      }
    }
  }

  void assert_mu() {
    std::map<std::string, size_t> by_var;
    for (auto& [x, l] : mu) {
      if (by_var.count(x)) violation("duplicate mapping for variable " + x);
      by_var[x] = l;
    }
    size_t free_cells = 0;
    for (size_t l = 0; l < store.heap.size(); ++l) {
      if (store.heap[l].tag != HeapValue::Tag::Free) continue;
      ++free_cells;
      auto it = by_var.find(store.heap[l].var_name);
      if (it == by_var.end())
        violation("free cell " + std::to_string(l) + " (variable " +
                  store.heap[l].var_name + ") has no mapping entry");
      if (it->second != l)
        violation("variable " + store.heap[l].var_name +
                  " is mapped to a different location");
      const lf::Family* a = delta.find(store.heap[l].var_name);
      if (!a)
        violation("free cell variable " + store.heap[l].var_name +
                  " is not in the LF context");
      if (a->head != store.heap[l].type_name)
        violation("free cell variable " + store.heap[l].var_name +
                  " has context type " + a->head + " but cell type " +
                  store.heap[l].type_name);
    }
    if (free_cells != mu.size() || delta.size() != mu.size())
      violation("context, mapping, and free cells disagree: |delta|=" +
                std::to_string(delta.size()) +
                " |mu|=" + std::to_string(mu.size()) +
                " free=" + std::to_string(free_cells));
  }

  void assert_trail() {
    for (auto& frame : store.trail)
      for (auto& rec : frame.records)
        if (store.heap[rec.loc].tag == HeapValue::Tag::Free)
          violation("trail records location " + std::to_string(rec.loc) +
                    " which is already free");
  }

  bool word_conforms(const Word& w, const MachineType& t) {
    switch (t.tag) {
      case MachineType::Tag::Sing: {
        if (w.is_code || !w.binders.empty() || !w.args.empty()) return false;
        return store.encode(w.loc) == t.term;
      }
      case MachineType::Tag::Atomic:
        return !w.is_code;
      case MachineType::Tag::Cont: {
        if (w.is_code) return xi.count(w.label) != 0;
        if (!w.binders.empty()) return true;  // lambda-wrapped continuation
        return w.loc < store.heap.size() &&
               store.heap[w.loc].tag == HeapValue::Tag::Closure;
      }
      case MachineType::Tag::Tuple: {
        if (w.is_code) return false;
        const HeapValue& v = store.heap[w.loc];
        if (v.tag != HeapValue::Tag::Tuple ||
            v.elems.size() != t.elems.size())
          return false;
        for (size_t i = 0; i < t.elems.size(); ++i)
          if (!word_conforms(v.elems[i], t.elems[i])) return false;
        return true;
      }
    }
    return false;
  }

  void assert_registers() {
    for (auto& e : gamma.entries) {
      auto it = regs.find(e.reg);
      if (it == regs.end())
        violation("register \"" + e.reg +
                  "\" required by the register file type holds no value");
      if (!word_conforms(it->second, e.type))
        violation("register \"" + e.reg + "\" does not conform to " +
                  show(e.type));
    }
  }

  void assert_spine() {
    if (mode == Mode::Read) {
      if (pending.size() != read_expected.size())
        violation("read spine bookkeeping out of sync");
      for (size_t i = 0; i < pending.size(); ++i)
        if (store.encode(pending[i]) != read_expected[i])
          violation("read spine argument " + std::to_string(i + 1) +
                    " encodes " + lf::show(store.encode(pending[i])) +
                    ", expected " + lf::show(read_expected[i]));
    } else if (mode == Mode::Write) {
      if (w_built.size() != w_built_terms.size())
        violation("write spine bookkeeping out of sync");
      for (size_t i = 0; i < w_built.size(); ++i)
        if (store.encode(w_built[i]) != w_built_terms[i])
          violation("write spine argument " + std::to_string(i + 1) +
                    " encodes " + lf::show(store.encode(w_built[i])) +
                    ", expected " + lf::show(w_built_terms[i]));
    } else if (mode == Mode::TupleWrite) {
      if (tw_built.size() != tw_types.size())
        violation("tuple spine bookkeeping out of sync");
    }
  }

  void assert_invariants() {
    if (heap_dirty) assert_acyclic();
    assert_mu();
    assert_trail();
    assert_registers();
    assert_spine();
  }

  // ---- stepping --------------------------------------------------------------

  enum class StepResult { Ran, Done, Fails };

  // By value: substitutions and binder renames reallocate `block` while an
  // instruction is in flight.
  Instruction fetch() {
    if (ip >= block.size()) stuck("fell off the end of the basic block");
    return block[ip];
  }

  StepResult bt_or_fail(std::ostream* tr, const char* rule) {
    if (tr) *tr << rule << " -> backtrack";
    if (!backtrack()) {
      if (tr) *tr << " | trail empty: query fails";
      return StepResult::Fails;
    }
    if (tr) *tr << " | resume " << cur_label;
    return StepResult::Ran;
  }

  void finish_step(std::ostream* tr) {
    if (tr) *tr << "\n";
    if (checked) assert_invariants();
  }

  StepResult step() {
    std::ostream* tr = opts.trace;
    heap_dirty = false;
    if (tr) *tr << stats.steps + 1 << "  ";

    // spine-completion micro-steps consume no instruction
    if (mode == Mode::Read && pending.empty()) {
      mode = Mode::Normal;
      read_expected.clear();
      if (tr) *tr << "Read-End";
      finish_step(tr);
      return StepResult::Ran;
    }
    if (mode == Mode::Write &&
        static_cast<int>(w_built.size()) == p.sig.arity(w_con)) {
      return write_complete(tr);
    }
    if (mode == Mode::TupleWrite && tw_remaining == 0) {
      size_t l = store.alloc(hv_tuple(tw_built));
      ++stats.tuples_allocated;
      Word w;
      w.loc = l;
      regs[tw_reg] = w;
      if (checked) gamma.set(tw_reg, tuple(tw_types));
      mode = Mode::Normal;
      tw_built.clear();
      tw_types.clear();
      if (tr) *tr << "TWrite -> " << tw_reg << " := l" << l;
      finish_step(tr);
      return StepResult::Ran;
    }

    Instruction ins = fetch();
    if (tr) *tr << show(ins, p.dependent);

    switch (mode) {
      case Mode::Normal:
        return step_normal(ins, tr);
      case Mode::Read:
        return step_read(ins, tr);
      case Mode::Write:
        return step_write(ins, tr);
      case Mode::TupleWrite:
        return step_tuple(ins, tr);
    }
    stuck("unknown machine mode");
  }

  StepResult step_normal(const Instruction& ins0, std::ostream* tr) {
    switch (ins0.op) {
      case Op::PutVar: {
        std::string xname;
        if (checked) {
          xname = runtime_fresh(ins0.bind_var.empty() ? "x" : ins0.bind_var);
          lf::Subst ren;
          ren.items[ins0.bind_var] = lf::var(xname);
          subst_rest(ren, ip + 1);
        }
        size_t l = store.alloc(hv_free(ins0.bind_type, xname));
        Word w;
        w.loc = l;
        regs[ins0.r1] = w;
        if (checked) {
          delta.push(xname, lf::atom(ins0.bind_type));
          mu.emplace_back(xname, l);
          gamma.set(ins0.r1, sing(lf::var(xname), ins0.bind_type));
        }
        if (tr) *tr << " | H[l" << l << " <- free[" << ins0.bind_type << "]] "
                    << ins0.r1 << " := l" << l;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::GetVal: {
        size_t l1 = reg_loc(ins0.r1);
        size_t l2 = reg_loc(ins0.r2);
        lf::Term m1, m2;
        if (checked) {
          m1 = singleton_term(ins0.r1);
          m2 = singleton_term(ins0.r2);
        }
        Store::UnifyOutcome u = store.unify(l1, l2);
        ++stats.unify_calls;
        if (u.tag == Store::UnifyOutcome::Tag::NonTerm)
          stuck("unification reached a non Prolog-term heap value");
        note_bound_vars(u.bound_vars);
        heap_dirty = true;
        if (checked) checked_unify(m1, m2, u.ok());
        if (!u.ok()) {
          StepResult r = bt_or_fail(tr, "GetVal");
          finish_step(tr);
          return r;
        }
        if (tr) *tr << " | unified l" << l1 << " ~ l" << l2;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::PutStr: {
        int arity = p.sig.arity(ins0.con);
        if (arity < 0) stuck("unknown constructor \"" + ins0.con + "\"");
        const lf::SigEntry* ce = p.sig.find(ins0.con);
        std::string result_ty = ce->type.head;
        std::string xname;
        if (checked) xname = runtime_fresh("w");
        size_t l = store.alloc(hv_free(result_ty, xname));
        Word w;
        w.loc = l;
        regs[ins0.r1] = w;
        if (checked) {
          delta.push(xname, lf::atom(result_ty));
          mu.emplace_back(xname, l);
          gamma.set(ins0.r1, sing(lf::var(xname), result_ty));
          w_dest_term = lf::var(xname);
          w_built_terms.clear();
        }
        mode = Mode::Write;
        w_con = ins0.con;
        w_dest = l;
        w_built.clear();
        if (tr) *tr << " | H[l" << l << " <- free[" << result_ty << "]] "
                    << ins0.r1 << " := l" << l << " (write " << ins0.con
                    << ")";
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::GetStr: {
        int arity = p.sig.arity(ins0.con);
        if (arity < 0) stuck("unknown constructor \"" + ins0.con + "\"");
        size_t l = store.deref(reg_loc(ins0.r1));
        const HeapValue& v = store.heap[l];
        if (v.tag == HeapValue::Tag::Free) {
          if (checked) {
            lf::Term m = singleton_term(ins0.r1);
            if (!m.is_var())
              violation("get_str write mode on a non-variable singleton");
            w_dest_term = m;
            w_built_terms.clear();
          }
          mode = Mode::Write;
          w_con = ins0.con;
          w_dest = l;
          w_built.clear();
          if (tr) *tr << " | write mode on l" << l;
          ++ip;
          finish_step(tr);
          return StepResult::Ran;
        }
        if (v.tag == HeapValue::Tag::Structure) {
          if (v.con == ins0.con &&
              static_cast<int>(v.str_args.size()) == arity) {
            if (checked) {
              lf::Term m = singleton_term(ins0.r1);
              if (m.is_var() || m.name != ins0.con)
                violation("read-mode singleton does not start with " +
                          ins0.con);
              read_expected = m.args;
            }
            mode = Mode::Read;
            pending = v.str_args;
            if (tr) *tr << " | read mode on l" << l;
            ++ip;
            finish_step(tr);
            return StepResult::Ran;
          }
          if (checked) {
            lf::Term m = singleton_term(ins0.r1);
            if (m.is_var() || m.name == ins0.con)
              violation("runtime head clash but the singleton does not "
                        "disagree with " +
                        ins0.con);
          }
          StepResult r = bt_or_fail(tr, "GetStr");
          finish_step(tr);
          return r;
        }
        stuck("get_str on a non Prolog-term heap value");
      }
      case Op::Mov: {
        Word w = eval_operand(ins0.operand);
        if (checked) {
          Res<MachineType> t =
              check_operand(p, xi, delta, gamma, ins0.operand);
          if (!t.ok()) violation("mov operand: " + t.diag().message);
          gamma.set(ins0.r1, t.value());
        }
        regs[ins0.r1] = std::move(w);
        if (tr) *tr << " | " << ins0.r1 << " updated";
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::Jmp: {
        Word w = eval_operand(ins0.operand);
        if (checked) {
          Res<MachineType> t =
              check_operand(p, xi, delta, gamma, ins0.operand);
          if (!t.ok()) violation("jmp operand: " + t.diag().message);
          if (t.value().tag != MachineType::Tag::Cont ||
              !t.value().params.empty())
            violation("jmp target is not a fully applied continuation");
        }
        if (in_entry) {
          for (auto& [v, r] : p.query_vars) {
            auto it = regs.find(r);
            if (it != regs.end() && !it->second.is_code)
              answer_cells.emplace_back(v, it->second.loc);
          }
          in_entry = false;
        }
        if (!w.binders.empty()) stuck("jmp target is not fully applied");
        if (w.is_code) {
          if (tr) *tr << " | enter " << w.label;
          enter_block(w.label, w.args);
          finish_step(tr);
          return StepResult::Ran;
        }
        const HeapValue& v = store.heap[w.loc];
        if (v.tag != HeapValue::Tag::Closure)
          stuck("jmp through a register that does not hold a continuation");
        std::vector<lf::Term> full_args = v.label_args;
        full_args.insert(full_args.end(), w.args.begin(), w.args.end());
        regs["env"] = v.env;
        if (tr) *tr << " | enter closure " << v.label;
        enter_block(v.label, full_args);
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::Close: {
        Word env = reg(ins0.r2);
        if (ins0.operand.base != Operand::Base::Label)
          stuck("close target must be a code label");
        MachineType ct;
        if (checked) {
          Res<MachineType> t =
              check_operand(p, xi, delta, gamma, ins0.operand);
          if (!t.ok()) violation("close operand: " + t.diag().message);
          ct = t.value();
          if (ct.tag != MachineType::Tag::Cont)
            violation("close target is not a continuation");
          std::vector<RegEntry> rf;
          for (auto& e : ct.rf)
            if (e.reg != "env") rf.push_back(e);
          ct = cont(ct.params, std::move(rf));
        }
        size_t l = store.alloc(
            hv_closure(env, ins0.operand.name, ins0.operand.args));
        ++stats.closures_allocated;
        Word w;
        w.loc = l;
        regs[ins0.r1] = w;
        if (checked) gamma.set(ins0.r1, ct);
        if (tr) *tr << " | H[l" << l << " <- close(" << ins0.operand.name
                    << ")] " << ins0.r1 << " := l" << l;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::PushBt: {
        if (ins0.operand.base != Operand::Base::Label)
          stuck("push_bt target must be a code label");
        TrailFrame f;
        f.env = reg(ins0.r1);
        f.label = ins0.operand.name;
        f.label_args = ins0.operand.args;
        if (checked) {
          for (size_t l = 0; l < store.heap.size(); ++l) {
            if (store.heap[l].tag == HeapValue::Tag::Closure)
              f.closure_snapshot.emplace_back(l, store.heap[l].label_args);
            else if (store.heap[l].tag == HeapValue::Tag::Tuple)
              f.tuple_snapshot.emplace_back(l, store.heap[l].elems);
          }
        }
        store.trail.push_back(std::move(f));
        if (tr) *tr << " | T <- (eps, " << ins0.operand.name << ")";
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::PutTuple: {
        mode = Mode::TupleWrite;
        tw_reg = ins0.r1;
        tw_remaining = ins0.num;
        tw_built.clear();
        tw_types.clear();
        if (tr) *tr << " | tuple write, n=" << ins0.num;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::Proj: {
        size_t l = reg_loc(ins0.r2);
        const HeapValue& v = store.heap[l];
        if (v.tag != HeapValue::Tag::Tuple)
          stuck("proj source is not a tuple");
        if (ins0.num < 1 || ins0.num > static_cast<int>(v.elems.size()))
          stuck("proj index out of range");
        if (checked) {
          const MachineType* t = gamma_find(ins0.r2);
          if (!t || t->tag != MachineType::Tag::Tuple ||
              ins0.num > static_cast<int>(t->elems.size()))
            violation("proj source register is not tuple-typed");
          gamma.set(ins0.r1, t->elems[ins0.num - 1]);
        }
        regs[ins0.r1] = v.elems[ins0.num - 1];
        if (tr) *tr << " | " << ins0.r1 << " := elem " << ins0.num;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::Succeed: {
        if (checked) {
          Res<lf::Family> t = lf::check_term(p.sig, delta, ins0.proof);
          if (!t.ok()) violation("succeed proof: " + t.diag().message);
          if (!lf::alpha_equal(t.value(), ins0.proof_type))
            violation("succeed proof term has type " + lf::show(t.value()) +
                      ", annotation says " + lf::show(ins0.proof_type));
        }
        if (tr) *tr << " | done";
        finish_step(tr);
        return StepResult::Done;
      }
      case Op::UnifyVar:
      case Op::UnifyVal:
        stuck("spinal instruction outside a spine");
      case Op::SetVal:
        stuck("set_val outside a tuple spine");
    }
    stuck("unhandled instruction");
  }

  StepResult step_read(const Instruction& ins0, std::ostream* tr) {
    if (pending.empty()) stuck("read spine with no pending arguments");
    size_t next = pending.front();
    switch (ins0.op) {
      case Op::UnifyVar: {
        pending.erase(pending.begin());
        regs[ins0.r1] = Word{false, next, "", {}, {}};
        if (checked) {
          lf::Term expected = read_expected.front();
          read_expected.erase(read_expected.begin());
          gamma.set(ins0.r1, sing(expected, ins0.bind_type));
          lf::Subst s;
          s.items[ins0.bind_var] = expected;
          subst_rest(s, ip + 1);
        }
        if (tr) *tr << " | " << ins0.r1 << " := l" << next;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::UnifyVal: {
        size_t rl = reg_loc(ins0.r1);
        lf::Term m1, m2;
        if (checked) {
          m1 = read_expected.front();
          m2 = singleton_term(ins0.r1);
        }
        pending.erase(pending.begin());
        if (checked) read_expected.erase(read_expected.begin());
        Store::UnifyOutcome u = store.unify(next, rl);
        ++stats.unify_calls;
        if (u.tag == Store::UnifyOutcome::Tag::NonTerm)
          stuck("unification reached a non Prolog-term heap value");
        note_bound_vars(u.bound_vars);
        heap_dirty = true;
        if (checked) checked_unify(m1, m2, u.ok());
        if (!u.ok()) {
          mode = Mode::Normal;
          pending.clear();
          read_expected.clear();
          StepResult r = bt_or_fail(tr, "UnifyVal");
          finish_step(tr);
          return r;
        }
        if (tr) *tr << " | unified l" << next << " ~ l" << rl;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      default:
        stuck("only unify_var/unify_val may appear in a read spine");
    }
  }

  StepResult step_write(const Instruction& ins0, std::ostream* tr) {
    switch (ins0.op) {
      case Op::UnifyVar: {
        std::string xname;
        if (checked) {
          xname = runtime_fresh(ins0.bind_var.empty() ? "x" : ins0.bind_var);
          lf::Subst ren;
          ren.items[ins0.bind_var] = lf::var(xname);
          subst_rest(ren, ip + 1);
        }
        size_t l = store.alloc(hv_free(ins0.bind_type, xname));
        regs[ins0.r1] = Word{false, l, "", {}, {}};
        w_built.push_back(l);
        if (checked) {
          delta.push(xname, lf::atom(ins0.bind_type));
          mu.emplace_back(xname, l);
          gamma.set(ins0.r1, sing(lf::var(xname), ins0.bind_type));
          w_built_terms.push_back(lf::var(xname));
        }
        if (tr) *tr << " | H[l" << l << " <- free[" << ins0.bind_type
                    << "]] " << ins0.r1 << " := l" << l;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      case Op::UnifyVal: {
        size_t rl = reg_loc(ins0.r1);
        w_built.push_back(rl);
        if (checked) w_built_terms.push_back(singleton_term(ins0.r1));
        if (tr) *tr << " | arg := l" << rl;
        ++ip;
        finish_step(tr);
        return StepResult::Ran;
      }
      default:
        stuck("only unify_var/unify_val may appear in a write spine");
    }
  }

  StepResult write_complete(std::ostream* tr) {
    // occurs check against every built argument, then bind the destination
    size_t dest = store.deref(w_dest);
    if (store.heap[dest].tag != HeapValue::Tag::Free)
      stuck("write spine destination is no longer free");
    bool occurs_fail = false;
    for (size_t a : w_built)
      if (store.occurs(dest, a)) occurs_fail = true;
    if (checked) {
      lf::UnifyResult u = lf::static_unify(delta, w_dest_term,
                                           lf::con(w_con, w_built_terms));
      if (u.bottom != occurs_fail)
        violation(
            "write-spine occurs check disagrees with static unification");
      if (!occurs_fail) {
        std::string var = store.bind_cell(dest, hv_structure(w_con, w_built));
        delta_remove(var);
        heap_dirty = true;
        mode = Mode::Normal;
        apply_state_subst(u.mgu);
        w_built.clear();
        w_built_terms.clear();
        if (tr) *tr << "Write -> H[l" << dest << " <- " << w_con << "<...>]";
        finish_step(tr);
        return StepResult::Ran;
      }
    } else if (!occurs_fail) {
      store.bind_cell(dest, hv_structure(w_con, w_built));
      heap_dirty = true;
      mode = Mode::Normal;
      w_built.clear();
      if (tr) *tr << "Write -> H[l" << dest << " <- " << w_con << "<...>]";
      finish_step(tr);
      return StepResult::Ran;
    }
    mode = Mode::Normal;
    w_built.clear();
    w_built_terms.clear();
    StepResult r = bt_or_fail(tr, "Write-BT");
    finish_step(tr);
    return r;
  }

  StepResult step_tuple(const Instruction& ins0, std::ostream* tr) {
    if (ins0.op != Op::SetVal)
      stuck("only set_val may appear in a tuple spine");
    if (tw_remaining <= 0) stuck("tuple spine overflow");
    Word w = reg(ins0.r1);
    tw_built.push_back(w);
    if (checked) {
      const MachineType* t = gamma_find(ins0.r1);
      if (!t) violation("set_val source register has no type");
      tw_types.push_back(*t);
    }
    --tw_remaining;
    if (tr) *tr << " | elem " << tw_built.size();
    ++ip;
    finish_step(tr);
    return StepResult::Ran;
  }
};

}  // namespace

Outcome run(const Program& p, const VmOptions& opts) {
  Outcome out;
  if (opts.checked && !p.dependent) {
    out.tag = Outcome::Tag::Stuck;
    out.detail = "checked execution requires an annotated program";
    return out;
  }
  Machine m(p, opts);
  try {
    m.enter_block(p.entry, {});
    while (true) {
      if (m.stats.steps >= opts.fuel) {
        out.tag = Outcome::Tag::OutOfFuel;
        out.stats = m.stats;
        out.stats.cells_allocated = m.store.cells_allocated;
        out.detail = "fuel exhausted after " + std::to_string(m.stats.steps) +
                     " step(s)";
        return out;
      }
      Machine::StepResult r = m.step();
      ++m.stats.steps;
      if (r == Machine::StepResult::Done) {
        out.tag = Outcome::Tag::Success;
        std::map<size_t, int> anon;
        for (auto& [v, l] : m.answer_cells)
          out.answers.emplace_back(v, m.store.render(l, anon));
        out.stats = m.stats;
        out.stats.cells_allocated = m.store.cells_allocated;
        return out;
      }
      if (r == Machine::StepResult::Fails) {
        out.tag = Outcome::Tag::Failure;
        out.stats = m.stats;
        out.stats.cells_allocated = m.store.cells_allocated;
        return out;
      }
    }
  } catch (const VmError& e) {
    out.tag = e.tag;
    out.detail = e.detail;
    out.stats = m.stats;
    out.stats.cells_allocated = m.store.cells_allocated;
    return out;
  }
}

}  // namespace twam
