#include "twam/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "twam/ir_text.hpp"

namespace twam::pipeline {

// ---------------------------------------------------------------- flattening

namespace {

// Bottom-up flattening of a constructed argument; children first, so every
// constraint's arguments already have definitions.
std::string flat_build(const front::ProgramAst& ast, FlatClause& out,
                       int& counter, const front::SrcTerm& t) {
  if (t.is_var) return t.name;
  const front::ConDecl* c = ast.find_con(t.name);
  std::vector<std::string> kids;
  for (auto& a : t.args) kids.push_back(flat_build(ast, out, counter, a));
  std::string v;
  do {
    v = "Fv" + std::to_string(++counter);
  } while (out.var_types.count(v));
  out.var_types[v] = c->result_type;
  FlatGoal g;
  g.tag = FlatGoal::Tag::Constraint;
  g.var = v;
  g.con = t.name;
  g.args = std::move(kids);
  out.goals.push_back(std::move(g));
  return v;
}

FlatClause flatten_clause(const front::ProgramAst& ast,
                          const std::string& pred,
                          const std::vector<front::SrcTerm>& head_args,
                          const std::vector<front::SrcTerm>& subgoals,
                          const std::map<std::string, std::string>& var_types) {
  FlatClause out;
  out.pred = pred;
  out.var_types = var_types;
  int counter = 0;

  // head: shallow patterns; nested constructors become pre-order
  // constraints processed right after head destructuring
  std::vector<std::pair<std::string, front::SrcTerm>> pending;
  for (auto& arg : head_args) {
    HeadArg h;
    if (arg.is_var) {
      h.is_con = false;
      h.name = arg.name;
    } else {
      h.is_con = true;
      h.name = arg.name;
      const front::ConDecl* c = ast.find_con(arg.name);
      for (size_t i = 0; i < arg.args.size(); ++i) {
        const front::SrcTerm& child = arg.args[i];
        if (child.is_var) {
          h.child_vars.push_back(child.name);
        } else {
          std::string v;
          do {
            v = "Fv" + std::to_string(++counter);
          } while (out.var_types.count(v));
          out.var_types[v] = c->arg_types[i];
          h.child_vars.push_back(v);
          pending.emplace_back(v, child);
        }
      }
    }
    out.head_args.push_back(std::move(h));
  }
  for (size_t q = 0; q < pending.size(); ++q) {
    auto [v, term] = pending[q];
    const front::ConDecl* c = ast.find_con(term.name);
    FlatGoal g;
    g.tag = FlatGoal::Tag::Constraint;
    g.var = v;
    g.con = term.name;
    for (size_t i = 0; i < term.args.size(); ++i) {
      const front::SrcTerm& child = term.args[i];
      if (child.is_var) {
        g.args.push_back(child.name);
      } else {
        std::string w;
        do {
          w = "Fv" + std::to_string(++counter);
        } while (out.var_types.count(w));
        out.var_types[w] = c->arg_types[i];
        g.args.push_back(w);
        pending.emplace_back(w, child);
      }
    }
    out.goals.push_back(std::move(g));
  }

  // subgoals: construct arguments bottom-up, then the call
  for (auto& sg : subgoals) {
    FlatGoal call;
    call.tag = FlatGoal::Tag::Call;
    call.pred = sg.name;
    for (auto& a : sg.args)
      call.args.push_back(flat_build(ast, out, counter, a));
    out.goals.push_back(std::move(call));
  }
  return out;
}

}  // namespace

FlatProgram flatten(const front::ProgramAst& ast) {
  FlatProgram fp;
  for (auto& pred : ast.preds) {
    FlatProgram::Pred fpred;
    fpred.name = pred.name;
    fpred.arg_types = pred.arg_types;
    for (auto& c : pred.clauses) {
      fpred.clauses.push_back(flatten_clause(ast, pred.name, c.head.args,
                                             c.subgoals, c.var_types));
    }
    fp.preds.push_back(std::move(fpred));
  }
  // the query compiles like a clause with an empty head
  const front::SrcTerm& goal = ast.query.front();
  fp.query = flatten_clause(ast, "", {}, {goal}, ast.query_var_types);
  fp.query_vars = front::goal_vars(goal);
  return fp;
}

std::string print_flat(const FlatProgram& fp) {
  std::ostringstream o;
  auto show_goal = [&](const FlatGoal& g) {
    if (g.tag == FlatGoal::Tag::Constraint) {
      o << g.var << " = " << g.con << "(";
      for (size_t i = 0; i < g.args.size(); ++i)
        o << (i ? "," : "") << g.args[i];
      o << ")";
    } else {
      o << g.pred << "(";
      for (size_t i = 0; i < g.args.size(); ++i)
        o << (i ? "," : "") << g.args[i];
      o << ")";
    }
  };
  for (auto& pred : fp.preds) {
    for (size_t k = 0; k < pred.clauses.size(); ++k) {
      const FlatClause& c = pred.clauses[k];
      o << pred.name << "-" << k + 1 << ": " << pred.name << "(";
      for (size_t i = 0; i < c.head_args.size(); ++i) {
        if (i) o << ",";
        const HeadArg& h = c.head_args[i];
        if (!h.is_con) {
          o << h.name;
        } else {
          o << h.name << "(";
          for (size_t j = 0; j < h.child_vars.size(); ++j)
            o << (j ? "," : "") << h.child_vars[j];
          o << ")";
        }
      }
      o << ")";
      if (!c.goals.empty()) {
        o << " :- ";
        for (size_t j = 0; j < c.goals.size(); ++j) {
          if (j) o << ", ";
          show_goal(c.goals[j]);
        }
      }
      o << ".\n";
    }
  }
  o << "query:";
  if (!fp.query.goals.empty()) o << " ";
  for (size_t j = 0; j < fp.query.goals.size(); ++j) {
    if (j) o << ", ";
    show_goal(fp.query.goals[j]);
  }
  o << ".\n";
  return o.str();
}

// --------------------------------------------------------------- compilation

namespace {

struct CodegenError : std::runtime_error {
  explicit CodegenError(const std::string& m) : std::runtime_error(m) {}
};

// The compile-time mirror of the checker state for the block in progress.
struct Ctx {
  lf::Context delta;
  std::map<std::string, lf::Term> reg_term;   // singleton mirror
  std::map<std::string, std::string> var_reg;
  std::map<std::string, lf::Term> var_term;
  std::vector<lf::Term> param_terms;  // predicate argument terms (ret type)
  std::vector<std::pair<std::string, lf::Family>> proofs;  // D1..Dj so far
  int next_reg = 1;

  std::string fresh_reg() { return "r" + std::to_string(next_reg++); }

  void apply_subst(const lf::Subst& s) {
    if (s.empty()) return;
    delta = lf::apply(s, delta);
    for (auto& [r, m] : reg_term) m = lf::apply(s, m);
    for (auto& [v, m] : var_term) m = lf::apply(s, m);
    for (auto& m : param_terms) m = lf::apply(s, m);
    for (auto& [d, a] : proofs) a = lf::apply(s, a);
  }

  std::set<std::string> taken_names() const {
    std::set<std::string> out;
    for (auto& e : delta.entries) out.insert(e.name);
    return out;
  }
};

struct ClauseCompiler {
  const front::ProgramAst& ast;
  const FlatProgram& fp;
  const lf::Signature& sig;

  std::string pred;  // empty for the query
  int arity = 0;
  size_t k = 0, total_clauses = 0;
  std::string clause_const;
  std::vector<std::string> pi_vars;  // clause telescope order
  const FlatClause* fc = nullptr;
  std::string label_base;
  int call_counter = 0;

  std::vector<std::pair<std::string, std::string>> query_manifest;

  static std::string reg_name(int i) { return "r" + std::to_string(i); }

  const FlatProgram::Pred* find_pred(const std::string& name) const {
    for (auto& p : fp.preds)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::string entry_label(const std::string& callee) const {
    const FlatProgram::Pred* p = find_pred(callee);
    if (!p) throw CodegenError("unknown predicate \"" + callee + "\"");
    if (p->clauses.empty())
      throw CodegenError("predicate \"" + callee +
                         "\" has no clauses; calls to it cannot be compiled");
    return callee + "-1/" + std::to_string(p->arg_types.size());
  }

  std::string var_type(const std::string& v) const {
    auto it = fc->var_types.find(v);
    if (it == fc->var_types.end())
      throw CodegenError("untyped variable \"" + v + "\"");
    return it->second;
  }

  // ---- instruction helpers -------------------------------------------

  Instruction mk(Instruction::Op op) {
    Instruction i;
    i.op = op;
    return i;
  }

  void emit_get_val(std::vector<Instruction>& code, Ctx& ctx,
                    const std::string& r1, const std::string& r2) {
    Instruction i = mk(Instruction::Op::GetVal);
    i.r1 = r1;
    i.r2 = r2;
    code.push_back(std::move(i));
    lf::UnifyResult u =
        lf::static_unify(ctx.delta, ctx.reg_term.at(r1), ctx.reg_term.at(r2));
    if (u.bottom)
      throw CodegenError("head unification is statically unsatisfiable");
    ctx.apply_subst(u.mgu);
  }

  // get_str + spine destructuring a register against con(children).
  void destructure(std::vector<Instruction>& code, Ctx& ctx,
                   const std::string& con, const std::string& r,
                   const std::vector<std::string>& children,
                   bool reuse_parent) {
    lf::Term lhs = ctx.reg_term.at(r);
    Instruction g = mk(Instruction::Op::GetStr);
    g.con = con;
    g.num = static_cast<int>(children.size());
    g.r1 = r;
    code.push_back(std::move(g));
    std::vector<lf::Term> rhs;
    bool first_new = true;
    for (auto& w : children) {
      if (!ctx.var_term.count(w)) {
        std::string rw = (reuse_parent && first_new) ? r : ctx.fresh_reg();
        first_new = false;
        Instruction u = mk(Instruction::Op::UnifyVar);
        u.r1 = rw;
        u.bind_var = w;
        u.bind_type = var_type(w);
        code.push_back(std::move(u));
        ctx.delta.push(w, lf::atom(var_type(w)));
        ctx.var_term[w] = lf::var(w);
        ctx.var_reg[w] = rw;
        ctx.reg_term[rw] = lf::var(w);
        rhs.push_back(lf::var(w));
      } else {
        std::string rw = ctx.var_reg.at(w);
        Instruction u = mk(Instruction::Op::UnifyVal);
        u.r1 = rw;
        code.push_back(std::move(u));
        rhs.push_back(ctx.reg_term.at(rw));
      }
    }
    lf::UnifyResult u = lf::static_unify(ctx.delta, lhs, lf::con(con, rhs));
    if (u.bottom)
      throw CodegenError("head pattern is statically unsatisfiable");
    ctx.apply_subst(u.mgu);
  }

  // Picks a direct construction register for `v` when it is consumed at
  // exactly one argument position of the next call and nowhere else.
  std::string build_target(Ctx& ctx, const std::vector<FlatGoal>& goals,
                           size_t g, const std::string& v) {
    int uses = 0;
    int position = -1;
    for (size_t j = g + 1; j < goals.size(); ++j) {
      const FlatGoal& fg = goals[j];
      if (fg.tag == FlatGoal::Tag::Constraint && fg.var == v) uses += 2;
      const auto& args = fg.args;
      for (size_t a = 0; a < args.size(); ++a) {
        if (args[a] != v) continue;
        ++uses;
        if (fg.tag == FlatGoal::Tag::Call && j == next_call_index(goals, g))
          position = static_cast<int>(a);
        else
          uses += 1;  // disqualify non-call or later uses
      }
    }
    if (uses == 1 && position >= 0) {
      std::string target = reg_name(position + 1);
      if (!ctx.reg_term.count(target)) return target;
    }
    return ctx.fresh_reg();
  }

  static size_t next_call_index(const std::vector<FlatGoal>& goals, size_t g) {
    for (size_t j = g + 1; j < goals.size(); ++j)
      if (goals[j].tag == FlatGoal::Tag::Call) return j;
    return goals.size();
  }

  void build_constraint(std::vector<Instruction>& code, Ctx& ctx,
                        const std::vector<FlatGoal>& goals, size_t g) {
    const FlatGoal& fg = goals[g];
    // fresh leaf variables get their cells first
    for (auto& w : fg.args) {
      if (ctx.var_term.count(w)) continue;
      std::string rw = ctx.fresh_reg();
      Instruction pv = mk(Instruction::Op::PutVar);
      pv.r1 = rw;
      pv.bind_var = w;
      pv.bind_type = var_type(w);
      code.push_back(std::move(pv));
      ctx.delta.push(w, lf::atom(var_type(w)));
      ctx.var_term[w] = lf::var(w);
      ctx.var_reg[w] = rw;
      ctx.reg_term[rw] = lf::var(w);
    }
    std::string rv = build_target(ctx, goals, g, fg.var);
    Instruction ps = mk(Instruction::Op::PutStr);
    ps.con = fg.con;
    ps.num = static_cast<int>(fg.args.size());
    ps.r1 = rv;
    code.push_back(std::move(ps));
    std::vector<lf::Term> rhs;
    for (auto& w : fg.args) {
      Instruction u = mk(Instruction::Op::UnifyVal);
      u.r1 = ctx.var_reg.at(w);
      code.push_back(std::move(u));
      rhs.push_back(ctx.reg_term.at(ctx.var_reg.at(w)));
    }
    lf::Term t = lf::con(fg.con, rhs);
    ctx.reg_term[rv] = t;
    ctx.var_term[fg.var] = t;
    ctx.var_reg[fg.var] = rv;
  }

  // Allocates cells for fresh unification variables passed as arguments.
  // Runs before environment capture so they can be captured and before any
  // proof terms mention them.
  void ensure_arg_cells(std::vector<Instruction>& code, Ctx& ctx,
                        const std::vector<std::string>& args) {
    int m = static_cast<int>(args.size());
    for (int j = 0; j < m; ++j) {
      const std::string& v = args[j];
      if (ctx.var_term.count(v)) continue;
      int uses = 0;
      for (auto& a : args)
        if (a == v) ++uses;
      std::string target = reg_name(j + 1);
      std::string rv = (uses == 1 && !ctx.reg_term.count(target))
                           ? target
                           : ctx.fresh_reg();
      Instruction pv = mk(Instruction::Op::PutVar);
      pv.r1 = rv;
      pv.bind_var = v;
      pv.bind_type = var_type(v);
      code.push_back(std::move(pv));
      ctx.delta.push(v, lf::atom(var_type(v)));
      ctx.var_term[v] = lf::var(v);
      ctx.var_reg[v] = rv;
      ctx.reg_term[rv] = lf::var(v);
    }
  }

  // Moves call arguments into r1..rm, two-phase to survive overlaps.
  void emit_call_args(std::vector<Instruction>& code, Ctx& ctx,
                      const std::vector<std::string>& args) {
    int m = static_cast<int>(args.size());
    // evacuate argument registers that would be clobbered before their use
    std::set<std::string> moved;
    for (int j = 0; j < m; ++j) {
      const std::string& v = args[j];
      if (moved.count(v)) continue;
      moved.insert(v);
      const std::string& home = ctx.var_reg.at(v);
      long n = -1;
      if (home.size() > 1 && home[0] == 'r' &&
          std::all_of(home.begin() + 1, home.end(),
                      [](char c) { return isdigit(static_cast<unsigned char>(c)); }))
        n = std::stol(home.substr(1));
      if (n < 1 || n > m) continue;
      bool safe = true;
      for (int i = 0; i < m; ++i)
        if (args[i] == v && i + 1 != n) safe = false;
      if (safe) continue;
      std::string t = ctx.fresh_reg();
      Instruction mv = mk(Instruction::Op::Mov);
      mv.r1 = t;
      mv.operand = op_reg(home);
      code.push_back(std::move(mv));
      ctx.reg_term[t] = ctx.reg_term.at(home);
      ctx.var_reg[v] = t;
    }
    for (int j = 0; j < m; ++j) {
      const std::string& src = ctx.var_reg.at(args[j]);
      std::string target = reg_name(j + 1);
      if (src == target) continue;
      Instruction mv = mk(Instruction::Op::Mov);
      mv.r1 = target;
      mv.operand = op_reg(src);
      code.push_back(std::move(mv));
      ctx.reg_term[target] = ctx.reg_term.at(src);
    }
  }

  lf::Term proof_term(const Ctx& ctx,
                      const std::optional<std::string>& last_proof) const {
    std::vector<lf::Term> args;
    for (auto& v : pi_vars) args.push_back(ctx.var_term.at(v));
    for (auto& [d, a] : ctx.proofs) args.push_back(lf::var(d));
    if (last_proof) args.push_back(lf::var(*last_proof));
    return lf::con(clause_const, std::move(args));
  }

  // The current type of the clause's caller continuation.
  MachineType ret_type(const Ctx& ctx) const {
    std::set<std::string> taken = ctx.taken_names();
    std::string d = lf::fresh_name("Dr", taken);
    std::vector<lf::Param> ps;
    ps.push_back(lf::Param{d, lf::atom(pred, ctx.param_terms)});
    return cont(std::move(ps), {});
  }

  // ---- goal sequence --------------------------------------------------

  // Compiles goals[g..] into `code`, finishing the block; continuation
  // blocks are appended to `nested`.
  void compile_goals(std::vector<Instruction>& code,
                     std::vector<PreBlock>& nested, Ctx ctx,
                     const std::vector<FlatGoal>& goals, size_t g,
                     bool is_query) {
    for (; g < goals.size(); ++g) {
      const FlatGoal& fg = goals[g];
      if (fg.tag == FlatGoal::Tag::Constraint) {
        if (ctx.var_reg.count(fg.var))
          destructure(code, ctx, fg.con, ctx.var_reg.at(fg.var), fg.args,
                      false);
        else
          build_constraint(code, ctx, goals, g);
        continue;
      }
      // a call
      ++call_counter;
      bool final_call = (g + 1 == goals.size());
      std::string callee_entry = entry_label(fg.pred);
      ensure_arg_cells(code, ctx, fg.args);
      std::vector<lf::Term> call_terms;
      for (auto& a : fg.args) call_terms.push_back(ctx.var_term.at(a));

      if (is_query && final_call) {
        // the initial continuation is already in ret; partially apply it
        // to the query variables so the callee sees one missing proof
        if (!fp.query_vars.empty()) {
          Instruction mv = mk(Instruction::Op::Mov);
          mv.r1 = "ret";
          Operand op = op_reg("ret");
          for (auto& v : fp.query_vars) op.args.push_back(ctx.var_term.at(v));
          mv.operand = std::move(op);
          code.push_back(std::move(mv));
        }
        emit_call_args(code, ctx, fg.args);
        Instruction j = mk(Instruction::Op::Jmp);
        j.operand = op_label(callee_entry, std::move(call_terms));
        code.push_back(std::move(j));
        for (auto& v : fp.query_vars)
          query_manifest.emplace_back(v, ctx.var_reg.at(v));
        return;
      }

      lf::Family subgoal_family = lf::atom(fg.pred, call_terms);

      std::string cont_label = label_base + "-sg" +
                               std::to_string(call_counter) + "/" +
                               std::to_string(arity);
      std::set<std::string> taken = ctx.taken_names();
      std::string dname =
          lf::fresh_name("D" + std::to_string(call_counter), taken);

      std::vector<lf::Param> cont_params;
      std::vector<lf::Term> statics;
      for (auto& e : ctx.delta.entries) {
        cont_params.push_back(lf::Param{e.name, e.type});
        statics.push_back(lf::var(e.name));
      }
      cont_params.push_back(lf::Param{dname, subgoal_family});

      if (final_call) {
        // trampoline: capture only ret; eliminated later by apply_tco
        std::string t = ctx.fresh_reg();
        Instruction pt = mk(Instruction::Op::PutTuple);
        pt.r1 = t;
        pt.num = 1;
        code.push_back(std::move(pt));
        Instruction sv = mk(Instruction::Op::SetVal);
        sv.r1 = "ret";
        code.push_back(std::move(sv));
        Instruction cl = mk(Instruction::Op::Close);
        cl.r1 = "ret";
        cl.r2 = t;
        cl.operand = op_label(cont_label, statics);
        code.push_back(std::move(cl));

        MachineType saved_ret = ret_type(ctx);
        emit_call_args(code, ctx, fg.args);
        Instruction j = mk(Instruction::Op::Jmp);
        j.operand = op_label(callee_entry, call_terms);
        code.push_back(std::move(j));

        PreBlock tramp;
        tramp.label = cont_label;
        tramp.cv.params = std::move(cont_params);
        tramp.cv.rf.set("env", tuple({saved_ret}));
        Instruction pr = mk(Instruction::Op::Proj);
        pr.r1 = "ret";
        pr.r2 = "env";
        pr.num = 1;
        tramp.cv.body.push_back(std::move(pr));
        Instruction rj = mk(Instruction::Op::Jmp);
        Operand rop = op_reg("ret");
        rop.args.push_back(proof_term(ctx, dname));
        rj.operand = std::move(rop);
        tramp.cv.body.push_back(std::move(rj));
        nested.push_back(std::move(tramp));
        return;
      }

      // non-final call: capture everything still needed, plus ret
      std::vector<std::string> needed;
      {
        std::set<std::string> seen;
        for (size_t j2 = g + 1; j2 < goals.size(); ++j2) {
          const FlatGoal& fut = goals[j2];
          auto consider = [&](const std::string& v) {
            if (seen.count(v) || !ctx.var_reg.count(v)) return;
            seen.insert(v);
            needed.push_back(v);
          };
          if (fut.tag == FlatGoal::Tag::Constraint) consider(fut.var);
          for (auto& v : fut.args) consider(v);
        }
      }
      std::string t = ctx.fresh_reg();
      Instruction pt = mk(Instruction::Op::PutTuple);
      pt.r1 = t;
      pt.num = static_cast<int>(needed.size()) + 1;
      code.push_back(std::move(pt));
      std::vector<MachineType> elem_types;
      for (auto& v : needed) {
        Instruction sv = mk(Instruction::Op::SetVal);
        sv.r1 = ctx.var_reg.at(v);
        code.push_back(std::move(sv));
        elem_types.push_back(sing(ctx.var_term.at(v), var_type(v)));
      }
      Instruction sv = mk(Instruction::Op::SetVal);
      sv.r1 = "ret";
      code.push_back(std::move(sv));
      elem_types.push_back(ret_type(ctx));

      Instruction cl = mk(Instruction::Op::Close);
      cl.r1 = "ret";
      cl.r2 = t;
      cl.operand = op_label(cont_label, statics);
      code.push_back(std::move(cl));

      emit_call_args(code, ctx, fg.args);
      Instruction j = mk(Instruction::Op::Jmp);
      j.operand = op_label(callee_entry, call_terms);
      code.push_back(std::move(j));

      // continuation block: re-project captured registers and go on
      Ctx nctx;
      nctx.delta.entries = cont_params;  // params become the context
      nctx.param_terms = ctx.param_terms;
      nctx.var_term = ctx.var_term;
      nctx.proofs = ctx.proofs;
      nctx.proofs.emplace_back(dname, subgoal_family);
      int reserved = static_cast<int>(needed.size());
      for (size_t j2 = g + 1; j2 < goals.size(); ++j2)
        if (goals[j2].tag == FlatGoal::Tag::Call)
          reserved = std::max(reserved,
                              static_cast<int>(goals[j2].args.size()));
      nctx.next_reg = reserved + 1;

      std::vector<Instruction> ncode;
      for (size_t idx = 0; idx < needed.size(); ++idx) {
        Instruction pr = mk(Instruction::Op::Proj);
        pr.r1 = reg_name(static_cast<int>(idx) + 1);
        pr.r2 = "env";
        pr.num = static_cast<int>(idx) + 1;
        ncode.push_back(std::move(pr));
        nctx.var_reg[needed[idx]] = reg_name(static_cast<int>(idx) + 1);
        nctx.reg_term[reg_name(static_cast<int>(idx) + 1)] =
            ctx.var_term.at(needed[idx]);
      }
      Instruction pr = mk(Instruction::Op::Proj);
      pr.r1 = "ret";
      pr.r2 = "env";
      pr.num = static_cast<int>(needed.size()) + 1;
      ncode.push_back(std::move(pr));

      PreBlock inner;
      inner.label = cont_label;
      inner.cv.params = cont_params;
      inner.cv.rf.set("env", tuple(elem_types));
      compile_goals(ncode, inner.nested, std::move(nctx), goals, g + 1,
                    is_query);
      inner.cv.body = std::move(ncode);
      nested.push_back(std::move(inner));
      return;
    }
    // no more goals: a fact clause returns its proof directly
    Instruction j = mk(Instruction::Op::Jmp);
    Operand rop = op_reg("ret");
    rop.args.push_back(proof_term(ctx, std::nullopt));
    j.operand = std::move(rop);
    code.push_back(std::move(j));
  }

  // ---- clause and query entry points -----------------------------------

  PreBlock compile_clause(const FlatProgram::Pred& fpred, size_t clause_idx) {
    k = clause_idx;
    total_clauses = fpred.clauses.size();
    pred = fpred.name;
    arity = static_cast<int>(fpred.arg_types.size());
    fc = &fpred.clauses[clause_idx];
    clause_const = pred + "-" + std::to_string(clause_idx + 1);
    label_base = pred + "-" + std::to_string(clause_idx + 1);
    call_counter = 0;

    // clause telescope order: first occurrence, head then subgoals, of the
    // source clause (intermediates are not telescope variables)
    const front::PredDecl* pd = ast.find_pred(pred);
    const front::Clause& src = pd->clauses[clause_idx];
    pi_vars = front::goal_vars(src.head);
    {
      std::set<std::string> seen(pi_vars.begin(), pi_vars.end());
      for (auto& sg : src.subgoals)
        for (auto& v : front::goal_vars(sg))
          if (seen.insert(v).second) pi_vars.push_back(v);
    }

    // block parameters X1..Xn, dodging clause variable names
    Ctx ctx;
    std::set<std::string> avoid;
    for (auto& [v, ty] : fc->var_types) avoid.insert(v);
    std::vector<std::string> params;
    for (int i = 0; i < arity; ++i) {
      std::string x = lf::fresh_name("X" + std::to_string(i + 1), avoid);
      avoid.insert(x);
      params.push_back(x);
      ctx.delta.push(x, lf::atom(fpred.arg_types[i]));
      ctx.param_terms.push_back(lf::var(x));
    }
    int reserved = arity;
    for (auto& g : fc->goals)
      if (g.tag == FlatGoal::Tag::Call)
        reserved = std::max(reserved, static_cast<int>(g.args.size()));
    ctx.next_reg = reserved + 1;

    PreBlock blk;
    blk.label = label_base + "/" + std::to_string(arity);
    for (size_t i = 0; i < params.size(); ++i)
      blk.cv.params.push_back(
          lf::Param{params[i], lf::atom(fpred.arg_types[i])});

    std::vector<Instruction> code;
    MachineType rt = ret_type(ctx);
    std::vector<MachineType> env_elems;
    for (int i = 0; i < arity; ++i)
      env_elems.push_back(sing(lf::var(params[i]), fpred.arg_types[i]));
    env_elems.push_back(rt);

    if (clause_idx == 0) {
      for (int i = 0; i < arity; ++i) {
        blk.cv.rf.set(reg_name(i + 1),
                      sing(lf::var(params[i]), fpred.arg_types[i]));
        ctx.reg_term[reg_name(i + 1)] = lf::var(params[i]);
      }
      blk.cv.rf.set("ret", rt);
    } else {
      blk.cv.rf.set("env", tuple(env_elems));
      for (int i = 0; i < arity; ++i) {
        Instruction pr = mk(Instruction::Op::Proj);
        pr.r1 = reg_name(i + 1);
        pr.r2 = "env";
        pr.num = i + 1;
        code.push_back(std::move(pr));
        ctx.reg_term[reg_name(i + 1)] = lf::var(params[i]);
      }
      Instruction pr = mk(Instruction::Op::Proj);
      pr.r1 = "ret";
      pr.r2 = "env";
      pr.num = arity + 1;
      code.push_back(std::move(pr));
    }

    if (clause_idx + 1 < total_clauses) {
      std::string next_label =
          pred + "-" + std::to_string(clause_idx + 2) + "/" +
          std::to_string(arity);
      std::vector<lf::Term> statics;
      for (auto& x : params) statics.push_back(lf::var(x));
      std::string env_reg;
      if (clause_idx == 0) {
        env_reg = ctx.fresh_reg();
        Instruction pt = mk(Instruction::Op::PutTuple);
        pt.r1 = env_reg;
        pt.num = arity + 1;
        code.push_back(std::move(pt));
        for (int i = 0; i < arity; ++i) {
          Instruction sv = mk(Instruction::Op::SetVal);
          sv.r1 = reg_name(i + 1);
          code.push_back(std::move(sv));
        }
        Instruction sv = mk(Instruction::Op::SetVal);
        sv.r1 = "ret";
        code.push_back(std::move(sv));
      } else {
        env_reg = "env";  // the environment tuple is already at hand
      }
      Instruction bt = mk(Instruction::Op::PushBt);
      bt.r1 = env_reg;
      bt.operand = op_label(next_label, statics);
      code.push_back(std::move(bt));
    }

    // head matching
    for (int i = 0; i < arity; ++i) {
      const HeadArg& h = fc->head_args[i];
      std::string ri = reg_name(i + 1);
      if (!h.is_con) {
        if (ctx.var_term.count(h.name)) {
          emit_get_val(code, ctx, ctx.var_reg.at(h.name), ri);
        } else {
          ctx.var_term[h.name] = ctx.reg_term.at(ri);
          ctx.var_reg[h.name] = ri;
        }
      } else {
        destructure(code, ctx, h.name, ri, h.child_vars, true);
      }
    }

    compile_goals(code, blk.nested, std::move(ctx), fc->goals, 0, false);
    blk.cv.body = std::move(code);
    return blk;
  }

  PreBlock compile_query(std::vector<PreBlock>& extra) {
    pred.clear();
    arity = 0;
    fc = &fp.query;
    clause_const.clear();
    pi_vars.clear();
    label_base = "query";
    call_counter = 0;

    Ctx ctx;
    int reserved = 0;
    for (auto& g : fc->goals)
      if (g.tag == FlatGoal::Tag::Call)
        reserved = std::max(reserved, static_cast<int>(g.args.size()));
    ctx.next_reg = reserved + 1;

    PreBlock blk;
    blk.label = "query/0";

    std::vector<Instruction> code;
    std::string t = ctx.fresh_reg();
    Instruction pt = mk(Instruction::Op::PutTuple);
    pt.r1 = t;
    pt.num = 0;
    code.push_back(std::move(pt));
    Instruction cl = mk(Instruction::Op::Close);
    cl.r1 = "ret";
    cl.r2 = t;
    cl.operand = op_label("init-cont/0", {});
    code.push_back(std::move(cl));

    compile_goals(code, blk.nested, std::move(ctx), fc->goals, 0, true);
    blk.cv.body = std::move(code);

    // initial continuation: succeed with the caller-supplied proof
    const front::SrcTerm& goal = ast.query.front();
    lf::Family gf = front::goal_family(goal);
    PreBlock ic;
    ic.label = "init-cont/0";
    std::set<std::string> taken;
    for (auto& v : fp.query_vars) {
      ic.cv.params.push_back(
          lf::Param{v, lf::atom(ast.query_var_types.at(v))});
      taken.insert(v);
    }
    std::string d = lf::fresh_name("D", taken);
    ic.cv.params.push_back(lf::Param{d, gf});
    ic.cv.rf.set("env", tuple({}));
    Instruction sc = mk(Instruction::Op::Succeed);
    sc.proof = lf::var(d);
    sc.proof_type = gf;
    ic.cv.body.push_back(std::move(sc));
    extra.push_back(std::move(ic));
    return blk;
  }
};

void hoist_block(const PreBlock& b,
                 std::vector<std::pair<std::string, CodeValue>>& out) {
  out.emplace_back(b.label, b.cv);
  for (auto& n : b.nested) hoist_block(n, out);
}

}  // namespace

PreProgram compile(const front::ProgramAst& ast, const FlatProgram& fp) {
  PreProgram pre;
  pre.sig = front::translate_to_lf(ast);
  ClauseCompiler cc{ast, fp, pre.sig};
  for (auto& fpred : fp.preds)
    for (size_t k = 0; k < fpred.clauses.size(); ++k)
      pre.blocks.push_back(cc.compile_clause(fpred, k));
  std::vector<PreBlock> extra;
  pre.blocks.push_back(cc.compile_query(extra));
  for (auto& b : extra) pre.blocks.push_back(std::move(b));
  pre.entry = "query/0";
  pre.query_vars = cc.query_manifest;
  return pre;
}

Program hoist(const PreProgram& pre) {
  Program p;
  p.dependent = true;
  p.sig = pre.sig;
  p.entry = pre.entry;
  p.query_vars = pre.query_vars;
  for (auto& b : pre.blocks) hoist_block(b, p.code);
  for (auto& [l, cv] : p.code) p.xi.emplace_back(l, code_type(cv));
  return p;
}

// ----------------------------------------------------------------------- tco

namespace {

int count_label_refs(const Program& p, const std::string& label) {
  int n = 0;
  for (auto& [l, cv] : p.code)
    for (auto& ins : cv.body)
      switch (ins.op) {
        case Instruction::Op::Mov:
        case Instruction::Op::Jmp:
        case Instruction::Op::Close:
        case Instruction::Op::PushBt:
          if (ins.operand.base == Operand::Base::Label &&
              ins.operand.name == label)
            ++n;
          break;
        default:
          break;
      }
  return n;
}

}  // namespace

Program apply_tco(Program p) {
  std::set<std::string> dead;
  for (auto& [l, cv] : p.code) {
    auto& body = cv.body;
    if (body.size() < 4) continue;
    size_t n = body.size();
    Instruction& i_pt = body[n - 4];
    Instruction& i_sv = body[n - 3];
    Instruction& i_cl = body[n - 2];
    Instruction& i_jmp = body[n - 1];
    if (i_pt.op != Instruction::Op::PutTuple || i_pt.num != 1) continue;
    if (i_sv.op != Instruction::Op::SetVal || i_sv.r1 != "ret") continue;
    if (i_cl.op != Instruction::Op::Close || i_cl.r1 != "ret" ||
        i_cl.r2 != i_pt.r1 ||
        i_cl.operand.base != Operand::Base::Label)
      continue;
    if (i_jmp.op != Instruction::Op::Jmp) continue;
    const CodeValue* tramp = p.find(i_cl.operand.name);
    if (!tramp || tramp->body.size() != 2) continue;
    const Instruction& t_pr = tramp->body[0];
    const Instruction& t_jmp = tramp->body[1];
    if (t_pr.op != Instruction::Op::Proj || t_pr.r1 != "ret" ||
        t_pr.r2 != "env" || t_pr.num != 1)
      continue;
    if (t_jmp.op != Instruction::Op::Jmp ||
        t_jmp.operand.base != Operand::Base::Reg ||
        t_jmp.operand.name != "ret" || !t_jmp.operand.binders.empty() ||
        t_jmp.operand.args.size() != 1)
      continue;
    if (tramp->params.size() != i_cl.operand.args.size() + 1) continue;
    if (count_label_refs(p, i_cl.operand.name) != 1) continue;

    // instantiate the trampoline's static parameters at the closure site
    lf::Subst s;
    for (size_t i = 0; i + 1 < tramp->params.size(); ++i)
      s.items[tramp->params[i].name] = i_cl.operand.args[i];
    const lf::Param& dparam = tramp->params.back();
    lf::Family ddom = lf::apply(s, dparam.type);
    lf::Term proof = lf::apply(s, t_jmp.operand.args[0]);

    Instruction mv;
    mv.op = Instruction::Op::Mov;
    mv.r1 = "ret";
    Operand op = op_reg("ret");
    op.binders.push_back(lf::Param{dparam.name, std::move(ddom)});
    op.args.push_back(std::move(proof));
    mv.operand = std::move(op);

    dead.insert(i_cl.operand.name);
    Instruction jmp_copy = i_jmp;
    body.erase(body.end() - 4, body.end());
    body.push_back(std::move(mv));
    body.push_back(std::move(jmp_copy));
  }
  if (!dead.empty()) {
    std::vector<std::pair<std::string, CodeValue>> code;
    for (auto& [l, cv] : p.code)
      if (!dead.count(l)) code.emplace_back(l, cv);
    p.code = std::move(code);
    std::vector<std::pair<std::string, MachineType>> xi;
    for (auto& [l, t] : p.xi)
      if (!dead.count(l)) xi.emplace_back(l, t);
    p.xi = std::move(xi);
  }
  return p;
}

// -------------------------------------------------------------------- driver

namespace {

// Multi-goal queries become a synthetic predicate taking the query
// variables as arguments, queried once.
void desugar_goal_seq(front::ProgramAst& ast) {
  if (ast.query.size() <= 1) return;
  std::string name = "query-conj";
  while (ast.find_pred(name) || ast.find_con(name))
    name += "'";
  std::vector<std::string> vars;
  {
    std::set<std::string> seen;
    for (auto& g : ast.query)
      for (auto& v : front::goal_vars(g))
        if (seen.insert(v).second) vars.push_back(v);
  }
  front::PredDecl pd;
  pd.name = name;
  front::Clause c;
  c.head.is_var = false;
  c.head.name = name;
  for (auto& v : vars) {
    pd.arg_types.push_back(ast.query_var_types.at(v));
    front::SrcTerm tv;
    tv.is_var = true;
    tv.name = v;
    c.head.args.push_back(tv);
  }
  c.subgoals = ast.query;
  c.var_types = ast.query_var_types;
  pd.clauses.push_back(std::move(c));
  ast.preds.push_back(std::move(pd));
  ast.order.push_back(
      {front::ProgramAst::DeclRef::Kind::Pred, ast.preds.size() - 1});
  front::SrcTerm q;
  q.is_var = false;
  q.name = name;
  for (auto& v : vars) {
    front::SrcTerm tv;
    tv.is_var = true;
    tv.name = v;
    q.args.push_back(tv);
  }
  ast.query.clear();
  ast.query.push_back(std::move(q));
}

}  // namespace

Result compile_source(const std::string& source, const Options& opts) {
  Result res;
  try {
    res.ast = front::parse(source, opts.parse);
  } catch (const ParseError& e) {
    res.failed = Stage::Parse;
    res.diags.push_back(e.diag);
    return res;
  }
  front::ElabResult er = front::elaborate(res.ast);
  if (!er.ok()) {
    res.failed = Stage::Elaborate;
    res.diags = er.errors;
    return res;
  }
  desugar_goal_seq(res.ast);

  try {
    res.flat = flatten(res.ast);
    PreProgram pre = compile(res.ast, res.flat);
    res.lfsig = pre.sig;
    if (auto d = lf::check_signature(pre.sig)) {
      res.failed = Stage::Codegen;
      res.diags.push_back(*d);
      return res;
    }
    res.twam = hoist(pre);
    if (opts.tco) res.twam = apply_tco(std::move(res.twam));
  } catch (const CodegenError& e) {
    res.failed = Stage::Codegen;
    res.diags.push_back(Diag{Severity::Error, e.what()});
    return res;
  }

  CheckResult cr = check_program(res.twam);
  res.warnings = cr.warnings;
  if (!cr.ok()) {
    res.failed = Stage::Certify;
    res.diags = cr.errors;
    return res;
  }

  res.swam = erase(res.twam);
  CheckResult rr = check_program(res.swam);
  if (!rr.ok()) {
    res.failed = Stage::Recheck;
    res.diags = rr.errors;
    return res;
  }
  return res;
}

}  // namespace twam::pipeline
