#include "oracles.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace oracle {

using twam::lf::Term;
namespace lf = twam::lf;

// ------------------------------------------------- Robinson reference MGU

namespace {

// Leftmost disagreement pair of two equally-headed trees, if any.
bool first_disagreement(const Term& a, const Term& b,
                        std::pair<Term, Term>& out) {
  if (a.is_var() || b.is_var()) {
    if (a.is_var() && b.is_var() && a.name == b.name) return false;
    out = {a, b};
    return true;
  }
  if (a.name != b.name || a.args.size() != b.args.size()) {
    out = {a, b};
    return true;
  }
  for (size_t i = 0; i < a.args.size(); ++i)
    if (first_disagreement(a.args[i], b.args[i], out)) return true;
  return false;
}

}  // namespace

std::optional<lf::Subst> robinson_unify(const Term& a0, const Term& b0) {
  Term a = a0, b = b0;
  lf::Subst sigma;
  for (int guard = 0; guard < 100000; ++guard) {
    std::pair<Term, Term> d;
    if (!first_disagreement(a, b, d)) return sigma;
    Term s = d.first, t = d.second;
    if (!s.is_var() && !t.is_var()) return std::nullopt;  // constant clash
    if (!s.is_var()) std::swap(s, t);
    if (lf::occurs(s.name, t)) {
      if (t.is_var() && t.name == s.name) continue;  // unreachable
      return std::nullopt;
    }
    lf::Subst one;
    one.items[s.name] = t;
    sigma = lf::compose(one, sigma);
    a = lf::apply(one, a);
    b = lf::apply(one, b);
  }
  return std::nullopt;  // guard tripped; treated as a test failure upstream
}

// ------------------------------------------------------- term generation

std::vector<Term> enumerate_terms(int depth,
                                  const std::vector<std::string>& vars) {
  std::vector<Term> cur;
  for (auto& v : vars) cur.push_back(lf::var(v));
  cur.push_back(lf::con("zero"));
  if (depth == 0) return cur;
  std::vector<Term> smaller = enumerate_terms(depth - 1, vars);
  std::vector<Term> out = cur;
  for (auto& t : smaller) out.push_back(lf::con("succ", {t}));
  for (auto& t1 : smaller)
    for (auto& t2 : smaller) out.push_back(lf::con("c", {t1, t2}));
  return out;
}

Term random_term(std::mt19937_64& rng, int max_depth,
                 const std::vector<std::string>& vars, bool ground) {
  std::uniform_int_distribution<int> pick(0, 99);
  int r = pick(rng);
  if (max_depth == 0) {
    if (!ground && !vars.empty() && r < 50)
      return lf::var(vars[r % vars.size()]);
    return lf::con("zero");
  }
  if (!ground && !vars.empty() && r < 30)
    return lf::var(vars[r % vars.size()]);
  if (r < 55) return lf::con("zero");
  if (r < 80)
    return lf::con("succ", {random_term(rng, max_depth - 1, vars, ground)});
  return lf::con("c", {random_term(rng, max_depth - 1, vars, ground),
                       random_term(rng, max_depth - 1, vars, ground)});
}

bool alpha_variant(const Term& a, const Term& b) {
  std::map<std::string, std::string> fwd, bwd;
  std::function<bool(const Term&, const Term&)> go = [&](const Term& x,
                                                         const Term& y) {
    if (x.is_var() != y.is_var()) return false;
    if (x.is_var()) {
      auto f = fwd.find(x.name);
      auto g = bwd.find(y.name);
      if (f == fwd.end() && g == bwd.end()) {
        fwd[x.name] = y.name;
        bwd[y.name] = x.name;
        return true;
      }
      return f != fwd.end() && g != bwd.end() && f->second == y.name &&
             g->second == x.name;
    }
    if (x.name != y.name || x.args.size() != y.args.size()) return false;
    for (size_t i = 0; i < x.args.size(); ++i)
      if (!go(x.args[i], y.args[i])) return false;
    return true;
  };
  return go(a, b);
}

// ---------------------------------------------------------- SLD oracle

namespace {

using twam::front::ProgramAst;
using twam::front::SrcTerm;

// Variables are global names; clause variables are renamed with a counter
// suffix per clause activation.
struct Sld {
  const ProgramAst& ast;
  uint64_t budget;
  std::map<std::string, SrcTerm> binding;  // var -> term (chains allowed)
  uint64_t renames = 0;
  bool out_of_budget = false;

  SrcTerm walk(SrcTerm t) {
    while (t.is_var) {
      auto it = binding.find(t.name);
      if (it == binding.end()) return t;
      t = it->second;
    }
    return t;
  }

  bool occurs(const std::string& v, const SrcTerm& t0) {
    SrcTerm t = walk(t0);
    if (t.is_var) return t.name == v;
    for (auto& a : t.args)
      if (occurs(v, a)) return true;
    return false;
  }

  bool unify(const SrcTerm& a0, const SrcTerm& b0,
             std::vector<std::string>& trail) {
    if (budget == 0) {
      out_of_budget = true;
      return false;
    }
    --budget;
    SrcTerm a = walk(a0), b = walk(b0);
    if (a.is_var && b.is_var && a.name == b.name) return true;
    if (a.is_var) {
      if (occurs(a.name, b)) return false;
      binding[a.name] = b;
      trail.push_back(a.name);
      return true;
    }
    if (b.is_var) {
      if (occurs(b.name, a)) return false;
      binding[b.name] = a;
      trail.push_back(b.name);
      return true;
    }
    if (a.name != b.name || a.args.size() != b.args.size()) return false;
    for (size_t i = 0; i < a.args.size(); ++i)
      if (!unify(a.args[i], b.args[i], trail)) return false;
    return true;
  }

  SrcTerm rename(const SrcTerm& t, const std::string& suffix) {
    SrcTerm out = t;
    if (t.is_var) {
      out.name = t.name + suffix;
      return out;
    }
    for (auto& a : out.args) a = rename(a, suffix);
    return out;
  }

  bool solve(std::vector<SrcTerm> goals) {
    if (out_of_budget) return false;
    if (goals.empty()) return true;
    SrcTerm goal = goals.front();
    goals.erase(goals.begin());
    const twam::front::PredDecl* pred = ast.find_pred(goal.name);
    if (!pred) return false;
    for (auto& clause : pred->clauses) {
      std::string suffix = "~" + std::to_string(++renames);
      SrcTerm head = rename(clause.head, suffix);
      std::vector<std::string> trail;
      if (unify(head, goal, trail)) {
        std::vector<SrcTerm> next;
        for (auto& sg : clause.subgoals) next.push_back(rename(sg, suffix));
        next.insert(next.end(), goals.begin(), goals.end());
        if (solve(std::move(next))) return true;
      }
      for (auto& v : trail) binding.erase(v);
      if (out_of_budget) return false;
    }
    return false;
  }

  std::string render(const SrcTerm& t0, std::map<std::string, int>& anon) {
    SrcTerm t = walk(t0);
    if (t.is_var) {
      auto it = anon.find(t.name);
      int id;
      if (it == anon.end()) {
        id = static_cast<int>(anon.size());
        anon.emplace(t.name, id);
      } else {
        id = it->second;
      }
      return "_G" + std::to_string(id);
    }
    if (t.args.empty()) return t.name;
    std::string out = t.name + "(";
    for (size_t i = 0; i < t.args.size(); ++i) {
      if (i) out += ",";
      out += render(t.args[i], anon);
    }
    return out + ")";
  }
};

}  // namespace

SldResult sld_solve(const ProgramAst& ast, uint64_t budget) {
  Sld sld{ast, budget};
  std::vector<SrcTerm> goals = ast.query;
  bool ok = sld.solve(goals);
  SldResult res;
  if (sld.out_of_budget) {
    res.tag = SldResult::Tag::OutOfBudget;
    return res;
  }
  if (!ok) {
    res.tag = SldResult::Tag::Failure;
    return res;
  }
  res.tag = SldResult::Tag::Success;
  std::map<std::string, int> anon;
  std::vector<std::string> vars;
  {
    std::set<std::string> seen;
    for (auto& g : ast.query)
      for (auto& v : twam::front::goal_vars(g))
        if (seen.insert(v).second) vars.push_back(v);
  }
  for (auto& v : vars) {
    SrcTerm t;
    t.is_var = true;
    t.name = v;
    res.answers.emplace_back(v, sld.render(t, anon));
  }
  return res;
}

// ------------------------------------------------- random program generator

std::string random_program(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d100(0, 99);
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };

  std::ostringstream o;
  o << "t : type.\n";
  o << "a/0 : t.\n";
  o << "b/0 : t.\n";
  o << "f/1 : t -> t.\n";
  o << "g/2 : t -> t -> t.\n\n";

  int npreds = 1 + pick(3);
  std::vector<std::pair<std::string, int>> preds;
  for (int i = 0; i < npreds; ++i) {
    std::string name = "p" + std::to_string(i);
    int arity = 1 + pick(2);
    preds.emplace_back(name, arity);
    o << name << "/" << arity << " : t";
    for (int j = 1; j < arity; ++j) o << " -> t";
    o << " -> prop.\n";
  }
  o << "\n";

  // term over variables X1..Xk (as strings)
  std::function<std::string(int, int)> term = [&](int depth, int nvars) {
    int r = d100(rng);
    if (depth == 0 || r < 35) {
      if (nvars > 0 && r < 55) return "X" + std::to_string(1 + pick(nvars));
      return std::string(r % 2 ? "a" : "b");
    }
    if (r < 70) return "f(" + term(depth - 1, nvars) + ")";
    return "g(" + term(depth - 1, nvars) + "," + term(depth - 1, nvars) + ")";
  };

  for (auto& [name, arity] : preds) {
    int nclauses = 1 + pick(3);
    for (int c = 0; c < nclauses; ++c) {
      int nvars = 1 + pick(3);
      o << name << "(";
      for (int j = 0; j < arity; ++j) {
        if (j) o << ",";
        o << term(1 + pick(2), nvars);
      }
      o << ")";
      int nsub = pick(3);
      for (int s = 0; s < nsub; ++s) {
        o << (s == 0 ? " :- " : ", ");
        auto& [cn, ca] = preds[pick(npreds)];
        o << cn << "(";
        for (int j = 0; j < ca; ++j) {
          if (j) o << ",";
          o << term(pick(2), nvars);
        }
        o << ")";
      }
      o << ".\n";
    }
  }

  auto& [qn, qa] = preds[pick(npreds)];
  o << "\n?- " << qn << "(";
  for (int j = 0; j < qa; ++j) {
    if (j) o << ",";
    o << term(1 + pick(2), 2);
  }
  o << ").\n";
  return o.str();
}

// ------------------------------------------------------------------- misc

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string corpus_path(const std::string& name) {
  return std::string(TWAM_CORPUS_DIR) + "/" + name;
}

}  // namespace oracle
