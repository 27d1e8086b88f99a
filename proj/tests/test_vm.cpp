#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "twam/ir_text.hpp"
#include "twam/pipeline.hpp"
#include "twam/store.hpp"
#include "twam/vm.hpp"

using namespace twam;

namespace {

Outcome run_corpus(const std::string& name, VmOptions vo = {},
                   bool tco = true) {
  pipeline::Options opts;
  opts.tco = tco;
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path(name)), opts);
  REQUIRE(res.ok());
  return run(vo.checked ? res.twam : res.swam, vo);
}

// Naive reachability over the heap graph, used as the occurs-check oracle.
bool reachable(const Store& s, size_t from, size_t target) {
  if (from == target) return true;
  const HeapValue& v = s.heap[from];
  std::vector<size_t> next;
  switch (v.tag) {
    case HeapValue::Tag::Bound:
      next.push_back(v.target);
      break;
    case HeapValue::Tag::Structure:
      next = v.str_args;
      break;
    case HeapValue::Tag::Closure:
      if (!v.env.is_code) next.push_back(v.env.loc);
      break;
    case HeapValue::Tag::Tuple:
      for (auto& w : v.elems)
        if (!w.is_code) next.push_back(w.loc);
      break;
    default:
      break;
  }
  for (size_t n : next)
    if (reachable(s, n, target)) return true;
  return false;
}

}  // namespace

TEST_CASE("deref follows bound chains to the terminus") {
  Store s;
  size_t f = s.alloc(hv_free("nat"));
  CHECK(s.deref(f) == f);  // a free cell ends at itself
  size_t z = s.alloc(hv_structure("zero", {}));
  size_t b1 = s.alloc(hv_bound(z));
  size_t b0 = s.alloc(hv_bound(b1));
  CHECK(s.deref(b0) == z);
  CHECK(s.deref(b1) == z);
  CHECK(s.deref(z) == z);
}

TEST_CASE("deref after unification lands on the structure") {
  Store s;
  size_t x = s.alloc(hv_free("nat"));
  size_t y = s.alloc(hv_free("nat"));
  size_t sy = s.alloc(hv_structure("succ", {y}));
  auto u = s.unify(x, sy);
  REQUIRE(u.ok());
  CHECK(s.deref(x) == sy);
  CHECK(s.heap[s.deref(x)].con == "succ");
}

TEST_CASE("dynamic occurs check matches naive reachability") {
  Store s;
  size_t l = s.alloc(hv_free("nat"));
  CHECK(s.occurs(l, l));  // a location occurs in itself
  size_t z = s.alloc(hv_structure("zero", {}));
  size_t fresh = s.alloc(hv_free("nat"));
  CHECK_FALSE(s.occurs(fresh, z));
  // two-deep structure under a bound chain
  size_t inner = s.alloc(hv_free("nat"));
  size_t mid = s.alloc(hv_structure("succ", {inner}));
  size_t outer = s.alloc(hv_structure("succ", {mid}));
  size_t chain = s.alloc(hv_bound(outer));
  CHECK(s.occurs(inner, chain));
  CHECK(s.occurs(inner, chain) == reachable(s, chain, inner));
  CHECK(s.occurs(z, chain) == reachable(s, chain, z));
  CHECK_FALSE(s.occurs(chain, inner));
}

TEST_CASE("unify of a location with itself changes nothing") {
  Store s;
  size_t x = s.alloc(hv_free("nat"));
  s.trail.push_back(TrailFrame{});
  auto u = s.unify(x, x);
  REQUIRE(u.ok());
  CHECK(u.bound_vars.empty());
  CHECK(s.trail.back().records.empty());
}

TEST_CASE("unify fails the occurs check instead of building a cycle") {
  Store s;
  size_t x = s.alloc(hv_free("nat"));
  size_t b = s.alloc(hv_bound(x));  // bound chain to the free cell
  size_t fx = s.alloc(hv_structure("succ", {b}));
  auto u = s.unify(x, fx);
  CHECK(u.tag == Store::UnifyOutcome::Tag::Bottom);
  // the heap is still acyclic: x is still free
  CHECK(s.heap[x].tag == HeapValue::Tag::Free);
}

TEST_CASE("unify recurses into structures and trails bindings") {
  Store s;
  s.trail.push_back(TrailFrame{});
  size_t a = s.alloc(hv_free("nat"));
  size_t z = s.alloc(hv_structure("zero", {}));
  size_t s1 = s.alloc(hv_structure("succ", {a}));
  size_t s2 = s.alloc(hv_structure("succ", {z}));
  auto u = s.unify(s1, s2);
  REQUIRE(u.ok());
  CHECK(s.deref(a) == z);
  CHECK(s.trail.back().records.size() == 1);  // exactly one binding recorded
  CHECK(s.trail.back().records[0].loc == a);
  // head clash fails
  size_t c1 = s.alloc(hv_structure("zero", {}));
  size_t c2 = s.alloc(hv_structure("succ", {z}));
  CHECK(s.unify(c1, c2).tag == Store::UnifyOutcome::Tag::Bottom);
}

TEST_CASE("unwinding restores trailed cells to free") {
  Store s;
  size_t x = s.alloc(hv_free("nat", "x"));
  TrailFrame f;
  f.label = "somewhere/0";
  s.trail.push_back(std::move(f));
  size_t z = s.alloc(hv_structure("zero", {}));
  REQUIRE(s.unify(x, z).ok());
  CHECK(s.heap[x].tag == HeapValue::Tag::Bound);
  auto frame = s.pop_and_unwind();
  REQUIRE(frame.has_value());
  CHECK(frame->label == "somewhere/0");
  CHECK(s.heap[x].tag == HeapValue::Tag::Free);
  CHECK(s.heap[x].var_name == "x");
  // empty trail: backtracking is impossible
  CHECK_FALSE(s.pop_and_unwind().has_value());
}

TEST_CASE("unwinding a frame with no records leaves the heap alone") {
  Store s;
  size_t z = s.alloc(hv_structure("zero", {}));
  s.trail.push_back(TrailFrame{});
  auto frame = s.pop_and_unwind();
  REQUIRE(frame.has_value());
  CHECK(s.heap[z].tag == HeapValue::Tag::Structure);
}

TEST_CASE("dynamic and static unification agree") {
  std::mt19937_64 rng(123);
  std::vector<std::string> vars{"A", "B", "C"};
  lf::Context ctx;
  for (auto& v : vars) ctx.push(v, lf::atom("nat"));
  int successes = 0;
  for (int i = 0; i < 1000; ++i) {
    lf::Term a = oracle::random_term(rng, 3, vars);
    lf::Term b = oracle::random_term(rng, 3, vars);
    // encode both terms into one heap with shared variable cells
    Store s;
    std::map<std::string, size_t> cells;
    std::function<size_t(const lf::Term&)> enc =
        [&](const lf::Term& t) -> size_t {
      if (t.is_var()) {
        auto it = cells.find(t.name);
        if (it != cells.end()) return it->second;
        size_t l = s.alloc(hv_free("nat", t.name));
        cells[t.name] = l;
        return l;
      }
      std::vector<size_t> args;
      for (auto& x : t.args) args.push_back(enc(x));
      return s.alloc(hv_structure(t.name, std::move(args)));
    };
    size_t la = enc(a), lb = enc(b);
    auto dyn = s.unify(la, lb);
    lf::UnifyResult st = lf::static_unify(ctx, a, b);
    REQUIRE(dyn.ok() == !st.bottom);
    if (!dyn.ok()) continue;
    ++successes;
    // the dereferenced heap terms equal the mgu-instantiated terms
    CHECK(s.encode(la) == lf::apply(st.mgu, a));
    CHECK(s.encode(lb) == lf::apply(st.mgu, b));
  }
  CHECK(successes > 100);
}

// ---- whole-program execution ---------------------------------------------

TEST_CASE("running the running example") {
  Outcome out = run_corpus("plus.tpl");
  REQUIRE(out.tag == Outcome::Tag::Success);
  REQUIRE(out.answers.size() == 1);
  CHECK(out.answers[0].first == "X");
  CHECK(out.answers[0].second == "succ(succ(succ(succ(zero))))");
}

TEST_CASE("backtracking trace: one backtrack, answer succ(zero)") {
  Outcome out = run_corpus("plus_trace.tpl");
  REQUIRE(out.tag == Outcome::Tag::Success);
  CHECK(out.answers[0].second == "succ(zero)");
  CHECK(out.stats.backtracks == 1);
}

TEST_CASE("a clause-head mismatch with an empty trail fails the query") {
  Outcome out = run_corpus("fail.tpl");
  CHECK(out.tag == Outcome::Tag::Failure);
}

TEST_CASE("occurs check terminates X = f(X) with failure") {
  VmOptions vo;
  vo.fuel = 10000;
  Outcome out = run_corpus("eq_occurs.tpl", vo);
  CHECK(out.tag == Outcome::Tag::Failure);
}

TEST_CASE("unbound answers render as _G0 with sharing") {
  Outcome out = run_corpus("any.tpl");
  REQUIRE(out.tag == Outcome::Tag::Success);
  CHECK(out.answers[0].second == "_G0");

  // two query variables aliased to one free cell share the rendering
  pipeline::Result res = pipeline::compile_source(
      "nat : type.\nzero/0 : nat.\n"
      "p/2 : nat -> nat -> prop.\np(X, X).\n?- p(A, B).");
  REQUIRE(res.ok());
  Outcome out2 = run(res.swam);
  REQUIRE(out2.tag == Outcome::Tag::Success);
  REQUIRE(out2.answers.size() == 2);
  CHECK(out2.answers[0].second == "_G0");
  CHECK(out2.answers[1].second == "_G0");
}

TEST_CASE("fuel exhaustion is distinct from failure") {
  pipeline::Result res = pipeline::compile_source(
      "nat : type.\nzero/0 : nat.\n"
      "loop/0 : prop.\nloop :- loop.\n?- loop.");
  REQUIRE(res.ok());
  VmOptions vo;
  vo.fuel = 5000;
  Outcome out = run(res.swam, vo);
  CHECK(out.tag == Outcome::Tag::OutOfFuel);
}

TEST_CASE("ill-typed input reports a stuck state rather than crashing") {
  // jmp through a register holding a tuple
  std::string text =
      "swam\n"
      "sig { data nat. }\n"
      "xi { query/0 : not {}. }\n"
      "query query/0\n"
      "code query/0 = code[]{}(\n"
      "  put_tuple r1, 0;\n"
      "  jmp r1;\n"
      ")\n";
  Program p = parse_ir(text);
  Outcome out = run(p);
  CHECK(out.tag == Outcome::Tag::Stuck);
  CHECK(out.detail.find("continuation") != std::string::npos);
}

TEST_CASE("checked execution accepts every certified corpus program") {
  for (auto name :
       {"plus.tpl", "plus_trace.tpl", "both_zero.tpl", "same_pos.tpl",
        "sum3.tpl", "next_color.tpl", "fail.tpl", "eq_occurs.tpl", "mult.tpl",
        "append.tpl", "any.tpl", "even.tpl", "deep_plus.tpl"}) {
    VmOptions vo;
    vo.checked = true;
    Outcome out = run_corpus(name, vo);
    INFO(name, ": ", out.detail);
    CHECK(out.tag != Outcome::Tag::InvariantViolation);
    CHECK(out.tag != Outcome::Tag::Stuck);
  }
}

TEST_CASE("checked execution requires annotations") {
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path("plus.tpl")));
  REQUIRE(res.ok());
  VmOptions vo;
  vo.checked = true;
  Outcome out = run(res.swam, vo);
  CHECK(out.tag == Outcome::Tag::Stuck);
}

TEST_CASE("checked mode flags a corrupted proof annotation") {
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path("plus.tpl")));
  REQUIRE(res.ok());
  Program p = res.twam;
  // swap the succeed annotation's type for a wrong one
  for (auto& [l, cv] : p.code)
    for (auto& ins : cv.body)
      if (ins.op == Instruction::Op::Succeed)
        ins.proof_type.args[2] = lf::con("zero");
  VmOptions vo;
  vo.checked = true;
  Outcome out = run(p, vo);
  CHECK(out.tag == Outcome::Tag::InvariantViolation);
}

TEST_CASE("answers match the SLD oracle across the corpus") {
  for (auto name :
       {"plus.tpl", "plus_trace.tpl", "both_zero.tpl", "same_pos.tpl",
        "sum3.tpl", "next_color.tpl", "fail.tpl", "eq_occurs.tpl", "mult.tpl",
        "append.tpl", "any.tpl", "even.tpl", "deep_plus.tpl"}) {
    front::ProgramAst ast =
        front::parse(oracle::read_file(oracle::corpus_path(name)));
    REQUIRE(front::elaborate(ast).ok());
    oracle::SldResult ref = oracle::sld_solve(ast, 2000000);
    Outcome out = run_corpus(name);
    INFO(name);
    if (ref.tag == oracle::SldResult::Tag::Success) {
      REQUIRE(out.tag == Outcome::Tag::Success);
      REQUIRE(out.answers.size() == ref.answers.size());
      for (size_t i = 0; i < out.answers.size(); ++i) {
        CHECK(out.answers[i].first == ref.answers[i].first);
        CHECK(out.answers[i].second == ref.answers[i].second);
      }
    } else if (ref.tag == oracle::SldResult::Tag::Failure) {
      CHECK(out.tag == Outcome::Tag::Failure);
    }
  }
}
