#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "twam/lf.hpp"

using namespace twam;
using namespace twam::lf;

namespace {

// Signature of the running example: nat, zero, succ, plus, plus-1, plus-2.
Signature example_sig() {
  Signature sig;
  sig.add(SigEntry{SigEntry::Tag::Data, "nat", {}, {}});
  sig.add(SigEntry{SigEntry::Tag::Con, "zero", {}, atom("nat")});
  sig.add(SigEntry{SigEntry::Tag::Con, "succ", {},
                   pi({Param{"_a1", atom("nat")}}, atom("nat"))});
  sig.add(SigEntry{SigEntry::Tag::Pred, "plus",
                   Kind{{Param{"_a1", atom("nat")}, Param{"_a2", atom("nat")},
                         Param{"_a3", atom("nat")}}},
                   {}});
  sig.add(SigEntry{SigEntry::Tag::Clause, "plus-1", {},
                   pi({Param{"X", atom("nat")}},
                      atom("plus", {con("zero"), var("X"), var("X")}))});
  sig.add(SigEntry{
      SigEntry::Tag::Clause, "plus-2", {},
      pi({Param{"X", atom("nat")}, Param{"Y", atom("nat")},
          Param{"Z", atom("nat")},
          Param{"D", atom("plus", {var("X"), var("Y"), var("Z")})}},
         atom("plus", {con("succ", {var("X")}), var("Y"),
                       con("succ", {var("Z")})}))});
  return sig;
}

Signature unif_sig() {
  Signature sig;
  sig.add(SigEntry{SigEntry::Tag::Data, "nat", {}, {}});
  sig.add(SigEntry{SigEntry::Tag::Con, "zero", {}, atom("nat")});
  sig.add(SigEntry{SigEntry::Tag::Con, "succ", {},
                   pi({Param{"_a1", atom("nat")}}, atom("nat"))});
  sig.add(SigEntry{SigEntry::Tag::Con, "c", {},
                   pi({Param{"_a1", atom("nat")}, Param{"_a2", atom("nat")}},
                      atom("nat"))});
  return sig;
}

Context nat_ctx(std::initializer_list<std::string> vars) {
  Context ctx;
  for (auto& v : vars) ctx.push(v, atom("nat"));
  return ctx;
}

}  // namespace

TEST_CASE("check_signature accepts the running example") {
  Signature sig = example_sig();
  CHECK_FALSE(check_signature(sig).has_value());
}

TEST_CASE("check_signature accepts the empty signature") {
  Signature sig;
  CHECK_FALSE(check_signature(sig).has_value());
}

TEST_CASE("check_signature rejects an unbound reference") {
  Signature sig;
  sig.add(SigEntry{SigEntry::Tag::Con, "c", {}, atom("nat")});
  auto d = check_signature(sig);
  REQUIRE(d.has_value());
  CHECK(d->message.find("nat") != std::string::npos);
}

TEST_CASE("check_signature rejects duplicates") {
  Signature sig;
  sig.add(SigEntry{SigEntry::Tag::Data, "nat", {}, {}});
  auto dup = sig.add(SigEntry{SigEntry::Tag::Data, "nat", {}, {}});
  REQUIRE(dup.has_value());
  CHECK(dup->message.find("duplicate") != std::string::npos);
}

TEST_CASE("check_term synthesizes by applying pi types") {
  Signature sig = example_sig();
  Context empty;
  // plus-1 zero : plus zero zero zero (hand-applied product type)
  Res<Family> t = check_term(sig, empty, con("plus-1", {con("zero")}));
  REQUIRE(t.ok());
  CHECK(alpha_equal(t.value(),
                    atom("plus", {con("zero"), con("zero"), con("zero")})));
}

TEST_CASE("check_term looks variables up in the context") {
  Signature sig = example_sig();
  Context ctx = nat_ctx({"X"});
  Res<Family> t = check_term(sig, ctx, var("X"));
  REQUIRE(t.ok());
  CHECK(alpha_equal(t.value(), atom("nat")));
}

TEST_CASE("check_term rejects application of a non-product") {
  Signature sig = example_sig();
  Context empty;
  Res<Family> t =
      check_term(sig, empty, con("succ", {con("zero"), con("zero")}));
  REQUIRE_FALSE(t.ok());
  CHECK(t.diag().message.find("non-product") != std::string::npos);
}

TEST_CASE("check_term rejects unbound names") {
  Signature sig = example_sig();
  Context empty;
  CHECK_FALSE(check_term(sig, empty, var("Q")).ok());
  CHECK_FALSE(check_term(sig, empty, con("mystery")).ok());
}

TEST_CASE("substitution is simultaneous, not sequential") {
  // [y/x, x/y](c x y) = c y x
  Subst s;
  s.items["x"] = var("y");
  s.items["y"] = var("x");
  Term t = con("c", {var("x"), var("y")});
  CHECK(apply(s, t) == con("c", {var("y"), var("x")}));
}

TEST_CASE("substitution basics") {
  Subst s;
  s.items["x"] = con("zero");
  CHECK(apply(s, con("succ", {var("x")})) == con("succ", {con("zero")}));

  Subst s2;
  s2.items["x"] = con("succ", {var("y")});
  Term t = con("plus", {var("x"), var("y"), var("x")});
  CHECK(apply(s2, t) == con("plus", {con("succ", {var("y")}), var("y"),
                                     con("succ", {var("y")})}));
}

TEST_CASE("substitution into families avoids capture") {
  // [y/x]({y:nat} plus x y y) must rename the binder
  Subst s;
  s.items["x"] = var("y");
  Family f = pi({Param{"y", atom("nat")}},
                atom("plus", {var("x"), var("y"), var("y")}));
  Family g = apply(s, f);
  REQUIRE(g.params.size() == 1);
  CHECK(g.params[0].name != "y");
  CHECK(g.args[0] == var("y"));
  CHECK(g.args[1] == var(g.params[0].name));
}

TEST_CASE("occurs check is total and correct") {
  CHECK(occurs("x", var("x")));
  CHECK_FALSE(occurs("x", con("succ", {var("y")})));
  CHECK(occurs("x", con("c", {con("d", {var("x")}), var("y")})));
}

TEST_CASE("static_unify: identical variables") {
  Context ctx = nat_ctx({"x"});
  UnifyResult u = static_unify(ctx, var("x"), var("x"));
  REQUIRE_FALSE(u.bottom);
  CHECK(u.mgu.empty());
}

TEST_CASE("static_unify: occurs failure") {
  Context ctx = nat_ctx({"x"});
  UnifyResult u = static_unify(ctx, var("x"), con("succ", {var("x")}));
  CHECK(u.bottom);
}

TEST_CASE("static_unify: head clash") {
  Context ctx;
  UnifyResult u = static_unify(ctx, con("zero"), con("succ", {var("y")}));
  CHECK(u.bottom);
}

TEST_CASE("static_unify: frozen example against the reference unifier") {
  // c x zero ~ c (succ y) x'  =>  [succ y/x, zero/x']
  Context ctx = nat_ctx({"x", "y", "xp"});
  Term m1 = con("c", {var("x"), con("zero")});
  Term m2 = con("c", {con("succ", {var("y")}), var("xp")});
  UnifyResult u = static_unify(ctx, m1, m2);
  REQUIRE_FALSE(u.bottom);
  CHECK(apply(u.mgu, var("x")) == con("succ", {var("y")}));
  CHECK(apply(u.mgu, var("xp")) == con("zero"));
  CHECK(apply(u.mgu, m1) == apply(u.mgu, m2));

  auto ref = oracle::robinson_unify(m1, m2);
  REQUIRE(ref.has_value());
  CHECK(apply(*ref, m1) == apply(*ref, m2));
  CHECK(oracle::alpha_variant(apply(u.mgu, m1), apply(*ref, m1)));
}

TEST_CASE("static_unify binds the left variable on variable-variable") {
  Context ctx = nat_ctx({"x", "y"});
  UnifyResult u = static_unify(ctx, var("x"), var("y"));
  REQUIRE_FALSE(u.bottom);
  CHECK(u.mgu.binds("x"));
  CHECK_FALSE(u.mgu.binds("y"));
}

TEST_CASE("static_unify soundness and reference agreement on random pairs") {
  std::mt19937_64 rng(20260809);
  std::vector<std::string> vars{"A", "B", "C"};
  Context ctx = nat_ctx({"A", "B", "C"});
  int agree = 0;
  for (int i = 0; i < 3000; ++i) {
    Term a = oracle::random_term(rng, 3, vars);
    Term b = oracle::random_term(rng, 3, vars);
    UnifyResult u = static_unify(ctx, a, b);
    auto ref = oracle::robinson_unify(a, b);
    REQUIRE(u.bottom == !ref.has_value());
    if (!u.bottom) {
      CHECK(apply(u.mgu, a) == apply(u.mgu, b));
      CHECK(oracle::alpha_variant(apply(u.mgu, a), apply(*ref, a)));
      ++agree;
    }
  }
  CHECK(agree > 100);
}

TEST_CASE("generality: any unifier factors through the mgu") {
  std::mt19937_64 rng(7);
  std::vector<std::string> vars{"A", "B", "C"};
  Context ctx = nat_ctx({"A", "B", "C"});
  int tested = 0;
  for (int i = 0; i < 6000 && tested < 200; ++i) {
    Term a = oracle::random_term(rng, 2, vars);
    Term b = oracle::random_term(rng, 2, vars);
    Subst cand;
    for (auto& v : vars)
      if (rng() % 2)
        cand.items[v] = oracle::random_term(rng, 2, {}, /*ground=*/true);
    if (!(apply(cand, a) == apply(cand, b))) continue;
    ++tested;
    UnifyResult u = static_unify(ctx, a, b);
    REQUIRE_FALSE(u.bottom);
    // sigma' factors through the mgu: applying sigma' on top of the mgu's
    // action reproduces sigma' exactly
    CHECK(apply(cand, apply(u.mgu, a)) == apply(cand, a));
    CHECK(apply(cand, apply(u.mgu, b)) == apply(cand, b));
  }
  CHECK(tested >= 50);
}

TEST_CASE("doomed unifications stay doomed under substitution") {
  std::mt19937_64 rng(42);
  std::vector<std::string> vars{"A", "B", "C"};
  Context ctx = nat_ctx({"A", "B", "C"});
  int bottoms = 0;
  for (int i = 0; i < 8000 && bottoms < 300; ++i) {
    Term a = oracle::random_term(rng, 3, vars);
    Term b = oracle::random_term(rng, 3, vars);
    if (!static_unify(ctx, a, b).bottom) continue;
    ++bottoms;
    for (int j = 0; j < 5; ++j) {
      Subst s;
      s.items[vars[rng() % vars.size()]] =
          oracle::random_term(rng, 2, {}, /*ground=*/true);
      CHECK(static_unify(ctx, apply(s, a), apply(s, b)).bottom);
    }
  }
  CHECK(bottoms >= 100);
}

TEST_CASE("lf text form round-trips") {
  Signature sig = example_sig();
  std::string text = print_signature(sig);
  Signature back = parse_signature(text);
  REQUIRE(back.entries.size() == sig.entries.size());
  for (size_t i = 0; i < sig.entries.size(); ++i) {
    CHECK(back.entries[i].name == sig.entries[i].name);
    if (sig.entries[i].is_family())
      CHECK(alpha_equal(back.entries[i].kind, sig.entries[i].kind));
    else
      CHECK(alpha_equal(back.entries[i].type, sig.entries[i].type));
  }
  CHECK_FALSE(check_signature(back).has_value());
  CHECK(print_signature(back) == text);
}

TEST_CASE("substitution preserves well-typedness") {
  Signature sig = example_sig();
  Context ctx = nat_ctx({"X"});
  Term m = con("plus-1", {var("X")});
  Res<Family> before = check_term(sig, ctx, m);
  REQUIRE(before.ok());
  Subst s;
  s.items["X"] = con("succ", {con("zero")});
  Context empty;
  Res<Family> after = check_term(sig, empty, apply(s, m));
  REQUIRE(after.ok());
  CHECK(alpha_equal(after.value(), apply(s, before.value())));
}

TEST_CASE("unif playground signature is well-formed") {
  CHECK_FALSE(check_signature(unif_sig()).has_value());
}
