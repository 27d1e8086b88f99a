#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "twam/ir_text.hpp"
#include "twam/pipeline.hpp"

using namespace twam;

namespace {

Program compile_corpus(const std::string& name, bool tco = true) {
  pipeline::Options opts;
  opts.tco = tco;
  pipeline::Result res =
      pipeline::compile_source(oracle::read_file(oracle::corpus_path(name)),
                               opts);
  REQUIRE(res.ok());
  return res.twam;
}

}  // namespace

TEST_CASE("print_ir . parse_ir is the identity on compiled programs") {
  for (auto name : {"plus.tpl", "mult.tpl", "append.tpl", "same_pos.tpl",
                    "next_color.tpl", "any.tpl"}) {
    Program p = compile_corpus(name);
    std::string text = print_ir(p);
    Program q = parse_ir(text);
    CHECK(print_ir(q) == text);
    CHECK(q.dependent == p.dependent);
    CHECK(q.entry == p.entry);
    CHECK(q.query_vars == p.query_vars);
    // and on the erased image too
    Program pe = erase(p);
    std::string etext = print_ir(pe);
    CHECK(print_ir(parse_ir(etext)) == etext);
  }
}

TEST_CASE("parse_ir rejects an empty program") {
  CHECK_THROWS_AS(parse_ir(""), ParseError);
  // a program with no code has no query entry
  CHECK_THROWS_WITH_AS(parse_ir("twam sig { } xi { } query query/0"),
                       doctest::Contains("no query entry"), ParseError);
}

TEST_CASE("parse_ir reports locations on syntax errors") {
  try {
    parse_ir("twam\nsig {\n  data nat\n}\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.diag.loc.valid());
    CHECK(e.diag.loc.line >= 3);
  }
}

TEST_CASE("erase drops annotations but keeps block structure") {
  Program p = compile_corpus("plus.tpl");
  Program e = erase(p);
  CHECK_FALSE(e.dependent);
  REQUIRE(e.code.size() == p.code.size());
  for (size_t i = 0; i < p.code.size(); ++i) {
    CHECK(e.code[i].first == p.code[i].first);
    const auto& db = p.code[i].second.body;
    const auto& eb = e.code[i].second.body;
    REQUIRE(db.size() == eb.size());  // instruction count preserved
    for (size_t j = 0; j < db.size(); ++j) {
      CHECK(db[j].op == eb[j].op);  // constructor sequence preserved
      CHECK(eb[j].bind_var.empty());
      CHECK(eb[j].operand.args.empty());
      CHECK(eb[j].operand.binders.empty());
    }
    CHECK(e.code[i].second.params.empty());
  }
  // erased signature keeps only data types and constructors
  for (auto& entry : e.sig.entries)
    CHECK((entry.tag == lf::SigEntry::Tag::Data ||
           entry.tag == lf::SigEntry::Tag::Con));
}

TEST_CASE("erase is idempotent on its image") {
  Program p = compile_corpus("mult.tpl");
  Program e1 = erase(p);
  Program e2 = erase(e1);
  e2.dependent = false;
  CHECK(print_ir(e1) == print_ir(e2));
}

TEST_CASE("erasing a succeed annotation and operand applications") {
  Program p = compile_corpus("plus.tpl");
  Program e = erase(p);
  const CodeValue* ic = e.find("init-cont/0");
  REQUIRE(ic != nullptr);
  REQUIRE(ic->body.size() == 1);
  CHECK(ic->body[0].op == Instruction::Op::Succeed);
  CHECK(show(ic->body[0], false) == "succeed");
  // jmp (ret (plus-1 ...)) erases to jmp ret
  const CodeValue* c1 = e.find("plus-1/3");
  REQUIRE(c1 != nullptr);
  CHECK(show(c1->body.back(), false) == "jmp ret");
}

TEST_CASE("register file subsumption is a partial order") {
  RegFileType g1, g2, g3;
  g1.set("r1", atomic("nat"));
  g2.set("r1", atomic("nat"));
  g2.set("r2", atomic("nat"));
  g3.set("r1", atomic("nat"));
  g3.set("r2", atomic("nat"));
  g3.set("ret", cont({}, {}));
  // reflexive
  CHECK(rf_subsumes(g1.entries, g1.entries));
  // transitive: g1 <= g2 <= g3
  CHECK(rf_subsumes(g1.entries, g2.entries));
  CHECK(rf_subsumes(g2.entries, g3.entries));
  CHECK(rf_subsumes(g1.entries, g3.entries));
  // antisymmetric: mutual subsumption means equality
  CHECK_FALSE(rf_subsumes(g2.entries, g1.entries));
  RegFileType g2b;
  g2b.set("r2", atomic("nat"));
  g2b.set("r1", atomic("nat"));
  CHECK(rf_subsumes(g2.entries, g2b.entries));
  CHECK(rf_subsumes(g2b.entries, g2.entries));
  CHECK(rf_equal(g2.entries, g2b.entries));
}

TEST_CASE("machine type printing and alpha equality") {
  MachineType a =
      cont({lf::Param{"X", lf::atom("nat")}},
           {RegEntry{"r1", sing(lf::var("X"), "nat")}});
  MachineType b =
      cont({lf::Param{"Y", lf::atom("nat")}},
           {RegEntry{"r1", sing(lf::var("Y"), "nat")}});
  CHECK(alpha_equal(a, b));
  CHECK(show(a) == "PI X : nat. not {r1 : S(X : nat)}");
  MachineType t = tuple({atomic("nat"), cont({}, {})});
  CHECK(show(t) == "x(nat, not {})");
}
