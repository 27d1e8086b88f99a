#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "twam/checker.hpp"
#include "twam/ir_text.hpp"
#include "twam/pipeline.hpp"

using namespace twam;
using lf::atom;
using lf::con;
using lf::var;

namespace {

using Op = Instruction::Op;

Instruction I_putvar(std::string r, std::string x, std::string ty) {
  Instruction i;
  i.op = Op::PutVar;
  i.r1 = std::move(r);
  i.bind_var = std::move(x);
  i.bind_type = std::move(ty);
  return i;
}
Instruction I_getval(std::string r1, std::string r2) {
  Instruction i;
  i.op = Op::GetVal;
  i.r1 = std::move(r1);
  i.r2 = std::move(r2);
  return i;
}
Instruction I_getstr(std::string c, int n, std::string r) {
  Instruction i;
  i.op = Op::GetStr;
  i.con = std::move(c);
  i.num = n;
  i.r1 = std::move(r);
  return i;
}
Instruction I_putstr(std::string c, int n, std::string r) {
  Instruction i;
  i.op = Op::PutStr;
  i.con = std::move(c);
  i.num = n;
  i.r1 = std::move(r);
  return i;
}
Instruction I_uvar(std::string r, std::string x, std::string ty) {
  Instruction i;
  i.op = Op::UnifyVar;
  i.r1 = std::move(r);
  i.bind_var = std::move(x);
  i.bind_type = std::move(ty);
  return i;
}
Instruction I_uval(std::string r) {
  Instruction i;
  i.op = Op::UnifyVal;
  i.r1 = std::move(r);
  return i;
}
Instruction I_jmp(Operand op) {
  Instruction i;
  i.op = Op::Jmp;
  i.operand = std::move(op);
  return i;
}
Instruction I_mov(std::string r, Operand op) {
  Instruction i;
  i.op = Op::Mov;
  i.r1 = std::move(r);
  i.operand = std::move(op);
  return i;
}
Instruction I_puttuple(std::string r, int n) {
  Instruction i;
  i.op = Op::PutTuple;
  i.r1 = std::move(r);
  i.num = n;
  return i;
}
Instruction I_setval(std::string r) {
  Instruction i;
  i.op = Op::SetVal;
  i.r1 = std::move(r);
  return i;
}
Instruction I_pushbt(std::string r, Operand op) {
  Instruction i;
  i.op = Op::PushBt;
  i.r1 = std::move(r);
  i.operand = std::move(op);
  return i;
}
Instruction I_succeed(lf::Term proof, lf::Family ty) {
  Instruction i;
  i.op = Op::Succeed;
  i.proof = std::move(proof);
  i.proof_type = std::move(ty);
  return i;
}

// Dependent program shell holding the running-example signature; blocks are
// checked against hand-made xi entries via check_block.
Program shell() {
  Program p;
  p.dependent = true;
  p.sig.add(lf::SigEntry{lf::SigEntry::Tag::Data, "nat", {}, {}});
  p.sig.add(lf::SigEntry{lf::SigEntry::Tag::Con, "zero", {}, atom("nat")});
  p.sig.add(lf::SigEntry{lf::SigEntry::Tag::Con, "succ", {},
                         lf::pi({lf::Param{"_a", atom("nat")}}, atom("nat"))});
  p.sig.add(lf::SigEntry{
      lf::SigEntry::Tag::Pred, "plus",
      lf::Kind{{lf::Param{"_1", atom("nat")}, lf::Param{"_2", atom("nat")},
                lf::Param{"_3", atom("nat")}}},
      {}});
  p.sig.add(lf::SigEntry{lf::SigEntry::Tag::Clause, "plus-1", {},
                         lf::pi({lf::Param{"X", atom("nat")}},
                                atom("plus", {con("zero"), var("X"),
                                              var("X")}))});
  return p;
}

MachineType not_rf(std::vector<RegEntry> rf) { return cont({}, std::move(rf)); }

}  // namespace

TEST_CASE("succeed checks its proof annotation") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  RegFileType gamma;
  // valid: plus-1 zero : plus zero zero zero
  CheckResult ok = check_block(
      p, xi, "b", delta, gamma,
      {I_succeed(con("plus-1", {con("zero")}),
                 atom("plus", {con("zero"), con("zero"), con("zero")}))});
  CHECK(ok.ok());
  // invalid annotation
  CheckResult bad = check_block(
      p, xi, "b", delta, gamma,
      {I_succeed(con("plus-1", {con("zero")}),
                 atom("plus", {con("zero"), con("zero"),
                               con("succ", {con("zero")})}))});
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.errors[0].rule == "Succeed");
}

TEST_CASE("get_val with clashing singletons vacuously accepts the rest") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  delta.push("y", atom("nat"));
  RegFileType gamma;
  gamma.set("r1", sing(con("zero"), "nat"));
  gamma.set("r2", sing(con("succ", {var("y")}), "nat"));
  // anything after the clash is accepted without inspection
  CheckResult r = check_block(p, xi, "b", delta, gamma,
                              {I_getval("r1", "r2"), I_getval("r9", "r9")});
  CHECK(r.ok());
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].rule == "GetVal-F");
  CHECK(r.warnings[0].instr_index == 0);
}

TEST_CASE("put_str spine computes the built singleton") {
  // put_str succ/1, r3; unify_val r2 with r2 : S(zero)  =>  r3 : S(succ zero)
  Program p = shell();
  std::map<std::string, MachineType> xi;
  xi["done/0"] = not_rf({RegEntry{
      "r3", sing(con("succ", {con("zero")}), "nat")}});
  lf::Context delta;
  RegFileType gamma;
  gamma.set("r2", sing(con("zero"), "nat"));
  CheckResult r = check_block(
      p, xi, "b", delta, gamma,
      {I_putstr("succ", 1, "r3"), I_uval("r2"), I_jmp(op_label("done/0"))});
  CHECK(r.ok());
  CHECK(r.warnings.empty());
}

TEST_CASE("get_str applies the unifier to the remainder") {
  // r1 : S(X), r2 : S(X); get_str zero/0, r1 makes r2 : S(zero)
  Program p = shell();
  std::map<std::string, MachineType> xi;
  xi["done/0"] = not_rf({RegEntry{"r2", sing(con("zero"), "nat")}});
  lf::Context delta;
  delta.push("X", atom("nat"));
  RegFileType gamma;
  gamma.set("r1", sing(var("X"), "nat"));
  gamma.set("r2", sing(var("X"), "nat"));
  CheckResult r =
      check_block(p, xi, "b", delta, gamma,
                  {I_getstr("zero", 0, "r1"), I_jmp(op_label("done/0"))});
  CHECK(r.ok());
}

TEST_CASE("get_str on an incompatible singleton is vacuous with a warning") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  delta.push("y", atom("nat"));
  RegFileType gamma;
  gamma.set("r1", sing(con("succ", {var("y")}), "nat"));
  CheckResult r = check_block(p, xi, "b", delta, gamma,
                              {I_getstr("zero", 0, "r1")});
  CHECK(r.ok());
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].rule == "spine-bottom");
}

TEST_CASE("read spine with unify_var binds a fresh variable") {
  // get_str succ/1, r1 destructs r1 : S(succ zero): binder gets zero
  Program p = shell();
  std::map<std::string, MachineType> xi;
  xi["done/0"] = not_rf({RegEntry{"r5", sing(con("zero"), "nat")}});
  lf::Context delta;
  RegFileType gamma;
  gamma.set("r1", sing(con("succ", {con("zero")}), "nat"));
  CheckResult r = check_block(p, xi, "b", delta, gamma,
                              {I_getstr("succ", 1, "r1"),
                               I_uvar("r5", "W", "nat"),
                               I_jmp(op_label("done/0"))});
  CHECK(r.ok());
}

TEST_CASE("tuple spines produce tuple types and check element counts") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  xi["done/0"] = not_rf({RegEntry{"r4", tuple({})}});
  lf::Context delta;
  RegFileType gamma;
  CheckResult r = check_block(p, xi, "b", delta, gamma,
                              {I_puttuple("r4", 0), I_jmp(op_label("done/0"))});
  CHECK(r.ok());
  // set_val of an untyped register is rejected
  CheckResult bad = check_block(p, xi, "b", delta, gamma,
                                {I_puttuple("r4", 1), I_setval("r9"),
                                 I_jmp(op_label("done/0"))});
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.errors[0].rule == "TSpine-SetVal");
  // wrong element count: block ends inside the spine
  CheckResult open_spine =
      check_block(p, xi, "b", delta, gamma, {I_puttuple("r4", 2)});
  REQUIRE_FALSE(open_spine.ok());
}

TEST_CASE("operand typing: registers, labels, application, lambda") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  delta.push("Y", atom("nat"));
  RegFileType gamma;
  // ret : PI D : plus zero Y Y. not {}
  gamma.set("ret",
            cont({lf::Param{"D", atom("plus", {con("zero"), var("Y"),
                                               var("Y")})}},
                 {}));
  Res<MachineType> t0 = check_operand(p, xi, delta, gamma, op_reg("ret"));
  REQUIRE(t0.ok());
  CHECK(t0.value().params.size() == 1);

  // (ret (plus-1 Y)) : not {}
  Operand app = op_reg("ret");
  app.args.push_back(con("plus-1", {var("Y")}));
  Res<MachineType> t1 = check_operand(p, xi, delta, gamma, app);
  REQUIRE(t1.ok());
  CHECK(t1.value().params.empty());
  CHECK(t1.value().rf.empty());

  // applying a non-product label is rejected
  xi["k/0"] = not_rf({});
  Operand bad = op_label("k/0", {con("zero")});
  Res<MachineType> t2 = check_operand(p, xi, delta, gamma, bad);
  REQUIRE_FALSE(t2.ok());
  CHECK(t2.diag().rule == "op-app");

  // lambda operand: \D : plus zero Y Y. ret D  :  PI D... not {}
  Operand lam = op_reg("ret");
  lam.binders.push_back(
      lf::Param{"E", atom("plus", {con("zero"), var("Y"), var("Y")})});
  lam.args.push_back(var("E"));
  Res<MachineType> t3 = check_operand(p, xi, delta, gamma, lam);
  REQUIRE(t3.ok());
  CHECK(t3.value().params.size() == 1);
}

TEST_CASE("blocks must end in jmp or succeed") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  RegFileType gamma;
  CheckResult r =
      check_block(p, xi, "b", delta, gamma, {I_putvar("r1", "x", "nat")});
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors[0].message.find("end in jmp or succeed") !=
        std::string::npos);
  // and nothing may follow a terminator
  CheckResult r2 = check_block(
      p, xi, "b", delta, gamma,
      {I_succeed(con("zero"), atom("nat")), I_putvar("r1", "x", "nat")});
  REQUIRE_FALSE(r2.ok());
}

TEST_CASE("put_var insists on data types") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  RegFileType gamma;
  CheckResult r = check_block(p, xi, "b", delta, gamma,
                              {I_putvar("r1", "D", "plus")});
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors[0].rule == "Putvar");
}

TEST_CASE("push_bt requires exactly the env register") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  xi["f/0"] = not_rf({RegEntry{"env", tuple({})}});
  xi["g/0"] = not_rf(
      {RegEntry{"env", tuple({})}, RegEntry{"r1", sing(con("zero"), "nat")}});
  lf::Context delta;
  RegFileType gamma;
  CheckResult ok = check_block(
      p, xi, "b", delta, gamma,
      {I_puttuple("r4", 0), I_pushbt("r4", op_label("f/0")),
       I_succeed(con("zero"), atom("nat"))});
  CHECK(ok.ok());
  CheckResult bad = check_block(
      p, xi, "b", delta, gamma,
      {I_puttuple("r4", 0), I_pushbt("r4", op_label("g/0")),
       I_succeed(con("zero"), atom("nat"))});
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.errors[0].rule == "BT");
}

TEST_CASE("constructor arity must match the spine length") {
  Program p = shell();
  std::map<std::string, MachineType> xi;
  lf::Context delta;
  delta.push("X", atom("nat"));
  RegFileType gamma;
  gamma.set("r1", sing(var("X"), "nat"));
  CheckResult r = check_block(p, xi, "b", delta, gamma,
                              {I_getstr("succ", 2, "r1"), I_uval("r1"),
                               I_uval("r1")});
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors[0].message.find("arity") != std::string::npos);
}

TEST_CASE("whole-program checking accepts compiled output and is "
          "deterministic") {
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path("plus.tpl")));
  REQUIRE(res.ok());
  CheckResult a = check_program(res.twam);
  CheckResult b = check_program(res.twam);
  CHECK(a.ok());
  CHECK(a.errors.size() == b.errors.size());
  CHECK(a.warnings.size() == b.warnings.size());
}

TEST_CASE("the paper's base-case block checks in isolation") {
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path("plus.tpl")));
  REQUIRE(res.ok());
  std::map<std::string, MachineType> xi;
  for (auto& [l, cv] : res.twam.code) xi[l] = code_type(cv);
  const CodeValue* cv = res.twam.find("plus-1/3");
  REQUIRE(cv != nullptr);
  lf::Context delta;
  for (auto& par : cv->params) delta.push(par.name, par.type);
  CheckResult ok =
      check_block(res.twam, xi, "plus-1/3", delta, cv->rf, cv->body);
  CHECK(ok.ok());

  SUBCASE("deleting the get_str breaks the proof at the jmp") {
    std::vector<Instruction> body;
    int jmp_index = -1;
    for (auto& ins : cv->body)
      if (ins.op != Instruction::Op::GetStr) body.push_back(ins);
    jmp_index = static_cast<int>(body.size()) - 1;
    CheckResult bad =
        check_block(res.twam, xi, "plus-1/3", delta, cv->rf, body);
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.errors[0].instr_index == jmp_index);
  }
}

TEST_CASE("xi header and code annotations must agree") {
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path("plus.tpl")));
  REQUIRE(res.ok());
  Program p = res.twam;
  p.xi[0].second = cont({}, {});  // corrupt one header entry
  CheckResult r = check_program(p);
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors[0].rule == "Code-Sec");
}

TEST_CASE("the query entry must have the empty continuation type") {
  pipeline::Result res = pipeline::compile_source(
      oracle::read_file(oracle::corpus_path("plus.tpl")));
  REQUIRE(res.ok());
  Program p = res.twam;
  p.entry = "plus-1/3";
  CheckResult r = check_program(p);
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors[0].message.find("query entry") != std::string::npos);
}
