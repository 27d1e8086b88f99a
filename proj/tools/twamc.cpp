// twamc: certifying T-Prolog compiler driver.
//
// Subcommands: compile, check, run, emit-lf. Answers go to stdout,
// diagnostics to stderr. Exit codes: 0 success, 1 query failure, 2 parse
// error, 3 elaboration error, 4 certification/check failure, 5 out of fuel.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "twam/checker.hpp"
#include "twam/ir_text.hpp"
#include "twam/pipeline.hpp"
#include "twam/vm.hpp"

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitFailure = 1;
constexpr int kExitParse = 2;
constexpr int kExitElaborate = 3;
constexpr int kExitCheck = 4;
constexpr int kExitFuel = 5;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    exit(kExitParse);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    exit(kExitParse);
  }
  out << content;
}

bool has_ext(const std::string& path, const std::string& ext) {
  return path.size() > ext.size() &&
         path.compare(path.size() - ext.size(), ext.size(), ext) == 0;
}

std::string stem(const std::string& path) {
  size_t dot = path.find_last_of('.');
  size_t slash = path.find_last_of('/');
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash))
    return path;
  return path.substr(0, dot);
}

int stage_exit_code(twam::pipeline::Stage s) {
  using S = twam::pipeline::Stage;
  switch (s) {
    case S::Parse:
      return kExitParse;
    case S::Elaborate:
      return kExitElaborate;
    default:
      return kExitCheck;
  }
}

void print_diags(const std::vector<twam::Diag>& diags) {
  for (auto& d : diags) std::cerr << d.to_string() << "\n";
}

twam::pipeline::Result compile_or_exit(const std::string& path, bool tco) {
  twam::pipeline::Options opts;
  opts.tco = tco;
  twam::pipeline::Result res =
      twam::pipeline::compile_source(read_file(path), opts);
  if (!res.ok()) {
    print_diags(res.diags);
    exit(stage_exit_code(res.failed));
  }
  return res;
}

int run_outcome(const twam::Outcome& out) {
  using Tag = twam::Outcome::Tag;
  switch (out.tag) {
    case Tag::Success:
      for (auto& [v, t] : out.answers) std::cout << v << " = " << t << "\n";
      if (out.answers.empty()) std::cout << "yes.\n";
      return kExitSuccess;
    case Tag::Failure:
      std::cout << "no.\n";
      return kExitFailure;
    case Tag::OutOfFuel:
      std::cerr << "error: " << out.detail << "\n";
      return kExitFuel;
    case Tag::Stuck:
    case Tag::InvariantViolation:
      std::cerr << "error: " << out.detail << "\n";
      return kExitCheck;
  }
  return kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certifying T-Prolog compiler (TWAM/SWAM toolchain)"};
  app.require_subcommand(1);

  std::string input;
  uint64_t fuel = 10'000'000;
  bool no_tco = false;
  bool checked = false;
  bool trace = false;
  std::vector<std::string> emits;
  std::string output;

  auto* cmd_compile = app.add_subcommand("compile", "compile a .tpl program");
  cmd_compile->add_option("input", input, "T-Prolog source file")->required();
  cmd_compile->add_option("-o,--output", output, "output basename");
  cmd_compile->add_flag("--no-tco", no_tco, "disable tail-call optimization");
  cmd_compile
      ->add_option("--emit", emits,
                   "extra artifacts to write: flat, twam, swam, lf")
      ->check(CLI::IsMember({"flat", "twam", "swam", "lf"}));

  auto* cmd_check = app.add_subcommand("check", "typecheck a .twam or .swam");
  cmd_check->add_option("input", input, "program file")->required();

  auto* cmd_run = app.add_subcommand("run", "run a program");
  cmd_run->add_option("input", input, ".tpl, .twam or .swam file")->required();
  cmd_run->add_option("--fuel", fuel, "step budget")
      ->check(CLI::PositiveNumber);
  cmd_run->add_flag("--no-tco", no_tco, "disable tail-call optimization");
  cmd_run->add_flag("--checked", checked,
                    "assert machine-state invariants every step");
  cmd_run->add_flag("--trace", trace, "print one line per step to stderr");

  auto* cmd_emit_lf =
      app.add_subcommand("emit-lf", "print a program's LF signature");
  cmd_emit_lf->add_option("input", input, "T-Prolog source file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_compile) {
      twam::pipeline::Result res = compile_or_exit(input, !no_tco);
      std::string base = output.empty() ? stem(input) : output;
      write_file(base + ".twam", twam::print_ir(res.twam));
      write_file(base + ".swam", twam::print_ir(res.swam));
      for (auto& e : emits) {
        if (e == "flat")
          write_file(base + ".flat", twam::pipeline::print_flat(res.flat));
        else if (e == "lf")
          write_file(base + ".lf", twam::lf::print_signature(res.lfsig));
        else if (e == "twam")
          write_file(base + ".twam", twam::print_ir(res.twam));
        else if (e == "swam")
          write_file(base + ".swam", twam::print_ir(res.swam));
      }
      for (auto& w : res.warnings) std::cerr << w.to_string() << "\n";
      return kExitSuccess;
    }

    if (*cmd_check) {
      twam::Program p;
      try {
        p = twam::parse_ir(read_file(input));
      } catch (const twam::ParseError& e) {
        std::cerr << e.diag.to_string() << "\n";
        return kExitParse;
      }
      twam::CheckResult cr = twam::check_program(p);
      for (auto& w : cr.warnings) std::cerr << w.to_string() << "\n";
      if (!cr.ok()) {
        print_diags(cr.errors);
        return kExitCheck;
      }
      return kExitSuccess;
    }

    if (*cmd_run) {
      twam::Program prog;
      if (has_ext(input, ".tpl")) {
        twam::pipeline::Result res = compile_or_exit(input, !no_tco);
        prog = checked ? res.twam : res.swam;
      } else {
        try {
          prog = twam::parse_ir(read_file(input));
        } catch (const twam::ParseError& e) {
          std::cerr << e.diag.to_string() << "\n";
          return kExitParse;
        }
        if (checked && !prog.dependent) {
          std::cerr << "error: --checked needs a .twam or .tpl input\n";
          return kExitParse;
        }
        if (!checked && prog.dependent) prog = twam::erase(prog);
      }
      twam::VmOptions vo;
      vo.fuel = fuel;
      vo.checked = checked;
      vo.trace = trace ? &std::cerr : nullptr;
      return run_outcome(twam::run(prog, vo));
    }

    if (*cmd_emit_lf) {
      twam::pipeline::Result res = compile_or_exit(input, true);
      std::cout << twam::lf::print_signature(res.lfsig);
      return kExitSuccess;
    }
  } catch (const twam::ParseError& e) {
    std::cerr << e.diag.to_string() << "\n";
    return kExitParse;
  }
  return kExitParse;
}
