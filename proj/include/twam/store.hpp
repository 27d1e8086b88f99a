#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twam/lf.hpp"

// Runtime store: union-find heap of Prolog terms, closures and tuples,
// plus the trail of failure continuations with the bindings to revert.
// The VM's step relation drives this; unification, the occurs check,
// pointer chasing and unwinding live here.

namespace twam {

// Runtime word: heap location or code label. Annotated words (lambda
// binders, LF arguments) appear only in checked execution.
struct Word {
  bool is_code = false;
  size_t loc = 0;
  std::string label;
  std::vector<lf::Param> binders;
  std::vector<lf::Term> args;
};

struct HeapValue {
  enum class Tag { Free, Bound, Structure, Closure, Tuple } tag = Tag::Free;
  std::string type_name;             // Free: atomic type
  std::string var_name;              // Free: LF variable (checked mode)
  size_t target = 0;                 // Bound
  std::string con;                   // Structure
  std::vector<size_t> str_args;      // Structure
  Word env;                          // Closure
  std::string label;                 // Closure
  std::vector<lf::Term> label_args;  // Closure (checked mode)
  std::vector<Word> elems;           // Tuple
};

HeapValue hv_free(std::string type_name, std::string var_name = "");
HeapValue hv_bound(size_t target);
HeapValue hv_structure(std::string con, std::vector<size_t> args);
HeapValue hv_tuple(std::vector<Word> elems);
HeapValue hv_closure(Word env, std::string label,
                     std::vector<lf::Term> label_args = {});

struct TrailRecord {
  size_t loc;
  std::string type_name;
  std::string var_name;
};

struct TrailFrame {
  std::vector<TrailRecord> records;  // most recent first
  Word env;
  std::string label;
  std::vector<lf::Term> label_args;  // checked mode
  // Checked mode: unifier substitutions reach into closure and tuple
  // annotations on the heap; backtracking must see them as they were when
  // this frame was pushed.
  std::vector<std::pair<size_t, std::vector<lf::Term>>> closure_snapshot;
  std::vector<std::pair<size_t, std::vector<Word>>> tuple_snapshot;
};

struct Store {
  std::vector<HeapValue> heap;
  std::vector<TrailFrame> trail;
  uint64_t cells_allocated = 0;
  uint64_t unify_calls = 0;

  size_t alloc(HeapValue v);

  // Follows bound chains to the unique terminus; terminates on acyclic
  // heaps.
  size_t deref(size_t l) const;

  // Reachability of l1 from l2 (through bound, structure, tuple and
  // closure-environment edges).
  bool occurs(size_t l1, size_t l2) const;

  // Records a soon-to-be-bound free cell in the current trail frame; a
  // no-op when the trail is empty.
  void uptrail(size_t l);

  // Overwrites the free cell `l` after trailing it; returns the LF
  // variable name the cell carried (checked-mode bookkeeping).
  std::string bind_cell(size_t l, HeapValue v);

  struct UnifyOutcome {
    enum class Tag { Ok, Bottom, NonTerm } tag = Tag::Ok;
    // variables whose cells were bound, in binding order
    std::vector<std::string> bound_vars;
    bool ok() const { return tag == Tag::Ok; }
  };

  // First-order unification with occurs check; argument lists left to
  // right. On Bottom, partial bindings remain and are reverted by the
  // trail. NonTerm reports a non Prolog-term operand (ill-typed input).
  UnifyOutcome unify(size_t l1, size_t l2);

  // Pops the top frame, restores every recorded cell to free (and the
  // annotation snapshots), and hands the frame back; nullopt on an empty
  // trail.
  std::optional<TrailFrame> pop_and_unwind();

  // Prolog-term readback (checked mode): free cells become their LF
  // variable.
  lf::Term encode(size_t l) const;

  // Human rendering with `_G<k>` for free cells, shared via `anon`.
  std::string render(size_t l, std::map<size_t, int>& anon) const;
};

}  // namespace twam
