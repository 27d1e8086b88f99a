#include "twam/store.hpp"

#include <map>

namespace twam {

HeapValue hv_free(std::string type_name, std::string var_name) {
  HeapValue v;
  v.tag = HeapValue::Tag::Free;
  v.type_name = std::move(type_name);
  v.var_name = std::move(var_name);
  return v;
}

HeapValue hv_bound(size_t target) {
  HeapValue v;
  v.tag = HeapValue::Tag::Bound;
  v.target = target;
  return v;
}

HeapValue hv_structure(std::string con, std::vector<size_t> args) {
  HeapValue v;
  v.tag = HeapValue::Tag::Structure;
  v.con = std::move(con);
  v.str_args = std::move(args);
  return v;
}

HeapValue hv_tuple(std::vector<Word> elems) {
  HeapValue v;
  v.tag = HeapValue::Tag::Tuple;
  v.elems = std::move(elems);
  return v;
}

HeapValue hv_closure(Word env, std::string label,
                     std::vector<lf::Term> label_args) {
  HeapValue v;
  v.tag = HeapValue::Tag::Closure;
  v.env = std::move(env);
  v.label = std::move(label);
  v.label_args = std::move(label_args);
  return v;
}

size_t Store::alloc(HeapValue v) {
  heap.push_back(std::move(v));
  ++cells_allocated;
  return heap.size() - 1;
}

size_t Store::deref(size_t l) const {
  while (heap[l].tag == HeapValue::Tag::Bound) l = heap[l].target;
  return l;
}

bool Store::occurs(size_t l1, size_t l2) const {
  if (l1 == l2) return true;
  const HeapValue& v = heap[l2];
  switch (v.tag) {
    case HeapValue::Tag::Free:
      return false;
    case HeapValue::Tag::Bound:
      return occurs(l1, v.target);
    case HeapValue::Tag::Structure:
      for (size_t a : v.str_args)
        if (occurs(l1, a)) return true;
      return false;
    case HeapValue::Tag::Closure:
      return !v.env.is_code && occurs(l1, v.env.loc);
    case HeapValue::Tag::Tuple:
      for (auto& w : v.elems)
        if (!w.is_code && occurs(l1, w.loc)) return true;
      return false;
  }
  return false;
}

void Store::uptrail(size_t l) {
  if (trail.empty()) return;
  const HeapValue& v = heap[l];
  trail.back().records.insert(trail.back().records.begin(),
                              TrailRecord{l, v.type_name, v.var_name});
}

std::string Store::bind_cell(size_t l, HeapValue v) {
  uptrail(l);
  std::string var = heap[l].var_name;
  heap[l] = std::move(v);
  return var;
}

Store::UnifyOutcome Store::unify(size_t l1, size_t l2) {
  ++unify_calls;
  UnifyOutcome out;
  std::vector<std::pair<size_t, size_t>> pdl{{l1, l2}};
  while (!pdl.empty()) {
    auto [a, b] = pdl.back();
    pdl.pop_back();
    a = deref(a);
    b = deref(b);
    if (a == b) continue;
    bool a_free = heap[a].tag == HeapValue::Tag::Free;
    bool b_free = heap[b].tag == HeapValue::Tag::Free;
    // when both ends are free the left cell is bound, matching the static
    // unifier's variable orientation
    if (a_free) {
      if (occurs(a, b)) {
        out.tag = UnifyOutcome::Tag::Bottom;
        return out;
      }
      out.bound_vars.push_back(bind_cell(a, hv_bound(b)));
      continue;
    }
    if (b_free) {
      if (occurs(b, a)) {
        out.tag = UnifyOutcome::Tag::Bottom;
        return out;
      }
      out.bound_vars.push_back(bind_cell(b, hv_bound(a)));
      continue;
    }
    if (heap[a].tag != HeapValue::Tag::Structure ||
        heap[b].tag != HeapValue::Tag::Structure) {
      out.tag = UnifyOutcome::Tag::NonTerm;
      return out;
    }
    if (heap[a].con != heap[b].con ||
        heap[a].str_args.size() != heap[b].str_args.size()) {
      out.tag = UnifyOutcome::Tag::Bottom;
      return out;
    }
    const auto& xs = heap[a].str_args;
    const auto& ys = heap[b].str_args;
    for (size_t i = xs.size(); i-- > 0;) pdl.emplace_back(xs[i], ys[i]);
  }
  return out;
}

std::optional<TrailFrame> Store::pop_and_unwind() {
  if (trail.empty()) return std::nullopt;
  TrailFrame frame = std::move(trail.back());
  trail.pop_back();
  for (auto& rec : frame.records)
    heap[rec.loc] = hv_free(rec.type_name, rec.var_name);
  for (auto& [l, args] : frame.closure_snapshot) heap[l].label_args = args;
  for (auto& [l, elems] : frame.tuple_snapshot) heap[l].elems = elems;
  return frame;
}

lf::Term Store::encode(size_t l) const {
  l = deref(l);
  const HeapValue& v = heap[l];
  if (v.tag == HeapValue::Tag::Free) return lf::var(v.var_name);
  if (v.tag != HeapValue::Tag::Structure) return lf::con("<non-term>");
  std::vector<lf::Term> args;
  for (size_t a : v.str_args) args.push_back(encode(a));
  return lf::con(v.con, std::move(args));
}

std::string Store::render(size_t l, std::map<size_t, int>& anon) const {
  l = deref(l);
  const HeapValue& v = heap[l];
  switch (v.tag) {
    case HeapValue::Tag::Free: {
      auto it = anon.find(l);
      int id;
      if (it == anon.end()) {
        id = static_cast<int>(anon.size());
        anon.emplace(l, id);
      } else {
        id = it->second;
      }
      return "_G" + std::to_string(id);
    }
    case HeapValue::Tag::Structure: {
      if (v.str_args.empty()) return v.con;
      std::string out = v.con + "(";
      for (size_t i = 0; i < v.str_args.size(); ++i) {
        if (i) out += ",";
        out += render(v.str_args[i], anon);
      }
      return out + ")";
    }
    default:
      return "<non-term>";
  }
}

}  // namespace twam
