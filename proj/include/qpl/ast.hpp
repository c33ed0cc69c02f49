#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qpl/common.hpp"

// Abstract syntax for QPL: types, terms, values, variable/procedure contexts,
// and the purely syntactic judgements (type well-formedness, classicality,
// substitution, value typing). All nodes are immutable and shared.

namespace qpl {

// ---------------------------------------------------------------------------
// Types:  A, B ::= X | I | qbit | A + B | A (*) B | mu X. A
// ---------------------------------------------------------------------------

enum class TypeKind { var, unit, qbit, sum, tensor, mu };

struct Type;
using TypeRef = std::shared_ptr<const Type>;

struct Type {
  TypeKind kind;
  std::string name;       // var name, or mu binder
  TypeRef child_a;        // sum/tensor left, mu body
  TypeRef child_b;        // sum/tensor right

  static TypeRef var(std::string n) {
    return std::make_shared<Type>(Type{TypeKind::var, std::move(n), {}, {}});
  }
  static TypeRef unit() {
    static const TypeRef t =
        std::make_shared<Type>(Type{TypeKind::unit, {}, {}, {}});
    return t;
  }
  static TypeRef qbit() {
    static const TypeRef t =
        std::make_shared<Type>(Type{TypeKind::qbit, {}, {}, {}});
    return t;
  }
  static TypeRef sum(TypeRef a, TypeRef b) {
    return std::make_shared<Type>(
        Type{TypeKind::sum, {}, std::move(a), std::move(b)});
  }
  static TypeRef tensor(TypeRef a, TypeRef b) {
    return std::make_shared<Type>(
        Type{TypeKind::tensor, {}, std::move(a), std::move(b)});
  }
  static TypeRef mu(std::string binder, TypeRef body) {
    return std::make_shared<Type>(
        Type{TypeKind::mu, std::move(binder), std::move(body), {}});
  }
};

// bit := I + I
inline TypeRef bit_type() {
  static const TypeRef t = Type::sum(Type::unit(), Type::unit());
  return t;
}

// Nat := mu X. I + X
inline TypeRef nat_type() {
  static const TypeRef t =
      Type::mu("X", Type::sum(Type::unit(), Type::var("X")));
  return t;
}

// List(A) := mu Y. I + A (*) Y.  The binder avoids capturing free vars of A.
inline TypeRef list_type(const TypeRef& elem);

inline void collect_free_type_vars(const TypeRef& t,
                                   std::vector<std::string>& bound,
                                   std::set<std::string>& out) {
  switch (t->kind) {
    case TypeKind::var:
      if (std::find(bound.begin(), bound.end(), t->name) == bound.end())
        out.insert(t->name);
      return;
    case TypeKind::unit:
    case TypeKind::qbit:
      return;
    case TypeKind::sum:
    case TypeKind::tensor:
      collect_free_type_vars(t->child_a, bound, out);
      collect_free_type_vars(t->child_b, bound, out);
      return;
    case TypeKind::mu:
      bound.push_back(t->name);
      collect_free_type_vars(t->child_a, bound, out);
      bound.pop_back();
      return;
  }
}

inline std::set<std::string> free_type_vars(const TypeRef& t) {
  std::vector<std::string> bound;
  std::set<std::string> out;
  collect_free_type_vars(t, bound, out);
  return out;
}

inline TypeRef list_type(const TypeRef& elem) {
  std::string binder = "Y";
  auto fv = free_type_vars(elem);
  while (fv.count(binder)) binder += "'";
  return Type::mu(binder,
                  Type::sum(Type::unit(), Type::tensor(elem, Type::var(binder))));
}

// Structural equality up to alpha-renaming of mu binders.
inline bool type_equal_rec(
    const TypeRef& a, const TypeRef& b,
    std::vector<std::pair<std::string, std::string>>& binders) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TypeKind::var: {
      // Walk binder pairs innermost-first; both sides must resolve to the
      // same binder level or both be free with the same name.
      for (auto it = binders.rbegin(); it != binders.rend(); ++it) {
        bool la = it->first == a->name;
        bool lb = it->second == b->name;
        if (la || lb) return la && lb;
      }
      return a->name == b->name;
    }
    case TypeKind::unit:
    case TypeKind::qbit:
      return true;
    case TypeKind::sum:
    case TypeKind::tensor:
      return type_equal_rec(a->child_a, b->child_a, binders) &&
             type_equal_rec(a->child_b, b->child_b, binders);
    case TypeKind::mu: {
      binders.emplace_back(a->name, b->name);
      bool ok = type_equal_rec(a->child_a, b->child_a, binders);
      binders.pop_back();
      return ok;
    }
  }
  return false;
}

inline bool type_equal(const TypeRef& a, const TypeRef& b) {
  if (a == b) return true;
  std::vector<std::pair<std::string, std::string>> binders;
  return type_equal_rec(a, b, binders);
}

// Theta |- A, by the five formation rules. Theta is a list so that nested
// mu binders may shadow.
inline bool well_formed_type(const std::vector<std::string>& theta,
                             const TypeRef& a) {
  switch (a->kind) {
    case TypeKind::var:
      return std::find(theta.begin(), theta.end(), a->name) != theta.end();
    case TypeKind::unit:
    case TypeKind::qbit:
      return true;
    case TypeKind::sum:
    case TypeKind::tensor:
      return well_formed_type(theta, a->child_a) &&
             well_formed_type(theta, a->child_b);
    case TypeKind::mu: {
      std::vector<std::string> extended = theta;
      extended.push_back(a->name);
      return well_formed_type(extended, a->child_a);
    }
  }
  return false;
}

inline bool is_closed_type(const TypeRef& a) {
  return well_formed_type({}, a);
}

// Classical types P, R ::= X | I | P + R | P (*) R | mu X. P  (no qbit).
inline bool is_classical(const TypeRef& a) {
  switch (a->kind) {
    case TypeKind::var:
    case TypeKind::unit:
      return true;
    case TypeKind::qbit:
      return false;
    case TypeKind::sum:
    case TypeKind::tensor:
      return is_classical(a->child_a) && is_classical(a->child_b);
    case TypeKind::mu:
      return is_classical(a->child_a);
  }
  return false;
}

// Capture-avoiding substitution a[b/x]. Only closed b is ever needed, so no
// binder renaming can be required; shadowed binders stop the recursion.
inline TypeRef substitute_type(const TypeRef& a, const std::string& x,
                               const TypeRef& b) {
  switch (a->kind) {
    case TypeKind::var:
      return a->name == x ? b : a;
    case TypeKind::unit:
    case TypeKind::qbit:
      return a;
    case TypeKind::sum:
      return Type::sum(substitute_type(a->child_a, x, b),
                       substitute_type(a->child_b, x, b));
    case TypeKind::tensor:
      return Type::tensor(substitute_type(a->child_a, x, b),
                          substitute_type(a->child_b, x, b));
    case TypeKind::mu:
      if (a->name == x) return a;
      return Type::mu(a->name, substitute_type(a->child_a, x, b));
  }
  return a;
}

// One-step unrolling of mu X. A to A[mu X. A / X].
inline TypeRef unroll_mu(const TypeRef& mu) {
  if (mu->kind != TypeKind::mu)
    fail(Errc::internal_error, "unroll_mu on non-mu type");
  return substitute_type(mu->child_a, mu->name, mu);
}

inline std::string type_to_string(const TypeRef& t, int parent_prec = 0) {
  // precedence: mu 1, sum 2, tensor 3, atom 4; sum/tensor right-assoc
  switch (t->kind) {
    case TypeKind::var:
      return t->name;
    case TypeKind::unit:
      return "I";
    case TypeKind::qbit:
      return "qbit";
    case TypeKind::sum: {
      std::string s =
          type_to_string(t->child_a, 3) + " + " + type_to_string(t->child_b, 2);
      return parent_prec > 2 ? "(" + s + ")" : s;
    }
    case TypeKind::tensor: {
      std::string s =
          type_to_string(t->child_a, 4) + " * " + type_to_string(t->child_b, 3);
      return parent_prec > 3 ? "(" + s + ")" : s;
    }
    case TypeKind::mu: {
      std::string s = "mu " + t->name + " . " + type_to_string(t->child_a, 1);
      return parent_prec > 1 ? "(" + s + ")" : s;
    }
  }
  return "?";
}

// Display form with the standard aliases (bit, Nat, List, ListQ) recognized.
inline std::string type_display(const TypeRef& t, int parent_prec = 0) {
  if (type_equal(t, bit_type())) return "bit";
  if (type_equal(t, nat_type())) return "Nat";
  if (t->kind == TypeKind::mu) {
    // List(A) = mu Y. I + A * Y
    const TypeRef& body = t->child_a;
    if (body->kind == TypeKind::sum && body->child_a->kind == TypeKind::unit &&
        body->child_b->kind == TypeKind::tensor &&
        body->child_b->child_b->kind == TypeKind::var &&
        body->child_b->child_b->name == t->name) {
      const TypeRef& elem = body->child_b->child_a;
      std::set<std::string> fv = free_type_vars(elem);
      if (!fv.count(t->name)) {
        if (elem->kind == TypeKind::qbit) return "ListQ";
        return "List(" + type_display(elem) + ")";
      }
    }
  }
  switch (t->kind) {
    case TypeKind::sum: {
      std::string s =
          type_display(t->child_a, 3) + " + " + type_display(t->child_b, 2);
      return parent_prec > 2 ? "(" + s + ")" : s;
    }
    case TypeKind::tensor: {
      std::string s =
          type_display(t->child_a, 4) + " * " + type_display(t->child_b, 3);
      return parent_prec > 3 ? "(" + s + ")" : s;
    }
    case TypeKind::mu: {
      std::string s = "mu " + t->name + " . " + type_display(t->child_a, 1);
      return parent_prec > 1 ? "(" + s + ")" : s;
    }
    default:
      return type_to_string(t, parent_prec);
  }
}

// ---------------------------------------------------------------------------
// Variable and procedure contexts
// ---------------------------------------------------------------------------

// Variable contexts are maps in canonical name-sorted order; the paper's
// implicit exchange rule is recovered by explicit permutations downstream.
using VarCtx = std::map<std::string, TypeRef>;

inline bool var_ctx_equal(const VarCtx& a, const VarCtx& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (!type_equal(ia->second, ib->second)) return false;
  }
  return true;
}

inline std::string var_ctx_to_string(const VarCtx& ctx) {
  std::string s;
  for (const auto& [name, type] : ctx) {
    if (!s.empty()) s += ", ";
    s += name + " : " + type_to_string(type);
  }
  return s;
}

struct ProcSig {
  TypeRef in_type;
  TypeRef out_type;
  std::optional<long> bound;  // f^n carries the index n
};

// Keyed by base name; an indexed entry f^n excludes the unindexed f and any
// other index, which the single slot per name enforces.
using ProcCtx = std::map<std::string, ProcSig>;

// ---------------------------------------------------------------------------
// Terms (Fig. 2 constructors plus the indexed/zero finitary extensions)
// ---------------------------------------------------------------------------

struct Term;
using TermRef = std::shared_ptr<const Term>;

struct NewUnit {
  std::string var;
};
struct Discard {
  std::string var;
};
struct Copy {
  std::string dst, src;  // dst = copy src
};
struct NewQbit {
  std::string var;
};
struct Measure {
  std::string dst, src;  // dst = measure src
};
struct ApplyUnitary {
  std::string gate;
  std::vector<std::string> targets;
};
struct Seq {
  TermRef first, rest;
};
struct Skip {};
struct While {
  std::optional<long> bound;  // while^n when present
  std::string cond;
  TermRef body;
};
struct InjLeft {
  std::string dst, src;
  TypeRef left_type, right_type;  // dst = left[A,B] src
};
struct InjRight {
  std::string dst, src;
  TypeRef left_type, right_type;
};
struct CaseOf {
  std::string scrutinee;
  std::string left_var;
  TermRef left_body;
  std::string right_var;
  TermRef right_body;
};
struct MakePair {
  std::string dst, fst, snd;  // dst = (fst, snd)
};
struct SplitPair {
  std::string fst, snd, src;  // (fst, snd) = src
};
struct FoldTerm {
  std::string dst, src;
  TypeRef mu_type;  // dst = fold[mu X. A] src
};
struct UnfoldTerm {
  std::string dst, src;
};
struct ProcDef {
  std::string name;
  std::optional<long> bound;
  std::string in_var;
  TypeRef in_type;
  std::string out_var;
  TypeRef out_type;
  TermRef body;
};
struct CallProc {
  std::string dst;
  std::string name;
  std::optional<long> bound;
  std::string arg;  // dst = name(arg)
};
struct ZeroTerm {
  VarCtx input, output;  // 0_{Gamma, Sigma}
};

using TermNode =
    std::variant<NewUnit, Discard, Copy, NewQbit, Measure, ApplyUnitary, Seq,
                 Skip, While, InjLeft, InjRight, CaseOf, MakePair, SplitPair,
                 FoldTerm, UnfoldTerm, ProcDef, CallProc, ZeroTerm>;

struct Term {
  TermNode node;
};

template <typename T, typename... Args>
TermRef mk(Args&&... args) {
  return std::make_shared<Term>(Term{T{std::forward<Args>(args)...}});
}

inline TermRef mk_seq(TermRef first, TermRef rest) {
  return std::make_shared<Term>(Term{Seq{std::move(first), std::move(rest)}});
}

inline TermRef mk_skip() {
  static const TermRef t = std::make_shared<Term>(Term{Skip{}});
  return t;
}

template <typename T>
const T* term_as(const TermRef& t) {
  return std::get_if<T>(&t->node);
}

// A term is "ordinary" iff no constructor carries a bound and no 0 occurs.
inline bool is_ordinary(const TermRef& t) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Seq>)
          return is_ordinary(n.first) && is_ordinary(n.rest);
        else if constexpr (std::is_same_v<T, While>)
          return !n.bound && is_ordinary(n.body);
        else if constexpr (std::is_same_v<T, CaseOf>)
          return is_ordinary(n.left_body) && is_ordinary(n.right_body);
        else if constexpr (std::is_same_v<T, ProcDef>)
          return !n.bound && is_ordinary(n.body);
        else if constexpr (std::is_same_v<T, CallProc>)
          return !n.bound;
        else if constexpr (std::is_same_v<T, ZeroTerm>)
          return false;
        else
          return true;
      },
      t->node);
}

// A term is "finitary" iff every while/proc/call carries a bound.
inline bool is_finitary(const TermRef& t) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Seq>)
          return is_finitary(n.first) && is_finitary(n.rest);
        else if constexpr (std::is_same_v<T, While>)
          return n.bound.has_value() && is_finitary(n.body);
        else if constexpr (std::is_same_v<T, CaseOf>)
          return is_finitary(n.left_body) && is_finitary(n.right_body);
        else if constexpr (std::is_same_v<T, ProcDef>)
          return n.bound.has_value() && is_finitary(n.body);
        else if constexpr (std::is_same_v<T, CallProc>)
          return n.bound.has_value();
        else
          return true;
      },
      t->node);
}

// All variable names occurring anywhere in a term (bound or used).
inline void collect_term_vars(const TermRef& t, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NewUnit> || std::is_same_v<T, Discard> ||
                      std::is_same_v<T, NewQbit>) {
          out.insert(n.var);
        } else if constexpr (std::is_same_v<T, Copy> ||
                             std::is_same_v<T, Measure>) {
          out.insert(n.dst);
          out.insert(n.src);
        } else if constexpr (std::is_same_v<T, ApplyUnitary>) {
          for (const auto& q : n.targets) out.insert(q);
        } else if constexpr (std::is_same_v<T, Seq>) {
          collect_term_vars(n.first, out);
          collect_term_vars(n.rest, out);
        } else if constexpr (std::is_same_v<T, While>) {
          out.insert(n.cond);
          collect_term_vars(n.body, out);
        } else if constexpr (std::is_same_v<T, InjLeft> ||
                             std::is_same_v<T, InjRight>) {
          out.insert(n.dst);
          out.insert(n.src);
        } else if constexpr (std::is_same_v<T, CaseOf>) {
          out.insert(n.scrutinee);
          out.insert(n.left_var);
          out.insert(n.right_var);
          collect_term_vars(n.left_body, out);
          collect_term_vars(n.right_body, out);
        } else if constexpr (std::is_same_v<T, MakePair>) {
          out.insert(n.dst);
          out.insert(n.fst);
          out.insert(n.snd);
        } else if constexpr (std::is_same_v<T, SplitPair>) {
          out.insert(n.fst);
          out.insert(n.snd);
          out.insert(n.src);
        } else if constexpr (std::is_same_v<T, FoldTerm> ||
                             std::is_same_v<T, UnfoldTerm>) {
          out.insert(n.dst);
          out.insert(n.src);
        } else if constexpr (std::is_same_v<T, ProcDef>) {
          out.insert(n.in_var);
          out.insert(n.out_var);
          collect_term_vars(n.body, out);
        } else if constexpr (std::is_same_v<T, CallProc>) {
          out.insert(n.dst);
          out.insert(n.arg);
        } else if constexpr (std::is_same_v<T, ZeroTerm>) {
          for (const auto& [v, ty] : n.input) out.insert(v);
          for (const auto& [v, ty] : n.output) out.insert(v);
        }
      },
      t->node);
}

// Structural equality of core terms (exact variable names, alpha-equal types).
inline bool term_equal(const TermRef& a, const TermRef& b) {
  if (a->node.index() != b->node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b->node);
        if constexpr (std::is_same_v<T, NewUnit> || std::is_same_v<T, Discard> ||
                      std::is_same_v<T, NewQbit>) {
          return x.var == y.var;
        } else if constexpr (std::is_same_v<T, Copy> ||
                             std::is_same_v<T, Measure> ||
                             std::is_same_v<T, UnfoldTerm>) {
          return x.dst == y.dst && x.src == y.src;
        } else if constexpr (std::is_same_v<T, ApplyUnitary>) {
          return x.gate == y.gate && x.targets == y.targets;
        } else if constexpr (std::is_same_v<T, Seq>) {
          return term_equal(x.first, y.first) && term_equal(x.rest, y.rest);
        } else if constexpr (std::is_same_v<T, Skip>) {
          return true;
        } else if constexpr (std::is_same_v<T, While>) {
          return x.bound == y.bound && x.cond == y.cond &&
                 term_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, InjLeft> ||
                             std::is_same_v<T, InjRight>) {
          return x.dst == y.dst && x.src == y.src &&
                 type_equal(x.left_type, y.left_type) &&
                 type_equal(x.right_type, y.right_type);
        } else if constexpr (std::is_same_v<T, CaseOf>) {
          return x.scrutinee == y.scrutinee && x.left_var == y.left_var &&
                 x.right_var == y.right_var &&
                 term_equal(x.left_body, y.left_body) &&
                 term_equal(x.right_body, y.right_body);
        } else if constexpr (std::is_same_v<T, MakePair>) {
          return x.dst == y.dst && x.fst == y.fst && x.snd == y.snd;
        } else if constexpr (std::is_same_v<T, SplitPair>) {
          return x.fst == y.fst && x.snd == y.snd && x.src == y.src;
        } else if constexpr (std::is_same_v<T, FoldTerm>) {
          return x.dst == y.dst && x.src == y.src &&
                 type_equal(x.mu_type, y.mu_type);
        } else if constexpr (std::is_same_v<T, ProcDef>) {
          return x.name == y.name && x.bound == y.bound &&
                 x.in_var == y.in_var && x.out_var == y.out_var &&
                 type_equal(x.in_type, y.in_type) &&
                 type_equal(x.out_type, y.out_type) &&
                 term_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, CallProc>) {
          return x.dst == y.dst && x.name == y.name && x.bound == y.bound &&
                 x.arg == y.arg;
        } else {  // ZeroTerm
          return var_ctx_equal(x.input, y.input) &&
                 var_ctx_equal(x.output, y.output);
        }
      },
      a->node);
}

// ---------------------------------------------------------------------------
// Values:  v, w ::= * | n | left v | right v | (v, w) | fold v
// ---------------------------------------------------------------------------

struct Value;
using ValueRef = std::shared_ptr<const Value>;

struct VStar {};
struct VQubit {
  int index;  // 1-based pointer into the quantum state
};
struct VLeft {
  TypeRef left_type, right_type;
  ValueRef inner;
};
struct VRight {
  TypeRef left_type, right_type;
  ValueRef inner;
};
struct VPair {
  ValueRef fst, snd;
};
struct VFold {
  TypeRef mu_type;
  ValueRef inner;
};

using ValueNode = std::variant<VStar, VQubit, VLeft, VRight, VPair, VFold>;

struct Value {
  ValueNode node;
};

template <typename T, typename... Args>
ValueRef mkv(Args&&... args) {
  return std::make_shared<Value>(Value{T{std::forward<Args>(args)...}});
}

template <typename T>
const T* value_as(const ValueRef& v) {
  return std::get_if<T>(&v->node);
}

inline ValueRef star_value() {
  static const ValueRef v = std::make_shared<Value>(Value{VStar{}});
  return v;
}

// ff := left_{I,I} *,  tt := right_{I,I} *
inline ValueRef ff_value() {
  static const ValueRef v =
      mkv<VLeft>(Type::unit(), Type::unit(), star_value());
  return v;
}
inline ValueRef tt_value() {
  static const ValueRef v =
      mkv<VRight>(Type::unit(), Type::unit(), star_value());
  return v;
}

struct ValueTyping {
  std::vector<int> pointers;  // qubit pointers in left-to-right value order
  TypeRef type;
};

// Q |- v : A. Returns the unique qubit pointer context (in traversal order)
// and type. IllTypedValue when no derivation exists.
inline ValueTyping type_of_value(const ValueRef& v) {
  return std::visit(
      [&](const auto& n) -> ValueTyping {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, VStar>) {
          return {{}, Type::unit()};
        } else if constexpr (std::is_same_v<T, VQubit>) {
          if (n.index < 1)
            fail(Errc::ill_typed_value, "qubit pointers are 1-based");
          return {{n.index}, Type::qbit()};
        } else if constexpr (std::is_same_v<T, VLeft>) {
          ValueTyping inner = type_of_value(n.inner);
          if (!type_equal(inner.type, n.left_type))
            fail(Errc::ill_typed_value,
                 "left annotation " + type_to_string(n.left_type) +
                     " does not match value of type " +
                     type_to_string(inner.type));
          return {inner.pointers, Type::sum(n.left_type, n.right_type)};
        } else if constexpr (std::is_same_v<T, VRight>) {
          ValueTyping inner = type_of_value(n.inner);
          if (!type_equal(inner.type, n.right_type))
            fail(Errc::ill_typed_value,
                 "right annotation " + type_to_string(n.right_type) +
                     " does not match value of type " +
                     type_to_string(inner.type));
          return {inner.pointers, Type::sum(n.left_type, n.right_type)};
        } else if constexpr (std::is_same_v<T, VPair>) {
          ValueTyping a = type_of_value(n.fst);
          ValueTyping b = type_of_value(n.snd);
          std::set<int> seen(a.pointers.begin(), a.pointers.end());
          for (int q : b.pointers) {
            if (seen.count(q))
              fail(Errc::ill_typed_value,
                   "qubit pointer " + std::to_string(q) +
                       " used in both components of a pair");
          }
          std::vector<int> ptrs = a.pointers;
          ptrs.insert(ptrs.end(), b.pointers.begin(), b.pointers.end());
          return {std::move(ptrs), Type::tensor(a.type, b.type)};
        } else {  // VFold
          if (n.mu_type->kind != TypeKind::mu)
            fail(Errc::ill_typed_value, "fold annotation is not a mu type");
          ValueTyping inner = type_of_value(n.inner);
          TypeRef expected = unroll_mu(n.mu_type);
          if (!type_equal(inner.type, expected))
            fail(Errc::ill_typed_value,
                 "fold of value of type " + type_to_string(inner.type) +
                     " at " + type_to_string(n.mu_type));
          return {inner.pointers, n.mu_type};
        }
      },
      v->node);
}

inline std::set<int> value_pointer_set(const ValueRef& v) {
  ValueTyping t = type_of_value(v);
  return std::set<int>(t.pointers.begin(), t.pointers.end());
}

// Numerals over Nat = mu X. I + X: build and recognize.
inline ValueRef nat_value(long n) {
  TypeRef nat = nat_type();
  TypeRef unrolled_right = nat;                      // X slot
  ValueRef v = mkv<VLeft>(Type::unit(), unrolled_right, star_value());
  v = mkv<VFold>(nat, v);                            // zero
  for (long i = 0; i < n; ++i) {
    v = mkv<VRight>(Type::unit(), nat, v);
    v = mkv<VFold>(nat, v);
  }
  return v;
}

inline std::optional<long> as_nat_value(const ValueRef& v) {
  long n = 0;
  ValueRef cur = v;
  for (;;) {
    const auto* f = value_as<VFold>(cur);
    if (!f || !type_equal(f->mu_type, nat_type())) return std::nullopt;
    if (const auto* l = value_as<VLeft>(f->inner)) {
      if (value_as<VStar>(l->inner)) return n;
      return std::nullopt;
    }
    const auto* r = value_as<VRight>(f->inner);
    if (!r) return std::nullopt;
    ++n;
    cur = r->inner;
  }
}

// Compact printing with sugar recognized (tt/ff, numerals, lists).
inline std::string value_to_string(const ValueRef& v) {
  if (value_as<VStar>(v)) return "*";
  if (const auto* q = value_as<VQubit>(v)) return std::to_string(q->index);
  if (auto n = as_nat_value(v)) return std::to_string(*n);
  if (const auto* l = value_as<VLeft>(v)) {
    if (value_as<VStar>(l->inner) && l->left_type->kind == TypeKind::unit &&
        l->right_type->kind == TypeKind::unit)
      return "ff";
    return "left " + value_to_string(l->inner);
  }
  if (const auto* r = value_as<VRight>(v)) {
    if (value_as<VStar>(r->inner) && r->left_type->kind == TypeKind::unit &&
        r->right_type->kind == TypeKind::unit)
      return "tt";
    return "right " + value_to_string(r->inner);
  }
  if (const auto* p = value_as<VPair>(v))
    return "(" + value_to_string(p->fst) + ", " + value_to_string(p->snd) + ")";
  const auto* f = value_as<VFold>(v);
  // List cells render as head :: tail, nil as nil.
  if (const auto* l = value_as<VLeft>(f->inner)) {
    if (value_as<VStar>(l->inner)) return "nil";
  }
  if (const auto* r = value_as<VRight>(f->inner)) {
    if (const auto* p = value_as<VPair>(r->inner))
      return value_to_string(p->fst) + " :: " + value_to_string(p->snd);
  }
  return "fold " + value_to_string(f->inner);
}

}  // namespace qpl
