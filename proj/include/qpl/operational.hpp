#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "qpl/ast.hpp"
#include "qpl/common.hpp"
#include "qpl/qmath.hpp"
#include "qpl/typecheck.hpp"

// Small-step machine: configuration stepping (including the indexed finitary
// rules), exhaustive reduction-tree enumeration with halting bounds, and
// Born-rule sampling.

namespace qpl {

inline constexpr double kPruneTol = 1e-15;

struct Configuration {
  TermRef term;
  Assignment assignment;
  ProcStore store;
  DensityMatrix rho;

  double trace() const { return rho.trace(); }

  // Terminal configurations are (skip | ...) and, in the extended language,
  // (0 | ...).
  bool terminal() const {
    return term_as<Skip>(term) != nullptr || term_as<ZeroTerm>(term) != nullptr;
  }
  bool is_skip_terminal() const { return term_as<Skip>(term) != nullptr; }
  bool is_zero_terminal() const { return term_as<ZeroTerm>(term) != nullptr; }
};

// The context Gamma of a well-formed configuration is determined by the
// value assignment alone.
inline VarCtx assignment_context(const Assignment& v) {
  VarCtx gamma;
  for (const auto& [name, value] : v) gamma[name] = type_of_value(value).type;
  return gamma;
}

inline ConfigWitness check_config(const Configuration& c,
                                  const GateRegistry* gates = nullptr) {
  return check_config_parts(c, gates);
}

// Splits a parsed program into its leading procedure definitions (which only
// reduce by the (proc) rule) and the main term, giving the initial
// configuration (main | . | Omega | 1).
inline Configuration make_initial_config(const TermRef& program) {
  ProcStore store;
  TermRef rest = program;
  for (;;) {
    if (const auto* def = term_as<ProcDef>(rest)) {
      store.push_back(StoreDef{def->name, def->bound, def->in_var,
                               def->in_type, def->out_var, def->out_type,
                               def->body});
      rest = mk_skip();
      break;
    }
    const auto* seq = term_as<Seq>(rest);
    if (!seq) break;
    const auto* def = term_as<ProcDef>(seq->first);
    if (!def) break;
    store.push_back(StoreDef{def->name, def->bound, def->in_var, def->in_type,
                             def->out_var, def->out_type, def->body});
    rest = seq->rest;
  }
  return Configuration{rest, {}, std::move(store), DensityMatrix::scalar(1.0)};
}

namespace detail {

// Uniform renaming of term variables by a name map.
inline std::string ren(const std::map<std::string, std::string>& m,
                       const std::string& x) {
  auto it = m.find(x);
  return it == m.end() ? x : it->second;
}

inline TermRef rename_vars(const TermRef& t,
                           const std::map<std::string, std::string>& m) {
  return std::visit(
      [&](const auto& n) -> TermRef {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NewUnit>)
          return mk<NewUnit>(ren(m, n.var));
        else if constexpr (std::is_same_v<T, Discard>)
          return mk<Discard>(ren(m, n.var));
        else if constexpr (std::is_same_v<T, Copy>)
          return mk<Copy>(ren(m, n.dst), ren(m, n.src));
        else if constexpr (std::is_same_v<T, NewQbit>)
          return mk<NewQbit>(ren(m, n.var));
        else if constexpr (std::is_same_v<T, Measure>)
          return mk<Measure>(ren(m, n.dst), ren(m, n.src));
        else if constexpr (std::is_same_v<T, ApplyUnitary>) {
          std::vector<std::string> targets;
          for (const auto& q : n.targets) targets.push_back(ren(m, q));
          return mk<ApplyUnitary>(n.gate, targets);
        } else if constexpr (std::is_same_v<T, Seq>)
          return mk_seq(rename_vars(n.first, m), rename_vars(n.rest, m));
        else if constexpr (std::is_same_v<T, Skip>)
          return mk_skip();
        else if constexpr (std::is_same_v<T, While>)
          return mk<While>(n.bound, ren(m, n.cond), rename_vars(n.body, m));
        else if constexpr (std::is_same_v<T, InjLeft>)
          return mk<InjLeft>(ren(m, n.dst), ren(m, n.src), n.left_type,
                             n.right_type);
        else if constexpr (std::is_same_v<T, InjRight>)
          return mk<InjRight>(ren(m, n.dst), ren(m, n.src), n.left_type,
                              n.right_type);
        else if constexpr (std::is_same_v<T, CaseOf>)
          return mk<CaseOf>(ren(m, n.scrutinee), ren(m, n.left_var),
                            rename_vars(n.left_body, m), ren(m, n.right_var),
                            rename_vars(n.right_body, m));
        else if constexpr (std::is_same_v<T, MakePair>)
          return mk<MakePair>(ren(m, n.dst), ren(m, n.fst), ren(m, n.snd));
        else if constexpr (std::is_same_v<T, SplitPair>)
          return mk<SplitPair>(ren(m, n.fst), ren(m, n.snd), ren(m, n.src));
        else if constexpr (std::is_same_v<T, FoldTerm>)
          return mk<FoldTerm>(ren(m, n.dst), ren(m, n.src), n.mu_type);
        else if constexpr (std::is_same_v<T, UnfoldTerm>)
          return mk<UnfoldTerm>(ren(m, n.dst), ren(m, n.src));
        else if constexpr (std::is_same_v<T, ProcDef>)
          return mk<ProcDef>(n.name, n.bound, ren(m, n.in_var), n.in_type,
                             ren(m, n.out_var), n.out_type,
                             rename_vars(n.body, m));
        else if constexpr (std::is_same_v<T, CallProc>)
          return mk<CallProc>(ren(m, n.dst), n.name, n.bound, ren(m, n.arg));
        else {  // ZeroTerm: contexts are name-keyed
          VarCtx in, out;
          for (const auto& [v, ty] : n.input) in[ren(m, v)] = ty;
          for (const auto& [v, ty] : n.output) out[ren(m, v)] = ty;
          return mk<ZeroTerm>(in, out);
        }
      },
      t->node);
}

// Renames call sites of f^{from} to f^{from-1} (Appendix-style index decrement).
inline TermRef rename_proc_index(const TermRef& t, const std::string& f,
                                 long from) {
  return std::visit(
      [&](const auto& n) -> TermRef {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Seq>)
          return mk_seq(rename_proc_index(n.first, f, from),
                        rename_proc_index(n.rest, f, from));
        else if constexpr (std::is_same_v<T, While>)
          return mk<While>(n.bound, n.cond,
                           rename_proc_index(n.body, f, from));
        else if constexpr (std::is_same_v<T, CaseOf>)
          return mk<CaseOf>(n.scrutinee, n.left_var,
                            rename_proc_index(n.left_body, f, from),
                            n.right_var,
                            rename_proc_index(n.right_body, f, from));
        else if constexpr (std::is_same_v<T, ProcDef>)
          return mk<ProcDef>(n.name, n.bound, n.in_var, n.in_type, n.out_var,
                             n.out_type, rename_proc_index(n.body, f, from));
        else if constexpr (std::is_same_v<T, CallProc>) {
          if (n.name == f && n.bound == from)
            return mk<CallProc>(n.dst, n.name, from - 1, n.arg);
          return t;
        } else
          return t;
      },
      t->node);
}

// Largest '#k' suffix in use anywhere in a configuration, for seeding the
// fresh-name counter.
inline long name_counter_floor(const std::string& name) {
  auto pos = name.rfind('#');
  if (pos == std::string::npos) return -1;
  long k = 0;
  bool any = false;
  for (size_t i = pos + 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
    k = k * 10 + (name[i] - '0');
    any = true;
  }
  return any ? k : -1;
}

}  // namespace detail

struct MachineOptions {
  int max_qubits = kDefaultMaxQubits;
  // Re-check well-formedness of every successor and assert the subject
  // reduction invariant (Sigma unchanged).
  bool verify_steps = false;
};

class Machine {
 public:
  explicit Machine(const GateRegistry* gates = nullptr,
                   MachineOptions options = {})
      : gates_(gates ? gates : &builtin_gates()), options_(options) {}

  long fresh_counter() const { return counter_; }

  void seed_counter_from(const Configuration& c) {
    std::set<std::string> names;
    collect_term_vars(c.term, names);
    for (const auto& def : c.store) {
      names.insert(def.in_var);
      names.insert(def.out_var);
      collect_term_vars(def.body, names);
    }
    for (const auto& [name, v] : c.assignment) names.insert(name);
    for (const auto& name : names)
      counter_ = std::max(counter_, detail::name_counter_floor(name) + 1);
  }

  std::string fresh(const std::string& base) {
    std::string stem = base.substr(0, base.find('#'));
    return stem + "#" + std::to_string(counter_++);
  }

  // One small step. Non-terminal well-formed configurations always yield one
  // or two successors; measurement yields exactly two (kept even at trace 0).
  std::vector<Configuration> step(const Configuration& c) {
    if (c.terminal())
      fail(Errc::stuck_configuration, "terminal configurations do not reduce");
    std::vector<Configuration> out;
    std::optional<std::pair<std::string, long>> renamed;
    step_term(c, out, renamed);
    if (options_.verify_steps) verify_successors(c, out);
    return out;
  }

  // (discard): remove the binding, trace out its qubits and reindex every
  // remaining pointer by r_v.
  Configuration discard_binding(const Configuration& c, const std::string& x) {
    auto it = c.assignment.find(x);
    if (it == c.assignment.end())
      fail(Errc::unbound_variable, "variable " + x + " is not bound");
    std::set<int> q = value_pointer_set(it->second);
    Configuration out = c;
    out.assignment.erase(x);
    out.rho = partial_trace(c.rho, q);
    out.assignment = reindex_assignment(out.assignment, q);
    return out;
  }

 private:
  static ValueRef reindex_value(const ValueRef& v, const std::set<int>& q) {
    return std::visit(
        [&](const auto& n) -> ValueRef {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, VStar>)
            return v;
          else if constexpr (std::is_same_v<T, VQubit>) {
            int below = static_cast<int>(std::distance(
                q.begin(), q.lower_bound(n.index)));
            return mkv<VQubit>(n.index - below);
          } else if constexpr (std::is_same_v<T, VLeft>)
            return mkv<VLeft>(n.left_type, n.right_type,
                              reindex_value(n.inner, q));
          else if constexpr (std::is_same_v<T, VRight>)
            return mkv<VRight>(n.left_type, n.right_type,
                               reindex_value(n.inner, q));
          else if constexpr (std::is_same_v<T, VPair>)
            return mkv<VPair>(reindex_value(n.fst, q),
                              reindex_value(n.snd, q));
          else
            return mkv<VFold>(std::get<VFold>(v->node).mu_type,
                              reindex_value(std::get<VFold>(v->node).inner, q));
        },
        v->node);
  }

  static Assignment reindex_assignment(const Assignment& v,
                                       const std::set<int>& q) {
    Assignment out;
    for (const auto& [name, value] : v) out[name] = reindex_value(value, q);
    return out;
  }

  static ValueRef lookup(const Configuration& c, const std::string& x) {
    auto it = c.assignment.find(x);
    if (it == c.assignment.end())
      fail(Errc::stuck_configuration, "variable " + x + " is not bound");
    return it->second;
  }

  void step_term(const Configuration& c, std::vector<Configuration>& out,
                 std::optional<std::pair<std::string, long>>& renamed) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Seq>)
            step_seq(c, n, out, renamed);
          else if constexpr (std::is_same_v<T, NewUnit>) {
            Configuration d = c;
            d.term = mk_skip();
            d.assignment[n.var] = star_value();
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, Discard>) {
            Configuration d = discard_binding(c, n.var);
            d.term = mk_skip();
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, Copy>) {
            Configuration d = c;
            d.term = mk_skip();
            d.assignment[n.dst] = lookup(c, n.src);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, NewQbit>) {
            Configuration d = c;
            d.term = mk_skip();
            d.rho = new_qubit(c.rho, options_.max_qubits);
            d.assignment[n.var] = mkv<VQubit>(d.rho.n_qubits);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, Measure>) {
            const auto* q = value_as<VQubit>(lookup(c, n.src));
            if (!q)
              fail(Errc::stuck_configuration,
                   "measure of a non-qubit binding");
            int m = q->index;
            for (int outcome : {0, 1}) {
              Configuration d = c;
              d.term = mk_skip();
              d.rho = project_measure(c.rho, m, outcome);
              d.assignment.erase(n.src);
              d.assignment = reindex_assignment(d.assignment, {m});
              d.assignment[n.dst] = outcome == 0 ? ff_value() : tt_value();
              out.push_back(std::move(d));
            }
          } else if constexpr (std::is_same_v<T, ApplyUnitary>) {
            std::vector<int> targets;
            for (const auto& qv : n.targets) {
              const auto* q = value_as<VQubit>(lookup(c, qv));
              if (!q)
                fail(Errc::stuck_configuration,
                     "unitary applied to a non-qubit binding");
              targets.push_back(q->index);
            }
            Configuration d = c;
            d.term = mk_skip();
            d.rho = apply_unitary(c.rho, gates_->gate(n.gate), targets);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, Skip> ||
                               std::is_same_v<T, ZeroTerm>) {
            fail(Errc::stuck_configuration, "terminal term inside step");
          } else if constexpr (std::is_same_v<T, While>) {
            step_while(c, n, out);
          } else if constexpr (std::is_same_v<T, InjLeft>) {
            Configuration d = c;
            d.term = mk_skip();
            ValueRef v = lookup(c, n.src);
            d.assignment.erase(n.src);
            d.assignment[n.dst] = mkv<VLeft>(n.left_type, n.right_type, v);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, InjRight>) {
            Configuration d = c;
            d.term = mk_skip();
            ValueRef v = lookup(c, n.src);
            d.assignment.erase(n.src);
            d.assignment[n.dst] = mkv<VRight>(n.left_type, n.right_type, v);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, CaseOf>) {
            ValueRef v = lookup(c, n.scrutinee);
            Configuration d = c;
            d.assignment.erase(n.scrutinee);
            if (const auto* l = value_as<VLeft>(v)) {
              d.term = n.left_body;
              d.assignment[n.left_var] = l->inner;
            } else if (const auto* r = value_as<VRight>(v)) {
              d.term = n.right_body;
              d.assignment[n.right_var] = r->inner;
            } else {
              fail(Errc::stuck_configuration, "case on a non-sum value");
            }
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, MakePair>) {
            Configuration d = c;
            d.term = mk_skip();
            ValueRef a = lookup(c, n.fst);
            ValueRef b = lookup(c, n.snd);
            d.assignment.erase(n.fst);
            d.assignment.erase(n.snd);
            d.assignment[n.dst] = mkv<VPair>(a, b);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, SplitPair>) {
            const auto* p = value_as<VPair>(lookup(c, n.src));
            if (!p)
              fail(Errc::stuck_configuration, "unpair of a non-pair value");
            Configuration d = c;
            d.term = mk_skip();
            d.assignment.erase(n.src);
            d.assignment[n.fst] = p->fst;
            d.assignment[n.snd] = p->snd;
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, FoldTerm>) {
            Configuration d = c;
            d.term = mk_skip();
            ValueRef v = lookup(c, n.src);
            d.assignment.erase(n.src);
            d.assignment[n.dst] = mkv<VFold>(n.mu_type, v);
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, UnfoldTerm>) {
            const auto* f = value_as<VFold>(lookup(c, n.src));
            if (!f)
              fail(Errc::stuck_configuration, "unfold of a non-fold value");
            Configuration d = c;
            d.term = mk_skip();
            d.assignment.erase(n.src);
            d.assignment[n.dst] = f->inner;
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, ProcDef>) {
            Configuration d = c;
            d.term = mk_skip();
            d.store.push_back(StoreDef{n.name, n.bound, n.in_var, n.in_type,
                                       n.out_var, n.out_type, n.body});
            out.push_back(std::move(d));
          } else if constexpr (std::is_same_v<T, CallProc>) {
            step_call(c, n, out, renamed);
          }
        },
        c.term->node);
  }

  void step_seq(const Configuration& c, const Seq& n,
                std::vector<Configuration>& out,
                std::optional<std::pair<std::string, long>>& renamed) {
    if (term_as<Skip>(n.first)) {  // (seq1)
      Configuration d = c;
      d.term = n.rest;
      out.push_back(std::move(d));
      return;
    }
    if (const auto* z = term_as<ZeroTerm>(n.first)) {  // (0 ; P) ~> (0)
      ProcCtx pi = check_store(c.store, gates_);
      VarCtx sigma = check_term(pi, z->output, n.rest, gates_);
      Configuration d = c;
      d.term = mk<ZeroTerm>(z->input, sigma);
      out.push_back(std::move(d));
      return;
    }
    // (seq2): step the head; a pending index rename applies to the
    // continuation as well so calls in it keep pointing at the store entry.
    Configuration head = c;
    head.term = n.first;
    std::vector<Configuration> succ;
    step_term(head, succ, renamed);
    for (Configuration& d : succ) {
      TermRef rest = n.rest;
      if (renamed)
        rest = detail::rename_proc_index(rest, renamed->first, renamed->second);
      d.term = mk_seq(d.term, rest);
      out.push_back(std::move(d));
    }
  }

  void step_while(const Configuration& c, const While& n,
                  std::vector<Configuration>& out) {
    if (n.bound && *n.bound == 0) {  // while^0 ~> 0
      VarCtx gamma = assignment_context(c.assignment);
      Configuration d = c;
      d.term = mk<ZeroTerm>(gamma, gamma);
      out.push_back(std::move(d));
      return;
    }
    // while[^{k+1}] b do M unrolls to
    //   case b of { left u -> b = left u | right u -> b = right u; M; loop }
    // with a fresh u; the indexed loop continues at index k.
    TermRef loop = n.bound ? mk<While>(*n.bound - 1, n.cond, n.body)
                           : mk<While>(std::nullopt, n.cond, n.body);
    std::string u = fresh("u");
    TermRef left_body = mk<InjLeft>(n.cond, u, Type::unit(), Type::unit());
    TermRef right_body =
        mk_seq(mk<InjRight>(n.cond, u, Type::unit(), Type::unit()),
               mk_seq(n.body, loop));
    Configuration d = c;
    d.term = mk<CaseOf>(n.cond, u, left_body, u, right_body);
    out.push_back(std::move(d));
  }

  void step_call(const Configuration& c, const CallProc& n,
                 std::vector<Configuration>& out,
                 std::optional<std::pair<std::string, long>>& renamed) {
    const StoreDef* def = nullptr;
    for (const auto& d : c.store)
      if (d.name == n.name && d.bound == n.bound) def = &d;
    if (!def)
      fail(Errc::stuck_configuration,
           "call of undefined procedure " + n.name);

    if (n.bound && *n.bound == 0) {  // y = f^0(x) ~> 0
      VarCtx gamma = assignment_context(c.assignment);
      VarCtx sigma = gamma;
      sigma.erase(n.arg);
      sigma[n.dst] = def->out_type;
      Configuration d = c;
      d.term = mk<ZeroTerm>(gamma, sigma);
      out.push_back(std::move(d));
      return;
    }

    TermRef body = def->body;
    Configuration d = c;
    if (n.bound) {
      // f^{k+1} call: every mention of f^{k+1} in the store, the body and
      // the continuation becomes f^k.
      long from = *n.bound;
      body = detail::rename_proc_index(body, n.name, from);
      ProcStore new_store;
      for (const auto& sd : c.store) {
        StoreDef copy = sd;
        copy.body = detail::rename_proc_index(sd.body, n.name, from);
        if (sd.name == n.name && sd.bound == n.bound) copy.bound = from - 1;
        new_store.push_back(std::move(copy));
      }
      d.store = std::move(new_store);
      renamed = std::make_pair(n.name, from);
    }

    // Alpha-rename the body: input formal -> caller's argument, output formal
    // -> caller's result, everything else to fresh names avoiding V.
    std::set<std::string> body_vars;
    collect_term_vars(body, body_vars);
    std::map<std::string, std::string> sub;
    bool need_move = false;
    std::string move_src;
    if (def->in_var == def->out_var) {
      sub[def->in_var] = n.arg;
      if (n.arg != n.dst) {
        need_move = true;
        move_src = n.arg;
      }
    } else {
      sub[def->in_var] = n.arg;
      if (n.arg == n.dst) {
        std::string tmp = fresh(def->out_var);
        sub[def->out_var] = tmp;
        need_move = true;
        move_src = tmp;
      } else {
        sub[def->out_var] = n.dst;
      }
    }
    for (const auto& v : body_vars) {
      if (v == def->in_var || v == def->out_var) continue;
      if (c.assignment.count(v) || v == n.arg || v == n.dst)
        sub[v] = fresh(v);
    }
    TermRef m_alpha = detail::rename_vars(body, sub);
    if (need_move) m_alpha = mk_seq(m_alpha, move_term(move_src, n.dst));
    d.term = m_alpha;
    out.push_back(std::move(d));
  }

  // Transfers a binding to a new name using only core term forms: pair the
  // value with a fresh unit, take it apart under the target name.
  TermRef move_term(const std::string& src, const std::string& dst) {
    std::string u = fresh("u");
    std::string u2 = fresh("u");
    std::string p = fresh("p");
    return mk_seq(
        mk<NewUnit>(u),
        mk_seq(mk<MakePair>(p, src, u),
               mk_seq(mk<SplitPair>(dst, u2, p), mk<Discard>(u2))));
  }

  void verify_successors(const Configuration& c,
                         const std::vector<Configuration>& succ) {
    ConfigWitness before = check_config(c, gates_);
    for (const Configuration& d : succ) {
      ConfigWitness after = check_config(d, gates_);
      if (!var_ctx_equal(before.output, after.output))
        fail(Errc::internal_error,
             "subject reduction violated: Sigma changed from {" +
                 var_ctx_to_string(before.output) + "} to {" +
                 var_ctx_to_string(after.output) + "}");
    }
  }

  const GateRegistry* gates_;
  MachineOptions options_;
  long counter_ = 0;
};

// ---------------------------------------------------------------------------
// Exhaustive enumeration (breadth-first reduction tree)
// ---------------------------------------------------------------------------

struct EnumOptions {
  long max_steps = 10000;
  bool prune_impossible = true;  // drop zero-trace branches
  bool build_tree = false;
  bool verify_steps = false;
  int max_qubits = kDefaultMaxQubits;
};

struct TreeNode {
  Configuration config;
  long depth = 0;
  long parent = -1;
  std::vector<long> children;
};

struct Leaf {
  Configuration config;
  long depth = 0;
};

struct EnumerationResult {
  std::vector<Leaf> leaves;
  double halt_lower_bound = 0.0;  // sum of terminal traces / tr(root)
  double frontier_mass = 0.0;     // unterminated probability mass / tr(root)
  std::vector<TreeNode> nodes;    // populated when build_tree is set
};

inline EnumerationResult enumerate(const Configuration& root,
                                   const EnumOptions& options,
                                   const GateRegistry* gates = nullptr) {
  Machine machine(gates, MachineOptions{options.max_qubits,
                                        options.verify_steps});
  machine.seed_counter_from(root);

  EnumerationResult result;
  double root_trace = root.trace();
  if (root_trace <= 0)
    fail(Errc::ill_formed_config,
         "enumeration needs a possible configuration (trace > 0)");

  struct Item {
    Configuration config;
    long depth;
    long node_id;
  };
  std::deque<Item> frontier;
  auto add_node = [&](const Configuration& c, long depth,
                      long parent) -> long {
    if (!options.build_tree) return -1;
    long id = static_cast<long>(result.nodes.size());
    result.nodes.push_back(TreeNode{c, depth, parent, {}});
    if (parent >= 0) result.nodes[parent].children.push_back(id);
    return id;
  };

  double terminal_mass = 0.0;
  double frontier_mass = 0.0;
  frontier.push_back(Item{root, 0, add_node(root, 0, -1)});
  while (!frontier.empty()) {
    Item item = std::move(frontier.front());
    frontier.pop_front();
    if (item.config.terminal()) {
      terminal_mass += item.config.trace();
      result.leaves.push_back(Leaf{std::move(item.config), item.depth});
      continue;
    }
    if (item.depth >= options.max_steps) {
      frontier_mass += item.config.trace();
      continue;
    }
    std::vector<Configuration> succ = machine.step(item.config);
    for (Configuration& d : succ) {
      if (options.prune_impossible && d.trace() <= kPruneTol) continue;
      long id = add_node(d, item.depth + 1, item.node_id);
      frontier.push_back(Item{std::move(d), item.depth + 1, id});
    }
  }
  result.halt_lower_bound = terminal_mass / root_trace;
  result.frontier_mass = frontier_mass / root_trace;
  return result;
}

// ---------------------------------------------------------------------------
// Born-rule sampling
// ---------------------------------------------------------------------------

struct SampleOptions {
  long max_steps = 100000;
  int max_qubits = kDefaultMaxQubits;
};

struct SampleResult {
  Configuration config;  // terminal, renormalized
  long steps = 0;
  double probability = 1.0;  // product of branch probabilities
};

inline SampleResult sample(const Configuration& root, std::uint64_t seed,
                           const SampleOptions& options = {},
                           const GateRegistry* gates = nullptr) {
  if (root.trace() <= 0)
    fail(Errc::ill_formed_config, "cannot sample an impossible configuration");
  Machine machine(gates, MachineOptions{options.max_qubits, false});
  machine.seed_counter_from(root);
  std::mt19937_64 rng(seed);
  auto uniform = [&]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };

  Configuration current = root;
  current.rho.data /= current.trace();  // normalize
  SampleResult result;
  while (!current.terminal()) {
    if (result.steps >= options.max_steps)
      fail(Errc::timeout, "no terminal configuration within " +
                              std::to_string(options.max_steps) + " steps");
    std::vector<Configuration> succ = machine.step(current);
    ++result.steps;
    if (succ.size() == 1) {
      current = std::move(succ[0]);
      continue;
    }
    double p0 = succ[0].trace();
    double p1 = succ[1].trace();
    double total = p0 + p1;
    int pick = uniform() * total < p0 ? 0 : 1;
    double p = (pick == 0 ? p0 : p1) / total;
    current = std::move(succ[pick]);
    if (p <= 0)
      fail(Errc::internal_error, "sampled an impossible branch");
    current.rho.data /= p;  // keep the running state normalized
    result.probability *= p;
  }
  result.config = std::move(current);
  return result;
}

}  // namespace qpl
