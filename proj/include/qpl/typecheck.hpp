#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qpl/ast.hpp"
#include "qpl/common.hpp"
#include "qpl/gates.hpp"

// Syntax-directed checking of the term judgement Pi |- <Gamma> M <Sigma>,
// formulated as a forward context transformation (Gamma, M) -> Sigma, plus
// procedure-store and configuration well-formedness.

namespace qpl {

struct TermJudgement {
  ProcCtx proc_ctx;
  VarCtx input;
  TermRef term;
  VarCtx output;
};

class Checker {
 public:
  explicit Checker(const GateRegistry* gates = nullptr)
      : gates_(gates ? gates : &builtin_gates()) {}

  // Returns the unique Sigma with Pi |- <Gamma> M <Sigma>.
  VarCtx check_term(const ProcCtx& pi, const VarCtx& gamma,
                    const TermRef& m) const {
    return std::visit(
        [&](const auto& n) -> VarCtx { return check_node(pi, gamma, n); },
        m->node);
  }

 private:
  static TypeRef consume(VarCtx& ctx, const std::string& x) {
    auto it = ctx.find(x);
    if (it == ctx.end())
      fail(Errc::unbound_variable, "variable " + x + " is not in scope");
    TypeRef t = it->second;
    ctx.erase(it);
    return t;
  }

  static void bind(VarCtx& ctx, const std::string& x, const TypeRef& t) {
    if (!is_closed_type(t))
      fail(Errc::type_mismatch,
           "type " + type_to_string(t) + " for " + x + " is not closed");
    if (!ctx.emplace(x, t).second)
      fail(Errc::duplicate_variable, "variable " + x + " is already bound");
  }

  static void expect_type(const std::string& x, const TypeRef& found,
                          const TypeRef& expected) {
    if (!type_equal(found, expected))
      fail(Errc::type_mismatch, "variable " + x + " has type " +
                                    type_to_string(found) + ", expected " +
                                    type_to_string(expected));
  }

  VarCtx check_node(const ProcCtx& pi, const VarCtx& gamma,
                    const NewUnit& n) const {
    VarCtx out = gamma;
    bind(out, n.var, Type::unit());
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const Discard& n) const {
    VarCtx out = gamma;
    consume(out, n.var);
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma, const Copy& n) const {
    VarCtx out = gamma;
    auto it = out.find(n.src);
    if (it == out.end())
      fail(Errc::unbound_variable, "variable " + n.src + " is not in scope");
    if (!is_classical(it->second))
      fail(Errc::not_classical,
           "copy of " + n.src + " : " + type_to_string(it->second) +
               "; only classical types may be copied");
    bind(out, n.dst, it->second);  // src stays in scope
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const NewQbit& n) const {
    VarCtx out = gamma;
    bind(out, n.var, Type::qbit());
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const Measure& n) const {
    VarCtx out = gamma;
    TypeRef t = consume(out, n.src);
    expect_type(n.src, t, Type::qbit());
    bind(out, n.dst, bit_type());
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const ApplyUnitary& n) const {
    if (!gates_->has(n.gate))
      fail(Errc::unknown_gate, "no gate named " + n.gate);
    int arity = gates_->arity(n.gate);
    if (arity != static_cast<int>(n.targets.size()))
      fail(Errc::arity_mismatch,
           "gate " + n.gate + " has arity " + std::to_string(arity) +
               " but got " + std::to_string(n.targets.size()) + " qubits");
    std::set<std::string> seen;
    for (const auto& q : n.targets) {
      if (!seen.insert(q).second)
        fail(Errc::duplicate_variable,
             "qubit variable " + q + " listed twice");
      auto it = gamma.find(q);
      if (it == gamma.end())
        fail(Errc::unbound_variable, "variable " + q + " is not in scope");
      expect_type(q, it->second, Type::qbit());
    }
    return gamma;
  }

  VarCtx check_node(const ProcCtx& pi, const VarCtx& gamma,
                    const Seq& n) const {
    VarCtx mid = check_term(pi, gamma, n.first);
    return check_term(pi, mid, n.rest);
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma, const Skip&) const {
    return gamma;
  }

  VarCtx check_node(const ProcCtx& pi, const VarCtx& gamma,
                    const While& n) const {
    auto it = gamma.find(n.cond);
    if (it == gamma.end())
      fail(Errc::unbound_variable, "variable " + n.cond + " is not in scope");
    expect_type(n.cond, it->second, bit_type());
    VarCtx after = check_term(pi, gamma, n.body);
    if (!var_ctx_equal(after, gamma))
      fail(Errc::type_mismatch,
           "while body must preserve its context; got {" +
               var_ctx_to_string(after) + "}, expected {" +
               var_ctx_to_string(gamma) + "}");
    return gamma;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const InjLeft& n) const {
    VarCtx out = gamma;
    TypeRef t = consume(out, n.src);
    expect_type(n.src, t, n.left_type);
    bind(out, n.dst, Type::sum(n.left_type, n.right_type));
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const InjRight& n) const {
    VarCtx out = gamma;
    TypeRef t = consume(out, n.src);
    expect_type(n.src, t, n.right_type);
    bind(out, n.dst, Type::sum(n.left_type, n.right_type));
    return out;
  }

  VarCtx check_node(const ProcCtx& pi, const VarCtx& gamma,
                    const CaseOf& n) const {
    VarCtx base = gamma;
    TypeRef t = consume(base, n.scrutinee);
    if (t->kind != TypeKind::sum)
      fail(Errc::type_mismatch, "case scrutinee " + n.scrutinee +
                                    " has non-sum type " + type_to_string(t));
    VarCtx left_ctx = base;
    bind(left_ctx, n.left_var, t->child_a);
    VarCtx sigma1 = check_term(pi, left_ctx, n.left_body);
    VarCtx right_ctx = base;
    bind(right_ctx, n.right_var, t->child_b);
    VarCtx sigma2 = check_term(pi, right_ctx, n.right_body);
    if (!var_ctx_equal(sigma1, sigma2))
      fail(Errc::branch_mismatch,
           "case branches produce different contexts: {" +
               var_ctx_to_string(sigma1) + "} vs {" +
               var_ctx_to_string(sigma2) + "}");
    return sigma1;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const MakePair& n) const {
    VarCtx out = gamma;
    TypeRef a = consume(out, n.fst);
    TypeRef b = consume(out, n.snd);
    bind(out, n.dst, Type::tensor(a, b));
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const SplitPair& n) const {
    VarCtx out = gamma;
    TypeRef t = consume(out, n.src);
    if (t->kind != TypeKind::tensor)
      fail(Errc::type_mismatch, "unpair of " + n.src + " : " +
                                    type_to_string(t) +
                                    ", which is not a tensor");
    bind(out, n.fst, t->child_a);
    bind(out, n.snd, t->child_b);
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const FoldTerm& n) const {
    if (n.mu_type->kind != TypeKind::mu)
      fail(Errc::type_mismatch, "fold annotation must be a mu type");
    VarCtx out = gamma;
    TypeRef t = consume(out, n.src);
    expect_type(n.src, t, unroll_mu(n.mu_type));
    bind(out, n.dst, n.mu_type);
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const UnfoldTerm& n) const {
    VarCtx out = gamma;
    TypeRef t = consume(out, n.src);
    if (t->kind != TypeKind::mu)
      fail(Errc::type_mismatch, "unfold of " + n.src + " : " +
                                    type_to_string(t) +
                                    ", which is not a mu type");
    bind(out, n.dst, unroll_mu(t));
    return out;
  }

  VarCtx check_node(const ProcCtx& pi, const VarCtx& gamma,
                    const ProcDef& n) const {
    if (!is_closed_type(n.in_type) || !is_closed_type(n.out_type))
      fail(Errc::type_mismatch, "procedure types must be closed");
    if (pi.count(n.name))
      fail(Errc::duplicate_procedure,
           "procedure " + n.name + " is already declared");
    ProcCtx extended = pi;
    extended[n.name] = ProcSig{n.in_type, n.out_type, n.bound};
    VarCtx body_in;
    body_in[n.in_var] = n.in_type;
    VarCtx body_out = check_term(extended, body_in, n.body);
    VarCtx expected;
    expected[n.out_var] = n.out_type;
    if (!var_ctx_equal(body_out, expected))
      fail(Errc::type_mismatch,
           "body of " + n.name + " produces {" + var_ctx_to_string(body_out) +
               "}, expected {" + var_ctx_to_string(expected) + "}");
    return gamma;
  }

  VarCtx check_node(const ProcCtx& pi, const VarCtx& gamma,
                    const CallProc& n) const {
    auto it = pi.find(n.name);
    if (it == pi.end())
      fail(Errc::unknown_procedure, "procedure " + n.name + " is not declared");
    if (it->second.bound != n.bound)
      fail(Errc::unknown_procedure,
           "procedure " + n.name + " index mismatch");
    VarCtx out = gamma;
    TypeRef t = consume(out, n.arg);
    expect_type(n.arg, t, it->second.in_type);
    bind(out, n.dst, it->second.out_type);
    return out;
  }

  VarCtx check_node(const ProcCtx&, const VarCtx& gamma,
                    const ZeroTerm& n) const {
    if (!var_ctx_equal(gamma, n.input))
      fail(Errc::type_mismatch,
           "zero term annotated with input {" + var_ctx_to_string(n.input) +
               "} used in context {" + var_ctx_to_string(gamma) + "}");
    return n.output;
  }

  const GateRegistry* gates_;
};

inline VarCtx check_term(const ProcCtx& pi, const VarCtx& gamma,
                         const TermRef& m,
                         const GateRegistry* gates = nullptr) {
  return Checker(gates).check_term(pi, gamma, m);
}

// ---------------------------------------------------------------------------
// Procedure stores
// ---------------------------------------------------------------------------

struct StoreDef {
  std::string name;
  std::optional<long> bound;
  std::string in_var;
  TypeRef in_type;
  std::string out_var;
  TypeRef out_type;
  TermRef body;
};

using ProcStore = std::vector<StoreDef>;

// Pi |- Omega: each body checks under the context so far extended with its
// own name (self-recursion is permitted, mutual recursion is not).
inline ProcCtx check_store(const ProcStore& omega,
                           const GateRegistry* gates = nullptr) {
  Checker checker(gates);
  ProcCtx pi;
  for (const StoreDef& def : omega) {
    if (pi.count(def.name))
      fail(Errc::duplicate_procedure,
           "procedure " + def.name + " defined twice in the store");
    ProcCtx extended = pi;
    extended[def.name] = ProcSig{def.in_type, def.out_type, def.bound};
    VarCtx body_in;
    body_in[def.in_var] = def.in_type;
    VarCtx body_out = checker.check_term(extended, body_in, def.body);
    VarCtx expected;
    expected[def.out_var] = def.out_type;
    if (!var_ctx_equal(body_out, expected))
      fail(Errc::type_mismatch,
           "body of " + def.name + " produces {" +
               var_ctx_to_string(body_out) + "}, expected {" +
               var_ctx_to_string(expected) + "}");
    pi = std::move(extended);
  }
  return pi;
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

using Assignment = std::map<std::string, ValueRef>;

struct ConfigWitness {
  ProcCtx proc_ctx;
  VarCtx input;
  VarCtx output;
  std::set<int> qubits;  // Q = {1, ..., dim(rho)}
};

// Checks clauses (1)-(4) of configuration well-formedness: the term judgement,
// the value assignment splitting (necessarily unique), the store, and the 1-1
// correspondence between value pointers and qubits of rho.
template <typename ConfigLike>
ConfigWitness check_config_parts(const ConfigLike& c,
                                 const GateRegistry* gates = nullptr) {
  ProcCtx pi;
  try {
    pi = check_store(c.store, gates);
  } catch (const Error& e) {
    throw Error(Errc::ill_formed_config,
                std::string("store: ") + e.what());
  }

  VarCtx gamma;
  std::set<int> qubits;
  for (const auto& [name, value] : c.assignment) {
    ValueTyping vt;
    try {
      vt = type_of_value(value);
    } catch (const Error& e) {
      throw Error(Errc::ill_formed_config,
                  "assignment: value of " + name + ": " + e.what());
    }
    gamma[name] = vt.type;
    for (int q : vt.pointers) {
      if (!qubits.insert(q).second)
        fail(Errc::ill_formed_config, "assignment: qubit pointer " +
                                          std::to_string(q) +
                                          " used by two values");
    }
  }

  int n = c.rho.n_qubits;
  if (static_cast<int>(qubits.size()) != n ||
      (n > 0 && (*qubits.begin() != 1 || *qubits.rbegin() != n)))
    fail(Errc::ill_formed_config,
         "qubit-mismatch: pointers do not cover {1.." + std::to_string(n) +
             "}");

  VarCtx sigma;
  try {
    sigma = check_term(pi, gamma, c.term, gates);
  } catch (const Error& e) {
    throw Error(Errc::ill_formed_config, std::string("term: ") + e.what());
  }
  return ConfigWitness{std::move(pi), std::move(gamma), std::move(sigma),
                       std::move(qubits)};
}

}  // namespace qpl
