#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpl/ast.hpp"
#include "qpl/common.hpp"
#include "qpl/denotational.hpp"
#include "qpl/operational.hpp"
#include "qpl/typecheck.hpp"

// Numerical verification harness: soundness (single-step invariance),
// big-step invariance, adequacy, and the finitary approximation checks, each
// reported with its measured error and tolerance.

namespace qpl {

enum class CheckStatus { pass, warn, fail };

struct CheckRecord {
  std::string name;
  CheckStatus status = CheckStatus::pass;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyParams {
  int depth = 8;
  long fix_iters = 64;
  long max_steps = 10000;
  double tol = 1e-9;
  int max_qubits = kDefaultMaxQubits;
};

struct VerificationReport {
  std::string program;
  VerifyParams params;
  std::vector<CheckRecord> records;

  bool failed() const {
    for (const auto& r : records)
      if (r.status == CheckStatus::fail) return true;
    return false;
  }
  void add(CheckRecord r) { records.push_back(std::move(r)); }
};

inline const char* status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::warn: return "warn";
    case CheckStatus::fail: return "fail";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Soundness (single-step invariance): [[C]] = sum over C ~> D of [[D]].
// ---------------------------------------------------------------------------

inline CheckRecord check_soundness(const Configuration& c, Denoter& denoter,
                                   double tol,
                                   const GateRegistry* gates = nullptr) {
  CheckRecord rec{"soundness", CheckStatus::pass, 0.0, tol, ""};
  ConfigDenotation lhs = denoter.denote_config(c);
  if (lhs.trunc_loss > tol)
    fail(Errc::truncation_overflow,
         "configuration loses mass " + std::to_string(lhs.trunc_loss) +
             " to truncation at depth " +
             std::to_string(denoter.params().depth));
  Machine machine(gates);
  machine.seed_counter_from(c);
  std::vector<Configuration> succ = machine.step(c);
  Vector sum = Vector::Zero(lhs.state.data.size());
  for (const Configuration& d : succ) {
    ConfigDenotation rhs = denoter.denote_config(d);
    if (!var_ctx_equal(rhs.sigma, lhs.sigma))
      fail(Errc::internal_error, "successor changed Sigma");
    sum += rhs.state.data;
  }
  rec.max_error = (lhs.state.data - sum).cwiseAbs().maxCoeff();
  rec.status = rec.max_error <= tol ? CheckStatus::pass : CheckStatus::fail;
  return rec;
}

// ---------------------------------------------------------------------------
// Big-step invariance: [[C]] = sup_n S_n with S_n the sum of terminal-leaf
// denotations within n steps. At a finite horizon this splits into the
// always-checkable inequalities plus an equality with frontier slack.
// ---------------------------------------------------------------------------

struct BigStepResult {
  CheckRecord chain;     // S_{n+1} - S_n is a nonnegative state
  CheckRecord bound;     // S_n <= [[C]]
  CheckRecord equality;  // |[[C]] - S_N| <= tol + frontier
  double frontier = 0.0;
};

inline BigStepResult check_big_step(const Configuration& c, long max_steps,
                                    Denoter& denoter, double tol,
                                    const GateRegistry* gates = nullptr) {
  BigStepResult out;
  out.chain = CheckRecord{"big-step-chain", CheckStatus::pass, 0.0, 1e-10, ""};
  out.bound = CheckRecord{"big-step-bound", CheckStatus::pass, 0.0, 1e-9, ""};
  out.equality =
      CheckRecord{"big-step-equality", CheckStatus::pass, 0.0, tol, ""};

  ConfigDenotation full = denoter.denote_config(c);
  if (full.trunc_loss > tol)
    fail(Errc::truncation_overflow, "truncation loss above tolerance");

  EnumOptions opts;
  opts.max_steps = max_steps;
  opts.max_qubits = kDefaultMaxQubits;
  EnumerationResult r = enumerate(c, opts, gates);
  out.frontier = r.frontier_mass * c.trace();

  std::sort(r.leaves.begin(), r.leaves.end(),
            [](const Leaf& a, const Leaf& b) { return a.depth < b.depth; });
  Vector partial = Vector::Zero(full.state.data.size());
  double worst_chain = 0.0;
  double worst_bound = 0.0;
  for (const Leaf& leaf : r.leaves) {
    ConfigDenotation ld = denoter.denote_config(leaf.config);
    if (!var_ctx_equal(ld.sigma, full.sigma))
      fail(Errc::internal_error, "leaf changed Sigma");
    // each increment must itself be a nonnegative state
    worst_chain =
        std::max(worst_chain, -ld.state.min_block_eigenvalue());
    partial += ld.state.data;
    BlockState rest{full.state.space, full.state.data - partial};
    worst_bound = std::max(worst_bound, -rest.min_block_eigenvalue());
  }
  out.chain.max_error = worst_chain;
  if (worst_chain > out.chain.tolerance) out.chain.status = CheckStatus::fail;
  out.bound.max_error = worst_bound;
  if (worst_bound > out.bound.tolerance) out.bound.status = CheckStatus::fail;

  double diff = (full.state.data - partial).cwiseAbs().maxCoeff();
  out.equality.max_error = diff;
  double allowed = tol + out.frontier;
  if (diff > allowed) {
    out.equality.status = CheckStatus::fail;
  } else if (out.frontier > tol && diff > tol) {
    out.equality.status = CheckStatus::warn;
    out.equality.detail = "InconclusiveAtHorizon: frontier mass " +
                          std::to_string(out.frontier);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adequacy: the total mass of [[C]] equals tr(C) * Halt(C); at a finite
// horizon the halting probability is bounded below by the enumeration.
// ---------------------------------------------------------------------------

inline CheckRecord check_adequacy(const Configuration& c, long max_steps,
                                  Denoter& denoter, double tol,
                                  const GateRegistry* gates = nullptr) {
  CheckRecord rec{"adequacy", CheckStatus::pass, 0.0, tol, ""};
  ConfigDenotation full = denoter.denote_config(c);
  if (full.trunc_loss > tol)
    fail(Errc::truncation_overflow, "truncation loss above tolerance");
  EnumOptions opts;
  opts.max_steps = max_steps;
  EnumerationResult r = enumerate(c, opts, gates);
  double lhs = full.state.mass();
  // Zero-terminal endings (possible only in the indexed fragment) carry an
  // empty denotation and do not count as halting here; for ordinary
  // configurations this sum is exactly the halting mass.
  double rhs = 0.0;
  for (const Leaf& leaf : r.leaves)
    if (leaf.config.is_skip_terminal()) rhs += leaf.config.trace();
  double frontier = r.frontier_mass * c.trace();
  rec.max_error = std::abs(lhs - rhs);
  double allowed = tol + frontier;
  if (rec.max_error > allowed) {
    rec.status = CheckStatus::fail;
  } else if (frontier > tol && rec.max_error > tol) {
    rec.status = CheckStatus::warn;
    rec.detail =
        "InconclusiveAtHorizon: frontier mass " + std::to_string(frontier);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Finitary approximants (while^n / f^n) and the approximation relation.
// ---------------------------------------------------------------------------

inline TermRef bound_term(const TermRef& t, long n) {
  return std::visit(
      [&](const auto& node) -> TermRef {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Seq>)
          return mk_seq(bound_term(node.first, n), bound_term(node.rest, n));
        else if constexpr (std::is_same_v<T, While>)
          return mk<While>(node.bound ? node.bound : std::optional<long>(n),
                           node.cond, bound_term(node.body, n));
        else if constexpr (std::is_same_v<T, CaseOf>)
          return mk<CaseOf>(node.scrutinee, node.left_var,
                            bound_term(node.left_body, n), node.right_var,
                            bound_term(node.right_body, n));
        else if constexpr (std::is_same_v<T, ProcDef>)
          return mk<ProcDef>(node.name,
                             node.bound ? node.bound : std::optional<long>(n),
                             node.in_var, node.in_type, node.out_var,
                             node.out_type, bound_term(node.body, n));
        else if constexpr (std::is_same_v<T, CallProc>)
          return mk<CallProc>(node.dst, node.name,
                              node.bound ? node.bound : std::optional<long>(n),
                              node.arg);
        else
          return t;
      },
      t->node);
}

// Replaces every while with while^n and every procedure with its n-indexed
// version, in the term and throughout the store.
inline Configuration build_finitary(const Configuration& c, long n) {
  Configuration out = c;
  out.term = bound_term(c.term, n);
  for (StoreDef& def : out.store) {
    if (!def.bound) def.bound = n;
    def.body = bound_term(def.body, n);
  }
  return out;
}

// The term approximation relation: while^n/f^n/proc f^n approximate their
// unindexed forms, congruently through seq and case; every other ordinary
// term approximates itself.
inline bool approximates_term(const TermRef& fin, const TermRef& ord) {
  if (term_as<ZeroTerm>(ord) != nullptr) return false;
  if (const auto* fs = term_as<Seq>(fin)) {
    const auto* os = term_as<Seq>(ord);
    return os && approximates_term(fs->first, os->first) &&
           approximates_term(fs->rest, os->rest);
  }
  if (const auto* fw = term_as<While>(fin)) {
    const auto* ow = term_as<While>(ord);
    return ow && !ow->bound && fw->bound && fw->cond == ow->cond &&
           approximates_term(fw->body, ow->body);
  }
  if (const auto* fc = term_as<CaseOf>(fin)) {
    const auto* oc = term_as<CaseOf>(ord);
    return oc && fc->scrutinee == oc->scrutinee &&
           fc->left_var == oc->left_var && fc->right_var == oc->right_var &&
           approximates_term(fc->left_body, oc->left_body) &&
           approximates_term(fc->right_body, oc->right_body);
  }
  if (const auto* fp = term_as<ProcDef>(fin)) {
    const auto* op = term_as<ProcDef>(ord);
    return op && !op->bound && fp->bound && fp->name == op->name &&
           fp->in_var == op->in_var && fp->out_var == op->out_var &&
           type_equal(fp->in_type, op->in_type) &&
           type_equal(fp->out_type, op->out_type) &&
           approximates_term(fp->body, op->body);
  }
  if (const auto* fcall = term_as<CallProc>(fin)) {
    const auto* ocall = term_as<CallProc>(ord);
    return ocall && !ocall->bound && fcall->bound &&
           fcall->name == ocall->name && fcall->dst == ocall->dst &&
           fcall->arg == ocall->arg;
  }
  if (term_as<ZeroTerm>(fin) != nullptr) return false;
  // reflexivity for the remaining (index-free) forms
  return term_equal(fin, ord);
}

inline bool approximates_store(const ProcStore& fin, const ProcStore& ord) {
  if (fin.size() != ord.size()) return false;
  for (size_t i = 0; i < fin.size(); ++i) {
    const StoreDef& f = fin[i];
    const StoreDef& o = ord[i];
    if (f.name != o.name || o.bound || !f.bound) return false;
    if (f.in_var != o.in_var || f.out_var != o.out_var) return false;
    if (!type_equal(f.in_type, o.in_type) ||
        !type_equal(f.out_type, o.out_type))
      return false;
    if (!approximates_term(f.body, o.body)) return false;
  }
  return true;
}

inline bool value_equal(const ValueRef& a, const ValueRef& b);

inline bool assignment_equal(const Assignment& a, const Assignment& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (!value_equal(ia->second, ib->second)) return false;
  }
  return true;
}

inline bool value_equal(const ValueRef& a, const ValueRef& b) {
  if (a->node.index() != b->node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b->node);
        if constexpr (std::is_same_v<T, VStar>)
          return true;
        else if constexpr (std::is_same_v<T, VQubit>)
          return x.index == y.index;
        else if constexpr (std::is_same_v<T, VLeft> ||
                           std::is_same_v<T, VRight>)
          return type_equal(x.left_type, y.left_type) &&
                 type_equal(x.right_type, y.right_type) &&
                 value_equal(x.inner, y.inner);
        else if constexpr (std::is_same_v<T, VPair>)
          return value_equal(x.fst, y.fst) && value_equal(x.snd, y.snd);
        else
          return type_equal(x.mu_type, y.mu_type) &&
                 value_equal(x.inner, std::get<VFold>(b->node).inner);
      },
      a->node);
}

// C' approximates C: terms and stores relate, assignments and states equal.
inline bool approximates_config(const Configuration& fin,
                                const Configuration& ord) {
  return approximates_term(fin.term, ord.term) &&
         approximates_store(fin.store, ord.store) &&
         assignment_equal(fin.assignment, ord.assignment) &&
         fin.rho.n_qubits == ord.rho.n_qubits &&
         (fin.rho.data - ord.rho.data).cwiseAbs().maxCoeff() == 0.0;
}

struct ApproximationResult {
  CheckRecord normalisation;  // every approximant reaches frontier mass 0
  CheckRecord lockstep;       // skip-terminating runs pair with ordinary runs
  CheckRecord chain;          // denotations increase with the bound
  CheckRecord limit;          // the largest bound approximates [[C]]
};

inline ApproximationResult check_approximation(
    const Configuration& c, const std::vector<long>& bounds, Denoter& denoter,
    double tol, long normalise_cap = 100000,
    const GateRegistry* gates = nullptr) {
  ApproximationResult out;
  out.normalisation =
      CheckRecord{"finitary-normalisation", CheckStatus::pass, 0.0, 0.0, ""};
  out.lockstep =
      CheckRecord{"finitary-lockstep", CheckStatus::pass, 0.0, 0.0, ""};
  out.chain =
      CheckRecord{"approximant-chain", CheckStatus::pass, 0.0, 1e-10, ""};
  out.limit =
      CheckRecord{"approximant-limit", CheckStatus::pass, 0.0, tol, ""};
  if (!is_ordinary(c.term))
    fail(Errc::internal_error, "approximation needs an ordinary configuration");

  ConfigDenotation full = denoter.denote_config(c);
  std::optional<Vector> prev_state;

  for (long n : bounds) {
    Configuration fin = build_finitary(c, n);
    if (!approximates_config(fin, c))
      fail(Errc::internal_error, "build_finitary broke the relation");

    // (iii) strong normalisation: the whole tree terminates
    EnumOptions opts;
    opts.max_steps = normalise_cap;
    opts.build_tree = true;
    EnumerationResult r = enumerate(fin, opts, gates);
    if (r.frontier_mass != 0.0) {
      out.normalisation.status = CheckStatus::fail;
      out.normalisation.detail =
          "bound " + std::to_string(n) + " left frontier mass";
    }

    // (i) lockstep: replay every skip-terminating path against the ordinary
    // configuration, asserting the relation and equal traces stepwise
    for (size_t leaf_id = 0; leaf_id < r.nodes.size(); ++leaf_id) {
      const TreeNode& node = r.nodes[leaf_id];
      if (!node.children.empty() || !node.config.is_skip_terminal()) continue;
      std::vector<long> path;  // child indices from root
      long cur = static_cast<long>(leaf_id);
      while (r.nodes[cur].parent >= 0) {
        long parent = r.nodes[cur].parent;
        const auto& siblings = r.nodes[parent].children;
        path.push_back(std::find(siblings.begin(), siblings.end(), cur) -
                       siblings.begin());
        cur = parent;
      }
      std::reverse(path.begin(), path.end());

      Machine m_fin(gates), m_ord(gates);
      m_fin.seed_counter_from(fin);
      m_ord.seed_counter_from(c);
      Configuration cf = fin;
      Configuration co = c;
      bool ok = true;
      for (long choice : path) {
        auto sf = m_fin.step(cf);
        auto so = m_ord.step(co);
        if (so.size() != sf.size()) {
          ok = false;
          break;
        }
        // the tree recorded surviving children only; find the raw index of
        // the choice-th unpruned successor
        long raw_index = -1;
        long live = -1;
        for (size_t i = 0; i < sf.size(); ++i) {
          if (sf[i].trace() > kPruneTol) ++live;
          if (live == choice) {
            raw_index = static_cast<long>(i);
            break;
          }
        }
        if (raw_index < 0) {
          ok = false;
          break;
        }
        cf = sf[raw_index];
        co = so[raw_index];
        if (std::abs(cf.trace() - co.trace()) > 1e-15 ||
            !approximates_config(cf, co)) {
          ok = false;
          break;
        }
      }
      if (!(ok && cf.is_skip_terminal() && co.is_skip_terminal())) {
        out.lockstep.status = CheckStatus::fail;
        out.lockstep.detail = "bound " + std::to_string(n);
      }
    }

    // (ii) the denotational chain
    ConfigDenotation dn = denoter.denote_config(fin);
    if (prev_state) {
      BlockState diff{full.state.space, dn.state.data - *prev_state};
      out.chain.max_error =
          std::max(out.chain.max_error, -diff.min_block_eigenvalue());
    }
    BlockState below{full.state.space, full.state.data - dn.state.data};
    out.chain.max_error =
        std::max(out.chain.max_error, -below.min_block_eigenvalue());
    prev_state = dn.state.data;
  }
  if (out.chain.max_error > out.chain.tolerance)
    out.chain.status = CheckStatus::fail;
  if (prev_state) {
    out.limit.max_error =
        (full.state.data - *prev_state).cwiseAbs().maxCoeff();
    if (out.limit.max_error > tol) out.limit.status = CheckStatus::fail;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-program verification: theorems 1-6 plus the Appendix A/B checks on
// one program, collected into a report.
// ---------------------------------------------------------------------------

inline VerificationReport verify_program(const std::string& program_name,
                                         const Configuration& initial,
                                         const VerifyParams& params,
                                         const GateRegistry* gates = nullptr) {
  VerificationReport report;
  report.program = program_name;
  report.params = params;
  DenoteParams dp;
  dp.depth = params.depth;
  dp.fix_iters = params.fix_iters;
  Denoter denoter(dp, gates);

  // Thm 1 and 2 over the reduction tree: subject reduction is asserted by
  // the machine's verification mode, trace conservation checked per node.
  {
    CheckRecord progress{"progress-trace-conservation", CheckStatus::pass, 0.0,
                         1e-12, ""};
    CheckRecord subject{"subject-reduction", CheckStatus::pass, 0.0, 0.0, ""};
    try {
      EnumOptions opts;
      opts.max_steps = std::min<long>(params.max_steps, 2000);
      opts.build_tree = true;
      opts.prune_impossible = false;
      opts.verify_steps = true;
      opts.max_qubits = params.max_qubits;
      EnumerationResult r = enumerate(initial, opts, gates);
      for (const TreeNode& node : r.nodes) {
        if (node.children.empty()) continue;
        double sum = 0.0;
        for (long child : node.children) sum += r.nodes[child].config.trace();
        progress.max_error = std::max(
            progress.max_error, std::abs(node.config.trace() - sum));
      }
      if (progress.max_error > progress.tolerance)
        progress.status = CheckStatus::fail;
    } catch (const Error& e) {
      subject.status = CheckStatus::fail;
      subject.detail = e.what();
    }
    report.add(progress);
    report.add(subject);
  }

  // Thm 4 on every non-terminal configuration reachable within 50 steps.
  {
    CheckRecord rec{"soundness", CheckStatus::pass, 0.0, params.tol, ""};
    try {
      EnumOptions opts;
      opts.max_steps = 50;
      opts.build_tree = true;
      opts.max_qubits = params.max_qubits;
      EnumerationResult r = enumerate(initial, opts, gates);
      for (const TreeNode& node : r.nodes) {
        if (node.config.terminal()) continue;
        CheckRecord one = check_soundness(node.config, denoter, params.tol,
                                          gates);
        rec.max_error = std::max(rec.max_error, one.max_error);
      }
      if (rec.max_error > params.tol) rec.status = CheckStatus::fail;
    } catch (const Error& e) {
      if (e.code() == Errc::truncation_overflow ||
          e.code() == Errc::capacity_exceeded) {
        rec.status = CheckStatus::warn;
        rec.detail = e.what();
      } else {
        rec.status = CheckStatus::fail;
        rec.detail = e.what();
      }
    }
    report.add(rec);
  }

  // Thm 5 and Thm 6 on the initial configuration.
  try {
    BigStepResult bs = check_big_step(initial, params.max_steps, denoter,
                                      params.tol, gates);
    report.add(bs.chain);
    report.add(bs.bound);
    report.add(bs.equality);
  } catch (const Error& e) {
    report.add(CheckRecord{"big-step-equality",
                           e.code() == Errc::truncation_overflow
                               ? CheckStatus::warn
                               : CheckStatus::fail,
                           0.0, params.tol, e.what()});
  }
  try {
    report.add(
        check_adequacy(initial, params.max_steps, denoter, 1e-6, gates));
  } catch (const Error& e) {
    report.add(CheckRecord{"adequacy",
                           e.code() == Errc::truncation_overflow
                               ? CheckStatus::warn
                               : CheckStatus::fail,
                           0.0, 1e-6, e.what()});
  }

  // Thm 3 on every value occurring in reachable assignments.
  {
    CheckRecord causal{"value-causality", CheckStatus::pass, 0.0, 1e-12, ""};
    CheckRecord copyable{"classical-copyability", CheckStatus::pass, 0.0,
                         1e-12, ""};
    try {
      EnumOptions opts;
      opts.max_steps = std::min<long>(params.max_steps, 500);
      opts.build_tree = true;
      opts.max_qubits = params.max_qubits;
      EnumerationResult r = enumerate(initial, opts, gates);
      for (const TreeNode& node : r.nodes) {
        for (const auto& [name, v] : node.config.assignment) {
          ValueTyping vt = type_of_value(v);
          Superoperator vop = denoter.denote_value(v);
          Superoperator lhs = compose(denoter.discard_map(vt.type), vop);
          Superoperator rhs = trace_superop(
              BlockSpace::qubits(static_cast<int>(vt.pointers.size())));
          causal.max_error =
              std::max(causal.max_error, superop_distance(lhs, rhs));
          if (is_classical(vt.type)) {
            Superoperator clhs = compose(denoter.copy_map(vt.type), vop);
            Superoperator crhs = compose(tensor_op(vop, vop),
                                         denoter.copy_map(Type::unit()));
            copyable.max_error =
                std::max(copyable.max_error, superop_distance(clhs, crhs));
          }
        }
      }
      if (causal.max_error > causal.tolerance)
        causal.status = CheckStatus::fail;
      if (copyable.max_error > copyable.tolerance)
        copyable.status = CheckStatus::fail;
    } catch (const Error& e) {
      causal.status = CheckStatus::warn;
      causal.detail = e.what();
    }
    report.add(causal);
    report.add(copyable);
  }

  // NCPSU validity of the store entries and the main term's superoperator.
  {
    CheckRecord rec{"cp-trace-nonincreasing", CheckStatus::pass, 0.0,
                    kChoiTol, ""};
    try {
      ProcEnv env = denoter.denote_store(initial.store);
      std::vector<Superoperator> ops;
      for (const auto& [name, entry] : env) ops.push_back(entry.op);
      VarCtx gamma = assignment_context(initial.assignment);
      ops.push_back(denoter.denote_term(initial.term, env, gamma).op);
      for (const Superoperator& op : ops) {
        ValidationReport v = validate(op);
        rec.max_error = std::max(
            rec.max_error, std::max(-v.min_choi_eig,
                                    v.max_dual_unit_eig - 1.0));
        if (!v.cp || !v.trace_nonincreasing) rec.status = CheckStatus::fail;
      }
    } catch (const Error& e) {
      if (e.code() == Errc::capacity_exceeded) {
        rec.status = CheckStatus::warn;
        rec.detail = e.what();
      } else {
        rec.status = CheckStatus::fail;
        rec.detail = e.what();
      }
    }
    report.add(rec);
  }

  // Appendix B: finitary approximants of the whole program.
  if (is_ordinary(initial.term)) {
    bool store_ordinary = true;
    for (const auto& def : initial.store)
      if (def.bound || !is_ordinary(def.body)) store_ordinary = false;
    if (store_ordinary) {
      try {
        ApproximationResult ar = check_approximation(
            initial, {1, 2, 4, 8, 16, 24}, denoter, 1e-6,
            std::min<long>(params.max_steps * 4, 100000), gates);
        report.add(ar.normalisation);
        report.add(ar.lockstep);
        report.add(ar.chain);
        report.add(ar.limit);
      } catch (const Error& e) {
        report.add(CheckRecord{"approximant-limit",
                               e.code() == Errc::truncation_overflow ||
                                       e.code() == Errc::capacity_exceeded
                                   ? CheckStatus::warn
                                   : CheckStatus::fail,
                               0.0, 1e-6, e.what()});
      }
    }
  }

  return report;
}

}  // namespace qpl
