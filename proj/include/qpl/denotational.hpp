#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpl/ast.hpp"
#include "qpl/blockspace.hpp"
#include "qpl/common.hpp"
#include "qpl/operational.hpp"
#include "qpl/typecheck.hpp"

// Finite-dimensional denotational semantics: types as block spaces with
// mu-types truncated at depth k, values as state transformers, terms as
// superoperators (computed in the Schroedinger picture), procedure stores via
// Kleene fixpoint iteration, and configurations as states.
//
// Contexts are interpreted in canonical name-sorted order; each rule inserts
// explicit permutations moving the variables it touches to the tail of the
// tensor, applies its core map there, and permutes the results back into
// sorted position. Evaluation pushes a carrier matrix (the transfer from the
// initial context, or a single state column) through the term statement by
// statement, so a statement's full-context operator is never materialized.

namespace qpl {

struct DenoteParams {
  int depth = 8;           // mu-unrolling depth k
  long fix_iters = 64;     // Kleene iterations for lfp
  long max_op_dim = 4096;  // guard on dense transfer-matrix dimension
  double converge_tol = 1e-9;
};

struct ProcEntry {
  TypeRef in_type;
  TypeRef out_type;
  std::optional<long> bound;
  Superoperator op;
};

using ProcEnv = std::map<std::string, ProcEntry>;

inline ProcCtx proc_ctx_of(const ProcEnv& env) {
  ProcCtx pi;
  for (const auto& [name, e] : env)
    pi[name] = ProcSig{e.in_type, e.out_type, e.bound};
  return pi;
}

struct ConfigDenotation {
  BlockState state;  // on the interpretation of Sigma
  VarCtx sigma;
  double trunc_loss = 0.0;
};

class Denoter {
 public:
  explicit Denoter(DenoteParams params = {},
                   const GateRegistry* gates = nullptr)
      : params_(params), gates_(gates ? gates : &builtin_gates()) {}

  const DenoteParams& params() const { return params_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void clear_warnings() { warnings_.clear(); }

  // -------------------------------------------------------------------------
  // Types
  // -------------------------------------------------------------------------

  using TypeEnv = std::vector<std::pair<std::string, BlockSpace>>;

  BlockSpace denote_type(const TypeRef& t) { return denote_type(t, {}); }

  BlockSpace denote_type(const TypeRef& t, const TypeEnv& env) {
    switch (t->kind) {
      case TypeKind::var: {
        for (auto it = env.rbegin(); it != env.rend(); ++it)
          if (it->first == t->name) return it->second;
        fail(Errc::internal_error, "unbound type variable " + t->name);
      }
      case TypeKind::unit:
        return BlockSpace::unit();
      case TypeKind::qbit:
        return BlockSpace::qbit();
      case TypeKind::sum:
        return sum_space(denote_type(t->child_a, env),
                         denote_type(t->child_b, env));
      case TypeKind::tensor:
        return tensor_space(denote_type(t->child_a, env),
                            denote_type(t->child_b, env));
      case TypeKind::mu: {
        if (env.empty()) {
          std::string key = type_to_string(t);
          auto it = type_cache_.find(key);
          if (it != type_cache_.end()) return it->second;
          BlockSpace s = denote_mu(t, env);
          type_cache_[key] = s;
          return s;
        }
        return denote_mu(t, env);
      }
    }
    fail(Errc::internal_error, "unreachable");
  }

  BlockSpace context_space(const VarCtx& gamma) {
    BlockSpace s = BlockSpace::unit();
    for (const auto& [name, type] : gamma)
      s = tensor_space(s, denote_type(type));
    return s;
  }

  // -------------------------------------------------------------------------
  // fold/unfold: the canonical embedding of the depth-k space into the
  // depth-(k+1) unrolled space, and the reverse projection (which drops the
  // blocks beyond depth k and reports their mass as truncation loss).
  // -------------------------------------------------------------------------

  struct FoldIso {
    Superoperator fold;           // unrolled -> mu
    Superoperator unfold;         // mu -> unrolled
    std::vector<long> block_map;  // mu block -> unrolled block
  };

  const FoldIso& fold_iso(const TypeRef& mu) {
    if (mu->kind != TypeKind::mu)
      fail(Errc::internal_error, "fold_iso on non-mu type");
    std::string key = type_to_string(mu);
    auto it = fold_cache_.find(key);
    if (it != fold_cache_.end()) return it->second;

    // chains lo_i = T^i(0), hi_i = T^{i+1}(0) with embeddings e_i between
    BlockSpace lo = BlockSpace::empty();
    BlockSpace hi = denote_type(mu->child_a, {{mu->name, lo}});
    std::vector<long> e;  // empty: T^0(0) has no blocks
    for (int i = 0; i < params_.depth; ++i) {
      std::vector<long> e_next =
          embed(mu->child_a, {{mu->name, lo}}, {{mu->name, hi}},
                {{mu->name, e}});
      BlockSpace lo_next = hi;
      BlockSpace hi_next = denote_type(mu->child_a, {{mu->name, hi}});
      lo = lo_next;
      hi = hi_next;
      e = std::move(e_next);
    }
    // now lo = T^k(0) = [[mu]]_k, hi = T^{k+1}(0) = [[A[mu/X]]]_k, e: lo -> hi
    Matrix unfold_t = Matrix::Zero(hi.state_dim(), lo.state_dim());
    for (long b = 0; b < lo.n_blocks(); ++b) {
      long n = lo.blocks[b];
      long hb = e[b];
      if (hi.blocks[hb] != n)
        fail(Errc::internal_error, "fold embedding dimension mismatch");
      for (long r = 0; r < n; ++r)
        for (long c = 0; c < n; ++c)
          unfold_t(hi.index(hb, r, c), lo.index(b, r, c)) = 1.0;
    }
    Superoperator unfold_op = Superoperator::make(lo, hi, unfold_t);
    Superoperator fold_op = Superoperator::make(hi, lo, unfold_t.transpose());
    fold_op.trunc_loss = trace_row(hi) - trace_row(lo) * fold_op.transfer;
    FoldIso iso{std::move(fold_op), std::move(unfold_op), e};
    return fold_cache_.emplace(key, std::move(iso)).first->second;
  }

  // -------------------------------------------------------------------------
  // Values
  // -------------------------------------------------------------------------

  // Block of [[A]]_k a value inhabits; nullopt when its fold depth exceeds k.
  std::optional<long> block_of_value(const ValueRef& v) {
    return std::visit(
        [&](const auto& n) -> std::optional<long> {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, VStar> || std::is_same_v<T, VQubit>) {
            return 0;
          } else if constexpr (std::is_same_v<T, VLeft>) {
            return block_of_value(n.inner);
          } else if constexpr (std::is_same_v<T, VRight>) {
            auto b = block_of_value(n.inner);
            if (!b) return std::nullopt;
            return denote_type(n.left_type).n_blocks() + *b;
          } else if constexpr (std::is_same_v<T, VPair>) {
            auto b1 = block_of_value(n.fst);
            auto b2 = block_of_value(n.snd);
            if (!b1 || !b2) return std::nullopt;
            TypeRef snd_type = type_of_value(n.snd).type;
            return *b1 * denote_type(snd_type).n_blocks() + *b2;
          } else {  // VFold
            auto hb = block_of_value(n.inner);
            if (!hb) return std::nullopt;
            const FoldIso& iso = fold_iso(n.mu_type);
            for (long b = 0; b < static_cast<long>(iso.block_map.size()); ++b)
              if (iso.block_map[b] == *hb) return b;
            return std::nullopt;
          }
        },
        v->node);
  }

  // [[Q |- v : A]] : qbit^{(x) |Q|} -> [[A]]_k. The domain orders the qubits
  // ascending by pointer; the value's own traversal order determines the
  // permutation into the target block.
  Superoperator denote_value(const ValueRef& v) {
    ValueTyping vt = type_of_value(v);
    std::optional<long> target = block_of_value(v);
    if (!target)
      fail(Errc::truncation_overflow,
           "value " + value_to_string(v) +
               " does not fit the truncated denotation at depth " +
               std::to_string(params_.depth));
    BlockSpace cod = denote_type(vt.type);
    int m = static_cast<int>(vt.pointers.size());
    long dim = 1L << m;
    if (cod.blocks[*target] != dim)
      fail(Errc::internal_error, "value block dimension mismatch");

    std::vector<int> sorted = vt.pointers;
    std::sort(sorted.begin(), sorted.end());
    // input slot i holds the i-th smallest pointer; send it to its slot in
    // traversal order
    std::vector<int> perm(m);
    for (int i = 0; i < m; ++i) {
      auto it = std::find(vt.pointers.begin(), vt.pointers.end(), sorted[i]);
      perm[i] = static_cast<int>(it - vt.pointers.begin());
    }
    Superoperator p = qubit_perm_superop(m, perm);

    Matrix embed_t = Matrix::Zero(cod.state_dim(), dim * dim);
    for (long r = 0; r < dim; ++r)
      for (long c = 0; c < dim; ++c)
        embed_t(cod.index(*target, r, c), c * dim + r) = 1.0;
    Superoperator e = Superoperator::make(p.cod, cod, std::move(embed_t));
    return compose(e, p);
  }

  // -------------------------------------------------------------------------
  // copy / discard
  // -------------------------------------------------------------------------

  // The diagonal copy map on a classical type: block i mass goes to block
  // (i, i) of [[P]] (x) [[P]]. Cached: the transfer can be large for deep
  // classical types.
  const Superoperator& copy_map(const TypeRef& p) {
    if (!is_classical(p))
      fail(Errc::not_classical,
           "copy map requested at non-classical type " + type_to_string(p));
    std::string key = type_to_string(p);
    auto hit = copy_cache_.find(key);
    if (hit != copy_cache_.end()) return hit->second;
    BlockSpace s = denote_type(p);
    long m = s.n_blocks();
    BlockSpace cod = tensor_space(s, s);
    Matrix t = Matrix::Zero(cod.state_dim(), s.state_dim());
    for (long i = 0; i < m; ++i)
      t(cod.index(i * m + i, 0, 0), s.index(i, 0, 0)) = 1.0;
    return copy_cache_
        .emplace(key, Superoperator::make(s, cod, std::move(t)))
        .first->second;
  }

  Superoperator discard_map(const TypeRef& a) {
    return trace_superop(denote_type(a));
  }

  // -------------------------------------------------------------------------
  // Terms: a carrier (transfer-so-far from the entry context) is pushed
  // through the statements.
  // -------------------------------------------------------------------------

  struct TermOp {
    Superoperator op;
    VarCtx sigma;
  };

  TermOp denote_term(const TermRef& m, const ProcEnv& env,
                     const VarCtx& gamma) {
    BlockSpace dom = context_space(gamma);
    guard_dim(dom.state_dim());
    Carrier c;
    c.gamma = gamma;
    c.m = Matrix::Identity(dom.state_dim(), dom.state_dim());
    c.loss = Eigen::RowVectorXcd::Zero(dom.state_dim());
    walk(m, env, c);
    Superoperator op = Superoperator::make(dom, context_space(c.gamma),
                                           std::move(c.m));
    op.trunc_loss = std::move(c.loss);
    return TermOp{std::move(op), std::move(c.gamma)};
  }

  // -------------------------------------------------------------------------
  // Procedure stores: entries in declaration order; unbounded procedures get
  // fix_iters Kleene iterations from the zero map, f^n exactly n.
  // -------------------------------------------------------------------------

  ProcEnv denote_store(const ProcStore& omega) {
    // stores repeat across the configurations of one reduction tree; bodies
    // are shared nodes, so pointer identity keys the cache
    std::string key;
    for (const StoreDef& def : omega) {
      key += def.name;
      key += def.bound ? "^" + std::to_string(*def.bound) : "";
      key += ":" + std::to_string(reinterpret_cast<uintptr_t>(def.body.get()));
      key += ";";
    }
    auto hit = store_cache_.find(key);
    if (hit != store_cache_.end()) return hit->second;
    ProcEnv env;
    for (const StoreDef& def : omega) {
      BlockSpace dom = denote_type(def.in_type);
      BlockSpace cod = denote_type(def.out_type);
      VarCtx body_ctx;
      body_ctx[def.in_var] = def.in_type;
      long iters = def.bound ? *def.bound : params_.fix_iters;
      // a body with no self-call denotes a constant functional: one
      // iteration reaches the fixpoint exactly
      bool self_recursive = calls_proc(def.body, def.name, def.bound);
      if (!self_recursive && iters > 1) iters = 1;
      Superoperator g = Superoperator::zero(dom, cod);
      double last_delta = 0.0;
      bool stabilized = !self_recursive;
      for (long i = 0; i < iters; ++i) {
        ProcEnv inner = env;
        inner[def.name] = ProcEntry{def.in_type, def.out_type, def.bound, g};
        TermOp body = denote_term(def.body, inner, body_ctx);
        last_delta = superop_distance(body.op, g);
        g = std::move(body.op);
        if (last_delta == 0.0) {
          stabilized = true;  // exact fixpoint; iterates repeat
          break;
        }
      }
      if (!def.bound && iters > 0 && !stabilized &&
          last_delta > params_.converge_tol)
        warnings_.push_back("NotConverged: procedure " + def.name +
                            " fixpoint moved " + std::to_string(last_delta) +
                            " in the last iteration");
      env[def.name] = ProcEntry{def.in_type, def.out_type, def.bound, g};
    }
    store_cache_[key] = env;
    return env;
  }

  // -------------------------------------------------------------------------
  // Configurations: start from rho on qbit^{(x) n}, assemble [[V]] with the
  // splitting permutation, then run the term on the state column.
  // -------------------------------------------------------------------------

  ConfigDenotation denote_config(const Configuration& c) {
    ProcEnv env = denote_store(c.store);
    VarCtx gamma = assignment_context(c.assignment);

    // global qubit permutation: physical order to per-variable ascending
    int n = c.rho.n_qubits;
    std::vector<int> layout;  // layout[slot] = pointer held there
    std::vector<Superoperator> value_ops;
    for (const auto& [name, value] : c.assignment) {
      ValueTyping vt = type_of_value(value);
      std::vector<int> sorted = vt.pointers;
      std::sort(sorted.begin(), sorted.end());
      layout.insert(layout.end(), sorted.begin(), sorted.end());
      value_ops.push_back(denote_value(value));
    }
    std::vector<int> perm(n);
    for (int slot = 0; slot < n; ++slot) {
      int pointer = slot + 1;
      auto it = std::find(layout.begin(), layout.end(), pointer);
      perm[slot] = static_cast<int>(it - layout.begin());
    }

    Vector state = new_state_superop(c.rho.data).transfer.col(0);
    if (n > 0) {
      Superoperator p = qubit_perm_superop(n, perm);
      state = p.transfer * state;
    }
    Complex loss = 0;
    if (!value_ops.empty()) {
      Superoperator acc = value_ops[0];
      for (size_t i = 1; i < value_ops.size(); ++i)
        acc = tensor_op(acc, value_ops[i]);
      loss += acc.loss_on(state);
      state = acc.transfer * state;
    }

    Carrier carrier;
    carrier.gamma = gamma;
    carrier.m = state;
    carrier.loss = Eigen::RowVectorXcd::Zero(1);
    walk(c.term, env, carrier);
    loss += carrier.loss(0);
    BlockState out{context_space(carrier.gamma), carrier.m.col(0)};
    return ConfigDenotation{std::move(out), std::move(carrier.gamma),
                            loss.real()};
  }

 private:
  // ---- carrier ------------------------------------------------------------

  struct Carrier {
    VarCtx gamma;               // current typing context
    Matrix m;                   // ctx_dim x dom0 transfer so far
    Eigen::RowVectorXcd loss;   // 1 x dom0 truncation loss so far
  };

  void guard_dim(long dim) const {
    if (dim > params_.max_op_dim)
      fail(Errc::capacity_exceeded,
           "denotation state dimension " + std::to_string(dim) +
               " exceeds the limit; reduce the truncation depth");
  }

  void guard_carrier(long rows, long cols) const {
    if (rows * cols > params_.max_op_dim * params_.max_op_dim)
      fail(Errc::capacity_exceeded,
           "denotation carrier of " + std::to_string(rows) + "x" +
               std::to_string(cols) +
               " exceeds the limit; reduce the truncation depth");
  }

  static void flatten_seq(const TermRef& m, std::vector<TermRef>& out) {
    if (const auto* s = term_as<Seq>(m)) {
      flatten_seq(s->first, out);
      flatten_seq(s->rest, out);
    } else {
      out.push_back(m);
    }
  }

  void walk(const TermRef& term, const ProcEnv& env, Carrier& c) {
    std::vector<TermRef> spine;
    flatten_seq(term, spine);
    for (const TermRef& stmt : spine) walk_one(stmt, env, c);
  }

  void walk_one(const TermRef& stmt, const ProcEnv& env, Carrier& c) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Seq>) {
            walk(stmt, env, c);
          } else if constexpr (std::is_same_v<T, CaseOf>) {
            walk_case(stmt, n, env, c);
          } else if constexpr (std::is_same_v<T, While>) {
            TermOp w = denote_while(n, env, c.gamma);
            c.loss += w.op.trunc_loss * c.m;
            c.m = w.op.transfer * c.m;
            c.gamma = std::move(w.sigma);
          } else if constexpr (std::is_same_v<T, ZeroTerm>) {
            if (!var_ctx_equal(c.gamma, n.input))
              fail(Errc::type_mismatch, "zero term context mismatch");
            BlockSpace out_space = context_space(n.output);
            c.m = Matrix::Zero(out_space.state_dim(), c.m.cols());
            c.gamma = n.output;
          } else if constexpr (std::is_same_v<T, Skip> ||
                               std::is_same_v<T, ProcDef>) {
            // identities on the context
          } else {
            Stage stage = make_stage(n, env, c.gamma);
            const StagePlan& plan = plan_stage_cached(stmt, c.gamma, stage);
            apply_stage(stage, plan, c);
          }
        },
        stmt->node);
  }

  // ---- mu types -----------------------------------------------------------

  BlockSpace denote_mu(const TypeRef& t, const TypeEnv& env) {
    BlockSpace s = BlockSpace::empty();
    for (int i = 0; i < params_.depth; ++i) {
      TypeEnv inner = env;
      inner.emplace_back(t->name, s);
      s = denote_type(t->child_a, inner);
    }
    return s;
  }

  using EmbEnv = std::vector<std::pair<std::string, std::vector<long>>>;

  // Block embedding denote(t, lo) -> denote(t, hi) when each type variable's
  // lo space embeds in its hi space.
  std::vector<long> embed(const TypeRef& t, const TypeEnv& lo,
                          const TypeEnv& hi, const EmbEnv& emb) {
    switch (t->kind) {
      case TypeKind::var: {
        for (auto it = emb.rbegin(); it != emb.rend(); ++it)
          if (it->first == t->name) return it->second;
        fail(Errc::internal_error, "unbound type variable in embedding");
      }
      case TypeKind::unit:
      case TypeKind::qbit:
        return {0};
      case TypeKind::sum: {
        std::vector<long> ea = embed(t->child_a, lo, hi, emb);
        std::vector<long> eb = embed(t->child_b, lo, hi, emb);
        long na_hi = denote_type(t->child_a, hi).n_blocks();
        std::vector<long> out = ea;
        for (long b : eb) out.push_back(na_hi + b);
        return out;
      }
      case TypeKind::tensor: {
        std::vector<long> ea = embed(t->child_a, lo, hi, emb);
        std::vector<long> eb = embed(t->child_b, lo, hi, emb);
        long nb_hi = denote_type(t->child_b, hi).n_blocks();
        std::vector<long> out;
        for (long a : ea)
          for (long b : eb) out.push_back(a * nb_hi + b);
        return out;
      }
      case TypeKind::mu: {
        BlockSpace s_lo = BlockSpace::empty();
        BlockSpace s_hi = BlockSpace::empty();
        std::vector<long> e;
        for (int i = 0; i < params_.depth; ++i) {
          TypeEnv lo2 = lo;
          lo2.emplace_back(t->name, s_lo);
          TypeEnv hi2 = hi;
          hi2.emplace_back(t->name, s_hi);
          EmbEnv emb2 = emb;
          emb2.emplace_back(t->name, e);
          e = embed(t->child_a, lo2, hi2, emb2);
          s_lo = denote_type(t->child_a, lo2);
          s_hi = denote_type(t->child_a, hi2);
        }
        return e;
      }
    }
    fail(Errc::internal_error, "unreachable");
  }

  // ---- statement stages ----------------------------------------------------

  // A statement acts on designated context variables: the consumed ones are
  // moved to the tail (in rule order), the core map runs there, and the
  // produced ones return to sorted positions.
  struct Stage {
    std::vector<std::string> consumed;
    std::shared_ptr<const Superoperator> core;
    std::vector<std::pair<std::string, TypeRef>> produced;
  };

  static std::shared_ptr<const Superoperator> owned(Superoperator op) {
    return std::make_shared<const Superoperator>(std::move(op));
  }
  // non-owning view of a cache- or environment-resident operator
  static std::shared_ptr<const Superoperator> borrowed(
      const Superoperator& op) {
    return std::shared_ptr<const Superoperator>(&op, [](const auto*) {});
  }

  static TypeRef ctx_type(const VarCtx& gamma, const std::string& x) {
    auto it = gamma.find(x);
    if (it == gamma.end())
      fail(Errc::unbound_variable, "variable " + x + " is not in scope");
    return it->second;
  }

  Stage make_stage(const NewUnit& n, const ProcEnv&, const VarCtx&) {
    return Stage{{},
                 owned(Superoperator::identity(BlockSpace::unit())),
                 {{n.var, Type::unit()}}};
  }
  Stage make_stage(const Discard& n, const ProcEnv&, const VarCtx& gamma) {
    return Stage{{n.var}, owned(discard_map(ctx_type(gamma, n.var))), {}};
  }
  Stage make_stage(const Copy& n, const ProcEnv&, const VarCtx& gamma) {
    TypeRef p = ctx_type(gamma, n.src);
    return Stage{{n.src}, borrowed(copy_map(p)), {{n.src, p}, {n.dst, p}}};
  }
  Stage make_stage(const NewQbit& n, const ProcEnv&, const VarCtx&) {
    return Stage{{}, owned(new_qubit_superop()), {{n.var, Type::qbit()}}};
  }
  Stage make_stage(const Measure& n, const ProcEnv&, const VarCtx&) {
    return Stage{{n.src}, owned(meas_superop()), {{n.dst, bit_type()}}};
  }
  Stage make_stage(const ApplyUnitary& n, const ProcEnv&, const VarCtx&) {
    const Gate& gate = gates_->gate(n.gate);
    Stage stage;
    stage.consumed = n.targets;
    stage.core = owned(unitary_superop(gate.matrix));
    for (const auto& q : n.targets)
      stage.produced.emplace_back(q, Type::qbit());
    return stage;
  }
  Stage make_stage(const InjLeft& n, const ProcEnv&, const VarCtx&) {
    return Stage{{n.src},
                 owned(inj_superop(denote_type(n.left_type),
                                   denote_type(n.right_type), true)),
                 {{n.dst, Type::sum(n.left_type, n.right_type)}}};
  }
  Stage make_stage(const InjRight& n, const ProcEnv&, const VarCtx&) {
    return Stage{{n.src},
                 owned(inj_superop(denote_type(n.left_type),
                                   denote_type(n.right_type), false)),
                 {{n.dst, Type::sum(n.left_type, n.right_type)}}};
  }
  Stage make_stage(const MakePair& n, const ProcEnv&, const VarCtx& gamma) {
    TypeRef a = ctx_type(gamma, n.fst);
    TypeRef b = ctx_type(gamma, n.snd);
    TypeRef ab = Type::tensor(a, b);
    return Stage{{n.fst, n.snd},
                 owned(Superoperator::identity(denote_type(ab))),
                 {{n.dst, ab}}};
  }
  Stage make_stage(const SplitPair& n, const ProcEnv&, const VarCtx& gamma) {
    TypeRef t = ctx_type(gamma, n.src);
    if (t->kind != TypeKind::tensor)
      fail(Errc::type_mismatch, "unpair of non-tensor variable " + n.src);
    return Stage{{n.src},
                 owned(Superoperator::identity(denote_type(t))),
                 {{n.fst, t->child_a}, {n.snd, t->child_b}}};
  }
  Stage make_stage(const FoldTerm& n, const ProcEnv&, const VarCtx&) {
    return Stage{{n.src}, borrowed(fold_iso(n.mu_type).fold),
                 {{n.dst, n.mu_type}}};
  }
  Stage make_stage(const UnfoldTerm& n, const ProcEnv&, const VarCtx& gamma) {
    TypeRef t = ctx_type(gamma, n.src);
    if (t->kind != TypeKind::mu)
      fail(Errc::type_mismatch, "unfold of non-mu variable " + n.src);
    return Stage{{n.src}, borrowed(fold_iso(t).unfold),
                 {{n.dst, unroll_mu(t)}}};
  }
  Stage make_stage(const CallProc& n, const ProcEnv& env, const VarCtx&) {
    auto it = env.find(n.name);
    if (it == env.end() || it->second.bound != n.bound)
      fail(Errc::unknown_procedure,
           "procedure " + n.name + " is not in the environment");
    return Stage{{n.arg}, borrowed(it->second.op),
                 {{n.dst, it->second.out_type}}};
  }
  template <typename T>
  Stage make_stage(const T&, const ProcEnv&, const VarCtx&) {
    fail(Errc::internal_error, "no stage for this term form");
  }

  struct StagePlan {
    IndexMap m_in;    // Gamma index -> [rest..., consumed...] index
    IndexMap m_out;   // [rest..., produced...] index -> Sigma index
    BlockSpace rest_space;
    BlockSpace mid_in, mid_out;
    VarCtx sigma;
  };

  // Cache entries pin the keyed node so heap addresses are never recycled
  // into colliding keys.
  struct PlanEntry {
    TermRef pin;
    StagePlan plan;
  };

  const StagePlan& plan_stage_cached(const TermRef& node, const VarCtx& gamma,
                                     const Stage& stage) {
    std::string key =
        std::to_string(reinterpret_cast<uintptr_t>(node.get())) + "|" +
        var_ctx_to_string(gamma);
    auto it = plan_cache_.find(key);
    if (it != plan_cache_.end()) return it->second.plan;
    return plan_cache_.emplace(key, PlanEntry{node, plan_stage(gamma, stage)})
        .first->second.plan;
  }

  StagePlan plan_stage(const VarCtx& gamma, const Stage& stage) {
    StagePlan plan;
    std::vector<std::string> names;
    for (const auto& [name, ty] : gamma) names.push_back(name);
    std::vector<BlockSpace> factors;
    for (const auto& name : names)
      factors.push_back(denote_type(gamma.at(name)));

    std::vector<int> perm_in(names.size());
    std::vector<std::string> rest;
    for (size_t i = 0, pos = 0; i < names.size(); ++i) {
      if (std::find(stage.consumed.begin(), stage.consumed.end(), names[i]) ==
          stage.consumed.end()) {
        perm_in[i] = static_cast<int>(pos++);
        rest.push_back(names[i]);
      }
    }
    for (size_t j = 0; j < stage.consumed.size(); ++j) {
      auto it = std::find(names.begin(), names.end(), stage.consumed[j]);
      if (it == names.end())
        fail(Errc::unbound_variable,
             "variable " + stage.consumed[j] + " is not in scope");
      perm_in[it - names.begin()] = static_cast<int>(rest.size() + j);
    }
    plan.m_in = factor_permutation_map(factors, perm_in);

    plan.rest_space = BlockSpace::unit();
    for (const auto& name : rest)
      plan.rest_space = tensor_space(plan.rest_space,
                                     denote_type(gamma.at(name)));
    plan.mid_in = tensor_space(plan.rest_space, stage.core->dom);
    plan.mid_out = tensor_space(plan.rest_space, stage.core->cod);

    for (const auto& name : rest) plan.sigma[name] = gamma.at(name);
    for (const auto& [name, ty] : stage.produced) {
      if (!plan.sigma.emplace(name, ty).second)
        fail(Errc::duplicate_variable, "variable " + name + " rebound");
    }
    std::vector<std::string> pre_names = rest;
    for (const auto& [name, ty] : stage.produced) pre_names.push_back(name);
    std::vector<BlockSpace> pre_factors;
    for (const auto& name : pre_names)
      pre_factors.push_back(denote_type(plan.sigma.at(name)));
    std::vector<std::string> sorted_names;
    for (const auto& [name, ty] : plan.sigma) sorted_names.push_back(name);
    std::vector<int> perm_out(pre_names.size());
    for (size_t i = 0; i < pre_names.size(); ++i) {
      auto it =
          std::find(sorted_names.begin(), sorted_names.end(), pre_names[i]);
      perm_out[i] = static_cast<int>(it - sorted_names.begin());
    }
    plan.m_out = factor_permutation_map(pre_factors, perm_out);
    return plan;
  }

  // Applies one stage to the carrier: row permutation, id (x) core on the
  // tail factor, row permutation back. Only the carrier-sized matrices are
  // touched.
  void apply_stage(const Stage& stage, const StagePlan& plan, Carrier& c) {
    long cols = c.m.cols();
    guard_carrier(plan.mid_out.state_dim(), cols);

    // permute rows into [rest..., consumed...]
    Matrix mid(plan.mid_in.state_dim(), cols);
    for (size_t r = 0; r < plan.m_in.size(); ++r)
      mid.row(plan.m_in[r]) = c.m.row(r);

    // apply id (x) core: for each rest entry, gather the core-domain rows,
    // multiply, scatter into the output; diagonal rest entries contribute
    // truncation loss.
    const Superoperator& f = *stage.core;
    long fd = f.dom.state_dim();
    long fc = f.cod.state_dim();
    long nfd = f.dom.n_blocks();
    long nfc = f.cod.n_blocks();
    Matrix out = Matrix::Zero(plan.mid_out.state_dim(), cols);
    Matrix gathered(fd, cols);
    bool track_loss = f.trunc_loss.cwiseAbs().sum() > 0;
    for (long gb = 0; gb < plan.rest_space.n_blocks(); ++gb) {
      long gd = plan.rest_space.blocks[gb];
      for (long gr = 0; gr < gd; ++gr)
        for (long gc = 0; gc < gd; ++gc) {
          for (long fb = 0; fb < nfd; ++fb) {
            long fn = f.dom.blocks[fb];
            for (long fr = 0; fr < fn; ++fr)
              for (long fcl = 0; fcl < fn; ++fcl)
                gathered.row(f.dom.index(fb, fr, fcl)) =
                    mid.row(plan.mid_in.index(gb * nfd + fb, gr * fn + fr,
                                              gc * fn + fcl));
          }
          Matrix result = f.transfer * gathered;
          for (long fb2 = 0; fb2 < nfc; ++fb2) {
            long fm = f.cod.blocks[fb2];
            for (long fr2 = 0; fr2 < fm; ++fr2)
              for (long fc2 = 0; fc2 < fm; ++fc2)
                out.row(plan.mid_out.index(gb * nfc + fb2, gr * fm + fr2,
                                           gc * fm + fc2)) =
                    result.row(f.cod.index(fb2, fr2, fc2));
          }
          if (track_loss && gr == gc) c.loss += f.trunc_loss * gathered;
        }
    }

    // permute rows into sorted Sigma order
    Matrix final_m(plan.mid_out.state_dim(), cols);
    for (size_t r = 0; r < plan.m_out.size(); ++r)
      final_m.row(plan.m_out[r]) = out.row(r);
    c.m = std::move(final_m);
    c.gamma = plan.sigma;
  }

  // case: move the scrutinee to the tail, distribute, run each branch on its
  // component, and sum the results. The pre-branch stages are pure index maps.
  struct CasePieces {
    IndexMap left_map, right_map;  // Gamma index -> branch context index
    VarCtx left_ctx, right_ctx;
    BlockSpace gamma_space, left_space, right_space;
  };

  CasePieces case_pieces(const CaseOf& n, const VarCtx& gamma) {
    TypeRef t = ctx_type(gamma, n.scrutinee);
    if (t->kind != TypeKind::sum)
      fail(Errc::type_mismatch, "case on non-sum variable " + n.scrutinee);
    BlockSpace a = denote_type(t->child_a);
    BlockSpace b = denote_type(t->child_b);

    // move the scrutinee to the tail
    std::vector<std::string> names;
    for (const auto& [name, ty] : gamma) names.push_back(name);
    std::vector<BlockSpace> factors;
    for (const auto& name : names)
      factors.push_back(denote_type(gamma.at(name)));
    std::vector<int> perm(names.size());
    std::vector<std::string> rest;
    for (size_t i = 0, pos = 0; i < names.size(); ++i) {
      if (names[i] == n.scrutinee) continue;
      perm[i] = static_cast<int>(pos++);
      rest.push_back(names[i]);
    }
    perm[std::find(names.begin(), names.end(), n.scrutinee) - names.begin()] =
        static_cast<int>(names.size() - 1);
    IndexMap m1 = factor_permutation_map(factors, perm);

    BlockSpace gamma_space = BlockSpace::unit();
    for (const auto& f : factors) gamma_space = tensor_space(gamma_space, f);
    BlockSpace rest_space = BlockSpace::unit();
    for (const auto& name : rest)
      rest_space = tensor_space(rest_space, denote_type(gamma.at(name)));
    IndexMap d = dist_index(rest_space, a, b);
    BlockSpace ga = tensor_space(rest_space, a);
    BlockSpace gb = tensor_space(rest_space, b);

    auto component = [&](bool left, const std::string& var,
                         const TypeRef& ty) {
      IndexMap pre =
          compose_index(proj_index(ga, gb, left), compose_index(d, m1));
      // permute the bound variable from the tail into sorted position
      VarCtx ctx;
      for (const auto& name : rest) ctx[name] = gamma.at(name);
      if (!ctx.emplace(var, ty).second)
        fail(Errc::duplicate_variable, "variable " + var + " rebound");
      std::vector<std::string> pre_names = rest;
      pre_names.push_back(var);
      std::vector<BlockSpace> pre_factors;
      for (const auto& name : pre_names)
        pre_factors.push_back(denote_type(ctx.at(name)));
      std::vector<std::string> sorted_names;
      for (const auto& [name, ty2] : ctx) sorted_names.push_back(name);
      std::vector<int> perm2(pre_names.size());
      for (size_t i = 0; i < pre_names.size(); ++i)
        perm2[i] = static_cast<int>(
            std::find(sorted_names.begin(), sorted_names.end(), pre_names[i]) -
            sorted_names.begin());
      IndexMap m2 = factor_permutation_map(pre_factors, perm2);
      return std::make_pair(compose_index(m2, pre), ctx);
    };

    auto [lmap, lctx] = component(true, n.left_var, t->child_a);
    auto [rmap, rctx] = component(false, n.right_var, t->child_b);
    CasePieces pieces;
    pieces.left_map = std::move(lmap);
    pieces.right_map = std::move(rmap);
    pieces.left_space = context_space(lctx);
    pieces.right_space = context_space(rctx);
    pieces.left_ctx = std::move(lctx);
    pieces.right_ctx = std::move(rctx);
    pieces.gamma_space = std::move(gamma_space);
    return pieces;
  }

  struct CaseEntry {
    TermRef pin;
    CasePieces pieces;
  };

  const CasePieces& case_pieces_cached(const TermRef& node, const CaseOf& n,
                                       const VarCtx& gamma) {
    std::string key =
        std::to_string(reinterpret_cast<uintptr_t>(node.get())) + "|" +
        var_ctx_to_string(gamma);
    auto it = case_cache_.find(key);
    if (it != case_cache_.end()) return it->second.pieces;
    return case_cache_.emplace(key, CaseEntry{node, case_pieces(n, gamma)})
        .first->second.pieces;
  }

  void walk_case(const TermRef& node, const CaseOf& n, const ProcEnv& env,
                 Carrier& c) {
    const CasePieces& pieces = case_pieces_cached(node, n, c.gamma);
    long cols = c.m.cols();
    Carrier left{pieces.left_ctx,
                 Matrix::Zero(pieces.left_space.state_dim(), cols),
                 Eigen::RowVectorXcd::Zero(cols)};
    Carrier right{pieces.right_ctx,
                  Matrix::Zero(pieces.right_space.state_dim(), cols),
                  Eigen::RowVectorXcd::Zero(cols)};
    for (long i = 0; i < c.m.rows(); ++i) {
      if (pieces.left_map[i] >= 0) left.m.row(pieces.left_map[i]) = c.m.row(i);
      if (pieces.right_map[i] >= 0)
        right.m.row(pieces.right_map[i]) = c.m.row(i);
    }
    walk(n.left_body, env, left);
    walk(n.right_body, env, right);
    if (!var_ctx_equal(left.gamma, right.gamma))
      fail(Errc::branch_mismatch, "case branches disagree on the output");
    c.gamma = left.gamma;
    c.m = left.m + right.m;
    c.loss += left.loss + right.loss;
  }

  // while: lfp of W_f approximated by Kleene iteration from the zero map
  // (exactly n iterations for while^n). Iteration stops early only when an
  // iterate repeats exactly, in which case all later iterates are equal.
  TermOp denote_while(const While& n, const ProcEnv& env,
                      const VarCtx& gamma) {
    TypeRef t = ctx_type(gamma, n.cond);
    if (!type_equal(t, bit_type()))
      fail(Errc::type_mismatch, "while condition must be a bit");
    guard_dim(context_space(gamma).state_dim());

    TermOp body = denote_term(n.body, env, gamma);
    if (!var_ctx_equal(body.sigma, gamma))
      fail(Errc::type_mismatch, "while body must preserve its context");

    // move b to the tail
    std::vector<std::string> names;
    for (const auto& [name, ty] : gamma) names.push_back(name);
    std::vector<BlockSpace> factors;
    for (const auto& name : names)
      factors.push_back(denote_type(gamma.at(name)));
    std::vector<int> perm(names.size());
    std::vector<std::string> rest;
    for (size_t i = 0, pos = 0; i < names.size(); ++i) {
      if (names[i] == n.cond) continue;
      perm[i] = static_cast<int>(pos++);
      rest.push_back(names[i]);
    }
    perm[std::find(names.begin(), names.end(), n.cond) - names.begin()] =
        static_cast<int>(names.size() - 1);
    IndexMap m1 = factor_permutation_map(factors, perm);
    BlockSpace gamma_space = BlockSpace::unit();
    for (const auto& f : factors) gamma_space = tensor_space(gamma_space, f);
    IndexMap m1_inv = invert_index(m1, gamma_space.state_dim());

    BlockSpace rest_space = BlockSpace::unit();
    for (const auto& name : rest)
      rest_space = tensor_space(rest_space, denote_type(gamma.at(name)));
    BlockSpace unit = BlockSpace::unit();
    BlockSpace gu = tensor_space(rest_space, unit);
    BlockSpace mid = tensor_space(rest_space, BlockSpace::bits());
    IndexMap d = dist_index(rest_space, unit, unit);
    IndexMap d_inv = invert_index(d, sum_space(gu, gu).state_dim());

    // keep-ff and keep-tt as partial index maps on the permuted space
    IndexMap keep_ff = compose_index(
        d_inv, compose_index(inj_index(gu, gu, true),
                             compose_index(proj_index(gu, gu, true), d)));
    IndexMap keep_tt = compose_index(
        d_inv, compose_index(inj_index(gu, gu, false),
                             compose_index(proj_index(gu, gu, false), d)));

    // f on the permuted layout: p1 . body . p1^{-1}
    Superoperator f_end =
        scatter_rows(m1, mid, gather_cols(body.op, m1_inv, mid));
    Superoperator settle = superop_of_index(keep_ff, mid, mid);
    Superoperator run_body = gather_cols(f_end, keep_tt, mid);

    long iters = n.bound ? *n.bound : params_.fix_iters;
    Superoperator g = Superoperator::zero(mid, mid);
    double last_delta = 0.0;
    for (long i = 0; i < iters; ++i) {
      Superoperator next = add(settle, compose(g, run_body));
      last_delta = superop_distance(next, g);
      g = std::move(next);
      if (last_delta == 0.0) break;
    }
    if (!n.bound && iters > 0 && last_delta > params_.converge_tol)
      warnings_.push_back(
          "NotConverged: while iterates moved " + std::to_string(last_delta) +
          " in the last iteration");
    Superoperator op =
        scatter_rows(m1_inv, gamma_space, gather_cols(g, m1, gamma_space));
    return TermOp{std::move(op), gamma};
  }

  static bool calls_proc(const TermRef& t, const std::string& name,
                         const std::optional<long>& bound) {
    return std::visit(
        [&](const auto& n) -> bool {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Seq>)
            return calls_proc(n.first, name, bound) ||
                   calls_proc(n.rest, name, bound);
          else if constexpr (std::is_same_v<T, While>)
            return calls_proc(n.body, name, bound);
          else if constexpr (std::is_same_v<T, CaseOf>)
            return calls_proc(n.left_body, name, bound) ||
                   calls_proc(n.right_body, name, bound);
          else if constexpr (std::is_same_v<T, ProcDef>)
            return calls_proc(n.body, name, bound);
          else if constexpr (std::is_same_v<T, CallProc>)
            return n.name == name && n.bound == bound;
          else
            return false;
        },
        t->node);
  }

  DenoteParams params_;
  const GateRegistry* gates_;
  std::vector<std::string> warnings_;
  std::map<std::string, BlockSpace> type_cache_;
  std::map<std::string, FoldIso> fold_cache_;
  std::map<std::string, Superoperator> copy_cache_;
  std::map<std::string, PlanEntry> plan_cache_;
  std::map<std::string, CaseEntry> case_cache_;
  std::map<std::string, ProcEnv> store_cache_;
};

}  // namespace qpl
