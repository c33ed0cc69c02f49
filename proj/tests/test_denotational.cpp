#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qpl/denotational.hpp"
#include "qpl/parser.hpp"
#include "testutil.hpp"

using namespace qpl;
using qpl::testing::Rng;

namespace {

DenoteParams params_k(int k, long iters = 64) {
  DenoteParams p;
  p.depth = k;
  p.fix_iters = iters;
  return p;
}

std::vector<long> blocks_of(Denoter& d, const TypeRef& t) {
  return d.denote_type(t).blocks;
}

// list values over a closed element type
ValueRef nil_of(const TypeRef& elem) {
  TypeRef lt = list_type(elem);
  return mkv<VFold>(
      lt, mkv<VLeft>(Type::unit(), Type::tensor(elem, lt), star_value()));
}

ValueRef cons_of(const TypeRef& elem, const ValueRef& head,
                 const ValueRef& tail) {
  TypeRef lt = list_type(elem);
  return mkv<VFold>(lt,
                    mkv<VRight>(Type::unit(), Type::tensor(elem, lt),
                                mkv<VPair>(head, tail)));
}

}  // namespace

TEST_CASE("denote_type: truncated spaces") {
  Denoter d4(params_k(4));
  CHECK(blocks_of(d4, nat_type()) == std::vector<long>{1, 1, 1, 1});

  Denoter d3(params_k(3));
  CHECK(blocks_of(d3, list_type(Type::qbit())) == std::vector<long>{1, 2, 4});

  // [[bit (x) qbit]] = [2,2] at any depth
  Denoter d8(params_k(8));
  CHECK(blocks_of(d8, Type::tensor(bit_type(), Type::qbit())) ==
        std::vector<long>{2, 2});
  CHECK(blocks_of(d8, Type::unit()) == std::vector<long>{1});
  CHECK(blocks_of(d8, Type::qbit()) == std::vector<long>{2});
  CHECK(blocks_of(d8, bit_type()) == std::vector<long>{1, 1});

  // nested mu: List(Nat) at k=3 has cells of sizes 1, (3), (3*3)
  Denoter d3b(params_k(3));
  CHECK(blocks_of(d3b, list_type(nat_type())) ==
        std::vector<long>{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
}

TEST_CASE("denotation of a substituted type matches unrolling") {
  Denoter d(params_k(5));
  for (const TypeRef& mu : {nat_type(), list_type(Type::qbit()),
                            list_type(bit_type()), list_type(nat_type())}) {
    BlockSpace direct = d.denote_type(unroll_mu(mu));
    const auto& iso = d.fold_iso(mu);
    CHECK(iso.unfold.cod == direct);
    CHECK(iso.fold.dom == direct);
    CHECK(iso.fold.cod == d.denote_type(mu));
  }
}

TEST_CASE("fold_iso: Nat at k=3") {
  Denoter d(params_k(3));
  const auto& iso = d.fold_iso(nat_type());
  // [[I + Nat]]_3 has 4 blocks, [[Nat]]_3 has 3; fold drops the deepest
  CHECK(iso.fold.dom.blocks == std::vector<long>{1, 1, 1, 1});
  CHECK(iso.fold.cod.blocks == std::vector<long>{1, 1, 1});
  // unfold then fold is the identity on the mu space
  Matrix roundtrip = iso.fold.transfer * iso.unfold.transfer;
  CHECK(qpl::testing::max_abs_diff(
            roundtrip, Matrix::Identity(3, 3)) == 0.0);
  // numerals 0..2 survive, 3 overflows
  for (long i = 0; i <= 2; ++i)
    CHECK(d.block_of_value(nat_value(i)) == i);
  CHECK_FALSE(d.block_of_value(nat_value(3)).has_value());
  CHECK_THROWS_AS(d.denote_value(nat_value(3)), Error);
  // fold loses exactly the mass of the dropped block
  Vector probe = Vector::Zero(4);
  probe(3) = 1.0;  // mass in the deepest block of [[I+Nat]]_3
  CHECK(std::abs((iso.fold.trunc_loss * probe)(0).real() - 1.0) < 1e-15);
}

TEST_CASE("denote_value: base cases and the swap pair") {
  Denoter d(params_k(4));
  // [[*]] = id_I
  Superoperator star = d.denote_value(star_value());
  CHECK(star.dom.blocks == std::vector<long>{1});
  CHECK(star.transfer(0, 0) == Complex(1, 0));

  // tt injects into the second block of bit
  Superoperator tt = d.denote_value(tt_value());
  CHECK(tt.cod.blocks == std::vector<long>{1, 1});
  CHECK(tt.transfer(1, 0) == Complex(1, 0));
  CHECK(tt.transfer(0, 0) == Complex(0, 0));

  // (2, 1) maps [[Q]] into qbit (x) qbit through a swap
  Superoperator swapped =
      d.denote_value(mkv<VPair>(mkv<VQubit>(2), mkv<VQubit>(1)));
  Matrix swap_mat = builtin_gates().gate("SWAP").matrix;
  Superoperator expected = unitary_superop(swap_mat);
  CHECK(qpl::testing::max_abs_diff(swapped.transfer, expected.transfer) ==
        0.0);

  // (1, 2) is the identity embedding
  Superoperator straight =
      d.denote_value(mkv<VPair>(mkv<VQubit>(1), mkv<VQubit>(2)));
  CHECK(qpl::testing::max_abs_diff(straight.transfer,
                                   Matrix::Identity(16, 16)) == 0.0);
}

TEST_CASE("denote_value: numerals land in their block") {
  Denoter d(params_k(6));
  for (long i = 0; i < 6; ++i) {
    Superoperator v = d.denote_value(nat_value(i));
    CHECK(v.cod.n_blocks() == 6);
    for (long b = 0; b < 6; ++b)
      CHECK(v.transfer(b, 0) == Complex(b == i ? 1 : 0, 0));
  }
}

TEST_CASE("denote_term: skip is the identity") {
  Denoter d(params_k(4));
  VarCtx gamma{{"q", Type::qbit()}, {"b", bit_type()}};
  Superoperator op = d.denote_term(mk_skip(), {}, gamma).op;
  long dim = d.context_space(gamma).state_dim();
  CHECK(qpl::testing::max_abs_diff(op.transfer,
                                   Matrix::Identity(dim, dim)) == 0.0);
}

TEST_CASE("denote_term: measure is diagonal extraction") {
  Denoter d(params_k(4));
  VarCtx gamma{{"q", Type::qbit()}};
  auto [op, sigma] = d.denote_term(mk<Measure>("b", "q"), {}, gamma);
  CHECK(sigma.count("b") == 1);
  Matrix expected = Matrix::Zero(2, 4);
  expected(0, 0) = 1;  // rho_00 -> ff block
  expected(1, 3) = 1;  // rho_11 -> tt block
  CHECK(qpl::testing::max_abs_diff(op.transfer, expected) == 0.0);
}

TEST_CASE("denote_term: coin-toss while closed form") {
  // W-iterates from zero: after N iterations the halting mass on input
  // b = tt is 1 - 2^{1-N} (geometric series; N-1 completed coin tosses).
  const char* src =
      "while b do { new qbit q; q *= H; discard b; b = measure q }";
  TermRef loop = parse_and_desugar(src);
  VarCtx gamma{{"b", bit_type()}};
  for (long iters : {1L, 2L, 3L, 8L, 20L}) {
    Denoter d(params_k(4, iters));
    Superoperator op = d.denote_term(loop, {}, gamma).op;
    Vector tt_in(2);
    tt_in << 0, 1;
    Vector out = op.transfer * tt_in;
    double expected = 1.0 - std::pow(2.0, 1.0 - static_cast<double>(iters));
    CHECK(std::abs(out(0).real() - expected) < 1e-12);
    CHECK(std::abs(out(1)) < 1e-15);  // no mass remains on tt
  }
}

TEST_CASE("denote_term: while iterates form a CP-increasing chain") {
  const char* src =
      "while b do { new qbit q; q *= H; discard b; b = measure q }";
  TermRef loop = parse_and_desugar(src);
  VarCtx gamma{{"b", bit_type()}};
  Superoperator prev = Superoperator::zero(BlockSpace::bits(),
                                           BlockSpace::bits());
  for (long iters = 1; iters <= 6; ++iters) {
    Denoter d(params_k(4, iters));
    Superoperator cur = d.denote_term(loop, {}, gamma).op;
    Superoperator diff = add(cur, scale(-1.0, prev));
    ValidationReport rep = validate(diff);
    CHECK(rep.min_choi_eig >= -1e-9);
    prev = cur;
  }
}

TEST_CASE("denote_store: empty, f^0, and the GHZ procedures") {
  Denoter d(params_k(5, 8));
  CHECK(d.denote_store({}).empty());

  // f^0 denotes the zero map
  TermRef f0 = parse_and_desugar(
      "proc f^0 :: x : qbit -> y : qbit { y = f^0(x) }");
  const auto* def = term_as<ProcDef>(f0);
  ProcStore store{StoreDef{def->name, def->bound, def->in_var, def->in_type,
                           def->out_var, def->out_type, def->body}};
  ProcEnv env = d.denote_store(store);
  CHECK(env.at("f").op.transfer.cwiseAbs().maxCoeff() == 0.0);

  // GHZ applied to the numeral 3 produces gamma_3 in block 3 of List(qbit)
  const char* ghz_src = R"(
proc GHZnext :: l : ListQ -> l : ListQ {
  new qbit q;
  case l of
      nil -> q *= H;
             l = q :: nil
    | q' :: l' -> q', q *= CNOT;
                  l = q :: q' :: l'
}
proc GHZ :: n : Nat -> l : ListQ {
  case n of
      zero -> l = nil
    | s(n') -> l = GHZnext(GHZ(n'))
}
skip
)";
  Configuration c = make_initial_config(parse_and_desugar(ghz_src));
  ProcEnv genv = d.denote_store(c.store);
  Superoperator ghz = genv.at("GHZ").op;
  Vector three = Vector::Zero(5);
  three(3) = 1.0;
  BlockState out{ghz.cod, ghz.transfer * three};
  CHECK(ghz.cod.blocks == std::vector<long>{1, 2, 4, 8, 16});
  for (long b = 0; b < 5; ++b) {
    Matrix m = out.block(b);
    if (b == 3)
      CHECK(qpl::testing::max_abs_diff(m, ghz_state(3).data) < 1e-12);
    else
      CHECK((m.size() == 0 || m.cwiseAbs().maxCoeff() < 1e-15));
  }
}

TEST_CASE("denote_config: identities, coin-toss, terminal mass") {
  Denoter d(params_k(4, 20));
  // (skip | . | . | [0.7])
  Configuration c{mk_skip(), {}, {}, DensityMatrix::scalar(0.7)};
  ConfigDenotation r = d.denote_config(c);
  CHECK(std::abs(r.state.mass() - 0.7) < 1e-15);
  CHECK(r.trunc_loss == 0.0);

  // coin-toss from b = tt at fix_iters 20
  const char* src =
      "while b do { new qbit q; q *= H; discard b; b = measure q }";
  Configuration coin{parse_and_desugar(src),
                     {{"b", tt_value()}},
                     {},
                     DensityMatrix::scalar(1.0)};
  ConfigDenotation cr = d.denote_config(coin);
  double expected = 1.0 - std::pow(2.0, 1.0 - 20.0);
  CHECK(std::abs(cr.state.mass() - expected) < 1e-12);

  // terminal configurations have mass tr(rho) exactly
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    DensityMatrix rho = qpl::testing::random_density(rng, 2, rng.uniform());
    Configuration t{mk_skip(),
                    {{"p", mkv<VPair>(mkv<VQubit>(1), mkv<VQubit>(2))}},
                    {},
                    rho};
    ConfigDenotation tr = d.denote_config(t);
    CHECK(std::abs(tr.state.mass() - rho.trace()) < 1e-12);
  }
}

TEST_CASE("copy_map: diagonal on bit, unit, and Nat") {
  Denoter d(params_k(3));
  Superoperator cb = d.copy_map(bit_type());
  // (p0, p1) -> p0 at block (0,0), p1 at block (1,1) of [1,1,1,1]
  Matrix expected = Matrix::Zero(4, 2);
  expected(0, 0) = 1;
  expected(3, 1) = 1;
  CHECK(qpl::testing::max_abs_diff(cb.transfer, expected) == 0.0);

  Superoperator ci = d.copy_map(Type::unit());
  CHECK(ci.transfer.rows() == 1);
  CHECK(ci.transfer(0, 0) == Complex(1, 0));

  // Nat at k=3, state "2" goes to "(2,2)": block 2*3+2 = 8
  Superoperator cn = d.copy_map(nat_type());
  Vector two = Vector::Zero(3);
  two(2) = 1;
  Vector out = cn.transfer * two;
  for (long i = 0; i < 9; ++i)
    CHECK(out(i) == Complex(i == 8 ? 1 : 0, 0));

  CHECK_THROWS_AS(d.copy_map(Type::qbit()), Error);
}

TEST_CASE("discard_map is the total trace") {
  Denoter d(params_k(3));
  Superoperator dq = d.discard_map(Type::qbit());
  Matrix expected(1, 4);
  expected << 1, 0, 0, 1;
  CHECK(qpl::testing::max_abs_diff(dq.transfer, expected) == 0.0);
  Superoperator di = d.discard_map(Type::unit());
  CHECK(di.transfer(0, 0) == Complex(1, 0));
}

TEST_CASE("comonoid laws on classical types") {
  // counit, coassociativity, cocommutativity at 1e-12
  std::vector<std::pair<TypeRef, int>> cases = {
      {Type::unit(), 4},
      {bit_type(), 4},
      {Type::tensor(bit_type(), bit_type()), 4},
      {nat_type(), 6},
      {list_type(bit_type()), 4}};
  for (const auto& [p, k] : cases) {
    Denoter d(params_k(k));
    BlockSpace s = d.denote_type(p);
    Superoperator copy = d.copy_map(p);
    Superoperator discard = d.discard_map(p);
    Superoperator id = Superoperator::identity(s);

    Superoperator left_counit =
        compose(tensor_op(id, discard), copy);
    Superoperator right_counit =
        compose(tensor_op(discard, id), copy);
    CHECK(superop_distance(left_counit, id) <= 1e-12);
    CHECK(superop_distance(right_counit, id) <= 1e-12);

    Superoperator coassoc_l = compose(tensor_op(copy, id), copy);
    Superoperator coassoc_r = compose(tensor_op(id, copy), copy);
    CHECK(superop_distance(coassoc_l, coassoc_r) <= 1e-12);

    Superoperator swap = perm_superop({s, s}, {1, 0});
    CHECK(superop_distance(compose(swap, copy), copy) <= 1e-12);
  }
}

TEST_CASE("causality: discarding a value interpretation is the trace") {
  Denoter d(params_k(5));
  std::vector<ValueRef> values = {
      star_value(),
      tt_value(),
      nat_value(3),
      mkv<VQubit>(1),
      mkv<VPair>(mkv<VQubit>(2), mkv<VQubit>(1)),
      mkv<VPair>(tt_value(), mkv<VQubit>(1)),
      cons_of(Type::qbit(), mkv<VQubit>(2),
              cons_of(Type::qbit(), mkv<VQubit>(1), nil_of(Type::qbit()))),
      mkv<VFold>(nat_type(),
                 mkv<VRight>(Type::unit(), nat_type(), nat_value(0))),
  };
  for (const auto& v : values) {
    ValueTyping vt = type_of_value(v);
    Superoperator vop = d.denote_value(v);
    Superoperator lhs = compose(d.discard_map(vt.type), vop);
    Superoperator rhs =
        trace_superop(BlockSpace::qubits(static_cast<int>(vt.pointers.size())));
    CHECK(superop_distance(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("copyability: classical value interpretations are copyable") {
  Denoter d(params_k(5));
  std::vector<ValueRef> values = {
      star_value(), tt_value(), ff_value(), nat_value(0), nat_value(4),
      mkv<VPair>(tt_value(), nat_value(2)),
      cons_of(bit_type(), tt_value(),
              cons_of(bit_type(), ff_value(), nil_of(bit_type())))};
  for (const auto& v : values) {
    ValueTyping vt = type_of_value(v);
    REQUIRE(is_classical(vt.type));
    Superoperator vop = d.denote_value(v);
    Superoperator lhs = compose(d.copy_map(vt.type), vop);
    Superoperator rhs = compose(tensor_op(vop, vop), d.copy_map(Type::unit()));
    CHECK(superop_distance(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("validate: identity, transpose, convex sums") {
  Superoperator id2 = Superoperator::identity(BlockSpace::qbit());
  ValidationReport rid = validate(id2);
  CHECK(rid.cp);
  CHECK(rid.trace_nonincreasing);

  // the transpose map has Choi eigenvalue -1
  Matrix t = Matrix::Zero(4, 4);
  BlockSpace q = BlockSpace::qbit();
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 2; ++c) t(q.index(0, r, c), q.index(0, c, r)) = 1.0;
  Superoperator transpose = Superoperator::make(q, q, t);
  ValidationReport rt = validate(transpose);
  CHECK_FALSE(rt.cp);
  CHECK(std::abs(rt.min_choi_eig + 1.0) < 1e-12);
  CHECK(rt.trace_nonincreasing);

  // convex sums of CP trace-nonincreasing maps stay valid
  Rng rng(99);
  Denoter d(params_k(3));
  std::vector<Superoperator> pool = {
      unitary_superop(builtin_gates().gate("H").matrix),
      unitary_superop(builtin_gates().gate("T").matrix),
      compose(new_qubit_superop(), trace_superop(BlockSpace::qbit())),
      Superoperator::zero(BlockSpace::qbit(), BlockSpace::qbit())};
  for (int trial = 0; trial < 20; ++trial) {
    double p1 = rng.uniform() * 0.5;
    double p2 = rng.uniform() * 0.5;
    Superoperator mix = add(scale(p1, pool[rng.below(2)]),
                            scale(p2, pool[2 + rng.below(2)]));
    ValidationReport r = validate(mix);
    CHECK(r.cp);
    CHECK(r.trace_nonincreasing);
  }
}

TEST_CASE("Schroedinger maps match their Hermitian adjoints (1-qubit table)") {
  // For each map realized on vectorized states, the conjugate transpose of
  // its transfer matrix is the transfer matrix of the adjoint in the table.
  BlockSpace q = BlockSpace::qbit();

  // tr and tr^dagger = a |-> a I
  Superoperator tr = trace_superop(q);
  Matrix tr_dag = tr.transfer.adjoint();
  Matrix expect_trdag(4, 1);
  expect_trdag << 1, 0, 0, 1;  // vec(I_2)
  CHECK(qpl::testing::max_abs_diff(tr_dag, expect_trdag) == 0.0);

  // new_rho and new^dagger = A |-> tr(A rho), for Hermitian rho
  Rng rng(5);
  DensityMatrix rho = qpl::testing::random_density(rng, 1, 0.9);
  Superoperator nr = new_state_superop(rho.data);
  Matrix nr_dag = nr.transfer.adjoint();
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 2; ++c)
      CHECK(std::abs(nr_dag(0, q.index(0, r, c)) - rho.data(c, r)) < 1e-12);

  // meas and meas^dagger = (a, d) |-> diag(a, d)
  Superoperator meas = meas_superop();
  Matrix meas_dag = meas.transfer.adjoint();
  Matrix expect_measdag = Matrix::Zero(4, 2);
  expect_measdag(q.index(0, 0, 0), 0) = 1;
  expect_measdag(q.index(0, 1, 1), 1) = 1;
  CHECK(qpl::testing::max_abs_diff(meas_dag, expect_measdag) == 0.0);

  // unitary_S and unitary_S^dagger = A |-> S^dagger A S
  for (const char* g : {"H", "S", "T", "Y"}) {
    Matrix u = builtin_gates().gate(g).matrix;
    Matrix lhs = unitary_superop(u).transfer.adjoint();
    Matrix rhs = unitary_superop(u.adjoint().eval()).transfer;
    CHECK(qpl::testing::max_abs_diff(lhs, rhs) < 1e-14);
  }
}

TEST_CASE("distributivity iso and case denotation") {
  Denoter d(params_k(3));
  // case b of { left u -> discard u; x = tt | right u -> discard u; x = ff }
  const char* src =
      "case b of { left u -> discard u; new unit w; x = right[I, I] w"
      " | right u -> discard u; new unit w; x = left[I, I] w }";
  TermRef t = parse_and_desugar(src);
  VarCtx gamma{{"b", bit_type()}};
  auto [op, sigma] = d.denote_term(t, {}, gamma);
  REQUIRE(sigma.count("x") == 1);
  // the map swaps the two bit blocks
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 1) = 1;
  expected(1, 0) = 1;
  CHECK(qpl::testing::max_abs_diff(op.transfer, expected) == 0.0);
}

TEST_CASE("truncation loss is tracked through terms") {
  // pushing the numeral k-1 through s(.) overflows depth k
  Denoter d(params_k(3));
  // n = 2; m = s(n) at k=3 loses the mass
  TermRef prog = parse_and_desugar("m = s(n)");
  VarCtx gamma{{"n", nat_type()}};
  Superoperator op = d.denote_term(prog, {}, gamma).op;
  Vector two = Vector::Zero(3);
  two(2) = 1.0;
  CHECK(std::abs((op.trunc_loss * two)(0).real() - 1.0) < 1e-15);
  Vector one = Vector::Zero(3);
  one(1) = 1.0;
  CHECK(std::abs((op.trunc_loss * one)(0).real()) < 1e-15);
  // and the config-level evaluation reports it
  Configuration c{prog, {{"n", nat_value(2)}}, {}, DensityMatrix::scalar(1.0)};
  ConfigDenotation r = d.denote_config(c);
  CHECK(std::abs(r.trunc_loss - 1.0) < 1e-12);
  CHECK(r.state.mass() < 1e-15);
}
