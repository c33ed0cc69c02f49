#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qpl/operational.hpp"
#include "qpl/parser.hpp"
#include "testutil.hpp"

using namespace qpl;
using qpl::testing::max_abs_diff;

namespace {

const char* kCoinLoop =
    "while b do { new qbit q; q *= H; discard b; b = measure q }";

Configuration coin_config() {
  return Configuration{parse_and_desugar(kCoinLoop),
                       {{"b", tt_value()}},
                       {},
                       DensityMatrix::scalar(1.0)};
}

Configuration program_config(const std::string& src) {
  return make_initial_config(parse_and_desugar(src));
}

const char* kGhzProgram = R"(
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
n = s(s(s(zero)));
l = GHZ(n)
)";

}  // namespace

TEST_CASE("step: (seq1) drops a leading skip") {
  Machine m;
  Configuration c{mk_seq(mk_skip(), mk<NewUnit>("u")), {}, {},
                  DensityMatrix::scalar(1.0)};
  auto succ = m.step(c);
  REQUIRE(succ.size() == 1);
  CHECK(term_as<NewUnit>(succ[0].term) != nullptr);
}

TEST_CASE("step: measurement of |+> yields both outcomes at mass 1/2") {
  Machine m;
  DensityMatrix plus;
  plus.n_qubits = 1;
  plus.data = Matrix::Constant(2, 2, Complex(0.5, 0));
  Configuration c{mk<Measure>("b", "q"), {{"q", mkv<VQubit>(1)}}, {}, plus};
  auto succ = m.step(c);
  REQUIRE(succ.size() == 2);
  CHECK(succ[0].assignment.at("b")->node.index() ==
        ff_value()->node.index());
  CHECK(value_to_string(succ[0].assignment.at("b")) == "ff");
  CHECK(value_to_string(succ[1].assignment.at("b")) == "tt");
  for (const auto& d : succ) {
    CHECK(d.rho.n_qubits == 0);
    CHECK(std::abs(d.trace() - 0.5) < 1e-15);
    CHECK(d.is_skip_terminal());
  }
}

TEST_CASE("step: f^0 call reduces to the zero term") {
  Machine m;
  TermRef prog = parse_and_desugar(
      "proc f^0 :: x : I -> y : I { y = f^0(x) };"
      "new unit x; y = f^0(x)");
  Configuration c = make_initial_config(prog);
  REQUIRE(c.store.size() == 1);
  // run until the call is in head position
  for (int i = 0; i < 2; ++i) {
    auto succ = m.step(c);
    REQUIRE(succ.size() == 1);
    c = succ[0];
  }
  REQUIRE(term_as<CallProc>(c.term) != nullptr);
  auto succ = m.step(c);
  REQUIRE(succ.size() == 1);
  CHECK(succ[0].is_zero_terminal());
  // the argument binding stays in V
  CHECK(succ[0].assignment.count("x") == 1);
}

TEST_CASE("step: while^0 reduces to the zero term") {
  Machine m;
  Configuration c{parse_and_desugar("while^0 b do { skip }"),
                  {{"b", tt_value()}},
                  {},
                  DensityMatrix::scalar(1.0)};
  auto succ = m.step(c);
  REQUIRE(succ.size() == 1);
  CHECK(succ[0].is_zero_terminal());
}

TEST_CASE("step: indexed call decrements the store index everywhere") {
  Machine m;
  TermRef prog = parse_and_desugar(
      "proc f^2 :: x : I -> y : I { y = f^2(x) };"
      "new unit a; b = f^2(a); discard b; new unit a2; b2 = f^2(a2)");
  Configuration c = make_initial_config(prog);
  // step to the first call
  for (int i = 0; i < 2; ++i) c = m.step(c)[0];
  REQUIRE(term_as<Seq>(c.term) != nullptr);
  auto succ = m.step(c);
  REQUIRE(succ.size() == 1);
  const Configuration& d = succ[0];
  // store now holds f^1 with its body call renamed
  REQUIRE(d.store.size() == 1);
  CHECK(d.store[0].bound == 1);
  const auto* body_call = term_as<CallProc>(d.store[0].body);
  REQUIRE(body_call != nullptr);
  CHECK(body_call->bound == 1);
  // the continuation's later call to f^2 was renamed to f^1 too
  std::set<std::string> vars;
  std::function<bool(const TermRef&)> has_f1 = [&](const TermRef& t) -> bool {
    if (const auto* call = term_as<CallProc>(t))
      return call->name == "f" && call->bound == 1;
    if (const auto* s = term_as<Seq>(t))
      return has_f1(s->first) || has_f1(s->rest);
    return false;
  };
  CHECK(has_f1(d.term));
}

TEST_CASE("discard reindexes the remaining qubit pointers") {
  Machine m;
  // three qubits; discard the one in the middle
  DensityMatrix rho = DensityMatrix::scalar(1.0);
  for (int i = 0; i < 3; ++i) rho = new_qubit(rho);
  Configuration c{mk<Discard>("x"),
                  {{"w", mkv<VQubit>(1)},
                   {"x", mkv<VQubit>(2)},
                   {"y", mkv<VQubit>(3)}},
                  {},
                  rho};
  Configuration d = m.discard_binding(c, "x");
  CHECK(d.rho.n_qubits == 2);
  CHECK(value_as<VQubit>(d.assignment.at("w"))->index == 1);
  CHECK(value_as<VQubit>(d.assignment.at("y"))->index == 2);

  // discarding a classical value leaves rho alone
  Configuration cc{mk<Discard>("n"), {{"n", nat_value(4)}}, {}, rho};
  Configuration dd = m.discard_binding(cc, "n");
  CHECK(dd.rho.n_qubits == 3);
  CHECK(max_abs_diff(dd.rho.data, rho.data) == 0.0);

  // discarding a pair of qubits shrinks rho by two and reindexes
  Configuration cp{mk<Discard>("p"),
                   {{"p", mkv<VPair>(mkv<VQubit>(1), mkv<VQubit>(2))},
                    {"y", mkv<VQubit>(3)}},
                   {},
                   rho};
  Configuration dp = m.discard_binding(cp, "p");
  CHECK(dp.rho.n_qubits == 1);
  CHECK(value_as<VQubit>(dp.assignment.at("y"))->index == 1);
}

TEST_CASE("enumerate: coin-toss terminal traces are 2^-i") {
  Configuration c = coin_config();
  EnumOptions opts;
  opts.max_steps = 64;
  EnumerationResult r = enumerate(c, opts);
  REQUIRE(r.leaves.size() >= 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(r.leaves[i].config.trace() - std::pow(2.0, -(double)(i + 1)))
          < 1e-15);
    CHECK(value_to_string(r.leaves[i].config.assignment.at("b")) == "ff");
  }
  // bound after three exits
  // exits land at depth 12(i-1) + 15: three of them within 40 steps
  EnumOptions shallow;
  shallow.max_steps = 40;
  EnumerationResult r3 = enumerate(c, shallow);
  CHECK(r3.leaves.size() == 3);
  CHECK(std::abs(r3.halt_lower_bound - 0.875) < 1e-12);
  CHECK(std::abs(r3.frontier_mass - 0.125) < 1e-12);
}

TEST_CASE("enumerate: already-terminal configuration") {
  Configuration c{mk_skip(), {}, {}, DensityMatrix::scalar(1.0)};
  EnumOptions opts;
  opts.max_steps = 5;
  EnumerationResult r = enumerate(c, opts);
  REQUIRE(r.leaves.size() == 1);
  CHECK(r.halt_lower_bound == 1.0);
  CHECK(r.frontier_mass == 0.0);
}

TEST_CASE("enumerate: halting bound is monotone in the horizon") {
  Configuration c = coin_config();
  double prev = 0.0;
  for (long steps : {5L, 20L, 40L, 80L, 160L}) {
    EnumOptions opts;
    opts.max_steps = steps;
    EnumerationResult r = enumerate(c, opts);
    CHECK(r.halt_lower_bound >= prev - 1e-15);
    prev = r.halt_lower_bound;
  }
  CHECK(prev > 0.999);
}

TEST_CASE("enumerate: GHZ driver reaches a single gamma_3 leaf") {
  Configuration c = program_config(kGhzProgram);
  EnumOptions opts;
  opts.max_steps = 300;
  EnumerationResult r = enumerate(c, opts);
  REQUIRE(r.leaves.size() == 1);
  CHECK(r.frontier_mass == 0.0);
  const Configuration& leaf = r.leaves[0].config;
  CHECK(leaf.rho.n_qubits == 3);
  CHECK(max_abs_diff(leaf.rho.data, ghz_state(3).data) <= 1e-12);
}

TEST_CASE("enumerate: progress, trace conservation at every node") {
  Machine m;
  for (const char* src :
       {kGhzProgram,
        "b = tt; while b do { new qbit q; q *= H; discard b; b = measure q }",
        "new qbit q; q *= H; b = measure q; if b then { skip }"}) {
    Configuration root = program_config(src);
    EnumOptions opts;
    opts.max_steps = 60;
    opts.build_tree = true;
    opts.prune_impossible = false;
    EnumerationResult r = enumerate(root, opts);
    for (const TreeNode& node : r.nodes) {
      if (node.children.empty()) continue;
      double child_sum = 0.0;
      for (long child : node.children) child_sum += r.nodes[child].config.trace();
      CHECK(std::abs(node.config.trace() - child_sum) <= 1e-12);
      CHECK(node.children.size() <= 2);
      if (node.children.size() == 2)
        CHECK(term_as<Measure>(
                  term_as<Seq>(node.config.term)
                      ? term_as<Seq>(node.config.term)->first
                      : node.config.term) != nullptr);
    }
  }
}

TEST_CASE("subject reduction along every enumerated step") {
  for (const char* src :
       {kGhzProgram,
        "b = tt; while b do { new qbit q; q *= H; discard b; b = measure q }"}) {
    Configuration root = program_config(src);
    EnumOptions opts;
    opts.max_steps = 50;
    opts.verify_steps = true;  // machine re-checks Sigma on every step
    EnumerationResult r = enumerate(root, opts);
    CHECK(r.halt_lower_bound >= 0.0);
  }
}

TEST_CASE("finitary configurations strongly normalise") {
  // coin toss with while^4: everything terminates by a finite depth
  std::string src =
      "while^4 b do { new qbit q; q *= H; discard b; b = measure q }";
  Configuration c{parse_and_desugar(src),
                  {{"b", tt_value()}},
                  {},
                  DensityMatrix::scalar(1.0)};
  CHECK(is_finitary(c.term));
  EnumOptions opts;
  opts.max_steps = 100;
  EnumerationResult r = enumerate(c, opts);
  CHECK(r.frontier_mass == 0.0);
  // skip-leaves carry 2^-1 .. 2^-3, a zero-leaf carries the rest
  double skip_mass = 0.0;
  double zero_mass = 0.0;
  for (const auto& leaf : r.leaves) {
    if (leaf.config.is_skip_terminal())
      skip_mass += leaf.config.trace();
    else
      zero_mass += leaf.config.trace();
  }
  CHECK(std::abs(skip_mass - 0.875) < 1e-12);
  CHECK(std::abs(zero_mass - 0.125) < 1e-12);
}

TEST_CASE("sample: deterministic per seed, coin toss always lands ff") {
  Configuration c = coin_config();
  for (std::uint64_t seed : {0ULL, 7ULL, 123456789ULL}) {
    SampleResult a = sample(c, seed);
    SampleResult b = sample(c, seed);
    CHECK(a.steps == b.steps);
    CHECK(a.probability == b.probability);
    CHECK(value_to_string(a.config.assignment.at("b")) == "ff");
    // probability is 2^-i for the exit round i
    double log2p = std::log2(a.probability);
    CHECK(std::abs(log2p - std::round(log2p)) < 1e-12);
  }
}

TEST_CASE("sample: empirical mean exit round is about 2") {
  // exit round is geometric with success 1/2, so the mean is 2
  Configuration c = coin_config();
  double total = 0.0;
  const int trials = 10000;
  for (int seed = 0; seed < trials; ++seed) {
    SampleResult r = sample(c, static_cast<std::uint64_t>(seed));
    total += -std::log2(r.probability);
  }
  double mean = total / trials;
  CHECK(std::abs(mean - 2.0) < 0.1);
}

TEST_CASE("sample: timeout on the divergent loop") {
  Configuration c{parse_and_desugar("b = tt; while b do { skip }"),
                  {},
                  {},
                  DensityMatrix::scalar(1.0)};
  SampleOptions opts;
  opts.max_steps = 500;
  CHECK_THROWS_AS(sample(c, 1, opts), Error);
}

TEST_CASE("call renaming: GHZnext-style shared in/out name") {
  // proc with in == out that rebinds it; calling must end with the caller's
  // destination bound
  const char* src = R"(
proc flip :: b : bit -> b : bit {
  case b of { left u -> b = right[I, I] u | right u -> b = left[I, I] u }
}
b0 = tt;
r = flip(b0)
)";
  Configuration c = program_config(src);
  EnumOptions opts;
  opts.max_steps = 60;
  opts.verify_steps = true;
  EnumerationResult res = enumerate(c, opts);
  REQUIRE(res.leaves.size() == 1);
  CHECK(value_to_string(res.leaves[0].config.assignment.at("r")) == "ff");
}

TEST_CASE("call renaming: pass-through identity procedure") {
  const char* src = R"(
proc id :: x : Nat -> x : Nat { skip }
n = s(zero);
m = id(n)
)";
  Configuration c = program_config(src);
  EnumOptions opts;
  opts.max_steps = 60;
  opts.verify_steps = true;
  EnumerationResult res = enumerate(c, opts);
  REQUIRE(res.leaves.size() == 1);
  const auto& leaf = res.leaves[0].config;
  REQUIRE(leaf.assignment.count("m") == 1);
  CHECK(value_to_string(leaf.assignment.at("m")) == "1");
}

TEST_CASE("call renaming: argument name collides with callee locals") {
  const char* src = R"(
proc mix3 :: z : bit -> y : bit {
  y = copy z;
  discard z
}
proc mix2 :: t : bit -> y : bit {
  u = copy t;
  discard u;
  y = mix3(t)
}
proc mix :: x : bit -> y : bit {
  t = copy x;
  discard x;
  y = mix2(t)
}
t = tt;
out = mix(t)
)";
  // "mix" is not recursive; ensure names like t survive the nesting
  TermRef prog = parse_and_desugar(src);
  Configuration c = make_initial_config(prog);
  EnumOptions opts;
  opts.max_steps = 120;
  opts.verify_steps = true;
  EnumerationResult res = enumerate(c, opts);
  REQUIRE(res.leaves.size() == 1);
  CHECK(value_to_string(res.leaves[0].config.assignment.at("out")) == "tt");
}

TEST_CASE("recursive calls rename frames apart") {
  const char* src = R"(
proc double :: n : Nat -> m : Nat {
  case n of
      zero -> m = zero
    | s(n') -> t = double(n');
               m = s(s(t))
}
n = s(s(zero));
m = double(n)
)";
  Configuration c = program_config(src);
  EnumOptions opts;
  opts.max_steps = 200;
  opts.verify_steps = true;
  EnumerationResult res = enumerate(c, opts);
  REQUIRE(res.leaves.size() == 1);
  CHECK(value_to_string(res.leaves[0].config.assignment.at("m")) == "4");
}

TEST_CASE("step on a terminal configuration is an error") {
  Machine m;
  Configuration c{mk_skip(), {}, {}, DensityMatrix::scalar(1.0)};
  CHECK_THROWS_AS(m.step(c), Error);
}
