#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qpl/parser.hpp"
#include "testutil.hpp"

using namespace qpl;

namespace {

const char* kCoinToss = R"(
b = tt;
while b do {
  new qbit q;
  q *= H;
  discard b;
  b = measure q
}
)";

const char* kGhz = R"(
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
)";

}  // namespace

TEST_CASE("parse: the coin-toss body shape") {
  TermRef t = parse_and_desugar("new qbit q; q *= H");
  const auto* seq = term_as<Seq>(t);
  REQUIRE(seq != nullptr);
  const auto* nq = term_as<NewQbit>(seq->first);
  REQUIRE(nq != nullptr);
  CHECK(nq->var == "q");
  const auto* u = term_as<ApplyUnitary>(seq->rest);
  REQUIRE(u != nullptr);
  CHECK(u->gate == "H");
  CHECK(u->targets == std::vector<std::string>{"q"});
}

TEST_CASE("parse: minimal while loop") {
  TermRef t = parse_and_desugar("while b do { skip }");
  const auto* w = term_as<While>(t);
  REQUIRE(w != nullptr);
  CHECK_FALSE(w->bound.has_value());
  CHECK(w->cond == "b");
  CHECK(term_as<Skip>(w->body) != nullptr);
}

TEST_CASE("parse: syntax errors carry positions") {
  try {
    parse("q *= ;");
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::syntax_error);
    REQUIRE(e.pos().has_value());
    CHECK(e.pos()->line == 1);
    CHECK(e.pos()->column == 6);
  }
  CHECK_THROWS_AS(parse(""), Error);
  CHECK_THROWS_AS(parse("while b do skip"), Error);
  CHECK_THROWS_AS(parse("case x of left a -> skip"), Error);
}

TEST_CASE("parse: indexed while, proc and call") {
  TermRef t = parse_and_desugar("while^3 b do { skip }");
  const auto* w = term_as<While>(t);
  REQUIRE(w != nullptr);
  CHECK(w->bound == 3);

  TermRef p = parse_and_desugar(
      "proc f^2 :: x : qbit -> y : qbit { y = f^2(x) }");
  const auto* pd = term_as<ProcDef>(p);
  REQUIRE(pd != nullptr);
  CHECK(pd->bound == 2);
  const auto* call = term_as<CallProc>(pd->body);
  REQUIRE(call != nullptr);
  CHECK(call->bound == 2);
}

TEST_CASE("desugar: if-then expands to the standard case sugar") {
  TermRef t = parse_and_desugar("if b then { skip }");
  const auto* c = term_as<CaseOf>(t);
  REQUIRE(c != nullptr);
  CHECK(c->scrutinee == "b");
  CHECK(c->left_var == c->right_var);  // one fresh u for both binders
  // ff branch restores b = left u
  const auto* l = term_as<InjLeft>(c->left_body);
  REQUIRE(l != nullptr);
  CHECK(l->dst == "b");
  CHECK(l->src == c->left_var);
  // tt branch restores b = right u, then the body
  const auto* rseq = term_as<Seq>(c->right_body);
  REQUIRE(rseq != nullptr);
  const auto* r = term_as<InjRight>(rseq->first);
  REQUIRE(r != nullptr);
  CHECK(r->dst == "b");
  CHECK(term_as<Skip>(rseq->rest) != nullptr);
}

TEST_CASE("desugar: if-then-else runs the else branch on ff") {
  TermRef t = parse_and_desugar("if b then { skip } else { discard z }");
  const auto* c = term_as<CaseOf>(t);
  REQUIRE(c != nullptr);
  const auto* lseq = term_as<Seq>(c->left_body);
  REQUIRE(lseq != nullptr);
  CHECK(term_as<InjLeft>(lseq->first) != nullptr);
  CHECK(term_as<Discard>(lseq->rest) != nullptr);
}

TEST_CASE("desugar: tt is right_{I,I} * built from a fresh unit") {
  TermRef t = parse_and_desugar("b = tt");
  const auto* seq = term_as<Seq>(t);
  REQUIRE(seq != nullptr);
  const auto* nu = term_as<NewUnit>(seq->first);
  REQUIRE(nu != nullptr);
  const auto* inj = term_as<InjRight>(seq->rest);
  REQUIRE(inj != nullptr);
  CHECK(inj->dst == "b");
  CHECK(inj->src == nu->var);
  CHECK(type_equal(inj->left_type, Type::unit()));
  CHECK(type_equal(inj->right_type, Type::unit()));
}

TEST_CASE("desugar: s(zero) folds twice over Nat") {
  TermRef t = parse_and_desugar("n = s(zero)");
  // expected spine: new unit; left; fold; right; fold
  std::vector<const Term*> spine;
  TermRef cur = t;
  while (const auto* s = term_as<Seq>(cur)) {
    spine.push_back(s->first.get());
    cur = s->rest;
  }
  spine.push_back(cur.get());
  REQUIRE(spine.size() == 5);
  CHECK(std::holds_alternative<NewUnit>(spine[0]->node));
  CHECK(std::holds_alternative<InjLeft>(spine[1]->node));
  CHECK(std::holds_alternative<FoldTerm>(spine[2]->node));
  CHECK(std::holds_alternative<InjRight>(spine[3]->node));
  CHECK(std::holds_alternative<FoldTerm>(spine[4]->node));
  const auto& fold1 = std::get<FoldTerm>(spine[2]->node);
  CHECK(type_equal(fold1.mu_type, nat_type()));
  const auto& fold2 = std::get<FoldTerm>(spine[4]->node);
  CHECK(fold2.dst == "n");
}

TEST_CASE("desugar: nil needs an inferable element type") {
  CHECK_THROWS_AS(parse_and_desugar("l = nil"), Error);
  // explicit annotation works
  TermRef t = parse_and_desugar("l = nil[qbit]");
  CHECK(t != nullptr);
  // and so does inference from a cons head
  TermRef t2 = parse_and_desugar("new qbit q; l = q :: nil");
  CHECK(t2 != nullptr);
  // inside a proc, the declared output type is the hint
  TermRef t3 = parse_and_desugar(
      "proc empty :: u : I -> l : ListQ { discard u; l = nil }");
  CHECK(t3 != nullptr);
}

TEST_CASE("desugar: the GHZ figure parses and desugars") {
  TermRef t = parse_and_desugar(kGhz);
  const auto* seq = term_as<Seq>(t);
  REQUIRE(seq != nullptr);
  const auto* next = term_as<ProcDef>(seq->first);
  REQUIRE(next != nullptr);
  CHECK(next->name == "GHZnext");
  CHECK(type_equal(next->in_type, list_type(Type::qbit())));
  const auto* ghz = term_as<ProcDef>(seq->rest);
  REQUIRE(ghz != nullptr);
  CHECK(ghz->name == "GHZ");
  CHECK(type_equal(ghz->in_type, nat_type()));
  CHECK(type_equal(ghz->out_type, list_type(Type::qbit())));
}

TEST_CASE("desugar: coin-toss program from the figure") {
  TermRef t = parse_and_desugar(kCoinToss);
  CHECK(t != nullptr);
  CHECK(is_ordinary(t));
}

TEST_CASE("type syntax and aliases") {
  CHECK(type_equal(parse_type_string("bit"), bit_type()));
  CHECK(type_equal(parse_type_string("Nat"), nat_type()));
  CHECK(type_equal(parse_type_string("ListQ"), list_type(Type::qbit())));
  CHECK(type_equal(parse_type_string("List(bit)"), list_type(bit_type())));
  CHECK(type_equal(parse_type_string("mu X . I + X"), nat_type()));
  // * binds tighter than +, both right-associative
  CHECK(type_equal(parse_type_string("I + qbit * qbit + I"),
                   Type::sum(Type::unit(),
                             Type::sum(Type::tensor(Type::qbit(), Type::qbit()),
                                       Type::unit()))));
  CHECK(type_equal(parse_type_string("(I + qbit) * qbit"),
                   Type::tensor(Type::sum(Type::unit(), Type::qbit()),
                                Type::qbit())));
}

TEST_CASE("pretty_print basics") {
  CHECK(pretty_print(mk_skip()) == "skip");
  CHECK(pretty_print(mk_seq(mk_skip(), mk_skip())) == "skip; skip");
  CHECK(pretty_print(mk<While>(std::nullopt, "b", mk_skip())) ==
        "while b do { skip }");
  CHECK(pretty_print(mk<While>(2L, "b", mk_skip())) ==
        "while^2 b do { skip }");
}

// ---------------------------------------------------------------------------
// Round trip: desugar(parse(pretty_print(t))) == t over generated core terms
// ---------------------------------------------------------------------------

namespace {

using qpl::testing::Rng;

TypeRef gen_type(Rng& rng, int depth) {
  if (depth <= 0) {
    switch (rng.below(3)) {
      case 0: return Type::unit();
      case 1: return Type::qbit();
      default: return bit_type();
    }
  }
  switch (rng.below(5)) {
    case 0: return Type::sum(gen_type(rng, depth - 1), gen_type(rng, depth - 1));
    case 1:
      return Type::tensor(gen_type(rng, depth - 1), gen_type(rng, depth - 1));
    case 2: return nat_type();
    case 3: return Type::mu("X", Type::sum(Type::unit(), Type::var("X")));
    default: return gen_type(rng, 0);
  }
}

std::string gen_var(Rng& rng) {
  static const char* pool[] = {"x", "y", "q", "b", "u", "n'", "zz"};
  return pool[rng.below(7)];
}

TermRef gen_stmt(Rng& rng, int depth);

TermRef gen_seq(Rng& rng, int depth) {
  // right-nested, as the grammar produces
  TermRef t = gen_stmt(rng, depth);
  int extra = rng.below(3);
  std::vector<TermRef> items;
  items.push_back(t);
  for (int i = 0; i < extra; ++i) items.push_back(gen_stmt(rng, depth));
  TermRef out = items.back();
  for (size_t i = items.size() - 1; i-- > 0;) out = mk_seq(items[i], out);
  return out;
}

TermRef gen_stmt(Rng& rng, int depth) {
  int pick = rng.below(depth > 0 ? 17 : 13);
  switch (pick) {
    case 0: return mk<NewUnit>(gen_var(rng));
    case 1: return mk<NewQbit>(gen_var(rng));
    case 2: return mk<Discard>(gen_var(rng));
    case 3: return mk_skip();
    case 4: return mk<Copy>(gen_var(rng), gen_var(rng));
    case 5: return mk<Measure>(gen_var(rng), gen_var(rng));
    case 6: {
      std::vector<std::string> targets = {"q1", "q2"};
      if (rng.below(2)) targets.pop_back();
      return mk<ApplyUnitary>(targets.size() == 2 ? "CNOT" : "H", targets);
    }
    case 7:
      return mk<InjLeft>(gen_var(rng), gen_var(rng), gen_type(rng, 1),
                         gen_type(rng, 1));
    case 8:
      return mk<InjRight>(gen_var(rng), gen_var(rng), gen_type(rng, 1),
                          gen_type(rng, 1));
    case 9: return mk<MakePair>("p", gen_var(rng), gen_var(rng));
    case 10: return mk<SplitPair>(gen_var(rng), "y2", gen_var(rng));
    case 11: {
      TypeRef mu = rng.below(2) ? nat_type() : list_type(gen_type(rng, 0));
      return mk<FoldTerm>(gen_var(rng), gen_var(rng), mu);
    }
    case 12: return mk<UnfoldTerm>(gen_var(rng), gen_var(rng));
    case 13: {
      std::optional<long> bound;
      if (rng.below(2)) bound = rng.below(4);
      return mk<While>(bound, "b", gen_seq(rng, depth - 1));
    }
    case 14:
      return mk<CaseOf>(gen_var(rng), "xl", gen_seq(rng, depth - 1), "xr",
                        gen_seq(rng, depth - 1));
    case 15: {
      std::optional<long> bound;
      if (rng.below(2)) bound = rng.below(4);
      return mk<ProcDef>("f", bound, "x", gen_type(rng, 1), "y",
                         gen_type(rng, 1), gen_seq(rng, depth - 1));
    }
    default: {
      std::optional<long> bound;
      if (rng.below(2)) bound = rng.below(4);
      return mk<CallProc>(gen_var(rng), "f", bound, gen_var(rng));
    }
  }
}

}  // namespace

TEST_CASE("round trip: desugar(parse(pretty_print(t))) == t") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    TermRef t = gen_seq(rng, 2);
    std::string text = pretty_print(t);
    CAPTURE(text);
    TermRef back = parse_and_desugar(text);
    CHECK(term_equal(t, back));
  }
  // a zero term with annotations round-trips too
  VarCtx gamma{{"x", Type::qbit()}, {"y", nat_type()}};
  VarCtx sigma{{"z", bit_type()}};
  TermRef z = mk<ZeroTerm>(gamma, sigma);
  CHECK(term_equal(z, parse_and_desugar(pretty_print(z))));
  TermRef z0 = mk<ZeroTerm>(VarCtx{}, VarCtx{});
  CHECK(term_equal(z0, parse_and_desugar(pretty_print(z0))));
}

TEST_CASE("round trip: desugared figure programs re-parse to the same core") {
  for (const char* src : {kCoinToss, kGhz}) {
    TermRef core = parse_and_desugar(src);
    TermRef back = parse_and_desugar(pretty_print(core));
    CHECK(term_equal(core, back));
  }
}
