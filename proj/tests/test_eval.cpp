// Evaluator: single steps, lifted distribution evaluation, the deterministic
// machine's exact step accounting, and trajectory sampling.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <probt/eval.hpp>
#include <probt/typecheck.hpp>

using namespace probt;

static TermPtr P(const std::string& s) { return parse_term(s); }

// Reference lifted evaluation: literal lockstep via single steps, no fast
// path, fixed rand width. Used as an oracle against the production engine.
static Dist lockstep_oracle(TermPtr t, unsigned width, int rounds) {
  Dist cur = dirac(t);
  for (int i = 0; i < rounds; i++) {
    Dist next;
    next.residual = cur.residual;
    for (const auto& [tm, w] : cur.weights) {
      if (is_value(tm)) {
        next.add(tm, w);
        continue;
      }
      StepResult sr = step(tm, width);
      next.residual += sr.residual * w;
      for (const auto& [succ, p] : sr.outcomes) next.add(succ, p * w);
    }
    cur = std::move(next);
  }
  return cur;
}

TEST_CASE("single steps: beta, projections, rec, choice, fixr, rand") {
  // beta with argument first
  StepResult sr = step(P("(\\x:Nat. S x) ((\\y:Nat. y) 2)"), 8);
  REQUIRE(sr.outcomes.size() == 1);
  CHECK(term_eq(sr.outcomes[0].first, P("(\\x:Nat. S x) 2")));

  sr = step(P("(\\x:Nat. S x) 2"), 8);
  CHECK(term_eq(sr.outcomes[0].first, P("3")));

  sr = step(P("p1 <1, 2>"), 8);
  CHECK(term_eq(sr.outcomes[0].first, P("1")));
  sr = step(P("p2 <1, 2>"), 8);
  CHECK(term_eq(sr.outcomes[0].first, P("2")));

  // rec on 0 and on a successor
  sr = step(P("rec <9, \\x:Nat. \\y:Nat. y, 0>"), 8);
  CHECK(term_eq(sr.outcomes[0].first, P("9")));
  sr = step(P("rec <9, \\x:Nat. \\y:Nat. S y, 2>"), 8);
  CHECK(term_eq(sr.outcomes[0].first,
                P("(\\x:Nat. \\y:Nat. S y) 1 (rec <9, \\x:Nat. \\y:Nat. S y, "
                  "1>)")));

  // choice fires without evaluating its branches
  sr = step(P("((\\x:Nat. x) 1) (+) 2"), 8);
  REQUIRE(sr.outcomes.size() == 2);
  CHECK(term_eq(sr.outcomes[0].first, P("(\\x:Nat. x) 1")));
  CHECK(sr.outcomes[0].second == rat(1, 2));
  CHECK(term_eq(sr.outcomes[1].first, P("2")));

  // fixr unfolds or stops
  sr = step(P("fixr <S, 0>"), 8);
  REQUIRE(sr.outcomes.size() == 2);
  CHECK(term_eq(sr.outcomes[0].first, P("S (fixr <S, 0>)")));
  CHECK(term_eq(sr.outcomes[1].first, P("0")));

  // rand truncates at the width with certified tail
  sr = step(P("rand"), 3);
  REQUIRE(sr.outcomes.size() == 3);
  CHECK(sr.fired_rand);
  CHECK(term_eq(sr.outcomes[0].first, P("0")));
  CHECK(sr.outcomes[0].second == rat(1, 2));
  CHECK(sr.outcomes[2].second == rat(1, 8));
  CHECK(sr.residual == rat(1, 8));
}

TEST_CASE("redex selection: arguments first, pairs left to right") {
  // In f ((\y.y) 2) with f a value, the argument steps first.
  TermPtr t = P("(\\x:Nat. x) ((\\y:Nat. y) 2)");
  RedexInfo loc = find_redex(t);
  CHECK(term_eq(loc.redex, P("(\\y:Nat. y) 2")));

  // In an application with a non-value function and value argument, the
  // function position steps.
  t = P("(p1 <S, 0>) 3");
  loc = find_redex(t);
  CHECK(term_eq(loc.redex, P("p1 <S, 0>")));

  // Pairs: left component first.
  t = P("<p1 <1, 2>, p2 <1, 2>>");
  loc = find_redex(t);
  CHECK(term_eq(loc.redex, P("p1 <1, 2>")));

  // A choice is itself the redex wherever it sits.
  t = P("S (1 (+) 2)");
  loc = find_redex(t);
  CHECK(loc.kind == RedexKind::Coin);
  CHECK(term_eq(loc.redex, P("1 (+) 2")));

  // Stuck detection.
  CHECK(find_redex(P("0 1")).kind == RedexKind::Stuck);
  CHECK(find_redex(P("x")).kind == RedexKind::Stuck);
  CHECK(find_redex(mk_srand()).kind == RedexKind::Stuck);
  CHECK_THROWS_AS(step(P("p1 0"), 4), EvalError);
}

TEST_CASE("exact branch distribution (3+4)+2") {
  EvalResult r = evaluate(P("(3 (+) 4) (+) 2"));
  CHECK(r.exhausted);
  CHECK(r.values.residual == 0);
  CHECK(r.values.weights.at(P("3")) == rat(1, 4));
  CHECK(r.values.weights.at(P("4")) == rat(1, 4));
  CHECK(r.values.weights.at(P("2")) == rat(1, 2));
  CHECK(r.values.mass() == 1);
  // 2 arrives after one step, 3 and 4 after two.
  CHECK(r.av_length_partial() == rat(1, 2) + 2 * rat(1, 2));
}

TEST_CASE("two lifted steps of the geometric unary chain") {
  Dist d = lockstep_oracle(P("fixr <S, 0>"), 8, 2);
  CHECK(d.weights.at(P("S (S (fixr <S, 0>))")) == rat(1, 4));
  CHECK(d.weights.at(P("1")) == rat(1, 4));
  CHECK(d.weights.at(P("0")) == rat(1, 2));
  CHECK(d.residual == 0);
}

TEST_CASE("geometric law of fixr <S, 0> to epsilon 2^-20") {
  Budget b;
  b.epsilon = pow2_inv(20);
  EvalResult r = evaluate(P("fixr <S, 0>"), b);
  for (unsigned n = 0; n <= 18; n++)
    CHECK(r.values.weights.at(mk_nat((unsigned long)n)) == pow2_inv(n + 1));
  CHECK(r.values.residual <= pow2_inv(20));
  CHECK(r.values.total() == 1);
  // Outcome n arrives at depth n+1, so the average trajectory length of the
  // computed part approaches sum (n+1) 2^-(n+1) = 2.
  CHECK(r.av_length_partial() > rat(19, 10));
  CHECK(r.av_length_partial() < 2);
}

TEST_CASE("two-coin recursor walk: exact") {
  TermPtr dbl = P("rec <0, \\x:Nat. \\y:Nat. y (+) S y, 2>");
  EvalResult r = evaluate(dbl);
  CHECK(r.exhausted);
  CHECK(r.values.residual == 0);
  CHECK(r.values.weights.at(P("0")) == rat(1, 4));
  CHECK(r.values.weights.at(P("1")) == rat(1, 2));
  CHECK(r.values.weights.at(P("2")) == rat(1, 4));
}

TEST_CASE("iterated doubling is a Dirac at 2^(n+1)") {
  std::string expo =
      "\\n:Nat. rec <1, \\x:Nat. \\y:Nat. rec <0, \\a:Nat. \\b:Nat. "
      "S (S b), y>, S n>";
  for (unsigned long n = 0; n <= 8; n++) {
    TermPtr t = mk_app(P(expo), mk_nat(n));
    EvalResult r = evaluate(t);
    REQUIRE(r.exhausted);
    CHECK(r.values.residual == 0);
    REQUIRE(r.values.support_size() == 1);
    CHECK(r.values.weights.at(mk_nat(pow2_int(n + 1))) == 1);
  }
}

TEST_CASE("machine step counts equal small-step counts") {
  // The deterministic fast path must count exactly the steps the plain
  // small-step reduction takes: compare against a literal stepping loop.
  const char* corpus[] = {
      "(\\x:Nat. S x) 2",
      "(\\f:Nat -> Nat. \\x:Nat. f (f x)) (\\y:Nat. S y) 0",
      "p1 <p2 <1, 2>, 3>",
      "rec <0, \\x:Nat. \\y:Nat. S (S y), 5>",
      "rec <S, \\n:Nat. \\f:Nat -> Nat. \\x:Nat. f (f x), 3> 1",
      "(\\p:Nat*Nat. <p2 p, p1 p>) <p1 <4, 5>, 6>",
      "\\x:Nat. x",  // already a value: zero steps
      "rec <1, \\x:Nat. \\y:Nat. rec <0, \\a:Nat. \\b:Nat. S (S b), y>, 4>",
  };
  for (const char* s : corpus) {
    CAPTURE(s);
    TermPtr t = P(s);
    uint64_t small_steps = 0;
    TermPtr cur = t;
    while (!is_value(cur)) {
      StepResult sr = step(cur, 1);
      REQUIRE(sr.outcomes.size() == 1);
      cur = sr.outcomes[0].first;
      small_steps++;
    }
    DetResult m = normalize_det(t);
    CHECK(m.steps == small_steps);
    CHECK(term_eq(m.value, cur));
  }
}

TEST_CASE("machine rejects what it must") {
  CHECK_THROWS_AS(normalize_det(P("rand")), EvalError);
  CHECK_THROWS_AS(normalize_det(P("1 (+) 2")), EvalError);
  CHECK_THROWS_AS(normalize_det(P("fixr <S, 0>")), EvalError);
  CHECK_THROWS_AS(normalize_det(P("x")), EvalError);
  CHECK_THROWS_AS(normalize_det(P("0 1")), EvalError);
}

TEST_CASE("fast path and plain stepping agree on mixed terms") {
  // (\n. Expo-ish doubling) applied under a coin: the deterministic tails
  // are big-stepped by the fast path; with it disabled the result and the
  // arrival profile must be identical.
  TermPtr t = P(
      "(\\n:Nat. rec <1, \\x:Nat. \\y:Nat. rec <0, \\a:Nat. \\b:Nat. "
      "S (S b), y>, S n>) (2 (+) 4)");
  Budget fast;
  Budget slow;
  slow.det_fast_path = false;
  EvalResult rf = evaluate(t, fast);
  EvalResult rs = evaluate(t, slow);
  CHECK(tv_distance(rf.values, rs.values) == 0);
  CHECK(rf.values.residual == rs.values.residual);
  REQUIRE(rf.arrival.size() == rs.arrival.size());
  for (size_t i = 0; i < rf.arrival.size(); i++) {
    CHECK(rf.arrival[i].first == rs.arrival[i].first);
    CHECK(rf.arrival[i].second == rs.arrival[i].second);
  }
  CHECK(rf.values.weights.at(P("8")) == rat(1, 2));
  CHECK(rf.values.weights.at(P("32")) == rat(1, 2));
}

TEST_CASE("lockstep and worklist modes agree") {
  const char* corpus[] = {
      "(3 (+) 4) (+) 2",
      "fixr <S, 0>",
      "rec <0, \\x:Nat. \\y:Nat. y (+) S y, 2>",
      "(\\x:Nat. x (+) S x) rand",
      "rand (+) fixr <S, 1>",
  };
  for (const char* s : corpus) {
    CAPTURE(s);
    Budget lk;
    Budget wl;
    wl.mode = EvalMode::Worklist;
    EvalResult a = evaluate(P(s), lk);
    EvalResult c = evaluate(P(s), wl);
    // Identical weight maps (tv_distance would count the equal residuals
    // adversarially, so compare pointwise).
    CHECK(a.values.support_size() == c.values.support_size());
    for (const auto& [tm, w] : a.values.weights)
      CHECK(c.values.weights.at(tm) == w);
    CHECK(a.values.residual == c.values.residual);
    CHECK(a.av_length_partial() == c.av_length_partial());
  }
}

TEST_CASE("rand under a context: truncation is certified") {
  // (\x. x (+) S x) rand : outcome n with prob 2^-(n+1) splits evenly
  // between n and n+1.
  Budget b;
  b.epsilon = pow2_inv(16);
  EvalResult r = evaluate(P("(\\x:Nat. x (+) S x) rand"), b);
  CHECK(r.values.residual <= pow2_inv(16));
  CHECK(r.values.total() == 1);
  // P(0) = 1/4, P(n>0) = 2^-(n+1)/2 + 2^-n/2 = 3 * 2^-(n+2)
  CHECK(r.values.weights.at(P("0")) == rat(1, 4));
  CHECK(r.values.weights.at(P("1")) == rat(3, 8));
  CHECK(r.values.weights.at(P("2")) == rat(3, 16));
  CHECK(r.values.weights.at(P("3")) == rat(3, 32));
}

TEST_CASE("fixed-width rand mode") {
  Budget b;
  b.rand_width = 4;
  EvalResult r = evaluate(P("rand"), b);
  CHECK(r.values.support_size() == 4);
  CHECK(r.values.weights.at(P("0")) == rat(1, 2));
  CHECK(r.values.weights.at(P("3")) == rat(1, 16));
  CHECK(r.values.residual == rat(1, 16));
  CHECK(r.rand_tail == rat(1, 16));
}

TEST_CASE("success bounds bracket the value mass") {
  SuccessBounds sb = success(P("(3 (+) 4) (+) 2"));
  CHECK(sb.lower == 1);
  CHECK(sb.upper == 1);

  sb = success(P("fixr <S, 0>"));
  CHECK(sb.lower >= 1 - pow2_inv(19));
  CHECK(sb.upper == 1);

  // A term that diverges with probability 1/2: fixr looping on the left.
  // fixr <\x:Nat. x, 0> unfolds to (\x.x) (fixr ...) which loops... actually
  // it re-reaches fixr <...> after one beta, so it diverges iff the coin
  // keeps choosing the unfold branch: Succ = 1 still. Use a genuinely
  // divergent left branch via rec on a coin bound is overkill; skip.
  Budget tight;
  tight.epsilon = pow2_inv(10);
  sb = success(P("fixr <S, 0>"), tight);
  CHECK(sb.upper - sb.lower <= pow2_inv(10));
}

TEST_CASE("sampling is reproducible and converges roughly") {
  TermPtr t = P("(3 (+) 4) (+) 2");
  SampleStats a = sample_many(t, 20000, 12345);
  SampleStats b = sample_many(t, 20000, 12345);
  CHECK(tv_distance(a.empirical, b.empirical) == 0);  // same seed, same data
  CHECK(a.capped == 0);

  EvalResult exact = evaluate(t);
  Rat tv = tv_distance(a.empirical, exact.values);
  CHECK(rat_double(tv) < 0.02);

  // Geometric sampling: unbounded draws, still exact per-trajectory.
  SampleStats g = sample_many(P("rand"), 20000, 999);
  CHECK(g.capped == 0);
  Budget wide;
  wide.epsilon = pow2_inv(30);
  Rat tvg = tv_distance(g.empirical, evaluate(P("rand"), wide).values);
  CHECK(rat_double(tvg) < 0.02);

  // Mean steps of the two-coin walk should be near its exact average depth.
  TermPtr dbl = P("rec <0, \\x:Nat. \\y:Nat. y (+) S y, 2>");
  SampleStats s = sample_many(dbl, 20000, 7);
  EvalResult er = evaluate(dbl);
  CHECK(rat_double(abs(s.mean_steps - er.av_length_partial())) < 0.3);
}

TEST_CASE("evaluate rejects open terms and srand") {
  CHECK_THROWS_AS(evaluate(P("x")), EvalError);
  CHECK_THROWS_AS(evaluate(mk_srand()), EvalError);
  CHECK_THROWS_AS(evaluate(mk_app(mk_lam(ty_nat(), mk_bvar(0)), mk_srand())),
                  EvalError);
}

TEST_CASE("zero epsilon: exhaustive on coin terms, error only if rand fires") {
  Budget zero;
  zero.epsilon = Rat(0);
  EvalResult r = evaluate(P("(3 (+) 4) (+) 2"), zero);
  CHECK(r.exhausted);
  CHECK(r.values.residual == 0);
  CHECK(r.values.weights.at(P("2")) == rat(1, 2));
  // fixr branches are coin flips too, but loop forever at epsilon 0 only up
  // to max_depth; a rand draw is the thing that cannot start at all.
  CHECK_THROWS_AS(evaluate(P("rand"), zero), EvalError);
  CHECK_THROWS_AS(evaluate(P("(\\x:Nat. 0) rand"), zero), EvalError);
}
