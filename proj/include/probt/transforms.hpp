// Source-to-source constructions.
//
//  * Operator encodings: (+), rand and fixr are pairwise expressible; each
//    encoding rewrites one constant into a scheme built from the others
//    (guess-the-iteration-count for fixr via rand, geometric counter for
//    rand via fixr, first-draw test for (+) via either).
//
//  * Counting-monad lift: a coin-flip program of type a becomes a pure
//    program of type (Nat -> |a|) x Nat -- a branch function reading coin
//    outcomes from the bits of a seed, paired with a bound on how many
//    flips any run can make. Evaluating the branch function on every seed
//    below 2^count enumerates the finite evaluation tree inside T itself;
//    finite_rep packages that enumeration as terms F (dyadic weight of
//    each outcome, as a pair <a, e> meaning a / 2^e) and Q (support
//    bound).
//
//  * State-monad approximant: a rand program becomes a coin-flip program
//    threading a (flag, threshold, increment) state; each draw is a
//    finite cascade of coin flips that fails above the threshold and
//    escalates it. The output takes the precision n as an argument and
//    evaluates within total-variation distance 1/n of the source, the
//    whole error sitting on outcome 0 (failures are collapsed there).
//
//  * Derandomizers: for programs promising a majority outcome
//    (probability > 1/2) or a Las-Vegas shape ({S k} + failures at 0),
//    combine the finite representation with a threshold test to produce a
//    pure T program computing the promised function outright. Variants
//    for draw-based programs thread a promise-margin bound h and run the
//    approximant at precision 2 * h(input).
//
// All operations expect closed, well-typed inputs and emit closed,
// well-typed outputs; fragment violations (a construct the given
// construction cannot consume) raise EvalError.

#pragma once

#include <probt/eval.hpp>
#include <probt/syntax.hpp>

namespace probt {

// ---------------------------------------------------------------------------
// Plain System T building blocks: the arithmetic the passes below are
// assembled from. Template builders embed their argument terms without
// wrapping them in new binders unless noted; combinators are closed terms.

namespace sugar {

// if c >= 1 then a else b, consuming a tuple <c, a, b> (CBV: both branches
// are evaluated before selection, which is harmless in pure T).
// ite(ty) : (Nat * (ty * ty)) -> ty
TermPtr ite(const TypePtr& ty);

TermPtr mod2();       // Nat -> Nat: parity
TermPtr div2();       // Nat -> Nat: floor halving
TermPtr shiftr();     // Nat -> Nat -> Nat: s, y |-> s >> y
TermPtr max_below();  // Nat -> (Nat -> Nat) -> Nat: m, f |-> max_{x<m} f(x)

// Template builders (arguments spliced in at depth 0 of the result, except
// mul which shifts its first argument under two binders internally).
TermPtr add(const TermPtr& m, const TermPtr& n);     // m + n
TermPtr mul(const TermPtr& m, const TermPtr& n);     // m * n
TermPtr pow2(const TermPtr& m);                      // 2^m
TermPtr or_max(const TermPtr& m, const TermPtr& n);  // max(m, n)
TermPtr gt(const TermPtr& m, const TermPtr& n);      // 1 if m > n else 0
TermPtr sub(const TermPtr& m, const TermPtr& n);     // m - n, truncated
TermPtr eq(const TermPtr& m, const TermPtr& n);      // 1 if m == n else 0

// Threshold tests on dyadic pairs <a, e> (meaning a / 2^e).
TermPtr sup_half();  // (Nat * Nat) -> Nat: 1 iff a/2^e > 1/2
TermPtr sup_zero();  // (Nat * Nat) -> Nat: 1 iff a > 0

}  // namespace sugar

// ---------------------------------------------------------------------------
// Operator encodings

enum class ChoiceTarget { Rand, FixRan };

// Rewrites every (+) into the chosen target scheme:
//   via rand:  M (+) N  ~>  rec <\z.N, \x y z.M, rand> 0   (draw 0: N, else M)
//   via fixr:  M (+) N  ~>  fixr <\x y.M, \y.N> 0          (stop: N, else M)
// The input must not already contain the target constant (the rewriting
// would conflate source and introduced occurrences).
TermPtr encode_choice(const TermPtr& t, ChoiceTarget target);

// Rewrites every rand into fixr <S, 0> (geometric counter).
// The input must not contain fixr.
TermPtr encode_rand_via_fixran(const TermPtr& t);

// Rewrites every applied fixr <V, W> into
//   (\x. rec <p2 x, \z. p1 x, rand>) <V, W>
// (draw the number of unfoldings). The input must not contain rand.
TermPtr encode_fixran_via_rand(const TermPtr& t);

// ---------------------------------------------------------------------------
// Counting-monad lift (coin-flip programs -> pure T)

// Type translations: values |a| and computations <<a>> = (Nat -> |a|) x Nat.
TypePtr lift_ty_val(const TypePtr& ty);
TypePtr lift_ty_comp(const TypePtr& ty);

// The lift itself. Input: closed well-typed term using at most (+) beyond
// pure T. Output: closed pure-T term of type lift_ty_comp(type of input).
TermPtr lift_plus_to_t(const TermPtr& t);

// Finite representation of a Nat -> Nat coin-flip program.
//   F : Nat -> Nat -> (Nat * Nat), with F n k ->* <a, e> and a/2^e the
//       exact probability that t n evaluates to k;
//   Q : Nat -> Nat, with F n k ->* <0, e> whenever k >= Q n.
struct FiniteRep {
  TermPtr F;
  TermPtr Q;
};
FiniteRep finite_rep(const TermPtr& t);

// Two-argument variant for t : Nat -> Nat -> Nat (used by the draw-based
// derandomizers, where the second argument is the precision).
//   F : Nat -> Nat -> Nat -> (Nat * Nat),  Q : Nat -> Nat -> Nat.
FiniteRep finite_rep2(const TermPtr& t);

// Decodes a normalized dyadic pair <a, e> into the rational a/2^e.
Rat read_dyadic(const TermPtr& v);

// ---------------------------------------------------------------------------
// State-monad approximant (draw programs -> coin-flip programs)

// Type translations for the threaded (flag, threshold, increment) state.
TypePtr state_ty();  // Nat * (Nat * Nat)
TypePtr approx_ty_val(const TypePtr& ty);
TypePtr approx_ty_comp(const TypePtr& ty);  // state -> (val * state)

// For t : Nat, returns a coin-flip program of type Nat -> Nat taking the
// precision; for t : Nat -> Nat, returns Nat -> Nat -> Nat taking the
// original argument then the precision. Input may use rand and (+), not
// fixr (compose with encode_fixran_via_rand first).
TermPtr approximant(const TermPtr& t);

// ---------------------------------------------------------------------------
// Derandomizers

// t : Nat -> Nat. Without h: t is a coin-flip program whose evaluation at
// every input has a strict-majority outcome (probability > 1/2); the
// result is a pure T program computing it. With h (pure T, Nat -> Nat):
// t may use rand, promising probability >= 1/2 + 1/h(input); the
// construction runs the approximant at precision 2 * h(input).
TermPtr derandomize_mc(const TermPtr& t, const TermPtr& h = nullptr);

// t : Nat -> Nat evaluating to S(f(input)) with positive probability and
// to 0 otherwise. Without h: coin-flip programs. With h: draw programs
// promising success probability >= 1/h(input).
TermPtr derandomize_lv(const TermPtr& t, const TermPtr& h = nullptr);

}  // namespace probt
