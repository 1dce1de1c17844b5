// Finite sub-distributions over terms, with exact rational weights.
//
// A Dist maps terms (up to alpha-equivalence) to positive rational weights
// and carries a `residual`: mass that a truncated evaluation deliberately
// dropped (e.g. the tail of rand's geometric law, or trajectories still live
// when a budget ran out). mass() + residual <= 1 for anything produced by the
// evaluator, and the residual is a certificate: the true distribution extends
// the computed one by at most `residual` placed anywhere.

#pragma once

#include <probt/rational.hpp>
#include <probt/syntax.hpp>

#include <unordered_map>
#include <utility>
#include <vector>

namespace probt {

struct TermHash {
  size_t operator()(const TermPtr& t) const {
    return static_cast<size_t>(t->hash);
  }
};
struct TermEq {
  bool operator()(const TermPtr& a, const TermPtr& b) const {
    return term_eq(a, b);
  }
};

using WeightMap = std::unordered_map<TermPtr, Rat, TermHash, TermEq>;

struct Dist {
  WeightMap weights;
  Rat residual = Rat(0);

  // Accumulates weight on a term; zero weights are dropped.
  void add(const TermPtr& t, const Rat& w) {
    if (sgn(w) == 0) return;
    Rat& slot = weights[t];
    slot += w;
    if (sgn(slot) == 0) weights.erase(t);
  }

  Rat mass() const {
    Rat m(0);
    for (const auto& [t, w] : weights) m += w;
    return m;
  }

  Rat total() const { return mass() + residual; }

  size_t support_size() const { return weights.size(); }
};

Dist dirac(const TermPtr& t);

// into += c * d (residual included).
void add_scaled(Dist& into, const Dist& d, const Rat& c);

// Mass sitting on values (the "has arrived" part of the distribution).
Rat value_mass(const Dist& d);

// Total variation distance, counting both residuals adversarially:
//   TV(a, b) <= (1/2) sum_t |a(t) - b(t)|  +  (1/2) (a.residual + b.residual)
// This is the tightest bound valid for every pair of completions of a and b.
Rat tv_distance(const Dist& a, const Dist& b);

// Support sorted canonically: numerals first ascending, then other terms by
// their printed form. This is the iteration order of all textual output.
std::vector<std::pair<TermPtr, Rat>> sorted_support(const Dist& d);

// Restriction of the support to numerals, as (n, weight), ascending.
std::vector<std::pair<Int, Rat>> nat_support(const Dist& d);

// Canonical JSON rendering (byte-stable):
//   {"support": [{"term": "...", "nat": <number|null>, "prob": "p/q"}, ...],
//    "residual": "p/q"}
// "nat" is the numeral's value when the term is a numeral that fits in 64
// bits, a decimal string when it is a larger numeral, and null otherwise.
std::string dist_json(const Dist& d);

}  // namespace probt
