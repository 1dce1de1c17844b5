// State-bounded random draws.
//
// A term using `rand` can be run with the draws truncated by a machine
// state (m, n): each draw yields k < m with probability 1/2^(k+1), raises
// the threshold to m + n for every later draw, and FAILS (mass lost, not
// redistributed) with the tail probability 1/2^m. Truncated runs
// under-approximate the untruncated distribution pointwise, and because
// thresholds escalate, the total success mass of a run started at (n, n)
// is at least prod_{k>=0} (1 - 2^-(n+kn)) >= 1 - 1/n for n >= 4 -- so the
// truncation is uniform: no matter how many draws the program makes, at
// most 1/n of the mass fails.
//
// The truncated draw is the `srand` constant. It has no surface syntax;
// terms containing it arise by star(), which substitutes it for every
// `rand` of the source. Since a draw's branching is finite (k < m) and
// every trajectory of the underlying deterministic calculus terminates,
// exhaustive evaluation of a truncated term is finite and exact; a
// truncation residual appears only when the round or support budget stops
// the run early.

#pragma once

#include <probt/dist.hpp>
#include <probt/eval.hpp>
#include <probt/rational.hpp>
#include <probt/syntax.hpp>

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace probt {

// A machine state: the term under reduction plus the two draw registers.
struct Config {
  TermPtr term;
  uint64_t m = 1;  // current draw threshold (next draw yields k < m)
  uint64_t n = 1;  // threshold increment applied after each draw
};

struct ConfigHash {
  size_t operator()(const Config& c) const;
};
struct ConfigEq {
  bool operator()(const Config& a, const Config& b) const;
};

// A sub-probability distribution over machine states. `failure` holds the
// mass lost to draws at or above the threshold; weights hold the rest.
struct ConfigDist {
  std::unordered_map<Config, Rat, ConfigHash, ConfigEq> weights;
  Rat failure = Rat(0);

  void add(const Config& c, const Rat& p);
  Rat mass() const;  // sum of weights (failure not included)
};

// Replaces every `rand` with the state-bounded draw. The input must be
// closed to the fragment this machine evaluates: fixr and srand are
// rejected. (+) is accepted and passes through -- the state rules extend
// to it with the registers unchanged, and the success bound is unaffected
// since fair branching preserves the escalation invariant.
TermPtr star(const TermPtr& t);

// Lockstep evaluation under the state rules. Deterministic contractions
// and (+) leave the registers untouched; a draw at state (m, n) branches
// to the numerals below m with geometric weights, moving to (m + n, n).
// `rand` in the input is a contract violation (apply star first).
//
// Values arrive with the state they hold when reduction stops, so the
// result is a distribution over configurations. failure + mass + residual
// == 1 exactly.
struct SRandResult {
  ConfigDist values;        // arrived value states; .failure as above
  Rat residual = Rat(0);    // live mass left when a budget stopped the run
  bool exhausted = false;   // true: residual == 0 and the tree was finite
  uint64_t max_depth = 0;   // deepest lifted round reached
};

// Budget reuse: epsilon is the live-mass stop threshold (mass <= eps/2 is
// moved to the residual), max_depth / max_live as for evaluate();
// rand_width and mode are ignored (draw widths come from the state).
SRandResult eval_srand(const Config& c, const Budget& b = {});

// Success probability of a run: the arrived value mass (failure and
// residual excluded). Lower-bounds the true success within `residual`.
Rat success_mass(const SRandResult& r);

// Forgets the registers: value term -> total mass over all states.
// failure + residual land in the Dist residual, so total() == 1 exactly.
Dist erase_state(const SRandResult& r);

// The analytic lower bound on the success mass of a run started at
// (m, n): the partial product prod_{k=0}^{terms-1} (1 - 2^-(m+kn)).
// Every factor is < 1, so any finite prefix is itself a certified lower
// bound of the infinite product.
Rat success_product_bound(uint64_t m, uint64_t n, unsigned terms);

}  // namespace probt
