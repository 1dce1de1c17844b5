// Exact evaluation of the coin-flip fragment (no rand, no fixr).
//
// With (+) as the only probabilistic construct every trajectory of a
// well-typed closed term terminates, so the whole reduction tree is finite:
// a depth-first walk yields the value distribution exactly (residual 0) and
// the exact expected number of reduction steps, computed as
// sum over leaves of P(leaf) * (steps along that trajectory).
// Deterministic stretches are big-stepped by the machine, which preserves
// both the reached value and the exact step count.

#pragma once

#include <probt/dist.hpp>
#include <probt/eval.hpp>

namespace probt {

struct ExactResult {
  Dist values;         // exact; residual always 0
  Rat expected_steps;  // exact expected trajectory length
  uint64_t nodes = 0;  // work counter (tree steps explored)
};

// Throws EvalError if the term uses rand/fixr/srand, is open, or the walk
// exceeds max_nodes steps. order_swap explores each coin's branches in the
// opposite order; the result must be identical (used as an order-invariance
// check).
ExactResult exact_eval_plus(const TermPtr& t, uint64_t max_nodes = 10000000,
                            bool order_swap = false);

}  // namespace probt
