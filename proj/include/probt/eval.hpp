// Operational semantics: weak call-by-value reduction lifted to
// distributions, plus a big-step machine for the deterministic fragment.
//
// Single step. A closed, well-typed non-value has exactly one redex under
// the deterministic strategy (arguments before functions in applications,
// left before right in pairs, no reduction under lambda). Stepping it yields
//   - one successor with probability 1        (beta, projections, rec),
//   - two successors with probability 1/2     ((+) and the fixr unfolding),
//   - a geometric family  n |-> 1/2^(n+1)     (rand), truncated at a width
//     with the tail mass recorded as residual.
//
// Distribution evaluation. The lifted relation advances every non-value in
// the current distribution by one step per round ("depth"); value mass is
// frozen as it arrives. Eval(t) is the limit of the arrived value mass and
// is approximated to within a requested epsilon: rand truncation tails get a
// geometrically shrinking slice of epsilon/2 (so arbitrarily many firings
// stay within budget), and the run stops once the still-live mass is at most
// epsilon/2, moving it into the residual. Arrival depths are recorded, which
// makes the average trajectory length  sum_d d * (mass arriving at depth d)
// a byproduct of the same run.
//
// Deterministic fast path. A live term with no probabilistic construct can
// never branch again; an environment machine normalizes it in one go,
// counting exactly how many small steps the reduction sequence would have
// taken. This keeps programs that interleave coin flips with expensive
// primitive recursion (the iterated-doubling family) at desk scale.

#pragma once

#include <probt/dist.hpp>
#include <probt/rational.hpp>
#include <probt/syntax.hpp>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace probt {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Single-step interface

enum class RedexKind {
  None,      // the term is a value
  Det,       // deterministic contraction (beta, p1, p2, rec)
  Coin,      // M (+) N : two branches, 1/2 each
  FixDraw,   // fixr <V, W> applied: unfold or stop, 1/2 each
  RandDraw,  // rand : geometric numeral
  Stuck,     // no rule applies (ill-typed or open term, or bare SRand)
};

struct RedexInfo {
  RedexKind kind = RedexKind::None;
  TermPtr redex;  // the redex subterm (null when kind == None)
  // Path from the root to the redex: (node, which child was taken).
  std::vector<std::pair<TermPtr, int>> path;
};

// Locates the unique redex position of the deterministic strategy.
RedexInfo find_redex(const TermPtr& root);

// Rebuilds the whole term with the redex replaced.
TermPtr plug(const RedexInfo& loc, const TermPtr& replacement);

// Contracts a deterministic redex (RedexKind::Det only).
TermPtr contract_det(const TermPtr& redex);

// The two outcomes of a probabilistic redex other than rand:
//   Coin:    {a, b};   FixDraw: {V (fixr <V,W>), W}.
std::pair<TermPtr, TermPtr> branch_outcomes(const TermPtr& redex,
                                            RedexKind kind);

// One lifted step of the whole term: successors with probabilities.
// rand produces numerals 0..width-1 and a tail residual of 1/2^width.
struct StepResult {
  bool is_value = false;
  std::vector<std::pair<TermPtr, Rat>> outcomes;
  Rat residual = Rat(0);
  bool fired_rand = false;
};
StepResult step(const TermPtr& t, unsigned rand_width);

// ---------------------------------------------------------------------------
// Deterministic big-step machine

// Normalizes a closed term containing no probabilistic construct, returning
// the value and the exact number of small steps the reduction sequence
// takes. Throws EvalError on open, probabilistic, or stuck input.
struct DetResult {
  TermPtr value;
  uint64_t steps;
};
DetResult normalize_det(const TermPtr& t);

// ---------------------------------------------------------------------------
// Distribution evaluation

enum class EvalMode { Lockstep, Worklist };

struct Budget {
  Rat epsilon = pow2_inv(20);  // target bound on unaccounted mass
  unsigned rand_width = 0;     // 0: adaptive widths from epsilon
                               // >0: fixed width for every rand firing
  uint64_t max_depth = 1000000;   // lifted rounds before giving up
  uint64_t max_live = 2000000;    // live support size safety valve
  EvalMode mode = EvalMode::Lockstep;
  bool det_fast_path = true;   // big-step probabilistic-free live terms
};

struct EvalResult {
  Dist values;      // arrived value mass; residual = rand tails + live mass
                    // at stop (so values.total() == 1 exactly)
  Rat live_mass = Rat(0);   // unfinished mass when the run stopped
  Rat rand_tail = Rat(0);   // total mass dropped by rand truncation
  uint64_t max_depth = 0;   // deepest round reached
  bool exhausted = false;   // no live mass remained above the stop threshold
  // Value mass by arrival depth (ascending; only depths with arrivals).
  std::vector<std::pair<uint64_t, Rat>> arrival;

  // sum_d d * arrival(d): the computed part of the average trajectory
  // length. Exact for exhausted runs with zero residual.
  Rat av_length_partial() const;
};

EvalResult evaluate(const TermPtr& t, const Budget& b = {});

// Convenience: bounds on the success probability (the limit value mass).
//   lower = arrived mass, upper = lower + residual.
struct SuccessBounds {
  Rat lower, upper;
};
SuccessBounds success(const TermPtr& t, const Budget& b = {});

// ---------------------------------------------------------------------------
// Trajectory sampling

// Samples one trajectory. Coin flips consume bits of the engine LSB-first;
// rand draws an exact geometric via fair coins (no truncation). When the
// term goes probabilistic-free it is finished by the big-step machine, with
// its step count added. Trajectories longer than max_steps are abandoned
// and reported with value == nullptr.
struct SampleResult {
  TermPtr value;  // null when the step cap was hit
  uint64_t steps;
};
SampleResult sample(const TermPtr& t, std::mt19937_64& rng,
                    uint64_t max_steps = 1000000);

// Empirical distribution over trials (weights are exact counts/trials).
// Capped trajectories contribute to `capped`, not to the distribution.
struct SampleStats {
  Dist empirical;
  uint64_t trials = 0;
  uint64_t capped = 0;
  Rat mean_steps = Rat(0);  // over completed trajectories
};
SampleStats sample_many(const TermPtr& t, uint64_t trials, uint64_t seed,
                        uint64_t max_steps = 1000000);

}  // namespace probt
