#include <probt/eval.hpp>

#include <algorithm>
#include <map>

namespace probt {

// ---------------------------------------------------------------------------
// Redex location

static bool is_rec_triple(const TermPtr& v) {
  return v->kind == TermKind::Pair && v->b->kind == TermKind::Pair &&
         v->b->b->kind == TermKind::NatLit;
}

RedexInfo find_redex(const TermPtr& root) {
  RedexInfo info;
  if (is_value(root)) return info;  // kind == None
  TermPtr cur = root;
  while (true) {
    switch (cur->kind) {
      case TermKind::Choice:
        info.kind = RedexKind::Coin;
        info.redex = cur;
        return info;
      case TermKind::Rand:
        info.kind = RedexKind::RandDraw;
        info.redex = cur;
        return info;
      case TermKind::App: {
        if (!is_value(cur->b)) {  // arguments evaluate first
          info.path.emplace_back(cur, 1);
          cur = cur->b;
          break;
        }
        if (!is_value(cur->a)) {
          info.path.emplace_back(cur, 0);
          cur = cur->a;
          break;
        }
        info.redex = cur;
        switch (cur->a->kind) {
          case TermKind::Lam:
            info.kind = RedexKind::Det;
            return info;
          case TermKind::Proj1:
          case TermKind::Proj2:
            info.kind = cur->b->kind == TermKind::Pair ? RedexKind::Det
                                                       : RedexKind::Stuck;
            return info;
          case TermKind::Rec:
            info.kind = is_rec_triple(cur->b) ? RedexKind::Det
                                              : RedexKind::Stuck;
            return info;
          case TermKind::FixRan:
            info.kind = cur->b->kind == TermKind::Pair ? RedexKind::FixDraw
                                                       : RedexKind::Stuck;
            return info;
          default:  // numeral, pair, S V, ... applied: no rule
            info.kind = RedexKind::Stuck;
            return info;
        }
      }
      case TermKind::Pair: {
        if (!is_value(cur->a)) {  // left before right
          info.path.emplace_back(cur, 0);
          cur = cur->a;
        } else {
          info.path.emplace_back(cur, 1);
          cur = cur->b;
        }
        break;
      }
      default:
        // FVar, loose BVar, bare SRand: no rule in this semantics.
        info.kind = RedexKind::Stuck;
        info.redex = cur;
        return info;
    }
  }
}

TermPtr plug(const RedexInfo& loc, const TermPtr& replacement) {
  TermPtr t = replacement;
  for (size_t i = loc.path.size(); i-- > 0;) {
    const auto& [node, child] = loc.path[i];
    if (node->kind == TermKind::App)
      t = child == 0 ? mk_app(t, node->b) : mk_app(node->a, t);
    else
      t = child == 0 ? mk_pair(t, node->b) : mk_pair(node->a, t);
  }
  return t;
}

TermPtr contract_det(const TermPtr& redex) {
  const TermPtr& f = redex->a;
  const TermPtr& v = redex->b;
  switch (f->kind) {
    case TermKind::Lam:
      return open0(f->a, v);
    case TermKind::Proj1:
      return v->a;
    case TermKind::Proj2:
      return v->b;
    case TermKind::Rec: {
      const TermPtr& base = v->a;
      const TermPtr& stepf = v->b->a;
      const Int& n = v->b->b->nat;
      if (sgn(n) == 0) return base;
      TermPtr pred = mk_nat(Int(n - 1));
      TermPtr inner = mk_app(mk_rec(), mk_pair(base, mk_pair(stepf, pred)));
      return mk_app(mk_app(stepf, pred), inner);
    }
    default:
      throw EvalError("contract_det: not a deterministic redex: " +
                      print_term(redex));
  }
}

std::pair<TermPtr, TermPtr> branch_outcomes(const TermPtr& redex,
                                            RedexKind kind) {
  if (kind == RedexKind::Coin) return {redex->a, redex->b};
  // fixr <V, W>  -->  { V (fixr <V, W>) , W } each with probability 1/2
  const TermPtr& pair = redex->b;
  return {mk_app(pair->a, redex), pair->b};
}

StepResult step(const TermPtr& t, unsigned rand_width) {
  StepResult r;
  RedexInfo loc = find_redex(t);
  switch (loc.kind) {
    case RedexKind::None:
      r.is_value = true;
      return r;
    case RedexKind::Stuck:
      throw EvalError("stuck term (no rule applies to '" +
                      print_term(loc.redex) + "') in: " + print_term(t));
    case RedexKind::Det:
      r.outcomes.emplace_back(plug(loc, contract_det(loc.redex)), Rat(1));
      return r;
    case RedexKind::Coin:
    case RedexKind::FixDraw: {
      auto [l, rgt] = branch_outcomes(loc.redex, loc.kind);
      r.outcomes.emplace_back(plug(loc, l), rat(1, 2));
      r.outcomes.emplace_back(plug(loc, rgt), rat(1, 2));
      return r;
    }
    case RedexKind::RandDraw: {
      if (rand_width == 0)
        throw EvalError(
            "step: rand fired with width 0 (a positive rand_width or a "
            "positive epsilon budget is required)");
      r.fired_rand = true;
      for (unsigned n = 0; n < rand_width; n++)
        r.outcomes.emplace_back(plug(loc, mk_nat((unsigned long)n)),
                                pow2_inv(n + 1));
      r.residual = pow2_inv(rand_width);
      return r;
    }
  }
  throw EvalError("unreachable");
}

// ---------------------------------------------------------------------------
// Deterministic big-step machine (closures, exact step accounting)
//
// Numerals that fit in 64 bits travel by value (no allocation on the
// successor hot path); closures, pairs, primitives and oversized numerals
// are boxed. The rec unfolding is a loop, not recursion, so huge bounds
// cost stack nothing, and curried step functions skip the intermediate
// closure allocation (the step count is unaffected: both betas are counted).

namespace {

struct MBox;
struct MV {
  uint64_t small = 0;                // numeral value when box == nullptr
  std::shared_ptr<const MBox> box;   // everything else
};

struct MEnv;
using MEnvPtr = std::shared_ptr<const MEnv>;
struct MEnv {
  MV v;
  MEnvPtr next;
};

struct MBox {
  enum Kind { BigNat, Clo, Pair, Prim } kind;
  Int big;        // BigNat
  TermPtr lam;    // Clo
  MEnvPtr env;    // Clo
  MV a, b;        // Pair
  TermKind prim;  // Prim: Succ | Proj1 | Proj2 | Rec
};

MV mv_nat(uint64_t n) { return {n, nullptr}; }
MV mv_big(Int n) {
  auto b = std::make_shared<MBox>();
  b->kind = MBox::BigNat;
  b->big = std::move(n);
  return {0, std::move(b)};
}
MV mv_of_int(const Int& n) {
  if (n.fits_ulong_p()) return mv_nat(mpz_get_ui(n.get_mpz_t()));
  return mv_big(n);
}
MV mv_clo(TermPtr lam, MEnvPtr env) {
  auto b = std::make_shared<MBox>();
  b->kind = MBox::Clo;
  b->lam = std::move(lam);
  b->env = std::move(env);
  return {0, std::move(b)};
}
MV mv_pair(MV a, MV v2) {
  auto b = std::make_shared<MBox>();
  b->kind = MBox::Pair;
  b->a = std::move(a);
  b->b = std::move(v2);
  return {0, std::move(b)};
}
MV mv_prim(TermKind k) {
  auto b = std::make_shared<MBox>();
  b->kind = MBox::Prim;
  b->prim = k;
  return {0, std::move(b)};
}

bool mv_is_nat(const MV& v) {
  return !v.box || v.box->kind == MBox::BigNat;
}

const MV& env_get(const MEnvPtr& env, uint64_t i) {
  const MEnv* p = env.get();
  while (p && i > 0) {
    p = p->next.get();
    i--;
  }
  if (!p) throw EvalError("machine: loose bound variable");
  return p->v;
}

MEnvPtr env_push(MV v, MEnvPtr next) {
  auto frame = std::make_shared<MEnv>();
  frame->v = std::move(v);
  frame->next = std::move(next);
  return frame;
}

MV apply_det(const MV& f, const MV& x, uint64_t& steps);

MV eval_det(const TermPtr& t, const MEnvPtr& env, uint64_t& steps) {
  switch (t->kind) {
    case TermKind::BVar:
      return env_get(env, t->index);
    case TermKind::FVar:
      throw EvalError("machine: free variable '" + t->name + "'");
    case TermKind::NatLit:
      return mv_of_int(t->nat);
    case TermKind::Lam:
      return mv_clo(t, env);
    case TermKind::Succ:
    case TermKind::Proj1:
    case TermKind::Proj2:
    case TermKind::Rec:
      return mv_prim(t->kind);
    case TermKind::Pair: {
      MV a = eval_det(t->a, env, steps);  // left before right
      MV b = eval_det(t->b, env, steps);
      return mv_pair(std::move(a), std::move(b));
    }
    case TermKind::App: {
      MV arg = eval_det(t->b, env, steps);  // arguments first
      MV fn = eval_det(t->a, env, steps);
      return apply_det(fn, arg, steps);
    }
    default:
      throw EvalError("machine: probabilistic construct in deterministic "
                      "evaluation: " + print_term(t));
  }
}

// apply(apply(f, x1), x2), eliding the intermediate closure when f is a
// curried lambda. Exactly two beta steps are counted either way.
MV apply2_det(const MV& f, MV x1, MV x2, uint64_t& steps) {
  if (f.box && f.box->kind == MBox::Clo &&
      f.box->lam->a->kind == TermKind::Lam) {
    steps += 2;
    MEnvPtr env = env_push(std::move(x2),
                           env_push(std::move(x1), f.box->env));
    return eval_det(f.box->lam->a->a, env, steps);
  }
  MV g = apply_det(f, x1, steps);
  return apply_det(g, x2, steps);
}

MV apply_det(const MV& f, const MV& x, uint64_t& steps) {
  if (!f.box || f.box->kind == MBox::BigNat || f.box->kind == MBox::Pair)
    throw EvalError("machine: application of a non-function value");
  if (f.box->kind == MBox::Clo) {
    steps++;  // beta
    return eval_det(f.box->lam->a, env_push(x, f.box->env), steps);
  }
  switch (f.box->prim) {
    case TermKind::Succ: {
      if (!mv_is_nat(x)) throw EvalError("machine: S of a non-numeral");
      // numeral formation, not a reduction step
      if (!x.box) {
        if (x.small != UINT64_MAX) return mv_nat(x.small + 1);
        return mv_big(Int(x.small) + 1);
      }
      return mv_big(Int(x.box->big + 1));
    }
    case TermKind::Proj1:
    case TermKind::Proj2: {
      if (!x.box || x.box->kind != MBox::Pair)
        throw EvalError("machine: projection of a non-pair");
      steps++;
      return f.box->prim == TermKind::Proj1 ? x.box->a : x.box->b;
    }
    case TermKind::Rec: {
      // x = <base, <step, n>>: unfold iteratively; n + 1 rec steps plus
      // whatever the step function applications cost.
      if (!x.box || x.box->kind != MBox::Pair || !x.box->b.box ||
          x.box->b.box->kind != MBox::Pair ||
          !mv_is_nat(x.box->b.box->b))
        throw EvalError("machine: rec of a non-triple");
      const MV& base = x.box->a;
      const MV& stepf = x.box->b.box->a;
      const MV& bound_v = x.box->b.box->b;
      if (bound_v.box)
        throw EvalError("machine: rec bound too large: " +
                        bound_v.box->big.get_str());
      uint64_t bound = bound_v.small;
      steps += bound + 1;
      MV r = base;
      for (uint64_t k = 0; k < bound; k++)
        r = apply2_det(stepf, mv_nat(k), std::move(r), steps);
      return r;
    }
    default:
      throw EvalError("machine: bad primitive");
  }
}

TermPtr readback(const MV& v);

TermPtr readback_body(const TermPtr& t, uint64_t depth, const MEnvPtr& env) {
  if (t->dangling <= depth) return t;  // nothing reaches the environment
  switch (t->kind) {
    case TermKind::BVar:
      return t->index < depth ? t : readback(env_get(env, t->index - depth));
    case TermKind::Lam:
      return mk_lam(t->annot, readback_body(t->a, depth + 1, env));
    case TermKind::App:
      return mk_app(readback_body(t->a, depth, env),
                    readback_body(t->b, depth, env));
    case TermKind::Pair:
      return mk_pair(readback_body(t->a, depth, env),
                     readback_body(t->b, depth, env));
    case TermKind::Choice:
      return mk_choice(readback_body(t->a, depth, env),
                       readback_body(t->b, depth, env));
    default:
      return t;
  }
}

TermPtr readback(const MV& v) {
  if (!v.box) return mk_nat((unsigned long)v.small);
  switch (v.box->kind) {
    case MBox::BigNat:
      return mk_nat(v.box->big);
    case MBox::Pair:
      return mk_pair(readback(v.box->a), readback(v.box->b));
    case MBox::Prim:
      switch (v.box->prim) {
        case TermKind::Succ: return mk_succ();
        case TermKind::Proj1: return mk_proj1();
        case TermKind::Proj2: return mk_proj2();
        case TermKind::Rec: return mk_rec();
        default: throw EvalError("machine: bad primitive readback");
      }
    case MBox::Clo:
      return mk_lam(v.box->lam->annot,
                    readback_body(v.box->lam->a, 1, v.box->env));
  }
  throw EvalError("unreachable");
}

}  // namespace

DetResult normalize_det(const TermPtr& t) {
  if (t->has_prob)
    throw EvalError("normalize_det: term contains a probabilistic construct");
  if (t->has_fvar || t->dangling != 0)
    throw EvalError("normalize_det: term is open");
  uint64_t steps = 0;
  MV v = eval_det(t, nullptr, steps);
  return {readback(v), steps};
}

// ---------------------------------------------------------------------------
// Distribution evaluation

static bool contains_srand(const TermPtr& t) {
  if (!t->has_prob) return false;
  if (t->kind == TermKind::SRand) return true;
  if (t->a && contains_srand(t->a)) return true;
  return t->b && contains_srand(t->b);
}

// Smallest w >= 1 with 2^-w <= budget.
static unsigned width_for_budget(const Rat& budget) {
  if (budget >= 1) return 1;
  Int c;  // ceil(1 / budget)
  mpz_cdiv_q(c.get_mpz_t(), budget.get_den().get_mpz_t(),
             budget.get_num().get_mpz_t());
  size_t w = mpz_sizeinbase(c.get_mpz_t(), 2);  // 2^(w-1) <= c < 2^w
  if (w > 1 && pow2_int((unsigned long)(w - 1)) == c) w--;
  return (unsigned)std::max<size_t>(w, 1);
}

Rat EvalResult::av_length_partial() const {
  Rat sum(0);
  for (const auto& [d, m] : arrival) sum += Rat(Int((unsigned long)d)) * m;
  return sum;
}

EvalResult evaluate(const TermPtr& t, const Budget& b) {
  if (t->has_fvar || t->dangling != 0)
    throw EvalError("evaluate: term is open");
  if (contains_srand(t))
    throw EvalError("evaluate: term uses the staged srand; it only reduces "
                    "under the staged evaluator");

  EvalResult out;
  std::map<uint64_t, Rat> arrived;       // depth -> value mass
  std::map<uint64_t, WeightMap> pending; // scheduled future arrivals
  // Live non-value mass. Lockstep holds the single current round in `live`;
  // worklist keeps a sparse frontier keyed by depth.
  WeightMap live;
  std::map<uint64_t, WeightMap> frontier;
  uint64_t depth = 0;
  uint64_t rand_firings = 0;
  const Rat stop_threshold = b.epsilon / 2;

  auto arrive = [&](uint64_t d, const TermPtr& v, const Rat& m) {
    out.values.add(v, m);
    arrived[d] += m;
  };

  if (is_value(t)) {
    arrive(0, t, Rat(1));
    out.exhausted = true;
  } else if (b.mode == EvalMode::Lockstep) {
    live.emplace(t, Rat(1));
  } else {
    frontier[0].emplace(t, Rat(1));
  }

  auto live_mass = [&]() {
    Rat m(0);
    if (b.mode == EvalMode::Lockstep) {
      for (const auto& [tm, w] : live) m += w;
    } else {
      for (const auto& [d, batch] : frontier)
        for (const auto& [tm, w] : batch) m += w;
    }
    return m;
  };

  auto batch_nonempty = [&]() {
    return b.mode == EvalMode::Lockstep ? !live.empty() : !frontier.empty();
  };

  bool budget_hit = false;
  while (batch_nonempty() || !pending.empty()) {
    // Next depth with work: lockstep walks rounds contiguously while live
    // terms exist; both modes fast-forward through pending-only stretches.
    uint64_t d;
    if (b.mode == EvalMode::Lockstep && !live.empty()) {
      d = depth;
    } else if (b.mode == EvalMode::Worklist && !frontier.empty()) {
      d = frontier.begin()->first;
      if (!pending.empty()) d = std::min(d, pending.begin()->first);
    } else {
      d = pending.begin()->first;
    }

    // Flush arrivals scheduled for this depth.
    for (auto it = pending.begin();
         it != pending.end() && it->first <= d;) {
      for (const auto& [v, m] : it->second) arrive(it->first, v, m);
      it = pending.erase(it);
    }

    // Collect the batch of live terms at depth d.
    WeightMap batch;
    if (b.mode == EvalMode::Lockstep) {
      if (d == depth) batch.swap(live);
    } else {
      auto it = frontier.find(d);
      if (it != frontier.end()) {
        batch.swap(it->second);
        frontier.erase(it);
      }
    }
    if (batch.empty()) {
      if (b.mode == EvalMode::Lockstep && !live.empty()) depth++;
      continue;
    }

    // Stop checks on the live mass (pending arrivals are already decided).
    Rat batch_mass(0);
    for (const auto& [tm, w] : batch) batch_mass += w;
    Rat total_live = batch_mass + live_mass();
    if (total_live <= stop_threshold || d >= b.max_depth ||
        batch.size() > b.max_live) {
      if (total_live > stop_threshold) budget_hit = true;
      out.live_mass = total_live;
      out.max_depth = std::max(out.max_depth, d);
      break;
    }

    // Deterministic processing order: canonical within the batch.
    std::vector<std::pair<TermPtr, Rat>> ordered(batch.begin(), batch.end());
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& x, const auto& y) {
                return term_cmp_canonical(x.first, y.first) < 0;
              });

    auto push_live = [&](uint64_t nd, const TermPtr& tm, const Rat& m) {
      if (b.mode == EvalMode::Lockstep) {
        Rat& slot = live[tm];
        slot += m;
      } else {
        frontier[nd][tm] += m;
      }
    };

    for (const auto& [tm, mass] : ordered) {
      if (b.det_fast_path && !tm->has_prob && !tm->has_fvar) {
        DetResult r = normalize_det(tm);
        pending[d + r.steps][r.value] += mass;
        continue;
      }
      unsigned width = b.rand_width;
      if (width == 0 && sgn(b.epsilon) > 0) {
        Rat slice = b.epsilon *
                    pow2_inv((unsigned)std::min<uint64_t>(rand_firings, 40) + 2);
        width = width_for_budget(slice);
      }
      // width 0 reaches step() only under epsilon <= 0; it throws if (and
      // only if) a rand draw actually fires, so coin-only terms still
      // evaluate exhaustively with a zero budget.
      StepResult sr = step(tm, width);
      if (sr.fired_rand) rand_firings++;
      out.rand_tail += sr.residual * mass;
      for (const auto& [succ, p] : sr.outcomes) {
        Rat m = p * mass;
        if (is_value(succ))
          pending[d + 1][succ] += m;
        else
          push_live(d + 1, succ, m);
      }
    }
    out.max_depth = std::max(out.max_depth, d + 1);
    if (b.mode == EvalMode::Lockstep) depth = d + 1;
  }

  // Whatever remains live is dropped into the residual; pending arrivals are
  // value mass and land regardless of any budget.
  for (const auto& [d2, batch] : pending)
    for (const auto& [v, m] : batch) arrive(d2, v, m);
  out.exhausted = !budget_hit && sgn(out.live_mass) == 0 &&
                  (b.mode == EvalMode::Lockstep ? live.empty()
                                                : frontier.empty());
  out.values.residual = out.rand_tail + out.live_mass;
  out.arrival.assign(arrived.begin(), arrived.end());
  return out;
}

SuccessBounds success(const TermPtr& t, const Budget& b) {
  EvalResult r = evaluate(t, b);
  Rat lower = r.values.mass();
  Rat upper = lower + r.values.residual;
  if (upper > 1) upper = Rat(1);
  return {lower, upper};
}

// ---------------------------------------------------------------------------
// Sampling

namespace {
struct BitSource {
  std::mt19937_64& rng;
  uint64_t buf = 0;
  int left = 0;
  bool bit() {
    if (left == 0) {
      buf = rng();
      left = 64;
    }
    bool b = buf & 1;
    buf >>= 1;
    left--;
    return b;
  }
};
}  // namespace

SampleResult sample(const TermPtr& t, std::mt19937_64& rng,
                    uint64_t max_steps) {
  BitSource bits{rng};
  TermPtr cur = t;
  uint64_t steps = 0;
  while (true) {
    if (is_value(cur)) return {cur, steps};
    if (!cur->has_prob && !cur->has_fvar) {
      DetResult r = normalize_det(cur);
      return {r.value, steps + r.steps};
    }
    if (steps >= max_steps) return {nullptr, steps};
    RedexInfo loc = find_redex(cur);
    switch (loc.kind) {
      case RedexKind::Det:
        cur = plug(loc, contract_det(loc.redex));
        break;
      case RedexKind::Coin:
      case RedexKind::FixDraw: {
        auto [l, r] = branch_outcomes(loc.redex, loc.kind);
        cur = plug(loc, bits.bit() ? r : l);  // 0 -> left, 1 -> right
        break;
      }
      case RedexKind::RandDraw: {
        unsigned long n = 0;
        while (bits.bit()) n++;  // tails counted until the first head
        cur = plug(loc, mk_nat(n));
        break;
      }
      default:
        throw EvalError("sample: stuck term: " + print_term(cur));
    }
    steps++;
  }
}

SampleStats sample_many(const TermPtr& t, uint64_t trials, uint64_t seed,
                        uint64_t max_steps) {
  std::mt19937_64 rng(seed);
  SampleStats st;
  st.trials = trials;
  std::unordered_map<TermPtr, uint64_t, TermHash, TermEq> counts;
  Int total_steps(0);
  for (uint64_t i = 0; i < trials; i++) {
    SampleResult r = sample(t, rng, max_steps);
    if (!r.value) {
      st.capped++;
      continue;
    }
    counts[r.value]++;
    total_steps += (unsigned long)r.steps;
  }
  uint64_t completed = trials - st.capped;
  auto frac = [](const Int& num, uint64_t den) {
    Rat q(num, Int((unsigned long)den));
    q.canonicalize();
    return q;
  };
  for (const auto& [v, c] : counts)
    st.empirical.add(v, frac(Int((unsigned long)c), trials));
  st.empirical.residual = frac(Int((unsigned long)st.capped), trials);
  if (completed > 0) st.mean_steps = frac(total_steps, completed);
  return st;
}

}  // namespace probt
