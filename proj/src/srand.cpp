#include <probt/srand.hpp>

#include <utility>
#include <vector>

namespace probt {

// ---------------------------------------------------------------------------
// Config containers

static size_t mix_u64(size_t h, uint64_t v) {
  // splitmix-style combine, matching the term hashing style.
  uint64_t x = (uint64_t)h ^ (v + 0x9e3779b97f4a7c15ULL + ((uint64_t)h << 6) +
                              ((uint64_t)h >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return (size_t)x;
}

size_t ConfigHash::operator()(const Config& c) const {
  return mix_u64(mix_u64(c.term->hash, c.m), c.n);
}

bool ConfigEq::operator()(const Config& a, const Config& b) const {
  return a.m == b.m && a.n == b.n && term_eq(a.term, b.term);
}

void ConfigDist::add(const Config& c, const Rat& p) {
  if (sgn(p) == 0) return;
  weights[c] += p;
}

Rat ConfigDist::mass() const {
  Rat s(0);
  for (const auto& [c, p] : weights) s += p;
  return s;
}

// ---------------------------------------------------------------------------
// star: substitute the bounded draw for every rand

static TermPtr star_rec(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Rand:
      return mk_srand();
    case TermKind::FixRan:
      throw EvalError("star: fixr is outside the bounded-draw fragment");
    case TermKind::SRand:
      throw EvalError("star: input already contains srand");
    case TermKind::Lam: {
      TermPtr body = star_rec(t->a);
      return body == t->a ? t : mk_lam(t->annot, body);
    }
    case TermKind::App:
    case TermKind::Pair:
    case TermKind::Choice: {
      TermPtr a = star_rec(t->a), b = star_rec(t->b);
      if (a == t->a && b == t->b) return t;
      if (t->kind == TermKind::App) return mk_app(a, b);
      if (t->kind == TermKind::Pair) return mk_pair(a, b);
      return mk_choice(a, b);
    }
    default:
      return t;  // leaves
  }
}

TermPtr star(const TermPtr& t) { return star_rec(t); }

// ---------------------------------------------------------------------------
// Lockstep evaluation with draw registers

SRandResult eval_srand(const Config& start, const Budget& b) {
  if (!start.term) throw EvalError("eval_srand: null term");
  if (start.term->dangling || start.term->has_fvar)
    throw EvalError("eval_srand: term must be closed: " +
                    print_term(start.term));
  if (start.m < 1 || start.n < 1)
    throw EvalError("eval_srand: registers must be at least 1");

  SRandResult out;
  using Batch = std::unordered_map<Config, Rat, ConfigHash, ConfigEq>;
  Batch live;
  Rat live_mass(0);

  auto feed = [&](const Config& c, const Rat& p, Batch& next) {
    if (sgn(p) == 0) return;
    if (is_value(c.term)) {
      out.values.add(c, p);
    } else {
      next[c] += p;
      live_mass += p;
    }
  };

  {
    Batch init;
    live_mass = 0;
    feed(start, Rat(1), init);
    live = std::move(init);
  }

  Rat half_eps = b.epsilon / 2;
  uint64_t depth = 0;
  bool budget_hit = false;

  while (!live.empty()) {
    if (live_mass <= half_eps) break;  // certified small remainder
    if (depth >= b.max_depth || live.size() > b.max_live) {
      budget_hit = true;
      break;
    }
    depth++;

    Batch next;
    live_mass = 0;  // re-accumulated by feed as configs stay live

    for (const auto& [c, p] : live) {
      if (b.det_fast_path && !c.term->has_prob) {
        DetResult d = normalize_det(c.term);
        out.values.add({d.value, c.m, c.n}, p);
        continue;
      }
      RedexInfo loc = find_redex(c.term);
      switch (loc.kind) {
        case RedexKind::Det:
          feed({plug(loc, contract_det(loc.redex)), c.m, c.n}, p, next);
          break;
        case RedexKind::Coin: {
          auto [l, r] = branch_outcomes(loc.redex, loc.kind);
          Rat half = p / 2;
          feed({plug(loc, l), c.m, c.n}, half, next);
          feed({plug(loc, r), c.m, c.n}, half, next);
          break;
        }
        case RedexKind::Stuck:
          if (loc.redex->kind == TermKind::SRand) {
            // (k, m+n, n) with probability 1/2^(k+1) for k < m; the tail
            // 1/2^m fails.
            for (uint64_t k = 0; k < c.m; k++)
              feed({plug(loc, mk_nat((unsigned long)k)), c.m + c.n, c.n},
                   p * pow2_inv((unsigned)(k + 1)), next);
            out.values.failure += p * pow2_inv((unsigned)c.m);
            break;
          }
          throw EvalError("eval_srand: stuck term (no rule applies to '" +
                          print_term(loc.redex) +
                          "') in: " + print_term(c.term));
        case RedexKind::RandDraw:
          throw EvalError(
              "eval_srand: unbounded rand present; apply star first");
        case RedexKind::FixDraw:
          throw EvalError(
              "eval_srand: fixr is outside the bounded-draw fragment");
        case RedexKind::None:
          throw EvalError("unreachable: value in live set");
      }
    }
    live = std::move(next);
  }

  out.residual = live_mass;
  out.exhausted = !budget_hit && sgn(live_mass) == 0;
  out.max_depth = depth;
  return out;
}

Rat success_mass(const SRandResult& r) { return r.values.mass(); }

Dist erase_state(const SRandResult& r) {
  Dist d;
  for (const auto& [c, p] : r.values.weights) d.add(c.term, p);
  d.residual = r.values.failure + r.residual;
  return d;
}

Rat success_product_bound(uint64_t m, uint64_t n, unsigned terms) {
  Rat prod(1);
  for (unsigned k = 0; k < terms; k++) {
    uint64_t expo = m + (uint64_t)k * n;
    if (expo > 4096) break;  // further factors change nothing detectable
    prod *= Rat(1) - pow2_inv((unsigned)expo);
  }
  return prod;
}

}  // namespace probt
