#include <probt/transforms.hpp>

#include <cstdint>
#include <utility>
#include <vector>

#include <probt/typecheck.hpp>

namespace probt {

namespace {

// Construction shorthands. Translated terms are assembled directly in de
// Bruijn form; where binders stack, a comment lists the environment
// innermost-first (V(0) leftmost).

TermPtr V(uint64_t i) { return mk_bvar(i); }
TermPtr ap(TermPtr f, TermPtr a) { return mk_app(std::move(f), std::move(a)); }
TermPtr ap(TermPtr f, TermPtr a, TermPtr b) {
  return ap(ap(std::move(f), std::move(a)), std::move(b));
}
TermPtr P1(TermPtr t) { return ap(mk_proj1(), std::move(t)); }
TermPtr P2(TermPtr t) { return ap(mk_proj2(), std::move(t)); }
TermPtr suc(TermPtr t) { return ap(mk_succ(), std::move(t)); }
TermPtr nl(unsigned long n) { return mk_nat(n); }
TermPtr lam(TypePtr ty, TermPtr body) {
  return mk_lam(std::move(ty), std::move(body));
}
TermPtr rec3(TermPtr base, TermPtr step, TermPtr bound) {
  return ap(mk_rec(),
            mk_pair(std::move(base), mk_pair(std::move(step), std::move(bound))));
}

// Which probabilistic constants occur in a term.
constexpr unsigned kHasChoice = 1u;
constexpr unsigned kHasRand = 2u;
constexpr unsigned kHasFixRan = 4u;
constexpr unsigned kHasSRand = 8u;

unsigned prob_mask(const TermPtr& t) {
  if (!t || !t->has_prob) return 0;
  switch (t->kind) {
    case TermKind::Choice:
      return kHasChoice | prob_mask(t->a) | prob_mask(t->b);
    case TermKind::Rand:
      return kHasRand;
    case TermKind::FixRan:
      return kHasFixRan;
    case TermKind::SRand:
      return kHasSRand;
    case TermKind::Lam:
      return prob_mask(t->a);
    case TermKind::App:
    case TermKind::Pair:
      return prob_mask(t->a) | prob_mask(t->b);
    default:
      return 0;
  }
}

void require_closed_typed(const TermPtr& t, const char* who) {
  if (!t) throw EvalError(std::string(who) + ": null term");
  if (t->dangling)
    throw EvalError(std::string(who) + ": closed term required");
  infer(t);  // throws TypeError when ill-typed
}

}  // namespace

// ---------------------------------------------------------------------------
// Sugar

namespace sugar {

TermPtr ite(const TypePtr& ty) {
  // \x:(Nat * (ty * ty)). rec <p2 (p2 x), \_:Nat. \_:ty. p1 (p2 x), p1 x>
  // env at the rec step body: _:ty, _:Nat, x
  TermPtr step = lam(ty_nat(), lam(ty, P1(P2(V(2)))));
  return lam(ty_prod(ty_nat(), ty_prod(ty, ty)),
             rec3(P2(P2(V(0))), step, P1(V(0))));
}

TermPtr add(const TermPtr& m, const TermPtr& n) {
  // rec <m, \_ y. S y, n>  -- cost linear in n
  return rec3(m, lam(ty_nat(), lam(ty_nat(), suc(V(0)))), n);
}

TermPtr sub(const TermPtr& m, const TermPtr& n) {
  // rec <m, \_ v. pred v, n> with pred v := rec <0, \p _. p, v>
  TermPtr pred = rec3(nl(0), lam(ty_nat(), lam(ty_nat(), V(1))), V(0));
  return rec3(m, lam(ty_nat(), lam(ty_nat(), pred)), n);
}

TermPtr or_max(const TermPtr& m, const TermPtr& n) {
  // max(m, n) = (m - n) + n
  return add(sub(m, n), n);
}

TermPtr gt(const TermPtr& m, const TermPtr& n) {
  // 1 iff m - n >= 1
  return ap(ite(ty_nat()), mk_pair(sub(m, n), mk_pair(nl(1), nl(0))));
}

TermPtr eq(const TermPtr& m, const TermPtr& n) {
  // 1 iff (m - n) + (n - m) == 0
  return ap(ite(ty_nat()),
            mk_pair(add(sub(m, n), sub(n, m)), mk_pair(nl(0), nl(1))));
}

TermPtr mul(const TermPtr& m, const TermPtr& n) {
  // rec <0, \_ y. y + m, n>; m crosses the two step binders
  return rec3(nl(0), lam(ty_nat(), lam(ty_nat(), add(V(0), shift(m, 2)))), n);
}

TermPtr pow2(const TermPtr& m) {
  // rec <1, \_ y. y + y, m>
  TermPtr dbl = rec3(V(0), lam(ty_nat(), lam(ty_nat(), suc(V(0)))), V(0));
  return rec3(nl(1), lam(ty_nat(), lam(ty_nat(), dbl)), m);
}

TermPtr div2() {
  // One pass carrying <half, parity>; env at the step body: q, _:Nat, x
  TypePtr nn = ty_prod(ty_nat(), ty_nat());
  TermPtr bump = ap(ite(nn), mk_pair(P2(V(0)),
                                     mk_pair(mk_pair(suc(P1(V(0))), nl(0)),
                                             mk_pair(P1(V(0)), nl(1)))));
  TermPtr step = lam(ty_nat(), lam(nn, bump));
  return lam(ty_nat(), P1(rec3(mk_pair(nl(0), nl(0)), step, V(0))));
}

TermPtr mod2() {
  // rec <0, \_ v. ite <v, 0, 1>, x>
  TermPtr flip =
      ap(ite(ty_nat()), mk_pair(V(0), mk_pair(nl(0), nl(1))));
  return lam(ty_nat(),
             rec3(nl(0), lam(ty_nat(), lam(ty_nat(), flip)), V(0)));
}

TermPtr shiftr() {
  // \s \y. rec <s, \a \b. div2 b, y>
  TermPtr step = lam(ty_nat(), lam(ty_nat(), ap(div2(), V(0))));
  return lam(ty_nat(), lam(ty_nat(), rec3(V(1), step, V(0))));
}

TermPtr max_below() {
  // \m \f. rec <0, \x \acc. max(f x, acc), m>; env at the step: acc, x, f, m
  TermPtr step =
      lam(ty_nat(), lam(ty_nat(), or_max(ap(V(2), V(1)), V(0))));
  return lam(ty_nat(), lam(ty_arrow(ty_nat(), ty_nat()),
                           rec3(nl(0), step, V(1))));
}

TermPtr sup_half() {
  // \p:(Nat * Nat). a + a > 2^e  for p = <a, e>
  return lam(ty_prod(ty_nat(), ty_nat()),
             gt(add(P1(V(0)), P1(V(0))), pow2(P2(V(0)))));
}

TermPtr sup_zero() {
  return lam(ty_prod(ty_nat(), ty_nat()), gt(P1(V(0)), nl(0)));
}

}  // namespace sugar

// ---------------------------------------------------------------------------
// Operator encodings

namespace {

TermPtr enc_choice_walk(const TermPtr& t, std::vector<TypePtr>& benv,
                        ChoiceTarget tgt) {
  switch (t->kind) {
    case TermKind::Lam: {
      benv.push_back(t->annot);
      TermPtr b = enc_choice_walk(t->a, benv, tgt);
      benv.pop_back();
      return b == t->a ? t : mk_lam(t->annot, b);
    }
    case TermKind::App:
    case TermKind::Pair: {
      TermPtr a = enc_choice_walk(t->a, benv, tgt);
      TermPtr b = enc_choice_walk(t->b, benv, tgt);
      if (a == t->a && b == t->b) return t;
      return t->kind == TermKind::App ? mk_app(a, b) : mk_pair(a, b);
    }
    case TermKind::Choice: {
      TermPtr l = enc_choice_walk(t->a, benv, tgt);
      TermPtr r = enc_choice_walk(t->b, benv, tgt);
      TypePtr alpha = infer_open(l, benv);
      if (tgt == ChoiceTarget::Rand) {
        // rec <\z:Nat. r, \x:Nat. \y:(Nat->alpha). \z:Nat. l, rand> 0
        TermPtr base = lam(ty_nat(), shift(r, 1));
        TermPtr step = lam(
            ty_nat(),
            lam(ty_arrow(ty_nat(), alpha), lam(ty_nat(), shift(l, 3))));
        return ap(rec3(base, step, mk_rand()), nl(0));
      }
      // fixr <\x:(Nat->alpha). \y:Nat. l, \y:Nat. r> 0
      TermPtr v = lam(ty_arrow(ty_nat(), alpha), lam(ty_nat(), shift(l, 2)));
      TermPtr w = lam(ty_nat(), shift(r, 1));
      return ap(ap(mk_fixran(), mk_pair(v, w)), nl(0));
    }
    default:
      return t;
  }
}

TermPtr map_rand_to_fixgeo(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Rand:
      return ap(mk_fixran(), mk_pair(mk_succ(), nl(0)));
    case TermKind::Lam: {
      TermPtr b = map_rand_to_fixgeo(t->a);
      return b == t->a ? t : mk_lam(t->annot, b);
    }
    case TermKind::App:
    case TermKind::Pair:
    case TermKind::Choice: {
      TermPtr a = map_rand_to_fixgeo(t->a);
      TermPtr b = map_rand_to_fixgeo(t->b);
      if (a == t->a && b == t->b) return t;
      if (t->kind == TermKind::App) return mk_app(a, b);
      if (t->kind == TermKind::Pair) return mk_pair(a, b);
      return mk_choice(a, b);
    }
    default:
      return t;
  }
}

TermPtr enc_fix_walk(const TermPtr& t, std::vector<TypePtr>& benv) {
  switch (t->kind) {
    case TermKind::FixRan:
      throw EvalError(
          "encode_fixran_via_rand: fixr outside application position");
    case TermKind::Lam: {
      benv.push_back(t->annot);
      TermPtr b = enc_fix_walk(t->a, benv);
      benv.pop_back();
      return b == t->a ? t : mk_lam(t->annot, b);
    }
    case TermKind::App: {
      if (t->a->kind == TermKind::FixRan) {
        TermPtr p = enc_fix_walk(t->b, benv);
        TypePtr tp = infer_open(p, benv);
        // (\x:(alpha->alpha)*alpha. rec <p2 x, \z:Nat. p1 x, rand>) p
        // (inside the step lambda the pair sits one binder out: V(1))
        TermPtr body = rec3(P2(V(0)), lam(ty_nat(), P1(V(1))), mk_rand());
        return ap(lam(tp, body), p);
      }
      TermPtr a = enc_fix_walk(t->a, benv);
      TermPtr b = enc_fix_walk(t->b, benv);
      if (a == t->a && b == t->b) return t;
      return mk_app(a, b);
    }
    case TermKind::Pair:
    case TermKind::Choice: {
      TermPtr a = enc_fix_walk(t->a, benv);
      TermPtr b = enc_fix_walk(t->b, benv);
      if (a == t->a && b == t->b) return t;
      return t->kind == TermKind::Pair ? mk_pair(a, b) : mk_choice(a, b);
    }
    default:
      return t;
  }
}

}  // namespace

TermPtr encode_choice(const TermPtr& t, ChoiceTarget target) {
  require_closed_typed(t, "encode_choice");
  unsigned mask = prob_mask(t);
  if (mask & kHasSRand)
    throw EvalError("encode_choice: bounded-draw constant not supported");
  if (target == ChoiceTarget::Rand && (mask & kHasRand))
    throw EvalError(
        "encode_choice: target constant rand already occurs in the input");
  if (target == ChoiceTarget::FixRan && (mask & kHasFixRan))
    throw EvalError(
        "encode_choice: target constant fixr already occurs in the input");
  std::vector<TypePtr> benv;
  return enc_choice_walk(t, benv, target);
}

TermPtr encode_rand_via_fixran(const TermPtr& t) {
  require_closed_typed(t, "encode_rand_via_fixran");
  unsigned mask = prob_mask(t);
  if (mask & kHasSRand)
    throw EvalError(
        "encode_rand_via_fixran: bounded-draw constant not supported");
  if (mask & kHasFixRan)
    throw EvalError(
        "encode_rand_via_fixran: target constant fixr already occurs in the "
        "input");
  return map_rand_to_fixgeo(t);
}

TermPtr encode_fixran_via_rand(const TermPtr& t) {
  require_closed_typed(t, "encode_fixran_via_rand");
  unsigned mask = prob_mask(t);
  if (mask & kHasSRand)
    throw EvalError(
        "encode_fixran_via_rand: bounded-draw constant not supported");
  if (mask & kHasRand)
    throw EvalError(
        "encode_fixran_via_rand: target constant rand already occurs in the "
        "input");
  std::vector<TypePtr> benv;
  return enc_fix_walk(t, benv);
}

// ---------------------------------------------------------------------------
// Monadic translations (shared walk, two instantiations)

TypePtr lift_ty_val(const TypePtr& ty) {
  switch (ty->kind) {
    case TypeKind::Nat:
      return ty_nat();
    case TypeKind::Arrow:
      return ty_arrow(lift_ty_val(ty->a), lift_ty_comp(ty->b));
    case TypeKind::Prod:
      return ty_prod(lift_ty_val(ty->a), lift_ty_val(ty->b));
  }
  throw EvalError("lift_ty_val: unknown type");
}

TypePtr lift_ty_comp(const TypePtr& ty) {
  return ty_prod(ty_arrow(ty_nat(), lift_ty_val(ty)), ty_nat());
}

TypePtr state_ty() {
  return ty_prod(ty_nat(), ty_prod(ty_nat(), ty_nat()));
}

TypePtr approx_ty_val(const TypePtr& ty) {
  switch (ty->kind) {
    case TypeKind::Nat:
      return ty_nat();
    case TypeKind::Arrow:
      return ty_arrow(approx_ty_val(ty->a), approx_ty_comp(ty->b));
    case TypeKind::Prod:
      return ty_prod(approx_ty_val(ty->a), approx_ty_val(ty->b));
  }
  throw EvalError("approx_ty_val: unknown type");
}

TypePtr approx_ty_comp(const TypePtr& ty) {
  return ty_arrow(state_ty(), ty_prod(approx_ty_val(ty), state_ty()));
}

namespace {

// --- seed-counting instance -------------------------------------------------

TermPtr lift_ret(const TypePtr& alpha) {
  // \x:|alpha|. <\y:Nat. x, 0>
  return lam(lift_ty_val(alpha), mk_pair(lam(ty_nat(), V(1)), nl(0)));
}

TermPtr shr(TermPtr s, TermPtr y) {
  return ap(sugar::shiftr(), std::move(s), std::move(y));
}

TermPtr lift_bind(const TypePtr& alpha, const TypePtr& beta) {
  // \m:<<alpha->beta>>. \n:<<alpha>>. <branch, count>
  //
  // branch = \s. p1 ((p1 m) s ((p1 n) (s >> p2 m))) (s >> (p2 m + p2 n))
  //   env inside: s, n, m
  TermPtr run =
      ap(P1(ap(ap(P1(V(2)), V(0)), ap(P1(V(1)), shr(V(0), P2(V(2)))))),
         shr(V(0), sugar::add(P2(V(2)), P2(V(1)))));
  TermPtr branch = lam(ty_nat(), run);

  // count = (p2 m + p2 n) + max_below (2^(p2 m)) (\x. max_below (2^(p2 n))
  //           (\y. p2 ((p1 m) x ((p1 n) y))))
  //   env inside \y: y, x, n, m;  inside \x: x, n, m
  TermPtr body = P2(ap(ap(P1(V(3)), V(1)), ap(P1(V(2)), V(0))));
  TermPtr inner = ap(sugar::max_below(), sugar::pow2(P2(V(1))),
                     lam(ty_nat(), body));
  TermPtr outer = ap(sugar::max_below(), sugar::pow2(P2(V(1))),
                     lam(ty_nat(), inner));
  TermPtr count = sugar::add(sugar::add(P2(V(1)), P2(V(0))), outer);

  return lam(lift_ty_comp(ty_arrow(alpha, beta)),
             lam(lift_ty_comp(alpha), mk_pair(branch, count)));
}

TermPtr lift_choose(const TypePtr& alpha) {
  // \a \b. <\s. ite <mod2 s, (p1 a) (div2 s), (p1 b) (div2 s)>,
  //         S (max(p2 a, p2 b))>
  // Odd seed bit selects the left operand. env inside branch: s, b, a
  TypePtr c = lift_ty_comp(alpha);
  TermPtr sel =
      ap(sugar::ite(lift_ty_val(alpha)),
         mk_pair(ap(sugar::mod2(), V(0)),
                 mk_pair(ap(P1(V(2)), ap(sugar::div2(), V(0))),
                         ap(P1(V(1)), ap(sugar::div2(), V(0))))));
  TermPtr count = suc(sugar::or_max(P2(V(1)), P2(V(0))));
  return lam(c, lam(c, mk_pair(lam(ty_nat(), sel), count)));
}

// --- state-threading instance ------------------------------------------------

TermPtr st_ret(const TypePtr& alpha) {
  return lam(approx_ty_val(alpha), lam(state_ty(), mk_pair(V(1), V(0))));
}

TermPtr st_bind(const TypePtr& alpha, const TypePtr& beta) {
  // \m \n \s1. (\p2. (\p3. (p1 p2) (p1 p3) (p2 p3)) (n (p2 p2))) (m s1)
  TypePtr fv = approx_ty_val(ty_arrow(alpha, beta));
  TypePtr av = approx_ty_val(alpha);
  TermPtr take_arg =
      lam(ty_prod(av, state_ty()),
          ap(ap(P1(V(1)), P1(V(0))), P2(V(0))));        // env: p3, p2, ...
  TermPtr take_fun =
      lam(ty_prod(fv, state_ty()),
          ap(take_arg, ap(V(2), P2(V(0)))));            // env: p2, s1, n, m
  TermPtr body = ap(take_fun, ap(V(2), V(0)));          // env: s1, n, m
  return lam(approx_ty_comp(ty_arrow(alpha, beta)),
             lam(approx_ty_comp(alpha), lam(state_ty(), body)));
}

TermPtr st_choose(const TypePtr& alpha) {
  TypePtr c = approx_ty_comp(alpha);
  return lam(
      c, lam(c, lam(state_ty(),
                    mk_choice(ap(V(2), V(0)), ap(V(1), V(0))))));
}

TermPtr st_draw() {
  // \s:St. (rec <fail, step, p1 (p2 s)>) (bump s)
  //
  // fail leaves a junk value and raises the flag; step is one coin level of
  // the cascade; bump escalates the threshold before the draw so a failure
  // leaves the escalated state behind.
  TypePtr st = state_ty();
  TypePtr res = ty_prod(ty_nat(), st);
  TermPtr fail = lam(st, mk_pair(nl(0), mk_pair(nl(1), P2(V(0)))));
  TermPtr wrap = lam(res, mk_pair(suc(P1(V(0))), P2(V(0))));
  TermPtr step =
      lam(ty_nat(),
          lam(ty_arrow(st, res),
              lam(st, mk_choice(mk_pair(nl(0), V(0)),
                                ap(wrap, ap(V(1), V(0)))))));
  TermPtr bump =
      mk_pair(P1(V(0)), mk_pair(sugar::add(P1(P2(V(0))), P2(P2(V(0)))),
                                P2(P2(V(0)))));
  return lam(st, ap(rec3(fail, step, P1(P2(V(0)))), bump));
}

// --- shared walk --------------------------------------------------------------

struct MonadOps {
  TypePtr (*ty_val)(const TypePtr&);
  TypePtr (*ty_comp)(const TypePtr&);
  TermPtr (*ret)(const TypePtr&);
  TermPtr (*bind)(const TypePtr&, const TypePtr&);
  TermPtr (*choose)(const TypePtr&);
  TermPtr (*draw)();  // null when draws are outside the fragment
};

const MonadOps kLiftOps{lift_ty_val, lift_ty_comp, lift_ret,
                        lift_bind,   lift_choose,  nullptr};
const MonadOps kStateOps{approx_ty_val, approx_ty_comp, st_ret,
                         st_bind,       st_choose,      st_draw};

TermPtr generic_succ_val(const MonadOps& M) {
  return lam(ty_nat(), ap(M.ret(ty_nat()), suc(V(0))));
}

TermPtr generic_proj_val(const MonadOps& M, bool first, const TypePtr& pa) {
  TypePtr comp = first ? pa->a : pa->b;
  return lam(M.ty_val(pa),
             ap(M.ret(comp), ap(first ? mk_proj1() : mk_proj2(), V(0))));
}

TermPtr generic_rec_val(const MonadOps& M, const TypePtr& alpha) {
  // \p. rec <ret (p1 p), \x:Nat. \y. bind ((p1 (p2 p)) x) y, p2 (p2 p)>
  //   env at the step body: y, x, p
  TypePtr triple = ty_prod(
      alpha, ty_prod(ty_arrow(ty_nat(), ty_arrow(alpha, alpha)), ty_nat()));
  TermPtr stepb = ap(M.bind(alpha, alpha), ap(P1(P2(V(2))), V(1)), V(0));
  TermPtr step = lam(ty_nat(), lam(M.ty_comp(alpha), stepb));
  TermPtr body = rec3(ap(M.ret(alpha), P1(V(0))), step, P2(P2(V(0))));
  return lam(M.ty_val(triple), body);
}

// Values of the source calculus extended with variables (binders only ever
// bind values under call-by-value).
bool is_tr_value(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::BVar:
    case TermKind::FVar:
    case TermKind::Lam:
    case TermKind::NatLit:
    case TermKind::Succ:
    case TermKind::Proj1:
    case TermKind::Proj2:
    case TermKind::Rec:
      return true;
    case TermKind::Pair:
      return is_tr_value(t->a) && is_tr_value(t->b);
    case TermKind::App:
      return t->a->kind == TermKind::Succ && is_tr_value(t->b);
    default:
      return false;
  }
}

TermPtr tr_comp(const MonadOps& M, const TermPtr& t,
                std::vector<TypePtr>& benv);

TermPtr tr_val(const MonadOps& M, const TermPtr& t,
               std::vector<TypePtr>& benv) {
  switch (t->kind) {
    case TermKind::BVar:
    case TermKind::FVar:
    case TermKind::NatLit:
      return t;
    case TermKind::Succ:
      return generic_succ_val(M);
    case TermKind::Lam: {
      benv.push_back(t->annot);
      TermPtr b = tr_comp(M, t->a, benv);
      benv.pop_back();
      return lam(M.ty_val(t->annot), b);
    }
    case TermKind::Pair:
      return mk_pair(tr_val(M, t->a, benv), tr_val(M, t->b, benv));
    case TermKind::App:  // S V
      return suc(tr_val(M, t->b, benv));
    default:
      throw EvalError("translation: value outside the fragment");
  }
}

TermPtr tr_comp(const MonadOps& M, const TermPtr& t,
                std::vector<TypePtr>& benv) {
  if (is_tr_value(t)) {
    TypePtr a = infer_open(t, benv);
    return ap(M.ret(a), tr_val(M, t, benv));
  }
  switch (t->kind) {
    case TermKind::Rand:
      if (M.draw) return M.draw();
      throw EvalError("translation: rand outside the coin-flip fragment");
    case TermKind::App: {
      const TermPtr& f = t->a;
      if (f->kind == TermKind::Proj1 || f->kind == TermKind::Proj2) {
        TypePtr pa = infer_open(t->b, benv);
        TypePtr comp = f->kind == TermKind::Proj1 ? pa->a : pa->b;
        TermPtr rf = ap(M.ret(ty_arrow(pa, comp)),
                        generic_proj_val(M, f->kind == TermKind::Proj1, pa));
        return ap(M.bind(pa, comp), rf, tr_comp(M, t->b, benv));
      }
      if (f->kind == TermKind::Rec) {
        TypePtr ta = infer_open(t->b, benv);
        TypePtr alpha = ta->a;
        TermPtr rf =
            ap(M.ret(ty_arrow(ta, alpha)), generic_rec_val(M, alpha));
        return ap(M.bind(ta, alpha), rf, tr_comp(M, t->b, benv));
      }
      TypePtr tf = infer_open(f, benv);
      return ap(M.bind(tf->a, tf->b), tr_comp(M, f, benv),
                tr_comp(M, t->b, benv));
    }
    case TermKind::Choice: {
      TypePtr alpha = infer_open(t->a, benv);
      return ap(M.choose(alpha), tr_comp(M, t->a, benv),
                tr_comp(M, t->b, benv));
    }
    case TermKind::Pair: {
      // Non-value pair: evaluate left then right through an application
      // chain, preserving the operational order.
      TypePtr ta = infer_open(t->a, benv);
      TypePtr tb = infer_open(t->b, benv);
      TermPtr mk = lam(ta, lam(tb, mk_pair(V(1), V(0))));
      TermPtr desugared = ap(mk, t->a, t->b);
      return tr_comp(M, desugared, benv);
    }
    default:
      throw EvalError("translation: construct outside the fragment");
  }
}

}  // namespace

TermPtr lift_plus_to_t(const TermPtr& t) {
  require_closed_typed(t, "lift_plus_to_t");
  unsigned mask = prob_mask(t);
  if (mask & (kHasRand | kHasFixRan | kHasSRand))
    throw EvalError(
        "lift_plus_to_t: coin-flip programs only (encode rand/fixr away "
        "first)");
  std::vector<TypePtr> benv;
  return tr_comp(kLiftOps, t, benv);
}

// ---------------------------------------------------------------------------
// Finite representation

namespace {

// (\g:<<Nat>>. <count of seeds below 2^(p2 g) whose branch value equals the
// numeral bound k_idx binders out at the call site, p2 g>) gbody
TermPtr count_matches(const TermPtr& gbody, uint64_t k_idx) {
  // env at the loop step: cnt, s, g (+3); one more binder b inside the test
  TermPtr test = ap(lam(ty_nat(), sugar::eq(V(0), V(k_idx + 4))),
                    ap(P1(V(2)), V(1)));
  TermPtr sel =
      ap(sugar::ite(ty_nat()), mk_pair(test, mk_pair(suc(V(0)), V(0))));
  TermPtr loop = rec3(nl(0), lam(ty_nat(), lam(ty_nat(), sel)),
                      sugar::pow2(P2(V(0))));
  return ap(lam(lift_ty_comp(ty_nat()), mk_pair(loop, P2(V(0)))), gbody);
}

// (\g:<<Nat>>. S (max of branch values over all seeds below 2^(p2 g))) gbody
TermPtr support_bound(const TermPtr& gbody) {
  TermPtr loop =
      rec3(nl(0),
           lam(ty_nat(),
               lam(ty_nat(), sugar::or_max(ap(P1(V(2)), V(1)), V(0)))),
           sugar::pow2(P2(V(0))));
  return ap(lam(lift_ty_comp(ty_nat()), suc(loop)), gbody);
}

TermPtr ret_nat_of(TermPtr x) {
  return ap(lift_ret(ty_nat()), std::move(x));
}

}  // namespace

FiniteRep finite_rep(const TermPtr& t) {
  require_closed_typed(t, "finite_rep");
  TypePtr ty = infer(t);
  if (!type_eq(ty, ty_arrow(ty_nat(), ty_nat())))
    throw EvalError("finite_rep: program of type Nat -> Nat required");
  TermPtr L = lift_plus_to_t(t);
  TermPtr bindNN = lift_bind(ty_nat(), ty_nat());
  // F = \n \k. ..., G built with n one binder out (under \k)
  TermPtr F = lam(ty_nat(),
                  lam(ty_nat(), count_matches(
                                    ap(bindNN, L, ret_nat_of(V(1))), 0)));
  TermPtr Q =
      lam(ty_nat(), support_bound(ap(bindNN, L, ret_nat_of(V(0)))));
  return {F, Q};
}

FiniteRep finite_rep2(const TermPtr& t) {
  require_closed_typed(t, "finite_rep2");
  TypePtr ty = infer(t);
  TypePtr expect =
      ty_arrow(ty_nat(), ty_arrow(ty_nat(), ty_nat()));
  if (!type_eq(ty, expect))
    throw EvalError("finite_rep2: program of type Nat -> Nat -> Nat required");
  TermPtr L = lift_plus_to_t(t);
  TermPtr bindA = lift_bind(ty_nat(), ty_arrow(ty_nat(), ty_nat()));
  TermPtr bindB = lift_bind(ty_nat(), ty_nat());
  auto applied = [&](TermPtr mT, TermPtr nT) {
    return ap(bindB, ap(bindA, L, ret_nat_of(std::move(mT))),
              ret_nat_of(std::move(nT)));
  };
  TermPtr F = lam(
      ty_nat(),
      lam(ty_nat(),
          lam(ty_nat(), count_matches(applied(V(2), V(1)), 0))));
  TermPtr Q = lam(ty_nat(),
                  lam(ty_nat(), support_bound(applied(V(1), V(0)))));
  return {F, Q};
}

Rat read_dyadic(const TermPtr& v) {
  if (!v || v->kind != TermKind::Pair)
    throw EvalError("read_dyadic: normalized pair <a, e> required");
  auto a = as_nat(v->a);
  auto e = as_nat(v->b);
  if (!a || !e)
    throw EvalError("read_dyadic: pair components must be numerals");
  if (!e->fits_ulong_p())
    throw EvalError("read_dyadic: exponent out of range");
  return Rat(*a) * pow2_inv(e->get_ui());
}

// ---------------------------------------------------------------------------
// Approximant

TermPtr approximant(const TermPtr& t) {
  require_closed_typed(t, "approximant");
  TypePtr ty = infer(t);
  unsigned mask = prob_mask(t);
  if (mask & kHasFixRan)
    throw EvalError(
        "approximant: fixr not supported directly; encode it via rand first");
  if (mask & kHasSRand)
    throw EvalError("approximant: bounded-draw constant not supported");

  std::vector<TypePtr> benv;
  TermPtr body = tr_comp(kStateOps, t, benv);
  TypePtr st = state_ty();
  // \q:(Nat * St). rec <p1 q, \_ \_. 0, p1 (p2 q)>: the value unless the
  // failure flag is raised, 0 otherwise.
  TermPtr collapse =
      lam(ty_prod(ty_nat(), st),
          rec3(P1(V(0)), lam(ty_nat(), lam(ty_nat(), nl(0))),
               P1(P2(V(0)))));
  TermPtr init = mk_pair(nl(0), mk_pair(V(0), V(0)));

  if (ty->kind == TypeKind::Nat)
    return lam(ty_nat(), ap(collapse, ap(body, init)));
  if (ty->kind == TypeKind::Arrow && ty->a->kind == TypeKind::Nat &&
      ty->b->kind == TypeKind::Nat) {
    TermPtr applied = ap(st_bind(ty_nat(), ty_nat()), body,
                         ap(st_ret(ty_nat()), V(1)));
    return lam(ty_nat(), lam(ty_nat(), ap(collapse, ap(applied, init))));
  }
  throw EvalError("approximant: program of type Nat or Nat -> Nat required");
}

// ---------------------------------------------------------------------------
// Derandomizers

namespace {

void require_margin(const TermPtr& h) {
  require_closed_typed(h, "derandomize: margin bound");
  if (prob_mask(h))
    throw EvalError("derandomize: margin bound must be a pure T program");
  if (!type_eq(infer(h), ty_arrow(ty_nat(), ty_nat())))
    throw EvalError("derandomize: margin bound of type Nat -> Nat required");
}

// rec <0, \k \y. ite <test, k, y>, bound>: the unique index passing the
// threshold test, or 0 when none does.
TermPtr pick_loop(TermPtr test, TermPtr bound) {
  TermPtr sel = ap(sugar::ite(ty_nat()),
                   mk_pair(std::move(test), mk_pair(V(1), V(0))));
  return rec3(nl(0), lam(ty_nat(), lam(ty_nat(), sel)), std::move(bound));
}

}  // namespace

TermPtr derandomize_mc(const TermPtr& t, const TermPtr& h) {
  if (!h) {
    FiniteRep fr = finite_rep(t);
    // \n. pick k < Q n with weight(t n = k) > 1/2; step env: y, k, n
    TermPtr test = ap(sugar::sup_half(), ap(fr.F, V(2), V(1)));
    return lam(ty_nat(), pick_loop(test, ap(fr.Q, V(0))));
  }
  require_margin(h);
  require_closed_typed(t, "derandomize_mc");
  if (!type_eq(infer(t), ty_arrow(ty_nat(), ty_nat())))
    throw EvalError("derandomize_mc: program of type Nat -> Nat required");
  FiniteRep fr = finite_rep2(approximant(t));
  // \m. (\np. pick k < Q m np with approximated weight > 1/2) (2 * h m)
  //   step env: y, k, np, m
  TermPtr test = ap(sugar::sup_half(), ap(ap(fr.F, V(3), V(2)), V(1)));
  TermPtr loop = pick_loop(test, ap(fr.Q, V(1), V(0)));
  return lam(ty_nat(),
             ap(lam(ty_nat(), loop), sugar::mul(nl(2), ap(h, V(0)))));
}

TermPtr derandomize_lv(const TermPtr& t, const TermPtr& h) {
  if (!h) {
    FiniteRep fr = finite_rep(t);
    // \n. pick k < Q n with weight(t n = S k) > 0; step env: y, k, n
    TermPtr test = ap(sugar::sup_zero(), ap(fr.F, V(2), suc(V(1))));
    return lam(ty_nat(), pick_loop(test, ap(fr.Q, V(0))));
  }
  require_margin(h);
  require_closed_typed(t, "derandomize_lv");
  if (!type_eq(infer(t), ty_arrow(ty_nat(), ty_nat())))
    throw EvalError("derandomize_lv: program of type Nat -> Nat required");
  FiniteRep fr = finite_rep2(approximant(t));
  // \m. (\np. pick k < Q m np with h m * approximated weight of S k > 1/2,
  // i.e. weight > 1/(2 h m)) (2 * h m); step env: y, k, np, m
  TermPtr scale =
      lam(ty_nat(),
          lam(ty_prod(ty_nat(), ty_nat()),
              mk_pair(sugar::mul(V(1), P1(V(0))), P2(V(0)))));
  TermPtr scaled = ap(scale, ap(h, V(3)), ap(ap(fr.F, V(3), V(2)), suc(V(1))));
  TermPtr test = ap(sugar::sup_half(), scaled);
  TermPtr loop = pick_loop(test, ap(fr.Q, V(1), V(0)));
  return lam(ty_nat(),
             ap(lam(ty_nat(), loop), sugar::mul(nl(2), ap(h, V(0)))));
}

}  // namespace probt
