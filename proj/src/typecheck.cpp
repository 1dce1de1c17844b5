#include <probt/typecheck.hpp>

namespace probt {

static TypeError err(const TermPtr& t, const std::string& msg) {
  return TypeError("type error: " + msg + "\n  in: " + print_term(t));
}

static TypePtr infer_rec(const TermPtr& t, std::vector<TypePtr>& benv,
                         const FvarEnv& fenv) {
  switch (t->kind) {
    case TermKind::BVar:
      if (t->index >= benv.size()) throw err(t, "loose bound variable");
      return benv[benv.size() - 1 - t->index];
    case TermKind::FVar: {
      auto it = fenv.find(t->name);
      if (it == fenv.end())
        throw err(t, "free variable '" + t->name + "' has no declared type");
      return it->second;
    }
    case TermKind::NatLit:
    case TermKind::Rand:
    case TermKind::SRand:
      return ty_nat();
    case TermKind::Succ:
      return ty_arrow(ty_nat(), ty_nat());
    case TermKind::Lam: {
      benv.push_back(t->annot);
      TypePtr body = infer_rec(t->a, benv, fenv);
      benv.pop_back();
      return ty_arrow(t->annot, body);
    }
    case TermKind::Pair:
      return ty_prod(infer_rec(t->a, benv, fenv), infer_rec(t->b, benv, fenv));
    case TermKind::Choice: {
      TypePtr l = infer_rec(t->a, benv, fenv);
      TypePtr r = infer_rec(t->b, benv, fenv);
      if (!type_eq(l, r))
        throw err(t, "the branches of (+) have different types: " +
                         print_type(l) + " vs " + print_type(r));
      return l;
    }
    case TermKind::Proj1:
    case TermKind::Proj2:
    case TermKind::Rec:
    case TermKind::FixRan:
      throw err(t, "'" + print_term(t) +
                       "' is type-schematic and is only typable in the "
                       "function position of an application");
    case TermKind::App: {
      TypePtr arg = infer_rec(t->b, benv, fenv);
      switch (t->a->kind) {
        case TermKind::Succ:
          if (arg->kind != TypeKind::Nat)
            throw err(t, "S expects a Nat, got " + print_type(arg));
          return ty_nat();
        case TermKind::Proj1:
        case TermKind::Proj2: {
          if (arg->kind != TypeKind::Prod)
            throw err(t, "projection of a non-pair of type " + print_type(arg));
          return t->a->kind == TermKind::Proj1 ? arg->a : arg->b;
        }
        case TermKind::Rec: {
          // α * ((Nat -> α -> α) * Nat)
          if (arg->kind != TypeKind::Prod || arg->b->kind != TypeKind::Prod)
            throw err(t, "rec expects a triple <base, step, bound>, got " +
                             print_type(arg));
          TypePtr alpha = arg->a, step = arg->b->a, bound = arg->b->b;
          if (bound->kind != TypeKind::Nat)
            throw err(t, "rec bound must be a Nat, got " + print_type(bound));
          TypePtr want = ty_arrow(ty_nat(), ty_arrow(alpha, alpha));
          if (!type_eq(step, want))
            throw err(t, "rec step must have type " + print_type(want) +
                             ", got " + print_type(step));
          return alpha;
        }
        case TermKind::FixRan: {
          // (α -> α) * α
          if (arg->kind != TypeKind::Prod)
            throw err(t, "fixr expects a pair <f, base>, got " +
                             print_type(arg));
          TypePtr alpha = arg->b;
          TypePtr want = ty_arrow(alpha, alpha);
          if (!type_eq(arg->a, want))
            throw err(t, "fixr expects <f, base> with f : " +
                             print_type(want) + ", got f : " +
                             print_type(arg->a));
          return alpha;
        }
        default: {
          TypePtr f = infer_rec(t->a, benv, fenv);
          if (f->kind != TypeKind::Arrow)
            throw err(t, "application of a non-function of type " +
                             print_type(f));
          if (!type_eq(f->a, arg))
            throw err(t, "argument type mismatch: the function expects " +
                             print_type(f->a) + ", got " + print_type(arg));
          return f->b;
        }
      }
    }
  }
  throw err(t, "unreachable term kind");
}

TypePtr infer(const TermPtr& t, const FvarEnv& fenv) {
  std::vector<TypePtr> benv;
  return infer_rec(t, benv, fenv);
}

TypePtr infer_open(const TermPtr& t, std::vector<TypePtr> benv,
                   const FvarEnv& fenv) {
  return infer_rec(t, benv, fenv);
}

bool well_typed(const TermPtr& t) {
  try {
    infer(t);
    return true;
  } catch (const TypeError&) {
    return false;
  }
}

}  // namespace probt
