#include <probt/multistep.hpp>

namespace probt {

static bool uses_beyond_choice(const TermPtr& t) {
  if (!t->has_prob) return false;
  if (t->kind == TermKind::Rand || t->kind == TermKind::FixRan ||
      t->kind == TermKind::SRand)
    return true;
  if (t->a && uses_beyond_choice(t->a)) return true;
  return t->b && uses_beyond_choice(t->b);
}

ExactResult exact_eval_plus(const TermPtr& t, uint64_t max_nodes,
                            bool order_swap) {
  if (t->has_fvar || t->dangling != 0)
    throw EvalError("exact_eval_plus: term is open");
  if (uses_beyond_choice(t))
    throw EvalError("exact_eval_plus: the exact tree walk handles the "
                    "(+)-only fragment; this term uses rand/fixr/srand");

  ExactResult out;
  struct Frame {
    TermPtr term;
    Rat prob;
    uint64_t depth;
  };
  std::vector<Frame> stack;
  stack.push_back({t, Rat(1), 0});

  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    while (!is_value(f.term)) {
      if (++out.nodes > max_nodes)
        throw EvalError("exact_eval_plus: exceeded the work budget");
      if (!f.term->has_prob) {  // deterministic tail: big-step it
        DetResult r = normalize_det(f.term);
        f.term = r.value;
        f.depth += r.steps;
        break;
      }
      RedexInfo loc = find_redex(f.term);
      if (loc.kind == RedexKind::Det) {
        f.term = plug(loc, contract_det(loc.redex));
        f.depth++;
      } else if (loc.kind == RedexKind::Coin) {
        Rat half = f.prob / 2;
        TermPtr left = plug(loc, loc.redex->a);
        TermPtr right = plug(loc, loc.redex->b);
        if (order_swap) std::swap(left, right);
        stack.push_back({std::move(right), half, f.depth + 1});
        f.term = std::move(left);
        f.prob = std::move(half);
        f.depth++;
      } else {
        throw EvalError("exact_eval_plus: stuck term: " + print_term(f.term));
      }
    }
    out.values.add(f.term, f.prob);
    out.expected_steps += f.prob * Rat(Int((unsigned long)f.depth));
  }
  return out;
}

}  // namespace probt
