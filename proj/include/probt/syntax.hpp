// Core syntax for System T extended with probabilistic choice.
//
//   types  τ ::= Nat | τ -> τ | τ * τ
//   terms  M ::= x | \x:τ. M | M N | <M,N> | p1 | p2 | rec | 0 | S | n
//              | M (+) N | rand | fixr            (+ the internal SRand)
//
// Terms are nameless internally (de Bruijn indices for bound variables, names
// only for free variables), so alpha-equivalence is structural equality and
// the canonical printed form of alpha-equivalent terms is identical. Binders
// carry type annotations, which keeps typechecking syntax-directed.
//
// Numerals are kept compressed: S^n 0 is a single literal node carrying a
// bignum, and applying S to a numeral value canonicalizes on construction.
// This is representation only — printing, typing and the reduction rules are
// exactly those of the unary syntax.

#pragma once

#include <probt/rational.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace probt {

// ---------------------------------------------------------------------------
// Types

enum class TypeKind : uint8_t { Nat, Arrow, Prod };

struct Type;
using TypePtr = std::shared_ptr<const Type>;

struct Type {
  TypeKind kind;
  TypePtr a, b;  // Arrow: a -> b;  Prod: a * b
  uint64_t hash;
};

TypePtr ty_nat();
TypePtr ty_arrow(TypePtr dom, TypePtr cod);
TypePtr ty_prod(TypePtr fst, TypePtr snd);

bool type_eq(const TypePtr& s, const TypePtr& t);
std::string print_type(const TypePtr& t);
TypePtr parse_type(const std::string& src);

// ---------------------------------------------------------------------------
// Terms

enum class TermKind : uint8_t {
  BVar,    // bound variable, de Bruijn index
  FVar,    // free variable, named
  Lam,     // \x:τ. M          (annot, a = body)
  App,     // a b
  Pair,    // <a, b>
  Choice,  // a (+) b
  NatLit,  // S^n 0
  Succ,    // S
  Proj1,   // p1
  Proj2,   // p2
  Rec,     // rec
  Rand,    // rand
  FixRan,  // fixr
  SRand,   // internal: staged rand reading the (m,n) register pair
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  uint32_t dangling = 0;    // number of enclosing binders the term needs
                            // (0 = locally closed); max loose index + 1
  bool has_fvar = false;    // some FVar occurs somewhere below
  bool has_prob = false;    // some rand/fixr/(+)/SRand occurs somewhere below
  bool value_bit = false;   // cached value predicate (see is_value)
  uint64_t hash = 0;

  uint64_t index = 0;       // BVar
  std::string name;         // FVar
  TypePtr annot;            // Lam
  TermPtr a, b;             // children (Lam body in a)
  Int nat;                  // NatLit
};

// Constructors. mk_app canonicalizes S applied to a numeral.
TermPtr mk_bvar(uint64_t index);
TermPtr mk_fvar(const std::string& name);
TermPtr mk_lam(TypePtr annot, TermPtr body);
TermPtr mk_app(TermPtr f, TermPtr arg);
TermPtr mk_pair(TermPtr fst, TermPtr snd);
TermPtr mk_choice(TermPtr l, TermPtr r);
TermPtr mk_nat(const Int& n);
TermPtr mk_nat(unsigned long n);
TermPtr mk_succ();
TermPtr mk_proj1();
TermPtr mk_proj2();
TermPtr mk_rec();
TermPtr mk_rand();
TermPtr mk_fixran();
TermPtr mk_srand();

// Alpha-equivalence (= structural equality on the nameless representation).
bool term_eq(const TermPtr& s, const TermPtr& t);

// Total order on terms used for canonical output: numerals first (ascending),
// then everything else by canonical printed form. Returns <0, 0, >0.
int term_cmp_canonical(const TermPtr& s, const TermPtr& t);

// Value predicate, per the grammar
//   U,V ::= \x.M | p1 | p2 | <U,V> | rec | 0 | S | S V | fixr
// (rand is not a value; neither is SRand).
bool is_value(const TermPtr& t);

// S^n 0  ->  n, for numeral values only.
std::optional<Int> as_nat(const TermPtr& t);

// ---------------------------------------------------------------------------
// Substitution and index plumbing

// Capture-avoiding substitution of a locally closed term for a free variable.
// Throws std::invalid_argument if `value` has loose bound indices.
TermPtr substitute(const TermPtr& body, const std::string& var,
                   const TermPtr& value);

// β-instantiation: replace index 0 of a binder body with a locally closed
// value, shifting the remaining loose indices down.
TermPtr open0(const TermPtr& body, const TermPtr& value);

// Shift loose indices >= cutoff by delta (transform plumbing).
TermPtr shift(const TermPtr& t, int64_t delta, uint64_t cutoff = 0);

// ---------------------------------------------------------------------------
// Printing and parsing

// Canonical printer: binder names are generated as x0, x1, ... by depth,
// skipping any free-variable names occurring in the term. Minimal parentheses.
std::string print_term(const TermPtr& t);

struct ParseError : std::runtime_error {
  size_t line, col;
  ParseError(const std::string& msg, size_t line, size_t col)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ", col " +
                           std::to_string(col) + ")"),
        line(line),
        col(col) {}
};

// Parses a single term. "--" starts a comment running to end of line.
TermPtr parse_term(const std::string& src);

// Reads one term per file (comments and surrounding whitespace allowed).
TermPtr parse_term_file(const std::string& path);

}  // namespace probt
