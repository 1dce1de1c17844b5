// Syntax-directed typechecking.
//
// Binders are annotated, so inference needs no unification. The constants
// p1, p2, rec and fixr are type-schematic; their schemes are instantiated
// from the type of the argument at each application node:
//
//   p1   : α*β -> α                 rec  : α*((Nat -> α -> α)*Nat) -> α
//   p2   : α*β -> β                 fixr : (α -> α)*α -> α
//
// A schematic constant occurring anywhere other than the function position of
// an application cannot be assigned a monotype and is rejected. S : Nat -> Nat
// and rand : Nat are monomorphic and may occur bare (values like fixr <S, 0>
// rely on this).

#pragma once

#include <probt/syntax.hpp>

#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace probt {

struct TypeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using FvarEnv = std::unordered_map<std::string, TypePtr>;

// Infers the type of a locally closed term. Free variables must appear in
// `fenv`; anything untypable throws TypeError with a printed location.
TypePtr infer(const TermPtr& t, const FvarEnv& fenv = {});

// Inference under a binder environment (innermost binder last); used by the
// program transformations, which walk open subtrees.
TypePtr infer_open(const TermPtr& t, std::vector<TypePtr> benv,
                   const FvarEnv& fenv = {});

// True iff the term typechecks (closed, empty environment).
bool well_typed(const TermPtr& t);

}  // namespace probt
