#pragma once

#include "rva/command_eval.hpp"

// Independent oracle backend: the free strong promonad over the operation
// signature, normalization modulo the arrow congruence, interpretation of
// commands, and the reverse-algebra evaluator.

namespace rva {

// A base-category morphism represented as a one-variable pure term.
struct PureFun {
  Name binder;
  TermPtr body;
  Ty dom, cod;
};

PureFun pf_identity(const Ty &ty);
PureFun pf_compose(const PureFun &f, const PureFun &g); // f then g

struct ArrTerm;
using ArrPtr = std::shared_ptr<const ArrTerm>;

struct ArrTerm {
  enum class K { Arr, Op, Seq, First };
  K k = K::Arr;
  PureFun f; // Arr
  OpSym op;  // Op
  ArrPtr a, b;
  Ty ctx;      // First
  Ty dom, cod; // cached endpoints
};

ArrPtr a_arr(PureFun f);
ArrPtr a_op(const SigTable &sigs, OpSym op);
ArrPtr a_seq(ArrPtr x, ArrPtr y);
ArrPtr a_first(Ty z, ArrPtr x);

// Alternating arr/first(op) normal form: glue.size() == ops.size() + 1.
struct NormalForm {
  Ty dom, cod;
  std::vector<PureFun> glue;
  struct OpSeg {
    OpSym op;
    Ty ctx;
  };
  std::vector<OpSeg> ops;

  bool operator==(const NormalForm &o) const;
  std::string show() const;
};

NormalForm normalize(const SigTable &sigs, const ArrPtr &a);
ArrPtr reassemble(const SigTable &sigs, const NormalForm &nf);

// Interpretation of commands into the free promonad. Free variables in gamma
// scope are closed by substitution before denoting.
ArrPtr denote_command(const SigTable &sigs, const TyEnv &delta,
                      const CmdPtr &p, const Subst &gamma_closure = {});

// The homomorphism induced by a reverse handler, folded over a normal form:
// an element of Arr(X, X) for nf : Arr(X, C) with C the handler carrier.
ArrPtr reverse_algebra_apply(const SigTable &sigs, const HandlerPtr &h,
                             const NormalForm &nf);

// The algebra action alpha(a, k) itself, with an explicit continuation
// k in Arr(cod a, cod a); the clauses of h interpret the op segments.
ArrPtr reverse_algebra_fold(const SigTable &sigs, const HandlerPtr &h,
                            const NormalForm &nf, const ArrPtr &k);

// The reverse-algebra action on a single pure morphism (alpha on arr(f)).
ArrPtr ralg_sandwich(const PureFun &f, const ArrPtr &k);

// Left-to-right execution threading the heap. Residual user operations are
// errors at this stage.
std::pair<Heap, Value> evaluate_arr(const SigTable &sigs, const ArrPtr &a,
                                    Heap heap, const Value &input,
                                    const EvOptions &opts = {});

} // namespace rva
