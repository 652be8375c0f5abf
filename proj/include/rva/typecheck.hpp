#pragma once

#include "rva/errors.hpp"
#include "rva/syntax.hpp"

// The typing judgments G |- M : A, G;D |- P : A and |- H : RH(C).

namespace rva {

struct HandlerType {
  Ty carrier;
};

// Terms are typed under the concatenated environment (Delta shadows Gamma on
// ill-formed clashes; top-level programs reject clashes at parse time).
Ty infer_term(const TyEnv &env, const TermPtr &t);

Ty check_command(const SigTable &sigs, const TyEnv &gamma, const TyEnv &delta,
                 const CmdPtr &p);

// Checks the return clause and every op clause (omitted clauses are completed
// with the default clause, which always checks). Returns RH(carrier).
HandlerType check_handler(const SigTable &sigs, const HandlerPtr &h);

// The auxiliary type D_Op a clause chose, from the shape of its forward part.
Ty handler_aux_type(const SigTable &sigs, const HandlerPtr &h, const Name &op);

} // namespace rva
