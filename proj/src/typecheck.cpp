#include "rva/typecheck.hpp"

namespace rva {

Ty infer_term(const TyEnv &env, const TermPtr &t) {
  switch (t->kind) {
  case TermKind::Var: {
    const Ty *ty = env.lookup(t->var);
    if (!ty)
      throw TypeError(TypeError::Code::UnboundVariable,
                      "unbound variable " + t->var, t->var);
    return *ty;
  }
  case TermKind::Const:
    return Ty::base((int)t->vec.size());
  case TermKind::FunApp: {
    FunSig sig = fun_sig(t->fun);
    Ty arg = infer_term(env, t->kids[0]);
    if (arg != sig.dom)
      throw TypeError(TypeError::Code::ArityMismatch,
                      t->fun.show() + " applied to " + arg.show() +
                          ", expects " + sig.dom.show(),
                      pretty(t));
    return sig.cod;
  }
  case TermKind::Plus: {
    // Base-typed in surface programs; reverse-handler rewriting also sums
    // gradients at product types when handlers nest, so any single type is
    // accepted.
    Ty a = infer_term(env, t->kids[0]);
    Ty b = infer_term(env, t->kids[1]);
    if (a != b)
      throw TypeError(TypeError::Code::PlusOnNonBase,
                      "+ needs a common type, got " + a.show() + " and " +
                          b.show(),
                      pretty(t));
    return a;
  }
  case TermKind::Tuple: {
    std::vector<Ty> cs;
    for (const auto &k : t->kids)
      cs.push_back(infer_term(env, k));
    return Ty::prod(std::move(cs));
  }
  case TermKind::Proj: {
    Ty arg = infer_term(env, t->kids[0]);
    if (!arg.is_prod() || t->index < 1 ||
        t->index > (int)arg.comps().size())
      throw TypeError(TypeError::Code::ProjOutOfRange,
                      "proj<" + std::to_string(t->index) + "> on " +
                          arg.show(),
                      pretty(t));
    return arg.comps()[t->index - 1];
  }
  case TermKind::Let: {
    Ty a = infer_term(env, t->kids[0]);
    return infer_term(env.prepend(t->var, a), t->kids[1]);
  }
  case TermKind::Rd: {
    // M.rd(x.N)(L): M : B, x : A |- N : B, L : A, whole : A.
    Ty b = infer_term(env, t->kids[0]);
    Ty a = infer_term(env, t->kids[2]);
    Ty n = infer_term(env.prepend(t->var, a), t->kids[1]);
    if (n != b)
      throw TypeError(TypeError::Code::RdShapeMismatch,
                      "rd body has type " + n.show() + ", seed has " +
                          b.show(),
                      pretty(t));
    return a;
  }
  }
  throw TypeError(TypeError::Code::UnknownSymbol, "bad term");
}

Ty check_command(const SigTable &sigs, const TyEnv &gamma, const TyEnv &delta,
                 const CmdPtr &p) {
  switch (p->kind) {
  case CmdKind::Ret:
    return infer_term(combined_env(gamma, delta), p->term);
  case CmdKind::OpCall: {
    OpSig sig = sigs.op_sig(p->op);
    Ty arg = infer_term(combined_env(gamma, delta), p->term);
    if (arg != sig.coarity)
      throw TypeError(TypeError::Code::ArityMismatch,
                      p->op.show() + " applied to " + arg.show() +
                          ", expects " + sig.coarity.show(),
                      pretty(p));
    return sig.arity;
  }
  case CmdKind::CLet: {
    Ty a = check_command(sigs, gamma, delta, p->c1);
    return check_command(sigs, gamma, delta.prepend(p->var, a), p->c2);
  }
  case CmdKind::RevHandle: {
    Ty seed = infer_term(combined_env(gamma, delta), p->term);
    size_t n = p->binders.size();
    std::vector<Ty> binder_tys;
    if (n == 1) {
      binder_tys.push_back(seed);
    } else {
      if (!seed.is_prod())
        throw TypeError(TypeError::Code::RevHandleSeedNotProduct,
                        "rev handle seed has type " + seed.show() +
                            " but binds " + std::to_string(n) + " names",
                        pretty(p->term));
      if (seed.comps().size() != n)
        throw TypeError(TypeError::Code::BinderCountMismatch,
                        "rev handle binds " + std::to_string(n) +
                            " names against " + seed.show(),
                        pretty(p));
      binder_tys = seed.comps();
    }
    TyEnv body_env;
    for (size_t i = n; i-- > 0;)
      body_env = body_env.prepend(p->binders[i], binder_tys[i]);
    Ty c = check_command(sigs, gamma, body_env, p->body);
    HandlerType ht = check_handler(sigs, p->handler);
    if (!(c == ht.carrier))
      throw TypeError(TypeError::Code::HandlerCarrierMismatch,
                      "handled body has type " + c.show() +
                          " but the handler carrier is " + ht.carrier.show(),
                      pretty(p));
    return seed;
  }
  }
  throw TypeError(TypeError::Code::UnknownSymbol, "bad command");
}

HandlerType check_handler(const SigTable &sigs, const HandlerPtr &h) {
  TyEnv retEnv;
  retEnv = retEnv.prepend(h->ret_binder, h->carrier);
  Ty retTy = check_command(sigs, TyEnv::empty(), retEnv, h->ret_clause);
  if (!(retTy == h->carrier))
    throw TypeError(TypeError::Code::RetClauseNotEndomorphic,
                    "return clause has type " + retTy.show() +
                        " on carrier " + h->carrier.show(),
                    pretty(h->ret_clause));
  for (const auto &[opname, cl] : h->op_clauses) {
    OpSig sig = sigs.op_sig(OpSym::user(opname));
    TyEnv fwdEnv;
    fwdEnv = fwdEnv.prepend(cl.fwd_binder, sig.coarity);
    Ty fwdTy = check_command(sigs, TyEnv::empty(), fwdEnv, cl.fwd);
    if (!fwdTy.is_prod() || fwdTy.comps().size() != 2 ||
        !(fwdTy.comps()[0] == sig.arity))
      throw TypeError(TypeError::Code::ForwardClauseShape,
                      "forward clause for " + opname + " has type " +
                          fwdTy.show() + ", expected " + sig.arity.show() +
                          " * D",
                      pretty(cl.fwd));
    Ty aux = fwdTy.comps()[1];
    TyEnv bwdEnv;
    bwdEnv = bwdEnv.prepend(cl.bwd_binder_aux, aux);
    bwdEnv = bwdEnv.prepend(cl.bwd_binder_out, sig.arity);
    Ty bwdTy = check_command(sigs, TyEnv::empty(), bwdEnv, cl.bwd);
    if (!(bwdTy == sig.coarity))
      throw TypeError(TypeError::Code::BackwardClauseShape,
                      "backward clause for " + opname + " has type " +
                          bwdTy.show() + ", expected " + sig.coarity.show(),
                      pretty(cl.bwd));
  }
  // Omitted clauses are the default clause, which checks for every signature:
  // Q^f = let y <= Op(x) in ret <y, []> : B * Real(0), Q^b = ret 0 : A.
  return HandlerType{h->carrier};
}

Ty handler_aux_type(const SigTable &sigs, const HandlerPtr &h,
                    const Name &op) {
  auto it = h->op_clauses.find(op);
  if (it == h->op_clauses.end())
    return Ty::base(0);
  OpSig sig = sigs.op_sig(OpSym::user(op));
  TyEnv fwdEnv;
  fwdEnv = fwdEnv.prepend(it->second.fwd_binder, sig.coarity);
  Ty fwdTy = check_command(sigs, TyEnv::empty(), fwdEnv, it->second.fwd);
  return fwdTy.comps()[1];
}

} // namespace rva
