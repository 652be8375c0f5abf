#include "rva/term_eval.hpp"

namespace rva {

namespace {

struct NameSupply {
  std::set<Name> used;
  Name fresh(const Name &hint) {
    Name n = fresh_name(used, hint);
    used.insert(n);
    return n;
  }
};

// The rewriting of Abadi-Plotkin reverse derivatives, clause by clause.
// All binders the clauses introduce are renamed fresh so that open seeds and
// points can never be captured.
TermPtr rd(NameSupply &ns, const TyEnv &env, const Ty &a, const TermPtr &w,
           const TermPtr &v, const Name &x, const TermPtr &n) {
  switch (n->kind) {
  case TermKind::Var:
    // The rewriting is typed at the binder's type, so the miss case is the
    // zero of that type.
    return n->var == x ? w : t_zero(a);
  case TermKind::Const:
    return t_zero(a);
  case TermKind::FunApp: {
    // let x <- V in let y <- rd[f](<W, M>) in RD_y^V(x.M)
    auto rdp = rd_partner(n->fun);
    if (!rdp)
      throw EvalError(EvalError::Code::MissingRdPartner,
                      "no reverse derivative partner for " + n->fun.show());
    const TermPtr &m = n->kids[0];
    Ty m_ty = fun_sig(n->fun).dom;
    Name xh = ns.fresh(x);
    Name yh = ns.fresh("y");
    TermPtr m_hat = subst_term(m, {{x, t_var(xh)}});
    TyEnv env2 = env.prepend(xh, a).prepend(yh, m_ty);
    TermPtr inner = rd(ns, env2, a, t_var(yh), v, x, m);
    return t_let(xh, v,
                 t_let(yh, t_fun(*rdp, t_tuple({w, m_hat})), inner));
  }
  case TermKind::Plus:
    // The figure leaves + implicit; its reverse derivative is the sum of the
    // operands' rewrites.
    return t_plus(rd(ns, env, a, w, v, x, n->kids[0]),
                  rd(ns, env, a, w, v, x, n->kids[1]));
  case TermKind::Tuple: {
    // let <y1..yk> <- W in RD_y1(x.M1) + ... + RD_yk(x.Mk)
    if (n->kids.empty())
      return t_zero(a);
    TyEnv envArg = env.prepend(x, a);
    std::vector<Name> ys;
    TyEnv env2 = env;
    for (size_t i = 0; i < n->kids.size(); i++) {
      Name yi = ns.fresh("y");
      ys.push_back(yi);
      env2 = env2.prepend(yi, infer_term(envArg, n->kids[i]));
    }
    TermPtr sum;
    for (size_t i = 0; i < n->kids.size(); i++) {
      TermPtr part = rd(ns, env2, a, t_var(ys[i]), v, x, n->kids[i]);
      sum = sum ? t_plus(sum, part) : part;
    }
    return t_let_tuple(ys, w, sum, ns.used);
  }
  case TermKind::Proj: {
    // let x <- V in let y <- M in RD_<U_k>^V(x.M), U one-hot at slot i.
    const TermPtr &m = n->kids[0];
    Ty m_ty = infer_term(env.prepend(x, a), m);
    if (!m_ty.is_prod())
      throw EvalError(EvalError::Code::Internal, "rd: proj of non-product");
    std::vector<TermPtr> hot;
    for (size_t k = 0; k < m_ty.comps().size(); k++)
      hot.push_back((int)k + 1 == n->index ? w : t_zero(m_ty.comps()[k]));
    Name xh = ns.fresh(x);
    Name yh = ns.fresh("y");
    TermPtr m_hat = subst_term(m, {{x, t_var(xh)}});
    TyEnv env2 = env.prepend(xh, a).prepend(yh, m_ty);
    TermPtr inner = rd(ns, env2, a, t_tuple(std::move(hot)), v, x, m);
    return t_let(xh, v, t_let(yh, m_hat, inner));
  }
  case TermKind::Let: {
    // let x <- V in let y <- M in
    //   RD_W^V(x.N) + (let y' <- RD_W^y(y.N) in RD_y'^V(x.M))
    const TermPtr &m = n->kids[0];
    const TermPtr &body = n->kids[1];
    const Name &y = n->var;
    Ty c = infer_term(env.prepend(x, a), m);
    Name xh = ns.fresh(x);
    Name yh = ns.fresh(y);
    Name yp = ns.fresh(y);
    TermPtr m_hat = subst_term(m, {{x, t_var(xh)}});
    TermPtr body_y = subst_term(body, {{y, t_var(yh)}});   // binder x free
    TermPtr body_x = subst_term(body, {{x, t_var(xh)}});   // binder y free
    TyEnv env2 = env.prepend(xh, a).prepend(yh, c);
    TermPtr sum1 = rd(ns, env2, a, w, v, x, body_y);
    TermPtr rd_wrt_y = rd(ns, env2, c, w, t_var(yh), y, body_x);
    TermPtr rd_into_m =
        rd(ns, env2.prepend(yp, c), a, t_var(yp), v, x, m);
    return t_let(xh, v,
                 t_let(yh, m_hat,
                       t_plus(sum1, t_let(yp, rd_wrt_y, rd_into_m))));
  }
  case TermKind::Rd: {
    // Unfold to lets, then recurse on the rd-free unfolding.
    const TermPtr &m = n->kids[0];
    const TermPtr &inner_body = n->kids[1];
    const TermPtr &l = n->kids[2];
    const Name &y = n->var;
    TyEnv envArg = env.prepend(x, a);
    Ty b2 = infer_term(envArg, m);
    Ty a2 = infer_term(envArg, l);
    Name z = ns.fresh("z");
    Name wv = ns.fresh("w");
    TyEnv env2 = envArg.prepend(z, b2).prepend(wv, a2);
    TermPtr unfolded = rd(ns, env2, a2, t_var(z), t_var(wv), y, inner_body);
    TermPtr t = t_let(z, m, t_let(wv, l, unfolded));
    return rd(ns, env, a, w, v, x, t);
  }
  }
  throw EvalError(EvalError::Code::Internal, "rd: bad term");
}

} // namespace

TermPtr rewrite_rd(const TyEnv &env, const Ty &binder_ty, const TermPtr &w,
                   const TermPtr &v, const Name &x, const TermPtr &n) {
  NameSupply ns;
  all_vars_term(w, ns.used);
  all_vars_term(v, ns.used);
  all_vars_term(n, ns.used);
  ns.used.insert(x);
  for (const auto &[name, ty] : env.entries())
    ns.used.insert(name);
  return rd(ns, env, binder_ty, w, v, x, n);
}

std::optional<TermPtr> step_term(const TermPtr &t, const EvOptions &opts) {
  switch (t->kind) {
  case TermKind::Var:
    throw EvalError(EvalError::Code::Stuck, "free variable " + t->var);
  case TermKind::Const:
    return std::nullopt;
  case TermKind::FunApp: {
    const TermPtr &arg = t->kids[0];
    if (!is_value(arg)) {
      auto s = step_term(arg, opts);
      if (!s)
        throw EvalError(EvalError::Code::Stuck, "stuck under " + t->fun.show());
      return t_fun(t->fun, *s);
    }
    return value_to_term(ev(t->fun, term_to_value(arg), opts));
  }
  case TermKind::Plus: {
    const TermPtr &l = t->kids[0], &r = t->kids[1];
    if (!is_value(l))
      return t_plus(*step_term(l, opts), r);
    if (!is_value(r))
      return t_plus(l, *step_term(r, opts));
    return value_to_term(add_values(term_to_value(l), term_to_value(r)));
  }
  case TermKind::Tuple: {
    for (size_t i = 0; i < t->kids.size(); i++) {
      if (!is_value(t->kids[i])) {
        std::vector<TermPtr> kids = t->kids;
        kids[i] = *step_term(kids[i], opts);
        return t_tuple(std::move(kids));
      }
    }
    return std::nullopt;
  }
  case TermKind::Proj: {
    const TermPtr &arg = t->kids[0];
    if (!is_value(arg))
      return t_proj(t->index, *step_term(arg, opts));
    if (arg->kind != TermKind::Tuple || t->index < 1 ||
        t->index > (int)arg->kids.size())
      throw EvalError(EvalError::Code::Stuck,
                      "projection out of range: " + pretty(t));
    return arg->kids[t->index - 1];
  }
  case TermKind::Let: {
    const TermPtr &bound = t->kids[0];
    if (!is_value(bound))
      return t_let(t->var, *step_term(bound, opts), t->kids[1]);
    return subst_term(t->kids[1], {{t->var, bound}});
  }
  case TermKind::Rd: {
    const TermPtr &w = t->kids[0];
    const TermPtr &point = t->kids[2];
    if (!is_value(w))
      return t_rd(*step_term(w, opts), t->var, t->kids[1], point);
    if (!is_value(point))
      return t_rd(w, t->var, t->kids[1], *step_term(point, opts));
    Ty a = infer_term(TyEnv::empty(), point);
    return rewrite_rd(TyEnv::empty(), a, w, point, t->var, t->kids[1]);
  }
  }
  throw EvalError(EvalError::Code::Internal, "step_term: bad term");
}

Value eval_term(const TermPtr &t, const EvOptions &opts) {
  TermPtr cur = t;
  while (true) {
    auto next = step_term(cur, opts);
    if (!next)
      return term_to_value(cur);
    cur = *next;
  }
}

Value eval_fun1(const Name &binder, const TermPtr &body, const Value &arg,
                const EvOptions &opts) {
  return eval_term(subst_term(body, {{binder, value_to_term(arg)}}), opts);
}

} // namespace rva
