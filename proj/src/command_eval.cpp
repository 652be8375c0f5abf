#include "rva/command_eval.hpp"

#include <cassert>

namespace rva {

CmdPtr plug(const CmdCtx &ctx, CmdPtr inner) {
  for (size_t i = ctx.size(); i-- > 0;)
    inner = c_let(ctx[i].var, std::move(inner), ctx[i].body);
  return inner;
}

CmdForm classify(const CmdPtr &p) {
  CmdForm form;
  CmdPtr cur = p;
  while (cur->kind == CmdKind::CLet) {
    form.ctx.push_back({cur->var, cur->c2});
    cur = cur->c1;
  }
  switch (cur->kind) {
  case CmdKind::Ret:
    if (cur->term->kind == TermKind::Var) {
      form.kind = CmdFormKind::RetVar;
      form.var = cur->term->var;
    } else {
      form.kind = CmdFormKind::TermHole;
      form.hole = HoleKind::Ret;
      form.term = cur->term;
    }
    return form;
  case CmdKind::OpCall:
    form.op = cur->op;
    if (cur->term->kind == TermKind::Var) {
      form.kind = CmdFormKind::OpVar;
      form.var = cur->term->var;
    } else {
      form.kind = CmdFormKind::TermHole;
      form.hole = HoleKind::Op;
      form.term = cur->term;
    }
    return form;
  case CmdKind::RevHandle:
    form.binders = cur->binders;
    form.body = cur->body;
    form.handler = cur->handler;
    if (cur->term->kind == TermKind::Var) {
      form.kind = CmdFormKind::NestedHandle;
      form.var = cur->term->var;
    } else {
      form.kind = CmdFormKind::TermHole;
      form.hole = HoleKind::Handle;
      form.term = cur->term;
    }
    return form;
  case CmdKind::CLet:
    break;
  }
  throw EvalError(EvalError::Code::Internal, "classify: unreachable");
}

namespace {

struct NameSupply {
  std::set<Name> used;
  Name fresh(const Name &hint) {
    Name n = fresh_name(used, hint);
    used.insert(n);
    return n;
  }
};

using Binders = std::vector<std::pair<Name, Ty>>;

// The i-th component of a (possibly open) value of a product type. A literal
// tuple yields its component; a variable yields a projection term.
std::vector<TermPtr> seed_components(const TermPtr &seed, size_t m) {
  if (m == 1)
    return {seed};
  if (seed->kind == TermKind::Tuple && seed->kids.size() == m)
    return seed->kids;
  std::vector<TermPtr> comps;
  for (size_t i = 0; i < m; i++)
    comps.push_back(t_proj((int)i + 1, seed));
  return comps;
}

size_t binder_index(const Binders &binders, const Name &z) {
  for (size_t i = 0; i < binders.size(); i++)
    if (binders[i].first == z)
      return i;
  throw EvalError(EvalError::Code::Internal,
                  "reverse handler rewrite: variable " + z +
                      " is not a handled binder");
}

OpClause clause_for(const SigTable &sigs, const HandlerPtr &h,
                    const OpSym &op) {
  if (op.kind == OpSym::Kind::User) {
    auto it = h->op_clauses.find(op.name);
    if (it != h->op_clauses.end())
      return it->second;
  }
  // get/put and any op the handler leaves out take the default clause.
  return default_clause(op, sigs.op_sig(op));
}

TyEnv binder_env(const Binders &binders) {
  TyEnv env;
  for (size_t i = binders.size(); i-- > 0;)
    env = env.prepend(binders[i].first, binders[i].second);
  return env;
}

CmdPtr rh(const SigTable &sigs, NameSupply &ns, const TermPtr &seed,
          const Binders &binders, const CmdPtr &r, const HandlerPtr &h);

// ret <W_1,..,W_m> with the k-th slot live and zeros elsewhere.
CmdPtr one_hot_ret(const Binders &binders, size_t k, const Name &live) {
  std::vector<TermPtr> comps;
  for (size_t i = 0; i < binders.size(); i++)
    comps.push_back(i == k ? t_var(live) : t_zero(binders[i].second));
  return c_ret(t_tuple(std::move(comps)));
}

CmdPtr rh_ret_var(const SigTable &sigs, NameSupply &ns, const TermPtr &seed,
                  const Binders &binders, const CmdForm &form,
                  const HandlerPtr &h) {
  if (!form.ctx.empty()) {
    // F^c[let x <= ret y_j in R] -> F^c[R[y_j/x]]
    CmdCtx outer(form.ctx.begin(), form.ctx.end() - 1);
    const CtxFrame &inner = form.ctx.back();
    CmdPtr next =
        plug(outer, subst_command(inner.body, {{inner.var, t_var(form.var)}}));
    return rh(sigs, ns, seed, binders, next, h);
  }
  size_t k = binder_index(binders, form.var);
  auto comps = seed_components(seed, binders.size());
  Name y = ns.fresh("y");
  CmdPtr ret_applied =
      subst_command(h->ret_clause, {{h->ret_binder, comps[k]}});
  return c_let(y, ret_applied, one_hot_ret(binders, k, y));
}

CmdPtr rh_op_var(const SigTable &sigs, NameSupply &ns, const TermPtr &seed,
                 const Binders &binders, const CmdForm &form,
                 const HandlerPtr &h) {
  const size_t m = binders.size();
  size_t i = binder_index(binders, form.var);
  OpSig sig = sigs.op_sig(form.op);
  OpClause cl = clause_for(sigs, h, form.op);
  auto comps = seed_components(seed, m);

  // let <y, z'> <= Q^f[V_i/x] in
  // let <y', y'_1..y'_m> <= RH_<y,V..>(<y,y_1..y_m>. F^c[ret y]) in
  // let y'' <= Q^b[y'/y, z'/z] in ret <y'_1, .., y'_i + y'', .., y'_m>
  Name yo = ns.fresh("y");
  Name zp = ns.fresh("z");
  Name yp = ns.fresh("y");
  std::vector<Name> slots;
  for (size_t j = 0; j < m; j++)
    slots.push_back(ns.fresh(binders[j].first));
  Name ydd = ns.fresh("y");

  Binders ext;
  ext.emplace_back(yo, sig.arity);
  ext.insert(ext.end(), binders.begin(), binders.end());
  std::vector<TermPtr> ext_seed = {t_var(yo)};
  ext_seed.insert(ext_seed.end(), comps.begin(), comps.end());
  CmdPtr inner = rh(sigs, ns, t_tuple(ext_seed), ext,
                    plug(form.ctx, c_ret(t_var(yo))), h);

  CmdPtr fwd = subst_command(cl.fwd, {{cl.fwd_binder, comps[i]}});
  CmdPtr bwd = subst_command(cl.bwd, {{cl.bwd_binder_out, t_var(yp)},
                                      {cl.bwd_binder_aux, t_var(zp)}});

  std::vector<TermPtr> out;
  for (size_t j = 0; j < m; j++)
    out.push_back(j == i ? t_plus(t_var(slots[j]), t_var(ydd))
                         : t_var(slots[j]));

  std::vector<Name> destr = {yp};
  destr.insert(destr.end(), slots.begin(), slots.end());
  CmdPtr tail = c_let(ydd, bwd, c_ret(t_tuple(std::move(out))));
  CmdPtr mid = c_let_tuple(destr, inner, tail, ns.used);
  return c_let_tuple({yo, zp}, fwd, mid, ns.used);
}

CmdPtr rh_nested(const SigTable &sigs, NameSupply &ns, const TermPtr &seed,
                 const Binders &binders, const CmdForm &form,
                 const HandlerPtr &h) {
  size_t j = binder_index(binders, form.var);
  const Ty &seed_ty = binders[j].second;
  Binders inner_binders;
  if (form.binders.size() == 1) {
    inner_binders.emplace_back(form.binders[0], seed_ty);
  } else {
    if (!seed_ty.is_prod() || seed_ty.comps().size() != form.binders.size())
      throw EvalError(EvalError::Code::Internal,
                      "nested handle seed/binder count mismatch");
    for (size_t i = 0; i < form.binders.size(); i++)
      inner_binders.emplace_back(form.binders[i], seed_ty.comps()[i]);
  }
  CmdPtr inner =
      rh(sigs, ns, t_var(form.var), inner_binders, form.body, form.handler);
  return rh(sigs, ns, seed, binders, plug(form.ctx, inner), h);
}

CmdPtr rh_term_hole(const SigTable &sigs, NameSupply &ns, const TermPtr &seed,
                    const Binders &binders, const CmdForm &form,
                    const HandlerPtr &h) {
  const size_t m = binders.size();
  auto comps = seed_components(seed, m);

  Subst full;
  for (size_t i = 0; i < m; i++)
    full[binders[i].first] = comps[i];
  TermPtr m_sub = subst_term(form.term, full);
  Ty m_ty = infer_term(binder_env(binders), form.term);

  Name yo = ns.fresh("y");
  Name zv = ns.fresh("z");
  std::vector<Name> slots;
  for (size_t j = 0; j < m; j++)
    slots.push_back(ns.fresh(binders[j].first));

  CmdPtr hole_filled;
  switch (form.hole) {
  case HoleKind::Ret:
    hole_filled = c_ret(t_var(yo));
    break;
  case HoleKind::Op:
    hole_filled = c_op(form.op, t_var(yo));
    break;
  case HoleKind::Handle:
    hole_filled =
        c_rev_handle(t_var(yo), form.binders, form.body, form.handler);
    break;
  }

  Binders ext;
  ext.emplace_back(yo, m_ty);
  ext.insert(ext.end(), binders.begin(), binders.end());
  std::vector<TermPtr> ext_seed = {t_var(yo)};
  ext_seed.insert(ext_seed.end(), comps.begin(), comps.end());
  CmdPtr inner = rh(sigs, ns, t_tuple(ext_seed), ext,
                    plug(form.ctx, hole_filled), h);

  // ret < y'_i + z.rd(y_i. M[V_j/y_j for j != i])(V_i) >_i
  std::vector<TermPtr> out;
  for (size_t i = 0; i < m; i++) {
    Subst others;
    for (size_t j = 0; j < m; j++)
      if (j != i)
        others[binders[j].first] = comps[j];
    TermPtr body_i = subst_term(form.term, others);
    TermPtr rd_term =
        t_rd(t_var(zv), binders[i].first, body_i, comps[i]);
    out.push_back(t_plus(t_var(slots[i]), rd_term));
  }

  std::vector<Name> destr = {zv};
  destr.insert(destr.end(), slots.begin(), slots.end());
  CmdPtr tail = c_ret(t_tuple(std::move(out)));
  CmdPtr mid = c_let_tuple(destr, inner, tail, ns.used);
  return c_let(yo, c_ret(m_sub), mid);
}

CmdPtr rh(const SigTable &sigs, NameSupply &ns, const TermPtr &seed,
          const Binders &binders, const CmdPtr &r, const HandlerPtr &h) {
  CmdForm form = classify(r);
  switch (form.kind) {
  case CmdFormKind::RetVar:
    return rh_ret_var(sigs, ns, seed, binders, form, h);
  case CmdFormKind::OpVar:
    return rh_op_var(sigs, ns, seed, binders, form, h);
  case CmdFormKind::NestedHandle:
    return rh_nested(sigs, ns, seed, binders, form, h);
  case CmdFormKind::TermHole:
    return rh_term_hole(sigs, ns, seed, binders, form, h);
  }
  throw EvalError(EvalError::Code::Internal, "rewrite_rh: unreachable");
}

void collect_handler_vars(const HandlerPtr &h, std::set<Name> &out) {
  out.insert(h->ret_binder);
  all_vars_command(h->ret_clause, out);
  for (const auto &[op, cl] : h->op_clauses) {
    out.insert(cl.fwd_binder);
    out.insert(cl.bwd_binder_out);
    out.insert(cl.bwd_binder_aux);
    all_vars_command(cl.fwd, out);
    all_vars_command(cl.bwd, out);
  }
}

} // namespace

CmdPtr rewrite_rh(const SigTable &sigs, const TermPtr &seed,
                  const std::vector<std::pair<Name, Ty>> &binders,
                  const CmdPtr &r, const HandlerPtr &h) {
  NameSupply ns;
  all_vars_term(seed, ns.used);
  all_vars_command(r, ns.used);
  collect_handler_vars(h, ns.used);
  for (const auto &[n, ty] : binders)
    ns.used.insert(n);
  return rh(sigs, ns, seed, binders, r, h);
}

std::optional<StepResult> step_command(const SigTable &sigs,
                                       const MachineState &s,
                                       const EvOptions &opts) {
  const CmdPtr &p = s.cmd;
  switch (p->kind) {
  case CmdKind::Ret: {
    if (is_value(p->term))
      return std::nullopt;
    auto t = step_term(p->term, opts);
    return StepResult{{s.heap, c_ret(*t)}, StepResult::Kind::Term};
  }
  case CmdKind::OpCall: {
    if (!is_value(p->term)) {
      auto t = step_term(p->term, opts);
      return StepResult{{s.heap, c_op(p->op, *t)}, StepResult::Kind::Term};
    }
    switch (p->op.kind) {
    case OpSym::Kind::Get: {
      Value v = s.heap.get(p->op.name, sigs.loc_dim(p->op.name));
      return StepResult{{s.heap, c_ret(value_to_term(v))},
                        StepResult::Kind::Get};
    }
    case OpSym::Kind::Put: {
      Value v = term_to_value(p->term);
      if (!v.is_vec() || (int)v.v.size() != sigs.loc_dim(p->op.name))
        throw EvalError(EvalError::Code::ShapeMismatch,
                        "put<" + p->op.name + "> of " + v.show());
      Heap h2 = s.heap.put(p->op.name, std::move(v));
      return StepResult{{h2, c_ret(t_const({}))}, StepResult::Kind::Put};
    }
    case OpSym::Kind::User:
      throw EvalError(EvalError::Code::UnhandledOperation,
                      "operation " + p->op.show() +
                          " reached the top level with no reverse handler");
    }
    break;
  }
  case CmdKind::RevHandle: {
    if (!is_value(p->term)) {
      auto t = step_term(p->term, opts);
      return StepResult{
          {s.heap, c_rev_handle(*t, p->binders, p->body, p->handler)},
          StepResult::Kind::Term};
    }
    Ty seed_ty = infer_term(TyEnv::empty(), p->term);
    std::vector<std::pair<Name, Ty>> binders;
    if (p->binders.size() == 1) {
      binders.emplace_back(p->binders[0], seed_ty);
    } else {
      if (!seed_ty.is_prod() || seed_ty.comps().size() != p->binders.size())
        throw EvalError(EvalError::Code::Internal,
                        "rev handle seed does not match its binders");
      for (size_t i = 0; i < p->binders.size(); i++)
        binders.emplace_back(p->binders[i], seed_ty.comps()[i]);
    }
    CmdPtr out = rewrite_rh(sigs, p->term, binders, p->body, p->handler);
    return StepResult{{s.heap, out}, StepResult::Kind::Handle};
  }
  case CmdKind::CLet: {
    if (p->c1->kind == CmdKind::Ret && is_value(p->c1->term))
      return StepResult{{s.heap, subst_command(p->c2, {{p->var, p->c1->term}})},
                        StepResult::Kind::PureLet};
    auto sub = step_command(sigs, {s.heap, p->c1}, opts);
    if (!sub)
      throw EvalError(EvalError::Code::Internal, "let of a final command");
    return StepResult{{sub->state.heap, c_let(p->var, sub->state.cmd, p->c2)},
                      sub->kind};
  }
  }
  throw EvalError(EvalError::Code::Internal, "step_command: unreachable");
}

RunResult run_command(const SigTable &sigs, MachineState s,
                      const RunOptions &opts) {
  std::optional<Ty> ty;
  if (opts.debug_checks)
    ty = check_command(sigs, TyEnv::empty(), TyEnv::empty(), s.cmd);
  long steps = 0;
  if (opts.trace)
    opts.trace(steps, s.heap, s.cmd);
  while (true) {
    long depth_before = opts.debug_checks ? rh_depth(s.cmd) : 0;
    auto next = step_command(sigs, s, opts.ev);
    if (!next)
      break;
    steps++;
    if (opts.debug_checks) {
      Ty ty2 = check_command(sigs, TyEnv::empty(), TyEnv::empty(),
                             next->state.cmd);
      if (!(ty2 == *ty))
        throw EvalError(EvalError::Code::Internal,
                        "type preservation violated: " + ty->show() +
                            " became " + ty2.show());
      long depth_after = rh_depth(next->state.cmd);
      if (depth_after > depth_before)
        throw EvalError(EvalError::Code::Internal, "handler depth increased");
      if (next->kind == StepResult::Kind::Handle &&
          depth_after >= depth_before)
        throw EvalError(EvalError::Code::Internal,
                        "handler firing did not decrease depth");
      if (next->kind != StepResult::Kind::Put &&
          !next->state.heap.same_rep(s.heap))
        throw EvalError(EvalError::Code::Internal,
                        "non-put step changed the heap");
    }
    s = next->state;
    if (opts.trace)
      opts.trace(steps, s.heap, s.cmd);
    if (steps >= opts.fuel)
      throw EvalError(EvalError::Code::FuelExhausted,
                      "no value after " + std::to_string(steps) + " steps");
  }
  return RunResult{s.heap, term_to_value(s.cmd->term), steps};
}

} // namespace rva
