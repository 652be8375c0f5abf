#include "rva/free_arrow.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <sstream>

namespace rva {

// ---------------------------------------------------------------------------
// Constructors

PureFun pf_identity(const Ty &ty) { return {"p", t_var("p"), ty, ty}; }

PureFun pf_compose(const PureFun &f, const PureFun &g) {
  std::set<Name> avoid = free_vars_term(f.body);
  all_vars_term(g.body, avoid);
  Name mid = fresh_name(avoid, "m");
  TermPtr body =
      t_let(mid, f.body, subst_term(g.body, {{g.binder, t_var(mid)}}));
  return {f.binder, body, f.dom, g.cod};
}

ArrPtr a_arr(PureFun f) {
  auto n = std::make_shared<ArrTerm>();
  n->k = ArrTerm::K::Arr;
  n->dom = f.dom;
  n->cod = f.cod;
  n->f = std::move(f);
  return n;
}

ArrPtr a_op(const SigTable &sigs, OpSym op) {
  auto n = std::make_shared<ArrTerm>();
  n->k = ArrTerm::K::Op;
  OpSig sig = sigs.op_sig(op);
  n->dom = sig.coarity;
  n->cod = sig.arity;
  n->op = std::move(op);
  return n;
}

ArrPtr a_seq(ArrPtr x, ArrPtr y) {
  if (!(x->cod == y->dom))
    throw EvalError(EvalError::Code::Internal,
                    "arrow composition type mismatch: " + x->cod.show() +
                        " vs " + y->dom.show());
  auto n = std::make_shared<ArrTerm>();
  n->k = ArrTerm::K::Seq;
  n->dom = x->dom;
  n->cod = y->cod;
  n->a = std::move(x);
  n->b = std::move(y);
  return n;
}

ArrPtr a_first(Ty z, ArrPtr x) {
  auto n = std::make_shared<ArrTerm>();
  n->k = ArrTerm::K::First;
  n->dom = Ty::pair(x->dom, z);
  n->cod = Ty::pair(x->cod, z);
  n->ctx = std::move(z);
  n->a = std::move(x);
  return n;
}

// ---------------------------------------------------------------------------
// The dataflow graph behind normalization. Pure structure (tuples,
// projections, lets) evaporates into wiring; operations stay totally ordered
// through control edges; pure nodes are scheduled as early as their inputs
// allow. The congruence axioms all hold structurally on the result.

namespace {

struct Dag {
  struct Node {
    enum class K { Input, Const, Prim, Add, Tuple, Proj, Rd, Op };
    K k = K::Input;
    Ty ty;
    std::vector<int> kids;
    std::vector<double> vec; // Const
    FunSym fun;              // Prim
    int index = 0;           // Proj
    OpSym op;                // Op
    int prev_op = -1;
    Name rd_binder;                // Rd
    TermPtr rd_body;               // Rd
    std::vector<Name> rd_captured; // parallel to kids[2..]
    uint64_t chash = 0;
  };

  std::vector<Node> nodes;
  std::map<std::string, int> cse;

  const Ty &ty(int id) const { return nodes[id].ty; }
  uint64_t chash(int id) const { return nodes[id].chash; }

  static uint64_t mix(uint64_t h, uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }

  int intern(Node n, const std::string &key) {
    auto it = cse.find(key);
    if (it != cse.end())
      return it->second;
    // Hash tag before '|', then child content hashes, so isomorphic graphs
    // hash alike independently of node numbering.
    uint64_t h = std::hash<std::string>{}(key.substr(0, key.find('|')));
    for (int k : n.kids)
      h = mix(h, nodes[k].chash);
    n.chash = h;
    nodes.push_back(std::move(n));
    cse[key] = (int)nodes.size() - 1;
    return (int)nodes.size() - 1;
  }

  static std::string ids(const std::vector<int> &ks) {
    std::string s;
    for (int k : ks)
      s += std::to_string(k) + ",";
    return s;
  }

  int input(const Ty &ty) {
    Node n;
    n.k = Node::K::Input;
    n.ty = ty;
    return intern(std::move(n), "input|");
  }

  int cnst(std::vector<double> v) {
    Node n;
    n.k = Node::K::Const;
    n.ty = Ty::base((int)v.size());
    std::string key = "const" + show_vector(v) + "|";
    n.vec = std::move(v);
    return intern(std::move(n), key);
  }

  int unit_tuple() {
    Node n;
    n.k = Node::K::Tuple;
    n.ty = Ty::prod({});
    return intern(std::move(n), "tuple|");
  }

  int prim(const FunSym &f, int child) {
    FunSig sig = fun_sig(f);
    if (!(ty(child) == sig.dom))
      throw EvalError(EvalError::Code::Internal,
                      "dag: " + f.show() + " applied at " + ty(child).show());
    Node n;
    n.k = Node::K::Prim;
    n.ty = sig.cod;
    n.fun = f;
    n.kids = {child};
    return intern(std::move(n), "prim" + f.show() + "|" + ids(n.kids));
  }

  int addn(int a, int b) {
    if (chash(a) > chash(b))
      std::swap(a, b); // addition is commutative; fix a canonical order
    Node n;
    n.k = Node::K::Add;
    n.ty = ty(a);
    n.kids = {a, b};
    return intern(std::move(n), "add|" + ids(n.kids));
  }

  int tuple(std::vector<int> ks) {
    if (ks.size() == 1)
      return ks[0];
    if (ks.empty())
      return unit_tuple();
    // A tuple of all projections of one node is that node.
    if (nodes[ks[0]].k == Node::K::Proj && nodes[ks[0]].index == 1) {
      int base = nodes[ks[0]].kids[0];
      bool eta = ty(base).is_prod() && ty(base).comps().size() == ks.size();
      for (size_t i = 0; eta && i < ks.size(); i++)
        eta = nodes[ks[i]].k == Node::K::Proj &&
              nodes[ks[i]].index == (int)i + 1 && nodes[ks[i]].kids[0] == base;
      if (eta)
        return base;
    }
    std::vector<Ty> comps;
    for (int k : ks)
      comps.push_back(ty(k));
    Node n;
    n.k = Node::K::Tuple;
    n.ty = Ty::prod(std::move(comps));
    n.kids = std::move(ks);
    return intern(std::move(n), "tuple|" + ids(n.kids));
  }

  int proj(int i, int child) {
    if (nodes[child].k == Node::K::Tuple && !nodes[child].kids.empty())
      return nodes[child].kids[i - 1];
    if (!ty(child).is_prod())
      throw EvalError(EvalError::Code::Internal, "dag: proj of non-product");
    Node n;
    n.k = Node::K::Proj;
    n.ty = ty(child).comps()[i - 1];
    n.index = i;
    n.kids = {child};
    return intern(std::move(n), "proj" + std::to_string(i) + "|" + ids(n.kids));
  }

  int rdnode(int seed, const Name &binder, const TermPtr &body, int point,
             const std::vector<std::pair<Name, int>> &captured) {
    Node n;
    n.k = Node::K::Rd;
    n.ty = ty(point);
    n.rd_binder = binder;
    n.rd_body = body;
    n.kids = {seed, point};
    for (const auto &[nm, id] : captured) {
      n.rd_captured.push_back(nm);
      n.kids.push_back(id);
    }
    std::string key = "rd" + binder + "." + pretty(body) + "|" + ids(n.kids);
    return intern(std::move(n), key);
  }

  int opnode(const SigTable &sigs, const OpSym &op, int arg, int prev) {
    OpSig sig = sigs.op_sig(op);
    if (!(ty(arg) == sig.coarity))
      throw EvalError(EvalError::Code::Internal,
                      "dag: " + op.show() + " applied at " + ty(arg).show());
    Node n;
    n.k = Node::K::Op;
    n.ty = sig.arity;
    n.op = op;
    n.kids = {arg};
    n.prev_op = prev;
    std::string key =
        "op" + op.show() + "|" + ids(n.kids) + ";" + std::to_string(prev);
    int id = intern(std::move(n), key);
    nodes[id].chash =
        mix(nodes[id].chash, prev >= 0 ? nodes[prev].chash : 0x5151);
    return id;
  }
};

int sym_term(Dag &g, const TermPtr &t, std::map<Name, int> &env) {
  switch (t->kind) {
  case TermKind::Var: {
    auto it = env.find(t->var);
    if (it == env.end())
      throw EvalError(EvalError::Code::Internal,
                      "denotation: unbound variable " + t->var);
    return it->second;
  }
  case TermKind::Const:
    return g.cnst(t->vec);
  case TermKind::FunApp:
    return g.prim(t->fun, sym_term(g, t->kids[0], env));
  case TermKind::Plus:
    return g.addn(sym_term(g, t->kids[0], env), sym_term(g, t->kids[1], env));
  case TermKind::Tuple: {
    std::vector<int> ks;
    for (const auto &k : t->kids)
      ks.push_back(sym_term(g, k, env));
    return g.tuple(std::move(ks));
  }
  case TermKind::Proj:
    return g.proj(t->index, sym_term(g, t->kids[0], env));
  case TermKind::Let: {
    int bound = sym_term(g, t->kids[0], env);
    auto saved = env.find(t->var);
    int old = saved == env.end() ? -1 : saved->second;
    env[t->var] = bound;
    int r = sym_term(g, t->kids[1], env);
    if (old >= 0)
      env[t->var] = old;
    else
      env.erase(t->var);
    return r;
  }
  case TermKind::Rd: {
    int seed = sym_term(g, t->kids[0], env);
    int point = sym_term(g, t->kids[2], env);
    std::set<Name> fv = free_vars_term(t->kids[1]);
    fv.erase(t->var);
    std::vector<std::pair<Name, int>> captured;
    for (const Name &n : fv) {
      auto it = env.find(n);
      if (it == env.end())
        throw EvalError(EvalError::Code::Internal,
                        "denotation: unbound variable " + n + " under rd");
      captured.emplace_back(n, it->second);
    }
    return g.rdnode(seed, t->var, t->kids[1], point, captured);
  }
  }
  throw EvalError(EvalError::Code::Internal, "sym_term: bad term");
}

int sym_arr(Dag &g, const SigTable &sigs, const ArrPtr &a, int cur,
            int &last_op, std::vector<int> &ops) {
  switch (a->k) {
  case ArrTerm::K::Arr: {
    std::map<Name, int> env{{a->f.binder, cur}};
    return sym_term(g, a->f.body, env);
  }
  case ArrTerm::K::Op: {
    int id = g.opnode(sigs, a->op, cur, last_op);
    last_op = id;
    ops.push_back(id);
    return id;
  }
  case ArrTerm::K::Seq: {
    int mid = sym_arr(g, sigs, a->a, cur, last_op, ops);
    return sym_arr(g, sigs, a->b, mid, last_op, ops);
  }
  case ArrTerm::K::First: {
    int main = g.proj(1, cur);
    int ctx = g.proj(2, cur);
    int out = sym_arr(g, sigs, a->a, main, last_op, ops);
    return g.tuple({out, ctx});
  }
  }
  throw EvalError(EvalError::Code::Internal, "sym_arr: bad arrow");
}

} // namespace

NormalForm normalize(const SigTable &sigs, const ArrPtr &a) {
  Dag g;
  int in = g.input(a->dom);
  int last_op = -1;
  std::vector<int> ops;
  int out = sym_arr(g, sigs, a, in, last_op, ops);
  const int K = (int)ops.size();

  std::map<int, int> opidx; // node id -> 1-based position
  for (int j = 0; j < K; j++)
    opidx[ops[j]] = j + 1;

  // Pure nodes reachable from the final output or any op argument.
  std::set<int> needed;
  std::vector<int> stack = {out};
  for (int o : ops)
    stack.push_back(g.nodes[o].kids[0]);
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    if (needed.count(n) || g.nodes[n].k == Dag::Node::K::Op)
      continue;
    needed.insert(n);
    for (int k : g.nodes[n].kids)
      stack.push_back(k);
  }

  // Earliest stage each node is available: glue s runs right after op s.
  std::map<int, int> avail;
  std::function<int(int)> availability = [&](int n) -> int {
    auto it = avail.find(n);
    if (it != avail.end())
      return it->second;
    int s = 0;
    if (g.nodes[n].k == Dag::Node::K::Op)
      s = opidx.at(n);
    else
      for (int k : g.nodes[n].kids)
        s = std::max(s, availability(k));
    avail[n] = s;
    return s;
  };
  availability(out);
  for (int o : ops)
    availability(g.nodes[o].kids[0]);
  for (int n : needed)
    availability(n);

  // Last op index each node has to cross to reach its consumers.
  std::map<int, int> cross;
  auto bump = [&](int n, int t) {
    auto [it, fresh] = cross.emplace(n, t);
    if (!fresh)
      it->second = std::max(it->second, t);
  };
  bump(out, K);
  for (int n : needed)
    for (int k : g.nodes[n].kids)
      bump(k, availability(n));
  for (int j = 1; j <= K; j++)
    bump(g.nodes[ops[j - 1]].kids[0], j - 1);

  auto by_hash = [&](int x, int y) {
    return g.chash(x) != g.chash(y) ? g.chash(x) < g.chash(y) : x < y;
  };

  // Wires carried across each op, in canonical order.
  std::vector<std::vector<int>> carried(K + 1);
  for (int j = 1; j <= K; j++) {
    std::vector<int> live;
    for (int n : needed)
      if (availability(n) < j && cross.count(n) && cross.at(n) >= j)
        live.push_back(n);
    for (int l = 1; l < j; l++)
      if (cross.count(ops[l - 1]) && cross.at(ops[l - 1]) >= j)
        live.push_back(ops[l - 1]);
    std::sort(live.begin(), live.end(), by_hash);
    carried[j] = std::move(live);
  }

  auto ctx_ty = [&](const std::vector<int> &ns) {
    std::vector<Ty> comps;
    for (int n : ns)
      comps.push_back(g.ty(n));
    return Ty::prod(std::move(comps));
  };

  NormalForm nf;
  nf.dom = a->dom;
  nf.cod = g.ty(out);
  for (int j = 1; j <= K; j++)
    nf.ops.push_back({g.nodes[ops[j - 1]].op, ctx_ty(carried[j])});

  for (int j = 0; j <= K; j++) {
    std::map<int, TermPtr> expr;
    Name p = "p";
    Ty dom;
    if (j == 0) {
      dom = a->dom;
      expr[in] = t_var(p);
    } else {
      dom = Ty::pair(g.ty(ops[j - 1]), ctx_ty(carried[j]));
      expr[ops[j - 1]] = t_proj(1, t_var(p));
      const auto &cs = carried[j];
      for (size_t i = 0; i < cs.size(); i++)
        expr[cs[i]] = cs.size() == 1
                          ? t_proj(2, t_var(p))
                          : t_proj((int)i + 1, t_proj(2, t_var(p)));
    }

    std::vector<int> locals;
    for (int n : needed)
      if (availability(n) == j && !expr.count(n) &&
          g.nodes[n].k != Dag::Node::K::Input)
        locals.push_back(n);
    std::sort(locals.begin(), locals.end(), by_hash);

    // Single-use nodes are inlined rather than let-bound: the rd rewriting
    // recurses twice per let, so gratuitous let chains blow up downstream
    // derivatives exponentially.
    std::map<int, int> uses;
    std::set<int> local_set(locals.begin(), locals.end());
    auto count_use = [&](int n) {
      if (local_set.count(n))
        uses[n]++;
    };
    for (int n : locals)
      for (int kid : g.nodes[n].kids)
        count_use(kid);
    if (j < K) {
      count_use(g.nodes[ops[j]].kids[0]);
      for (int n : carried[j + 1])
        count_use(n);
    } else {
      count_use(out);
    }

    auto node_term = [&](int n) -> TermPtr {
      const Dag::Node &nd = g.nodes[n];
      switch (nd.k) {
      case Dag::Node::K::Const:
        return t_const(nd.vec);
      case Dag::Node::K::Prim:
        return t_fun(nd.fun, expr.at(nd.kids[0]));
      case Dag::Node::K::Add:
        return t_plus(expr.at(nd.kids[0]), expr.at(nd.kids[1]));
      case Dag::Node::K::Tuple: {
        std::vector<TermPtr> ks;
        for (int k : nd.kids)
          ks.push_back(expr.at(k));
        if (ks.empty()) {
          auto e = std::make_shared<TermNode>();
          e->kind = TermKind::Tuple;
          return e;
        }
        return t_tuple(std::move(ks));
      }
      case Dag::Node::K::Proj:
        return t_proj(nd.index, expr.at(nd.kids[0]));
      case Dag::Node::K::Rd: {
        Subst s;
        for (size_t i = 0; i < nd.rd_captured.size(); i++)
          if (nd.rd_captured[i] != nd.rd_binder)
            s[nd.rd_captured[i]] = expr.at(nd.kids[2 + i]);
        return t_rd(expr.at(nd.kids[0]), nd.rd_binder,
                    subst_term(nd.rd_body, s), expr.at(nd.kids[1]));
      }
      default:
        throw EvalError(EvalError::Code::Internal, "node_term: bad node");
      }
    };

    std::vector<std::pair<Name, TermPtr>> lets;
    std::set<int> done;
    size_t remaining = locals.size();
    int counter = 0;
    while (remaining > 0) {
      bool progressed = false;
      for (int n : locals) {
        if (done.count(n))
          continue;
        bool ready = true;
        for (int k : g.nodes[n].kids)
          if (!expr.count(k)) {
            ready = false;
            break;
          }
        if (!ready)
          continue;
        if (uses[n] <= 1 || g.nodes[n].k == Dag::Node::K::Const) {
          expr[n] = node_term(n);
        } else {
          Name v = "v" + std::to_string(++counter);
          lets.emplace_back(v, node_term(n));
          expr[n] = t_var(v);
        }
        done.insert(n);
        remaining--;
        progressed = true;
      }
      if (!progressed)
        throw EvalError(EvalError::Code::Internal, "glue scheduling stuck");
    }

    TermPtr result;
    if (j < K) {
      int argn = g.nodes[ops[j]].kids[0];
      const auto &cs = carried[j + 1];
      std::vector<TermPtr> ctx_comps;
      for (int n : cs)
        ctx_comps.push_back(expr.at(n));
      TermPtr ctxe;
      if (ctx_comps.empty()) {
        auto e = std::make_shared<TermNode>();
        e->kind = TermKind::Tuple;
        ctxe = e;
      } else {
        ctxe = t_tuple(std::move(ctx_comps));
      }
      result = t_tuple({expr.at(argn), ctxe});
    } else {
      result = expr.at(out);
    }
    for (size_t i = lets.size(); i-- > 0;)
      result = t_let(lets[i].first, lets[i].second, result);

    Ty cod = j < K
                 ? Ty::pair(g.ty(g.nodes[ops[j]].kids[0]), ctx_ty(carried[j + 1]))
                 : g.ty(out);
    nf.glue.push_back(PureFun{p, result, dom, cod});
  }
  return nf;
}

bool NormalForm::operator==(const NormalForm &o) const {
  if (!(dom == o.dom) || !(cod == o.cod) || ops.size() != o.ops.size())
    return false;
  for (size_t i = 0; i < ops.size(); i++)
    if (!(ops[i].op == o.ops[i].op) || !(ops[i].ctx == o.ops[i].ctx))
      return false;
  for (size_t i = 0; i < glue.size(); i++) {
    if (!(glue[i].dom == o.glue[i].dom) || !(glue[i].cod == o.glue[i].cod))
      return false;
    if (!alpha_eq_term(glue[i].body, o.glue[i].body))
      return false;
  }
  return true;
}

std::string NormalForm::show() const {
  std::ostringstream os;
  os << "arr(" << glue[0].binder << ". " << pretty(glue[0].body) << ")";
  for (size_t i = 0; i < ops.size(); i++) {
    os << " >>> first[" << ops[i].ctx.show() << "](" << ops[i].op.show()
       << ")";
    os << " >>> arr(" << glue[i + 1].binder << ". " << pretty(glue[i + 1].body)
       << ")";
  }
  return os.str();
}

ArrPtr reassemble(const SigTable &sigs, const NormalForm &nf) {
  ArrPtr acc = a_arr(nf.glue[0]);
  for (size_t i = 0; i < nf.ops.size(); i++) {
    acc = a_seq(acc, a_first(nf.ops[i].ctx, a_op(sigs, nf.ops[i].op)));
    acc = a_seq(acc, a_arr(nf.glue[i + 1]));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Interpretation of commands

namespace {

Ty env_ty(const TyEnv &delta) {
  if (delta.size() == 0)
    return Ty::base(0);
  if (delta.size() == 1)
    return delta.entries()[0].second;
  std::vector<Ty> comps;
  for (const auto &[n, t] : delta.entries())
    comps.push_back(t);
  return Ty::prod(std::move(comps));
}

// A pure morphism env -> cod computing the term M over the environment.
PureFun env_fun(const TyEnv &delta, const TermPtr &m, const Ty &cod) {
  std::set<Name> avoid;
  all_vars_term(m, avoid);
  Name p = fresh_name(avoid, "p");
  Subst s;
  const auto &es = delta.entries();
  for (size_t i = 0; i < es.size(); i++)
    s[es[i].first] = es.size() == 1 ? t_var(p) : t_proj((int)i + 1, t_var(p));
  return {p, subst_term(m, s), env_ty(delta), cod};
}

// R'[f]: the argument-swapped reverse derivative of a pure morphism.
PureFun rprime(const PureFun &f) {
  std::set<Name> avoid;
  all_vars_term(f.body, avoid);
  avoid.insert(f.binder);
  Name q = fresh_name(avoid, "q");
  TermPtr body =
      t_rd(t_proj(1, t_var(q)), f.binder, f.body, t_proj(2, t_var(q)));
  return {q, body, Ty::pair(f.cod, f.dom), f.dom};
}

// x |-> <f(x), x>
PureFun pairing(const PureFun &f) {
  std::set<Name> avoid;
  all_vars_term(f.body, avoid);
  avoid.insert(f.binder);
  Name y = fresh_name(avoid, "y");
  TermPtr body = t_let(y, f.body, t_tuple({t_var(y), t_var(f.binder)}));
  return {f.binder, body, f.dom, Ty::pair(f.cod, f.dom)};
}

// <<b, d>, z> |-> <<b, z>, d>
PureFun shuffle_bdz(const Ty &b, const Ty &d, const Ty &z) {
  TermPtr p = t_var("p");
  TermPtr body =
      t_tuple({t_tuple({t_proj(1, t_proj(1, p)), t_proj(2, p)}),
               t_proj(2, t_proj(1, p))});
  return {"p", body, Ty::pair(Ty::pair(b, d), z), Ty::pair(Ty::pair(b, z), d)};
}

ArrPtr denote_clause(const SigTable &sigs, const Name &binder, const Ty &ty,
                     const CmdPtr &body) {
  TyEnv env;
  env = env.prepend(binder, ty);
  return denote_command(sigs, env, body);
}

ArrPtr denote_clause2(const SigTable &sigs, const Name &b1, const Ty &t1,
                      const Name &b2, const Ty &t2, const CmdPtr &body) {
  TyEnv env;
  env = env.prepend(b2, t2);
  env = env.prepend(b1, t1);
  return denote_command(sigs, env, body);
}

// alpha on one first_Z(Op) segment: the forward and backward clause
// denotations sandwich the continuation, with the auxiliary wire threaded
// around it.
ArrPtr ralg_op_segment(const SigTable &sigs, const HandlerPtr &h,
                       const OpSym &op, const Ty &z, const ArrPtr &k) {
  OpSig sig = sigs.op_sig(op);
  OpClause cl;
  if (op.kind == OpSym::Kind::User && h->op_clauses.count(op.name))
    cl = h->op_clauses.at(op.name);
  else
    cl = default_clause(op, sig);

  ArrPtr qf = denote_clause(sigs, cl.fwd_binder, sig.coarity, cl.fwd);
  if (!qf->cod.is_prod() || qf->cod.comps().size() != 2)
    throw EvalError(EvalError::Code::Internal,
                    "forward clause denotation is not a pair");
  Ty d = qf->cod.comps()[1];
  ArrPtr qb = denote_clause2(sigs, cl.bwd_binder_out, sig.arity,
                             cl.bwd_binder_aux, d, cl.bwd);

  ArrPtr acc = a_first(z, qf);
  acc = a_seq(acc, a_arr(shuffle_bdz(sig.arity, d, z)));
  acc = a_seq(acc, a_first(d, k));
  acc = a_seq(acc, a_arr(shuffle_bdz(sig.arity, z, d)));
  acc = a_seq(acc, a_first(z, qb));
  return acc;
}

} // namespace

ArrPtr ralg_sandwich(const PureFun &f, const ArrPtr &k) {
  if (!(k->dom == f.cod) || !(k->cod == f.cod))
    throw EvalError(EvalError::Code::Internal,
                    "reverse algebra: continuation endpoints " +
                        k->dom.show() + " -> " + k->cod.show() +
                        " do not match " + f.cod.show());
  ArrPtr acc = a_arr(pairing(f));
  acc = a_seq(acc, a_first(f.dom, k));
  acc = a_seq(acc, a_arr(rprime(f)));
  return acc;
}

ArrPtr reverse_algebra_fold(const SigTable &sigs, const HandlerPtr &h,
                            const NormalForm &nf, const ArrPtr &k0) {
  ArrPtr k = ralg_sandwich(nf.glue.back(), k0);
  for (size_t j = nf.ops.size(); j-- > 0;) {
    k = ralg_op_segment(sigs, h, nf.ops[j].op, nf.ops[j].ctx, k);
    k = ralg_sandwich(nf.glue[j], k);
  }
  return k;
}

ArrPtr reverse_algebra_apply(const SigTable &sigs, const HandlerPtr &h,
                             const NormalForm &nf) {
  if (!(nf.cod == h->carrier))
    throw EvalError(EvalError::Code::Internal,
                    "reverse algebra: carrier " + h->carrier.show() +
                        " vs normal form codomain " + nf.cod.show());
  // phi on the last glue wraps the return clause, then alpha right to left.
  ArrPtr p = denote_clause(sigs, h->ret_binder, h->carrier, h->ret_clause);
  return reverse_algebra_fold(sigs, h, nf, p);
}

ArrPtr denote_command(const SigTable &sigs, const TyEnv &delta,
                      const CmdPtr &p0, const Subst &gamma_closure) {
  CmdPtr p = gamma_closure.empty() ? p0 : subst_command(p0, gamma_closure);
  switch (p->kind) {
  case CmdKind::Ret: {
    Ty a = check_command(sigs, TyEnv{}, delta, p);
    return a_arr(env_fun(delta, p->term, a));
  }
  case CmdKind::OpCall: {
    OpSig sig = sigs.op_sig(p->op);
    return a_seq(a_arr(env_fun(delta, p->term, sig.coarity)),
                 a_op(sigs, p->op));
  }
  case CmdKind::CLet: {
    Ty a = check_command(sigs, TyEnv{}, delta, p->c1);
    Ty dty = env_ty(delta);
    ArrPtr pa = denote_command(sigs, delta, p->c1);
    PureFun diag{"p", t_tuple({t_var("p"), t_var("p")}), dty,
                 Ty::pair(dty, dty)};
    TyEnv qenv = delta.prepend(p->var, a);
    std::vector<TermPtr> comps;
    comps.push_back(t_proj(1, t_var("p")));
    for (size_t i = 0; i < delta.size(); i++)
      comps.push_back(delta.size() == 1
                          ? t_proj(2, t_var("p"))
                          : t_proj((int)i + 1, t_proj(2, t_var("p"))));
    PureFun repack{"p", t_tuple(std::move(comps)), Ty::pair(a, dty),
                   env_ty(qenv)};
    ArrPtr acc = a_seq(a_arr(diag), a_first(dty, pa));
    acc = a_seq(acc, a_arr(repack));
    return a_seq(acc, denote_command(sigs, qenv, p->c2));
  }
  case CmdKind::RevHandle: {
    Ty seed_ty = infer_term(combined_env(TyEnv{}, delta), p->term);
    std::vector<Ty> binder_tys;
    if (p->binders.size() == 1)
      binder_tys.push_back(seed_ty);
    else
      binder_tys = seed_ty.comps();
    TyEnv benv;
    for (size_t i = p->binders.size(); i-- > 0;)
      benv = benv.prepend(p->binders[i], binder_tys[i]);
    ArrPtr body = denote_command(sigs, benv, p->body);
    ArrPtr handled =
        reverse_algebra_apply(sigs, p->handler, normalize(sigs, body));
    return a_seq(a_arr(env_fun(delta, p->term, seed_ty)), handled);
  }
  }
  throw EvalError(EvalError::Code::Internal, "denote_command: bad command");
}

std::pair<Heap, Value> evaluate_arr(const SigTable &sigs, const ArrPtr &a,
                                    Heap heap, const Value &input,
                                    const EvOptions &opts) {
  switch (a->k) {
  case ArrTerm::K::Arr:
    return {heap, eval_fun1(a->f.binder, a->f.body, input, opts)};
  case ArrTerm::K::Op:
    switch (a->op.kind) {
    case OpSym::Kind::Get:
      return {heap, heap.get(a->op.name, sigs.loc_dim(a->op.name))};
    case OpSym::Kind::Put: {
      if (!input.is_vec() || (int)input.v.size() != sigs.loc_dim(a->op.name))
        throw EvalError(EvalError::Code::ShapeMismatch,
                        "put<" + a->op.name + "> of " + input.show());
      return {heap.put(a->op.name, input), Value::unit()};
    }
    case OpSym::Kind::User:
      throw EvalError(EvalError::Code::ResidualOperation,
                      "operation " + a->op.show() +
                          " survived all handler applications");
    }
    break;
  case ArrTerm::K::Seq: {
    auto [h1, mid] = evaluate_arr(sigs, a->a, std::move(heap), input, opts);
    return evaluate_arr(sigs, a->b, std::move(h1), mid, opts);
  }
  case ArrTerm::K::First: {
    if (!input.is_tup() || input.t.size() != 2)
      throw EvalError(EvalError::Code::ShapeMismatch,
                      "first applied to " + input.show());
    auto [h1, mid] = evaluate_arr(sigs, a->a, std::move(heap), input.t[0], opts);
    return {h1, Value::tup({mid, input.t[1]})};
  }
  }
  throw EvalError(EvalError::Code::Internal, "evaluate_arr: bad arrow");
}

} // namespace rva
