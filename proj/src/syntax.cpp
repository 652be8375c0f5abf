#include "rva/syntax.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include "rva/errors.hpp"

namespace rva {

// ---------------------------------------------------------------------------
// Ty

Ty Ty::base(int n) {
  if (n < 0)
    throw TypeError(TypeError::Code::UnknownSymbol, "negative base dimension");
  Ty t;
  t.dim_ = n;
  return t;
}

Ty Ty::prod(std::vector<Ty> comps) {
  if (comps.size() == 1)
    return comps[0];
  Ty t;
  t.dim_ = -1;
  t.comps_ = std::make_shared<const std::vector<Ty>>(std::move(comps));
  return t;
}

Ty Ty::pair(Ty a, Ty b) { return prod({std::move(a), std::move(b)}); }

int Ty::dim() const {
  assert(is_base());
  return dim_;
}

const std::vector<Ty> &Ty::comps() const {
  static const std::vector<Ty> none;
  return comps_ ? *comps_ : none;
}

int Ty::flat_size() const {
  if (is_base())
    return dim_;
  int n = 0;
  for (const Ty &c : comps())
    n += c.flat_size();
  return n;
}

bool Ty::operator==(const Ty &o) const {
  if (dim_ >= 0 || o.dim_ >= 0)
    return dim_ == o.dim_;
  const auto &a = comps(), &b = o.comps();
  if (a.size() != b.size())
    return false;
  for (size_t i = 0; i < a.size(); i++)
    if (!(a[i] == b[i]))
      return false;
  return true;
}

std::string Ty::show() const {
  if (is_base())
    return "Real(" + std::to_string(dim_) + ")";
  std::string s = "(";
  const auto &cs = comps();
  for (size_t i = 0; i < cs.size(); i++) {
    if (i)
      s += " * ";
    s += cs[i].show();
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// TyEnv

const Ty *TyEnv::lookup(const Name &x) const {
  for (const auto &[n, t] : entries_)
    if (n == x)
      return &t;
  return nullptr;
}

TyEnv TyEnv::prepend(Name x, Ty t) const {
  std::vector<std::pair<Name, Ty>> es;
  es.reserve(entries_.size() + 1);
  es.emplace_back(std::move(x), std::move(t));
  es.insert(es.end(), entries_.begin(), entries_.end());
  return TyEnv(std::move(es));
}

std::string TyEnv::show() const {
  if (entries_.empty())
    return "<>";
  std::string s;
  for (size_t i = 0; i < entries_.size(); i++) {
    if (i)
      s += ", ";
    s += entries_[i].first + " : " + entries_[i].second.show();
  }
  return s;
}

TyEnv combined_env(const TyEnv &gamma, const TyEnv &delta) {
  std::vector<std::pair<Name, Ty>> es = delta.entries();
  es.insert(es.end(), gamma.entries().begin(), gamma.entries().end());
  return TyEnv(std::move(es));
}

// ---------------------------------------------------------------------------
// Function symbols

static const char *family_name(PrimFamily f) {
  switch (f) {
  case PrimFamily::Swish: return "swish";
  case PrimFamily::Scale: return "scale";
  case PrimFamily::Minus: return "minus";
  case PrimFamily::Matmul: return "matmul";
  case PrimFamily::Transpose: return "transpose";
  case PrimFamily::Conv: return "conv";
  case PrimFamily::Pool: return "pool";
  case PrimFamily::Padding: return "padding";
  case PrimFamily::Upscale: return "upscale";
  case PrimFamily::Concat: return "concat";
  case PrimFamily::Round: return "round";
  }
  return "?";
}

std::string FunSym::show() const {
  std::string s = family_name(fam);
  s += "<";
  for (size_t i = 0; i < dims.size(); i++) {
    if (i)
      s += ",";
    s += std::to_string(dims[i]);
  }
  s += ">";
  for (int i = 0; i < rd_order; i++)
    s = "rd[" + s + "]";
  return s;
}

static int ceil_div(int a, int b) { return (a + b - 1) / b; }

static void need_dims(const FunSym &f, size_t n) {
  if (f.dims.size() != n)
    throw TypeError(TypeError::Code::UnknownSymbol,
                    "bad dimension count for " + f.show());
  for (int d : f.dims)
    if (d < 0)
      throw TypeError(TypeError::Code::UnknownSymbol,
                      "negative dimension in " + f.show());
}

static FunSig base_sig(const FunSym &f) {
  auto R = [](int n) { return Ty::base(n); };
  switch (f.fam) {
  case PrimFamily::Swish:
    need_dims(f, 1);
    return {R(f.dims[0]), R(f.dims[0])};
  case PrimFamily::Scale:
    need_dims(f, 1);
    return {Ty::pair(R(1), R(f.dims[0])), R(f.dims[0])};
  case PrimFamily::Minus:
    need_dims(f, 1);
    return {Ty::pair(R(f.dims[0]), R(f.dims[0])), R(f.dims[0])};
  case PrimFamily::Matmul: {
    need_dims(f, 2);
    int n = f.dims[0], m = f.dims[1];
    return {Ty::pair(R(n * m), R(n)), R(m)};
  }
  case PrimFamily::Transpose: {
    need_dims(f, 2);
    int n = f.dims[0], m = f.dims[1];
    return {R(n * m), R(m * n)};
  }
  case PrimFamily::Conv: {
    need_dims(f, 4);
    int n = f.dims[0], m = f.dims[1], c = f.dims[2], cp = f.dims[3];
    if (m > n || m < 1)
      throw TypeError(TypeError::Code::UnknownSymbol,
                      "conv filter exceeds input: " + f.show());
    return {Ty::pair(R(c * n), R(c * cp * m)), R(cp * (n - m + 1))};
  }
  case PrimFamily::Pool: {
    need_dims(f, 3);
    int n = f.dims[0], m = f.dims[1], c = f.dims[2];
    if (m < 1 || n < 1)
      throw TypeError(TypeError::Code::UnknownSymbol,
                      "bad pool window: " + f.show());
    return {R(c * n), R(c * ceil_div(n, m))};
  }
  case PrimFamily::Padding: {
    need_dims(f, 3);
    int c = f.dims[0], n = f.dims[1], m = f.dims[2];
    if (n > m)
      throw TypeError(TypeError::Code::UnknownSymbol,
                      "padding shrinks input: " + f.show());
    return {R(c * n), R(c * m)};
  }
  case PrimFamily::Upscale: {
    need_dims(f, 3);
    int c = f.dims[0], n = f.dims[1], m = f.dims[2];
    if (n < 1)
      throw TypeError(TypeError::Code::UnknownSymbol,
                      "upscale of empty input: " + f.show());
    return {R(c * n), R(c * m)};
  }
  case PrimFamily::Concat: {
    need_dims(f, 3);
    int c = f.dims[0], cp = f.dims[1], n = f.dims[2];
    return {Ty::pair(R(c * n), R(cp * n)), R((c + cp) * n)};
  }
  case PrimFamily::Round:
    need_dims(f, 1);
    return {R(f.dims[0]), R(f.dims[0])};
  }
  throw TypeError(TypeError::Code::UnknownSymbol, "unknown symbol");
}

FunSig fun_sig(const FunSym &f) {
  FunSig s = base_sig(FunSym{f.fam, f.dims, 0});
  // rd[f] : cod(f) x dom(f) -> dom(f), seed first.
  for (int i = 0; i < f.rd_order; i++)
    s = {Ty::pair(s.cod, s.dom), s.dom};
  return s;
}

std::optional<FunSym> rd_partner(const FunSym &f) {
  if (f.rd_order >= 1)
    return std::nullopt;
  return FunSym{f.fam, f.dims, f.rd_order + 1};
}

// ---------------------------------------------------------------------------
// Operation symbols

std::string OpSym::show() const {
  switch (kind) {
  case Kind::User: return name;
  case Kind::Get: return "get<" + name + ">";
  case Kind::Put: return "put<" + name + ">";
  }
  return "?";
}

int SigTable::loc_dim(const Name &l) const {
  auto it = locs.find(l);
  if (it == locs.end())
    throw TypeError(TypeError::Code::UnknownSymbol, "undeclared location " + l);
  return it->second;
}

OpSig SigTable::op_sig(const OpSym &op) const {
  switch (op.kind) {
  case OpSym::Kind::Get:
    return {Ty::base(0), Ty::base(loc_dim(op.name))};
  case OpSym::Kind::Put:
    return {Ty::base(loc_dim(op.name)), Ty::base(0)};
  case OpSym::Kind::User: {
    auto it = user_ops.find(op.name);
    if (it == user_ops.end())
      throw TypeError(TypeError::Code::UnknownSymbol,
                      "undeclared operation " + op.name);
    return it->second;
  }
  }
  throw TypeError(TypeError::Code::UnknownSymbol, "bad op symbol");
}

// ---------------------------------------------------------------------------
// Term constructors

TermPtr t_var(Name x) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Var;
  n->var = std::move(x);
  return n;
}

TermPtr t_const(std::vector<double> v, std::string label) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Const;
  n->vec = std::move(v);
  n->label = std::move(label);
  return n;
}

TermPtr t_fun(FunSym f, TermPtr arg) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::FunApp;
  n->fun = std::move(f);
  n->kids = {std::move(arg)};
  return n;
}

TermPtr t_plus(TermPtr a, TermPtr b) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Plus;
  n->kids = {std::move(a), std::move(b)};
  return n;
}

TermPtr t_tuple(std::vector<TermPtr> comps) {
  if (comps.size() == 1)
    return comps[0];
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Tuple;
  n->kids = std::move(comps);
  return n;
}

TermPtr t_proj(int i, TermPtr arg) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Proj;
  n->index = i;
  n->kids = {std::move(arg)};
  return n;
}

TermPtr t_let(Name x, TermPtr bound, TermPtr body) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Let;
  n->var = std::move(x);
  n->kids = {std::move(bound), std::move(body)};
  return n;
}

TermPtr t_rd(TermPtr seed, Name binder, TermPtr body, TermPtr point) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Rd;
  n->var = std::move(binder);
  n->kids = {std::move(seed), std::move(body), std::move(point)};
  return n;
}

TermPtr t_zero(const Ty &ty) {
  if (ty.is_base())
    return t_const(std::vector<double>(ty.dim(), 0.0));
  std::vector<TermPtr> comps;
  for (const Ty &c : ty.comps())
    comps.push_back(t_zero(c));
  // An empty product's zero is the empty tuple, distinct from Real(0)'s [].
  if (comps.empty()) {
    auto n = std::make_shared<TermNode>();
    n->kind = TermKind::Tuple;
    return n;
  }
  return t_tuple(std::move(comps));
}

bool is_value(const TermPtr &t) {
  switch (t->kind) {
  case TermKind::Var:
  case TermKind::Const:
    return true;
  case TermKind::Tuple:
    for (const auto &k : t->kids)
      if (!is_value(k))
        return false;
    return true;
  default:
    return false;
  }
}

// ---------------------------------------------------------------------------
// Command constructors

CmdPtr c_ret(TermPtr m) {
  auto n = std::make_shared<CmdNode>();
  n->kind = CmdKind::Ret;
  n->term = std::move(m);
  return n;
}

CmdPtr c_op(OpSym op, TermPtr arg) {
  auto n = std::make_shared<CmdNode>();
  n->kind = CmdKind::OpCall;
  n->op = std::move(op);
  n->term = std::move(arg);
  return n;
}

CmdPtr c_let(Name x, CmdPtr bound, CmdPtr body) {
  auto n = std::make_shared<CmdNode>();
  n->kind = CmdKind::CLet;
  n->var = std::move(x);
  n->c1 = std::move(bound);
  n->c2 = std::move(body);
  return n;
}

CmdPtr c_rev_handle(TermPtr seed, std::vector<Name> binders, CmdPtr body,
                    HandlerPtr h) {
  auto n = std::make_shared<CmdNode>();
  n->kind = CmdKind::RevHandle;
  n->term = std::move(seed);
  n->binders = std::move(binders);
  n->body = std::move(body);
  n->handler = std::move(h);
  return n;
}

CmdPtr c_let_tuple(const std::vector<Name> &xs, CmdPtr bound, CmdPtr body,
                   const std::set<Name> &avoid) {
  if (xs.size() == 1)
    return c_let(xs[0], std::move(bound), std::move(body));
  std::set<Name> av = avoid;
  for (const auto &x : xs)
    av.insert(x);
  all_vars_command(body, av);
  Name x = fresh_name(av, "t");
  CmdPtr q = std::move(body);
  for (size_t i = xs.size(); i-- > 0;)
    q = c_let(xs[i], c_ret(t_proj(int(i) + 1, t_var(x))), std::move(q));
  return c_let(x, std::move(bound), std::move(q));
}

TermPtr t_let_tuple(const std::vector<Name> &xs, TermPtr bound, TermPtr body,
                    const std::set<Name> &avoid) {
  if (xs.size() == 1)
    return t_let(xs[0], std::move(bound), std::move(body));
  std::set<Name> av = avoid;
  for (const auto &x : xs)
    av.insert(x);
  all_vars_term(body, av);
  Name x = fresh_name(av, "t");
  TermPtr n = std::move(body);
  for (size_t i = xs.size(); i-- > 0;)
    n = t_let(xs[i], t_proj(int(i) + 1, t_var(x)), std::move(n));
  return t_let(x, std::move(bound), std::move(n));
}

OpClause default_clause(const OpSym &op, const OpSig &sig) {
  OpClause cl;
  cl.fwd_binder = "x";
  cl.fwd = c_let("y", c_op(op, t_var("x")),
                 c_ret(t_tuple({t_var("y"), t_const({})})));
  cl.bwd_binder_out = "y";
  cl.bwd_binder_aux = "z";
  cl.bwd = c_ret(t_zero(sig.coarity));
  return cl;
}

// ---------------------------------------------------------------------------
// fresh_name: reserved "#k" suffix, forbidden in surface identifiers.

Name fresh_name(const std::set<Name> &avoid, const Name &hint) {
  Name base = hint;
  auto pos = base.rfind('#');
  if (pos != Name::npos)
    base = base.substr(0, pos);
  if (base.empty())
    base = "v";
  if (hint == base && !avoid.count(hint))
    return hint;
  if (!avoid.count(base))
    return base;
  for (long k = 1;; k++) {
    Name cand = base + "#" + std::to_string(k);
    if (!avoid.count(cand))
      return cand;
  }
}

// ---------------------------------------------------------------------------
// Free variables

void free_vars_term(const TermPtr &t, std::set<Name> &out) {
  switch (t->kind) {
  case TermKind::Var:
    out.insert(t->var);
    return;
  case TermKind::Const:
    return;
  case TermKind::FunApp:
  case TermKind::Proj:
  case TermKind::Plus:
  case TermKind::Tuple:
    for (const auto &k : t->kids)
      free_vars_term(k, out);
    return;
  case TermKind::Let: {
    free_vars_term(t->kids[0], out);
    std::set<Name> body;
    free_vars_term(t->kids[1], body);
    body.erase(t->var);
    out.insert(body.begin(), body.end());
    return;
  }
  case TermKind::Rd: {
    free_vars_term(t->kids[0], out);
    free_vars_term(t->kids[2], out);
    std::set<Name> body;
    free_vars_term(t->kids[1], body);
    body.erase(t->var);
    out.insert(body.begin(), body.end());
    return;
  }
  }
}

void free_vars_command(const CmdPtr &p, std::set<Name> &out) {
  switch (p->kind) {
  case CmdKind::Ret:
  case CmdKind::OpCall:
    free_vars_term(p->term, out);
    return;
  case CmdKind::CLet: {
    free_vars_command(p->c1, out);
    std::set<Name> body;
    free_vars_command(p->c2, body);
    body.erase(p->var);
    out.insert(body.begin(), body.end());
    return;
  }
  case CmdKind::RevHandle: {
    free_vars_term(p->term, out);
    std::set<Name> body;
    free_vars_command(p->body, body);
    for (const auto &b : p->binders)
      body.erase(b);
    out.insert(body.begin(), body.end());
    // Handler clauses are closed; nothing escapes from them.
    return;
  }
  }
}

std::set<Name> free_vars_term(const TermPtr &t) {
  std::set<Name> s;
  free_vars_term(t, s);
  return s;
}

std::set<Name> free_vars_command(const CmdPtr &p) {
  std::set<Name> s;
  free_vars_command(p, s);
  return s;
}

void all_vars_term(const TermPtr &t, std::set<Name> &out) {
  switch (t->kind) {
  case TermKind::Var:
    out.insert(t->var);
    return;
  case TermKind::Const:
    return;
  case TermKind::Let:
  case TermKind::Rd:
    out.insert(t->var);
    [[fallthrough]];
  default:
    for (const auto &k : t->kids)
      all_vars_term(k, out);
    return;
  }
}

void all_vars_command(const CmdPtr &p, std::set<Name> &out) {
  switch (p->kind) {
  case CmdKind::Ret:
  case CmdKind::OpCall:
    all_vars_term(p->term, out);
    return;
  case CmdKind::CLet:
    out.insert(p->var);
    all_vars_command(p->c1, out);
    all_vars_command(p->c2, out);
    return;
  case CmdKind::RevHandle:
    all_vars_term(p->term, out);
    for (const auto &b : p->binders)
      out.insert(b);
    all_vars_command(p->body, out);
    return;
  }
}

// ---------------------------------------------------------------------------
// Substitution (simultaneous, capture-avoiding)

namespace {

// Restrict the substitution to the binders' scope and rename binders that
// would capture a free variable of some replacement.
struct BinderFix {
  Subst inner;
  std::vector<Name> renamed; // parallel to the requested binders
};

BinderFix fix_binders(const Subst &s, const std::vector<Name> &binders,
                      const std::set<Name> &body_vars) {
  BinderFix fix;
  fix.inner = s;
  std::set<Name> repl_free;
  for (const auto &b : binders)
    fix.inner.erase(b);
  for (const auto &[k, v] : fix.inner)
    free_vars_term(v, repl_free);
  std::set<Name> avoid = body_vars;
  avoid.insert(repl_free.begin(), repl_free.end());
  for (const auto &b : binders)
    avoid.insert(b);
  for (const auto &b : binders) {
    if (repl_free.count(b)) {
      Name nb = fresh_name(avoid, b);
      avoid.insert(nb);
      fix.inner[b] = t_var(nb);
      fix.renamed.push_back(nb);
    } else {
      fix.renamed.push_back(b);
    }
  }
  return fix;
}

bool subst_relevant(const Subst &s, const std::set<Name> &fv) {
  for (const auto &[k, v] : s)
    if (fv.count(k))
      return true;
  return false;
}

} // namespace

TermPtr subst_term(const TermPtr &t, const Subst &s) {
  if (s.empty())
    return t;
  switch (t->kind) {
  case TermKind::Var: {
    auto it = s.find(t->var);
    return it == s.end() ? t : it->second;
  }
  case TermKind::Const:
    return t;
  case TermKind::FunApp:
    return t_fun(t->fun, subst_term(t->kids[0], s));
  case TermKind::Plus:
    return t_plus(subst_term(t->kids[0], s), subst_term(t->kids[1], s));
  case TermKind::Tuple: {
    std::vector<TermPtr> comps;
    comps.reserve(t->kids.size());
    for (const auto &k : t->kids)
      comps.push_back(subst_term(k, s));
    if (comps.empty())
      return t;
    return t_tuple(std::move(comps));
  }
  case TermKind::Proj:
    return t_proj(t->index, subst_term(t->kids[0], s));
  case TermKind::Let: {
    TermPtr bound = subst_term(t->kids[0], s);
    std::set<Name> body_vars;
    all_vars_term(t->kids[1], body_vars);
    BinderFix fix = fix_binders(s, {t->var}, body_vars);
    if (fix.inner.empty() || !subst_relevant(fix.inner, free_vars_term(t->kids[1])))
      return t_let(t->var, std::move(bound), t->kids[1]);
    return t_let(fix.renamed[0], std::move(bound),
                 subst_term(t->kids[1], fix.inner));
  }
  case TermKind::Rd: {
    TermPtr seed = subst_term(t->kids[0], s);
    TermPtr point = subst_term(t->kids[2], s);
    std::set<Name> body_vars;
    all_vars_term(t->kids[1], body_vars);
    BinderFix fix = fix_binders(s, {t->var}, body_vars);
    if (fix.inner.empty() || !subst_relevant(fix.inner, free_vars_term(t->kids[1])))
      return t_rd(std::move(seed), t->var, t->kids[1], std::move(point));
    return t_rd(std::move(seed), fix.renamed[0],
                subst_term(t->kids[1], fix.inner), std::move(point));
  }
  }
  return t;
}

CmdPtr subst_command(const CmdPtr &p, const Subst &s) {
  if (s.empty())
    return p;
  switch (p->kind) {
  case CmdKind::Ret:
    return c_ret(subst_term(p->term, s));
  case CmdKind::OpCall:
    return c_op(p->op, subst_term(p->term, s));
  case CmdKind::CLet: {
    CmdPtr bound = subst_command(p->c1, s);
    std::set<Name> body_vars;
    all_vars_command(p->c2, body_vars);
    BinderFix fix = fix_binders(s, {p->var}, body_vars);
    if (fix.inner.empty() ||
        !subst_relevant(fix.inner, free_vars_command(p->c2)))
      return c_let(p->var, std::move(bound), p->c2);
    return c_let(fix.renamed[0], std::move(bound),
                 subst_command(p->c2, fix.inner));
  }
  case CmdKind::RevHandle: {
    TermPtr seed = subst_term(p->term, s);
    std::set<Name> body_vars;
    all_vars_command(p->body, body_vars);
    BinderFix fix = fix_binders(s, p->binders, body_vars);
    if (fix.inner.empty() ||
        !subst_relevant(fix.inner, free_vars_command(p->body)))
      return c_rev_handle(std::move(seed), p->binders, p->body, p->handler);
    return c_rev_handle(std::move(seed), fix.renamed,
                        subst_command(p->body, fix.inner), p->handler);
  }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Alpha equivalence

namespace {

bool alpha_term(const TermPtr &a, const TermPtr &b,
                std::map<Name, Name> &la, std::map<Name, Name> &lb, long &ctr);

bool alpha_var(const Name &x, const Name &y, const std::map<Name, Name> &la,
               const std::map<Name, Name> &lb) {
  auto ia = la.find(x), ib = lb.find(y);
  if (ia != la.end() || ib != lb.end())
    return ia != la.end() && ib != lb.end() && ia->second == ib->second;
  return x == y;
}

struct ScopedBind {
  std::map<Name, Name> &la, &lb;
  Name xa, xb;
  bool hada, hadb;
  Name olda, oldb;
  ScopedBind(std::map<Name, Name> &la_, std::map<Name, Name> &lb_,
             const Name &a, const Name &b, long &ctr)
      : la(la_), lb(lb_), xa(a), xb(b) {
    Name fresh = "@" + std::to_string(ctr++);
    hada = la.count(xa);
    hadb = lb.count(xb);
    if (hada)
      olda = la[xa];
    if (hadb)
      oldb = lb[xb];
    la[xa] = fresh;
    lb[xb] = fresh;
  }
  ~ScopedBind() {
    if (hada)
      la[xa] = olda;
    else
      la.erase(xa);
    if (hadb)
      lb[xb] = oldb;
    else
      lb.erase(xb);
  }
};

bool alpha_term(const TermPtr &a, const TermPtr &b, std::map<Name, Name> &la,
                std::map<Name, Name> &lb, long &ctr) {
  if (a->kind != b->kind)
    return false;
  switch (a->kind) {
  case TermKind::Var:
    return alpha_var(a->var, b->var, la, lb);
  case TermKind::Const:
    return a->vec == b->vec;
  case TermKind::FunApp:
    return a->fun == b->fun && alpha_term(a->kids[0], b->kids[0], la, lb, ctr);
  case TermKind::Plus:
    return alpha_term(a->kids[0], b->kids[0], la, lb, ctr) &&
           alpha_term(a->kids[1], b->kids[1], la, lb, ctr);
  case TermKind::Tuple: {
    if (a->kids.size() != b->kids.size())
      return false;
    for (size_t i = 0; i < a->kids.size(); i++)
      if (!alpha_term(a->kids[i], b->kids[i], la, lb, ctr))
        return false;
    return true;
  }
  case TermKind::Proj:
    return a->index == b->index &&
           alpha_term(a->kids[0], b->kids[0], la, lb, ctr);
  case TermKind::Let: {
    if (!alpha_term(a->kids[0], b->kids[0], la, lb, ctr))
      return false;
    ScopedBind bind(la, lb, a->var, b->var, ctr);
    return alpha_term(a->kids[1], b->kids[1], la, lb, ctr);
  }
  case TermKind::Rd: {
    if (!alpha_term(a->kids[0], b->kids[0], la, lb, ctr))
      return false;
    if (!alpha_term(a->kids[2], b->kids[2], la, lb, ctr))
      return false;
    ScopedBind bind(la, lb, a->var, b->var, ctr);
    return alpha_term(a->kids[1], b->kids[1], la, lb, ctr);
  }
  }
  return false;
}

bool alpha_cmd(const CmdPtr &a, const CmdPtr &b, std::map<Name, Name> &la,
               std::map<Name, Name> &lb, long &ctr) {
  if (a->kind != b->kind)
    return false;
  switch (a->kind) {
  case CmdKind::Ret:
    return alpha_term(a->term, b->term, la, lb, ctr);
  case CmdKind::OpCall:
    return a->op == b->op && alpha_term(a->term, b->term, la, lb, ctr);
  case CmdKind::CLet: {
    if (!alpha_cmd(a->c1, b->c1, la, lb, ctr))
      return false;
    ScopedBind bind(la, lb, a->var, b->var, ctr);
    return alpha_cmd(a->c2, b->c2, la, lb, ctr);
  }
  case CmdKind::RevHandle: {
    if (a->binders.size() != b->binders.size())
      return false;
    if (!alpha_term(a->term, b->term, la, lb, ctr))
      return false;
    // Handlers compare structurally (their clauses are closed).
    if (a->handler != b->handler) {
      const auto &ha = *a->handler, &hb = *b->handler;
      if (!(ha.carrier == hb.carrier) ||
          ha.op_clauses.size() != hb.op_clauses.size())
        return false;
      {
        std::map<Name, Name> ra, rb;
        ScopedBind bind(ra, rb, ha.ret_binder, hb.ret_binder, ctr);
        if (!alpha_cmd(ha.ret_clause, hb.ret_clause, ra, rb, ctr))
          return false;
      }
      for (auto ia = ha.op_clauses.begin(), ib = hb.op_clauses.begin();
           ia != ha.op_clauses.end(); ++ia, ++ib) {
        if (ia->first != ib->first)
          return false;
        std::map<Name, Name> ra, rb;
        {
          ScopedBind bf(ra, rb, ia->second.fwd_binder, ib->second.fwd_binder,
                        ctr);
          if (!alpha_cmd(ia->second.fwd, ib->second.fwd, ra, rb, ctr))
            return false;
        }
        ScopedBind by(ra, rb, ia->second.bwd_binder_out,
                      ib->second.bwd_binder_out, ctr);
        ScopedBind bz(ra, rb, ia->second.bwd_binder_aux,
                      ib->second.bwd_binder_aux, ctr);
        if (!alpha_cmd(ia->second.bwd, ib->second.bwd, ra, rb, ctr))
          return false;
      }
    }
    std::vector<std::unique_ptr<ScopedBind>> binds;
    for (size_t i = 0; i < a->binders.size(); i++)
      binds.push_back(std::make_unique<ScopedBind>(la, lb, a->binders[i],
                                                   b->binders[i], ctr));
    return alpha_cmd(a->body, b->body, la, lb, ctr);
  }
  }
  return false;
}

} // namespace

bool alpha_eq_term(const TermPtr &a, const TermPtr &b) {
  std::map<Name, Name> la, lb;
  long ctr = 0;
  return alpha_term(a, b, la, lb, ctr);
}

bool alpha_eq_command(const CmdPtr &a, const CmdPtr &b) {
  std::map<Name, Name> la, lb;
  long ctr = 0;
  return alpha_cmd(a, b, la, lb, ctr);
}

// ---------------------------------------------------------------------------
// Depth of reverse handlers

long rh_depth(const CmdPtr &p) {
  switch (p->kind) {
  case CmdKind::Ret:
  case CmdKind::OpCall:
    return 0;
  case CmdKind::CLet:
    return std::max(rh_depth(p->c1), rh_depth(p->c2));
  case CmdKind::RevHandle:
    return 1 + std::max(rh_depth(p->body), rh_depth(p->handler));
  }
  return 0;
}

long rh_depth(const HandlerPtr &h) {
  long d = rh_depth(h->ret_clause);
  for (const auto &[op, cl] : h->op_clauses) {
    d = std::max(d, rh_depth(cl.fwd));
    d = std::max(d, rh_depth(cl.bwd));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Size of derivation trees

long deriv_size_term(const TermPtr &t) {
  switch (t->kind) {
  case TermKind::Var:
  case TermKind::Const:
    return 1;
  case TermKind::FunApp:
  case TermKind::Proj:
    return 1 + deriv_size_term(t->kids[0]);
  case TermKind::Plus:
    return 1 + deriv_size_term(t->kids[0]) + deriv_size_term(t->kids[1]);
  case TermKind::Tuple: {
    long s = 1;
    for (const auto &k : t->kids)
      s += deriv_size_term(k);
    return s;
  }
  case TermKind::Let:
    return 1 + deriv_size_term(t->kids[0]) + deriv_size_term(t->kids[1]);
  case TermKind::Rd:
    return 1 + deriv_size_term(t->kids[0]) + deriv_size_term(t->kids[1]) +
           deriv_size_term(t->kids[2]);
  }
  return 1;
}

long deriv_size_command(const CmdPtr &p) {
  switch (p->kind) {
  case CmdKind::Ret:
    return deriv_size_term(p->term);
  case CmdKind::OpCall:
    return 2 + deriv_size_term(p->term);
  case CmdKind::CLet:
    return 1 + deriv_size_command(p->c1) + deriv_size_command(p->c2);
  case CmdKind::RevHandle:
    return 1 + deriv_size_term(p->term) + deriv_size_command(p->body) +
           deriv_size_handler(p->handler);
  }
  return 1;
}

long deriv_size_handler(const HandlerPtr &h) {
  long s = 1 + deriv_size_command(h->ret_clause);
  for (const auto &[op, cl] : h->op_clauses)
    s += deriv_size_command(cl.fwd) + deriv_size_command(cl.bwd);
  return s;
}

// ---------------------------------------------------------------------------
// Pretty printing

std::string show_vector(const std::vector<double> &v) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (size_t i = 0; i < v.size(); i++) {
    if (i)
      os << ", ";
    double d = v[i];
    if (d == (long long)d && std::abs(d) < 1e15)
      os << (long long)d << ".0";
    else
      os << d;
  }
  os << "]";
  return os.str();
}

std::string pretty(const Ty &ty) { return ty.show(); }

namespace {

// Precedence: plus < postfix rd < atoms.
void pp_term(const TermPtr &t, std::ostringstream &os, int prec);

void pp_atom(const TermPtr &t, std::ostringstream &os) { pp_term(t, os, 2); }

void pp_term(const TermPtr &t, std::ostringstream &os, int prec) {
  switch (t->kind) {
  case TermKind::Var:
    os << t->var;
    return;
  case TermKind::Const:
    if (!t->label.empty())
      os << t->label;
    else
      os << show_vector(t->vec);
    return;
  case TermKind::FunApp: {
    os << t->fun.show() << "(";
    const TermPtr &arg = t->kids[0];
    if (arg->kind == TermKind::Tuple && !arg->kids.empty()) {
      for (size_t i = 0; i < arg->kids.size(); i++) {
        if (i)
          os << ", ";
        pp_term(arg->kids[i], os, 0);
      }
    } else {
      pp_term(arg, os, 0);
    }
    os << ")";
    return;
  }
  case TermKind::Plus: {
    if (prec > 0)
      os << "(";
    pp_term(t->kids[0], os, 0);
    os << " + ";
    pp_term(t->kids[1], os, 1);
    if (prec > 0)
      os << ")";
    return;
  }
  case TermKind::Tuple: {
    os << "<";
    for (size_t i = 0; i < t->kids.size(); i++) {
      if (i)
        os << ", ";
      pp_term(t->kids[i], os, 0);
    }
    os << ">";
    return;
  }
  case TermKind::Proj:
    os << "proj<" << t->index << ">(";
    pp_term(t->kids[0], os, 0);
    os << ")";
    return;
  case TermKind::Let: {
    if (prec > 0)
      os << "(";
    os << "let " << t->var << " <- ";
    pp_term(t->kids[0], os, 1);
    os << " in ";
    pp_term(t->kids[1], os, 0);
    if (prec > 0)
      os << ")";
    return;
  }
  case TermKind::Rd: {
    pp_atom(t->kids[0], os);
    os << ".rd(" << t->var << ". ";
    pp_term(t->kids[1], os, 0);
    os << ")(";
    pp_term(t->kids[2], os, 0);
    os << ")";
    return;
  }
  }
}

void pp_cmd(const CmdPtr &p, std::ostringstream &os, int prec) {
  switch (p->kind) {
  case CmdKind::Ret:
    os << "ret ";
    pp_term(p->term, os, 1);
    return;
  case CmdKind::OpCall:
    os << p->op.show() << "@(";
    pp_term(p->term, os, 0);
    os << ")";
    return;
  case CmdKind::CLet:
    if (prec > 0)
      os << "(";
    os << "let " << p->var << " <= ";
    pp_cmd(p->c1, os, 1);
    os << " in ";
    pp_cmd(p->c2, os, 0);
    if (prec > 0)
      os << ")";
    return;
  case CmdKind::RevHandle: {
    if (prec > 0)
      os << "(";
    os << "rev handle(";
    pp_term(p->term, os, 0);
    os << ") <";
    for (size_t i = 0; i < p->binders.size(); i++) {
      if (i)
        os << ", ";
      os << p->binders[i];
    }
    os << ">. ";
    pp_cmd(p->body, os, 1);
    os << " with ";
    if (!p->handler->name.empty())
      os << p->handler->name;
    else
      os << pretty_handler_body(p->handler);
    if (prec > 0)
      os << ")";
    return;
  }
  }
}

} // namespace

std::string pretty(const TermPtr &t) {
  std::ostringstream os;
  pp_term(t, os, 0);
  return os.str();
}

std::string pretty(const CmdPtr &p) {
  std::ostringstream os;
  pp_cmd(p, os, 0);
  return os.str();
}

std::string pretty_handler_body(const HandlerPtr &h) {
  std::ostringstream os;
  os << "handler : " << h->carrier.show() << " { ret " << h->ret_binder
     << " -> " << pretty(h->ret_clause) << ";";
  for (const auto &[op, cl] : h->op_clauses) {
    os << " op " << op << "(" << cl.fwd_binder << ") -> " << pretty(cl.fwd)
       << " | bwd(" << cl.bwd_binder_out << ", " << cl.bwd_binder_aux
       << ") -> " << pretty(cl.bwd) << ";";
  }
  os << " }";
  return os.str();
}

} // namespace rva
