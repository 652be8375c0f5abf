#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

// Core syntax: types, signatures, the three syntactic classes (terms,
// commands, handlers), binding operations and the two termination metrics.

namespace rva {

using Name = std::string;

// ---------------------------------------------------------------------------
// Types: Real(n) base types and finite n-ary products.
// Products never have exactly one component (collapsed at construction);
// the empty product and Real(0) both denote the unit value but stay
// syntactically distinct.

class Ty {
public:
  Ty() : dim_(0) {}

  static Ty base(int n);
  static Ty prod(std::vector<Ty> comps);
  static Ty unit() { return base(0); }
  static Ty pair(Ty a, Ty b);

  bool is_base() const { return dim_ >= 0; }
  bool is_prod() const { return dim_ < 0; }
  int dim() const; // base types only
  const std::vector<Ty> &comps() const;
  size_t arity() const { return is_prod() ? comps().size() : 1; }

  // Total number of scalar entries in a value of this type.
  int flat_size() const;

  bool operator==(const Ty &o) const;
  bool operator!=(const Ty &o) const { return !(*this == o); }

  std::string show() const;

private:
  int dim_; // >= 0: Real(dim_); < 0: product
  std::shared_ptr<const std::vector<Ty>> comps_;
};

// ---------------------------------------------------------------------------
// Typing environments: ordered name -> type lists, leftmost entry innermost.

class TyEnv {
public:
  TyEnv() = default;
  explicit TyEnv(std::vector<std::pair<Name, Ty>> entries)
      : entries_(std::move(entries)) {}

  static TyEnv empty() { return TyEnv{}; }

  const std::vector<std::pair<Name, Ty>> &entries() const { return entries_; }
  bool has(const Name &x) const { return lookup(x) != nullptr; }
  const Ty *lookup(const Name &x) const;
  TyEnv prepend(Name x, Ty t) const;
  size_t size() const { return entries_.size(); }

  std::string show() const;

private:
  std::vector<std::pair<Name, Ty>> entries_;
};

// Lookup environment for terms typed under Gamma, Delta: Delta takes
// precedence on (ill-formed) name clashes.
TyEnv combined_env(const TyEnv &gamma, const TyEnv &delta);

// ---------------------------------------------------------------------------
// Function symbols. The signature is the closed family of primitives used by
// the examples, instantiated at concrete dimensions, plus their reverse
// derivative partners rd[f] : cod(f) x dom(f) -> dom(f).

enum class PrimFamily {
  Swish,     // swish<n>       : Real(n) -> Real(n)
  Scale,     // scale<n>       : Real(1) * Real(n) -> Real(n)
  Minus,     // minus<n>       : Real(n) * Real(n) -> Real(n)
  Matmul,    // matmul<n,m>    : Real(n*m) * Real(n) -> Real(m)
  Transpose, // transpose<n,m> : Real(n*m) -> Real(m*n)
  Conv,      // conv<n,m,c,c'> : Real(c*n) * Real(c*c'*m) -> Real(c'*(n-m+1))
  Pool,      // pool<n,m,c>    : Real(c*n) -> Real(c*ceil(n/m)), partial
  Padding,   // padding<c,n,m> : Real(c*n) -> Real(c*m), n <= m
  Upscale,   // upscale<c,n,m> : Real(c*n) -> Real(c*m)
  Concat,    // concat<c,c',n> : Real(c*n) * Real(c'*n) -> Real((c+c')*n)
  Round,     // round<n>       : Real(n) -> Real(n)
};

struct FunSym {
  PrimFamily fam = PrimFamily::Swish;
  std::vector<int> dims;
  int rd_order = 0; // 0 = the primitive itself, 1 = rd[f]

  std::string show() const;
  bool operator==(const FunSym &o) const {
    return fam == o.fam && dims == o.dims && rd_order == o.rd_order;
  }
};

struct FunSig {
  Ty dom, cod;
};

// Signature of a symbol; throws TypeError(UnknownSymbol) on malformed dims.
FunSig fun_sig(const FunSym &f);
// rd[f] when the signature provides it (rd of an rd is not closed here).
std::optional<FunSym> rd_partner(const FunSym &f);

// ---------------------------------------------------------------------------
// Operation symbols: user-declared ops plus the built-in get/put families
// over declared heap locations.

struct OpSym {
  enum class Kind { User, Get, Put };
  Kind kind = Kind::User;
  Name name; // user op name, or location name for get/put

  static OpSym user(Name n) { return {Kind::User, std::move(n)}; }
  static OpSym get(Name loc) { return {Kind::Get, std::move(loc)}; }
  static OpSym put(Name loc) { return {Kind::Put, std::move(loc)}; }

  bool operator==(const OpSym &o) const {
    return kind == o.kind && name == o.name;
  }
  bool operator<(const OpSym &o) const {
    return kind != o.kind ? kind < o.kind : name < o.name;
  }
  std::string show() const;
};

struct OpSig {
  Ty coarity; // input A of Op : A |-> B
  Ty arity;   // output B
};

struct SigTable {
  std::map<Name, int> locs;        // location -> dimension
  std::map<Name, OpSig> user_ops;  // op name -> signature

  bool has_loc(const Name &l) const { return locs.count(l) > 0; }
  int loc_dim(const Name &l) const;
  OpSig op_sig(const OpSym &op) const;
};

// ---------------------------------------------------------------------------
// Terms.

enum class TermKind { Var, Const, FunApp, Plus, Tuple, Proj, Let, Rd };

struct TermNode;
using TermPtr = std::shared_ptr<const TermNode>;

struct TermNode {
  TermKind kind;
  Name var;                 // Var name / Let binder / Rd binder
  std::vector<double> vec;  // Const payload
  std::string label;        // Const display label, may be empty
  FunSym fun;               // FunApp symbol
  int index = 0;            // Proj index, 1-based
  // FunApp: {arg}; Plus: {lhs, rhs}; Tuple: components; Proj: {arg};
  // Let: {bound, body}; Rd: {seed, body, point}
  std::vector<TermPtr> kids;
};

TermPtr t_var(Name x);
TermPtr t_const(std::vector<double> v, std::string label = "");
TermPtr t_fun(FunSym f, TermPtr arg);
TermPtr t_plus(TermPtr a, TermPtr b);
TermPtr t_tuple(std::vector<TermPtr> comps);
TermPtr t_proj(int i, TermPtr arg);
TermPtr t_let(Name x, TermPtr bound, TermPtr body);
TermPtr t_rd(TermPtr seed, Name binder, TermPtr body, TermPtr point);
// The all-zeros closed value of a given shape, as a term.
TermPtr t_zero(const Ty &ty);

bool is_value(const TermPtr &t);

// ---------------------------------------------------------------------------
// Commands and handlers.

enum class CmdKind { Ret, OpCall, CLet, RevHandle };

struct CmdNode;
using CmdPtr = std::shared_ptr<const CmdNode>;
struct HandlerNode;
using HandlerPtr = std::shared_ptr<const HandlerNode>;

struct CmdNode {
  CmdKind kind;
  TermPtr term;             // Ret arg / OpCall arg / RevHandle seed
  OpSym op;                 // OpCall
  Name var;                 // CLet binder
  CmdPtr c1, c2;            // CLet bound, body
  std::vector<Name> binders; // RevHandle, nonempty and pairwise distinct
  CmdPtr body;              // RevHandle body
  HandlerPtr handler;       // RevHandle handler
};

struct OpClause {
  Name fwd_binder;          // x in (x |-> Q^f | y,z |-> Q^b)
  CmdPtr fwd;
  Name bwd_binder_out;      // y : B, gradient from the continuation
  Name bwd_binder_aux;      // z : D_Op, auxiliary data from the forward part
  CmdPtr bwd;
};

struct HandlerNode {
  Name name;    // display name, may be empty for inline handlers
  Ty carrier;   // the C in RH(C)
  Name ret_binder;
  CmdPtr ret_clause;
  std::map<Name, OpClause> op_clauses; // keyed by user op name
};

CmdPtr c_ret(TermPtr m);
CmdPtr c_op(OpSym op, TermPtr arg);
CmdPtr c_let(Name x, CmdPtr bound, CmdPtr body);
CmdPtr c_rev_handle(TermPtr seed, std::vector<Name> binders, CmdPtr body,
                    HandlerPtr h);

// let <x1,..,xn> <= P in Q, expanded per the tuple-let definition.
CmdPtr c_let_tuple(const std::vector<Name> &xs, CmdPtr bound, CmdPtr body,
                   const std::set<Name> &avoid);
// let <x1,..,xn> <- M in N for terms.
TermPtr t_let_tuple(const std::vector<Name> &xs, TermPtr bound, TermPtr body,
                    const std::set<Name> &avoid);

// The paper's default clause for ops a handler leaves out:
//   (x |-> let y <= Op(x) in ret <y, 0> | y,z |-> ret 0) with D_Op = Real(0).
OpClause default_clause(const OpSym &op, const OpSig &sig);

// ---------------------------------------------------------------------------
// Binding operations.

Name fresh_name(const std::set<Name> &avoid, const Name &hint);

void free_vars_term(const TermPtr &t, std::set<Name> &out);
void free_vars_command(const CmdPtr &p, std::set<Name> &out);
std::set<Name> free_vars_term(const TermPtr &t);
std::set<Name> free_vars_command(const CmdPtr &p);
// Every variable occurring anywhere (free or bound), for fresh-name avoidance.
void all_vars_term(const TermPtr &t, std::set<Name> &out);
void all_vars_command(const CmdPtr &p, std::set<Name> &out);

using Subst = std::map<Name, TermPtr>;

TermPtr subst_term(const TermPtr &t, const Subst &bindings);
CmdPtr subst_command(const CmdPtr &p, const Subst &bindings);

bool alpha_eq_term(const TermPtr &a, const TermPtr &b);
bool alpha_eq_command(const CmdPtr &a, const CmdPtr &b);

// ---------------------------------------------------------------------------
// Termination metrics.

long rh_depth(const CmdPtr &p);
long rh_depth(const HandlerPtr &h);

// Size of typing derivation trees; structural on well-typed inputs.
long deriv_size_term(const TermPtr &t);
long deriv_size_command(const CmdPtr &p);
long deriv_size_handler(const HandlerPtr &h);

// ---------------------------------------------------------------------------
// Pretty printing.

std::string pretty(const Ty &ty);
std::string pretty(const TermPtr &t);
std::string pretty(const CmdPtr &p);
std::string pretty_handler_body(const HandlerPtr &h);
std::string show_vector(const std::vector<double> &v);

} // namespace rva
