#pragma once

#include <random>

#include "rva/command_eval.hpp"
#include "rva/typecheck.hpp"

// Builders for the paper-derived example programs, shared by tests.

namespace rva::testing {

inline FunSym swish(int n) { return {PrimFamily::Swish, {n}, 0}; }
inline FunSym scale(int n) { return {PrimFamily::Scale, {n}, 0}; }
inline FunSym minus(int n) { return {PrimFamily::Minus, {n}, 0}; }
inline FunSym matmul(int n, int m) { return {PrimFamily::Matmul, {n, m}, 0}; }
inline FunSym transpose(int n, int m) {
  return {PrimFamily::Transpose, {n, m}, 0};
}
inline FunSym conv(int n, int m, int c, int cp) {
  return {PrimFamily::Conv, {n, m, c, cp}, 0};
}
inline FunSym pool(int n, int m, int c) { return {PrimFamily::Pool, {n, m, c}, 0}; }
inline FunSym round_(int n) { return {PrimFamily::Round, {n}, 0}; }
inline FunSym rd_of(FunSym f) {
  f.rd_order++;
  return f;
}

// y (x)^T as a convolution with a size-1 filter:
// conv<n,1,1,m>(x, y)[l*n + i] = x[i] * y[l].
inline TermPtr outer_yxT(int n, int m, TermPtr y, TermPtr x) {
  return t_fun(conv(n, 1, 1, m), t_tuple({std::move(x), std::move(y)}));
}

// The training clause for a fully connected layer at location loc holding an
// n -> m matrix.
inline OpClause linear_clause(const Name &loc, int n, int m) {
  OpClause cl;
  cl.fwd_binder = "x";
  cl.fwd = c_let(
      "w", c_op(OpSym::get(loc), t_const({})),
      c_ret(t_tuple({t_fun(matmul(n, m), t_tuple({t_var("w"), t_var("x")})),
                     t_tuple({t_var("w"), t_var("x")})})));
  cl.bwd_binder_out = "y";
  cl.bwd_binder_aux = "z";
  TermPtr update = t_fun(
      minus(n * m),
      t_tuple({t_var("w"), outer_yxT(n, m, t_var("y"), t_var("x"))}));
  TermPtr back = t_fun(
      matmul(m, n),
      t_tuple({t_fun(transpose(n, m), t_var("w")), t_var("y")}));
  cl.bwd = c_let_tuple(
      {"w", "x"}, c_ret(t_var("z")),
      c_let("u", c_op(OpSym::put(loc), update), c_ret(back)), {"y", "z"});
  return cl;
}

struct MlpSetup {
  int nin, nhid, nout;
  std::vector<double> m0, m1, v, t;
  double alpha;
  SigTable sigs;
  CmdPtr body; // R_MLP, one free binder x_in
  HandlerPtr handler;
  CmdPtr main;
  Heap heap0;
};

inline HandlerPtr mlp_handler(int nin, int nhid, int nout,
                              const std::vector<double> &t, double alpha) {
  auto h = std::make_shared<HandlerNode>();
  h->name = "HMLP";
  h->carrier = Ty::base(nout);
  h->ret_binder = "x";
  h->ret_clause = c_ret(t_fun(
      scale(nout),
      t_tuple({t_const({alpha}, "alpha"),
               t_fun(minus(nout), t_tuple({t_var("x"), t_const(t, "t")}))})));
  h->op_clauses["linear0"] = linear_clause("l0", nin, nhid);
  h->op_clauses["linear1"] = linear_clause("l1", nhid, nout);
  return h;
}

inline CmdPtr mlp_body(int nhid) {
  return c_let(
      "z_hid", c_op(OpSym::user("linear0"), t_var("x_in")),
      c_let("x_hid", c_ret(t_fun(swish(nhid), t_var("z_hid"))),
            c_let("z_out", c_op(OpSym::user("linear1"), t_var("x_hid")),
                  c_ret(t_var("z_out")))));
}

inline SigTable mlp_sigs(int nin, int nhid, int nout) {
  SigTable sigs;
  sigs.locs["l0"] = nin * nhid;
  sigs.locs["l1"] = nhid * nout;
  sigs.user_ops["linear0"] = {Ty::base(nin), Ty::base(nhid)};
  sigs.user_ops["linear1"] = {Ty::base(nhid), Ty::base(nout)};
  return sigs;
}

inline MlpSetup make_mlp(int nin, int nhid, int nout, std::vector<double> m0,
                         std::vector<double> m1, std::vector<double> v,
                         std::vector<double> t, double alpha) {
  MlpSetup s;
  s.nin = nin;
  s.nhid = nhid;
  s.nout = nout;
  s.m0 = m0;
  s.m1 = m1;
  s.v = v;
  s.t = t;
  s.alpha = alpha;
  s.sigs = mlp_sigs(nin, nhid, nout);
  s.body = mlp_body(nhid);
  s.handler = mlp_handler(nin, nhid, nout, t, alpha);
  s.main = c_rev_handle(t_const(v, "v"), {"x_in"}, s.body, s.handler);
  s.heap0 = Heap::from({{"l0", Value::vec(m0)}, {"l1", Value::vec(m1)}});
  return s;
}

// Residual block over the same MLP and handler; needs nin == nout.
inline MlpSetup make_resnet(int nin, int nhid, std::vector<double> m0,
                            std::vector<double> m1, std::vector<double> v,
                            std::vector<double> t, double alpha) {
  MlpSetup s = make_mlp(nin, nhid, nin, std::move(m0), std::move(m1),
                        std::move(v), std::move(t), alpha);
  s.body = c_let("z", mlp_body(nhid), c_ret(t_plus(t_var("x_in"), t_var("z"))));
  s.main = c_rev_handle(t_const(s.v, "v"), {"x_in"}, s.body, s.handler);
  return s;
}

struct AutoencoderSetup {
  int n, m;
  SigTable sigs;
  CmdPtr main;
  Heap heap0;
};

// Nested handlers: EnDe is expanded to the encoder by H_AE, whose clauses
// re-emit linear ops handled by the outer training handler.
inline AutoencoderSetup make_autoencoder(int n, int m, std::vector<double> w0,
                                         std::vector<double> w1,
                                         std::vector<double> v, double alpha) {
  AutoencoderSetup s;
  s.n = n;
  s.m = m;
  s.sigs.locs["l0"] = n * m;
  s.sigs.locs["l1"] = m * n;
  s.sigs.user_ops["linear0"] = {Ty::base(n), Ty::base(m)};
  s.sigs.user_ops["linear1"] = {Ty::base(m), Ty::base(n)};
  s.sigs.user_ops["ende"] = {Ty::base(n), Ty::base(m)};

  auto hae = std::make_shared<HandlerNode>();
  hae->name = "HAE";
  hae->carrier = Ty::base(m);
  hae->ret_binder = "x";
  hae->ret_clause = c_ret(t_var("x"));
  OpClause ende;
  ende.fwd_binder = "x";
  ende.fwd = c_let("y", c_op(OpSym::user("linear0"), t_var("x")),
                   c_ret(t_tuple({t_var("y"), t_const({})})));
  ende.bwd_binder_out = "y";
  ende.bwd_binder_aux = "z";
  ende.bwd = c_op(OpSym::user("linear1"), t_var("y"));
  hae->op_clauses["ende"] = ende;

  auto htrain = std::make_shared<HandlerNode>();
  htrain->name = "HTRAIN";
  htrain->carrier = Ty::base(n);
  htrain->ret_binder = "x";
  htrain->ret_clause = c_ret(
      t_fun(scale(n), t_tuple({t_const({alpha}, "alpha"),
                               t_fun(minus(n), t_tuple({t_var("x"),
                                                        t_const(v, "v")}))})));
  htrain->op_clauses["linear0"] = linear_clause("l0", n, m);
  htrain->op_clauses["linear1"] = linear_clause("l1", m, n);

  CmdPtr inner = c_rev_handle(t_var("xin"), {"xi"},
                              c_op(OpSym::user("ende"), t_var("xi")), hae);
  s.main = c_rev_handle(t_const(v, "v"), {"xin"}, inner, htrain);
  s.heap0 = Heap::from({{"l0", Value::vec(w0)}, {"l1", Value::vec(w1)}});
  return s;
}

struct SteSetup {
  int n;
  SigTable sigs;
  CmdPtr main;
};

inline SteSetup make_ste(int n, std::vector<double> v) {
  SteSetup s;
  s.n = n;
  s.sigs.user_ops["layer"] = {Ty::base(n), Ty::base(n)};
  auto h = std::make_shared<HandlerNode>();
  h->name = "HSTE";
  h->carrier = Ty::base(n);
  h->ret_binder = "x";
  h->ret_clause = c_ret(t_var("x"));
  OpClause layer;
  layer.fwd_binder = "x";
  layer.fwd = c_ret(t_tuple({t_fun(round_(n), t_var("x")),
                             t_const(std::vector<double>(n, 0.0))}));
  layer.bwd_binder_out = "y";
  layer.bwd_binder_aux = "z";
  layer.bwd = c_ret(t_var("y"));
  h->op_clauses["layer"] = layer;
  s.main = c_rev_handle(t_const(std::move(v), "v"), {"x"},
                        c_let("y", c_op(OpSym::user("layer"), t_var("x")),
                              c_ret(t_var("y"))),
                        h);
  return s;
}

inline std::vector<double> random_vec(std::mt19937_64 &rng, int n, double lo,
                                      double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto &x : v)
    x = dist(rng);
  return v;
}

} // namespace rva::testing
