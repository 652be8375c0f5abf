#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "rva/free_arrow.hpp"
#include "rva/grad_oracle.hpp"

using namespace rva;
using namespace rva::testing;

namespace {

// A random smooth morphism between base-shaped types: flatten the input with
// unit-width concats, hit it with a random matrix, optionally swish.
TermPtr flatten_term(const Ty &ty, const TermPtr &t, int &len) {
  if (ty.is_base()) {
    len = ty.dim();
    return t;
  }
  int total = 0;
  TermPtr acc;
  for (size_t i = 0; i < ty.comps().size(); i++) {
    int l = 0;
    TermPtr part = flatten_term(ty.comps()[i], t_proj((int)i + 1, t), l);
    if (!acc) {
      acc = part;
      total = l;
    } else {
      acc = t_fun(FunSym{PrimFamily::Concat, {total, l, 1}, 0},
                  t_tuple({acc, part}));
      total += l;
    }
  }
  len = total;
  return acc;
}

PureFun rnd_fun(std::mt19937_64 &rng, const Ty &dom, int cod_n) {
  int len = 0;
  TermPtr flat = flatten_term(dom, t_var("a"), len);
  TermPtr body =
      t_fun(matmul(len, cod_n),
            t_tuple({t_const(random_vec(rng, len * cod_n, -1, 1)), flat}));
  if (rng() % 2)
    body = t_fun(swish(cod_n), body);
  return {"a", body, dom, Ty::base(cod_n)};
}

SigTable axiom_sigs() {
  SigTable sigs;
  sigs.locs["l1"] = 2;
  sigs.locs["l2"] = 3;
  sigs.user_ops["opA"] = {Ty::base(2), Ty::base(3)};
  sigs.user_ops["opB"] = {Ty::base(3), Ty::base(2)};
  return sigs;
}

// A small effectful arrow dom -> Real(cod_n) built from arrs around one op;
// the whole pre-op vector rides along on the context wire.
ArrPtr rnd_effectful(std::mt19937_64 &rng, const SigTable &sigs, const Ty &dom,
                     int cod_n, const OpSym &op) {
  OpSig sig = sigs.op_sig(op);
  int co = sig.coarity.flat_size();
  int z = co + 1 + (int)(rng() % 3);
  PureFun pre0 = rnd_fun(rng, dom, z);
  PureFun mkpair{
      "s",
      t_tuple({t_fun(matmul(z, co),
                     t_tuple({t_const(random_vec(rng, z * co, -1, 1)),
                              t_var("s")})),
               t_var("s")}),
      Ty::base(z), Ty::pair(sig.coarity, Ty::base(z))};
  ArrPtr acc = a_seq(a_arr(pre0), a_arr(mkpair));
  acc = a_seq(acc, a_first(Ty::base(z), a_op(sigs, op)));
  PureFun post = rnd_fun(rng, Ty::pair(sig.arity, Ty::base(z)), cod_n);
  return a_seq(acc, a_arr(post));
}

Value rnd_value(std::mt19937_64 &rng, const Ty &ty) {
  return unflatten(ty, random_vec(rng, ty.flat_size(), -2, 2));
}

bool ext_equal(const SigTable &sigs, const ArrPtr &x, const ArrPtr &y,
               std::mt19937_64 &rng, double tol = 1e-12) {
  REQUIRE(x->dom == y->dom);
  REQUIRE(x->cod == y->cod);
  for (int it = 0; it < 3; it++) {
    Value in = rnd_value(rng, x->dom);
    Heap hp = Heap::from({{"l1", Value::vec(random_vec(rng, 2, -2, 2))},
                          {"l2", Value::vec(random_vec(rng, 3, -2, 2))}});
    auto [h1, v1] = evaluate_arr(sigs, x, hp, in);
    auto [h2, v2] = evaluate_arr(sigs, y, hp, in);
    if (!compare(v1, v2, tol, tol).pass)
      return false;
    for (const auto &[loc, val] : h1.slots())
      if (!compare(val, h2.get(loc, (int)val.v.size()), tol, tol).pass)
        return false;
    if (h1.slots().size() != h2.slots().size())
      return false;
  }
  return true;
}

} // namespace

TEST_CASE("normalize: unit law and arr fusion") {
  SigTable sigs = axiom_sigs();
  std::mt19937_64 rng(1);
  for (int it = 0; it < 20; it++) {
    ArrPtr a = rnd_effectful(rng, sigs, Ty::base(2), 3, OpSym::user("opA"));
    ArrPtr left = a_seq(a_arr(pf_identity(Ty::base(2))), a);
    ArrPtr right = a_seq(a, a_arr(pf_identity(Ty::base(3))));
    CHECK(normalize(sigs, left) == normalize(sigs, a));
    CHECK(normalize(sigs, right) == normalize(sigs, a));
  }
  for (int it = 0; it < 20; it++) {
    PureFun f = rnd_fun(rng, Ty::base(2), 4);
    PureFun g = rnd_fun(rng, Ty::base(4), 3);
    CHECK(normalize(sigs, a_arr(pf_compose(f, g))) ==
          normalize(sigs, a_seq(a_arr(f), a_arr(g))));
  }
}

TEST_CASE("normalize: seq associativity") {
  SigTable sigs = axiom_sigs();
  std::mt19937_64 rng(2);
  for (int it = 0; it < 20; it++) {
    ArrPtr a = rnd_effectful(rng, sigs, Ty::base(2), 3, OpSym::user("opA"));
    ArrPtr b = rnd_effectful(rng, sigs, Ty::base(3), 2, OpSym::user("opB"));
    ArrPtr c = rnd_effectful(rng, sigs, Ty::base(2), 2, OpSym::user("opA"));
    CHECK(normalize(sigs, a_seq(a_seq(a, b), c)) ==
          normalize(sigs, a_seq(a, a_seq(b, c))));
  }
}

TEST_CASE("normalize: first laws") {
  SigTable sigs = axiom_sigs();
  std::mt19937_64 rng(3);
  Ty z = Ty::base(2);
  for (int it = 0; it < 20; it++) {
    // first(arr(f)) ~ arr(f x id)
    PureFun f = rnd_fun(rng, Ty::base(2), 3);
    PureFun fxid{
        "p",
        t_tuple({subst_term(f.body, {{f.binder, t_proj(1, t_var("p"))}}),
                 t_proj(2, t_var("p"))}),
        Ty::pair(f.dom, z), Ty::pair(f.cod, z)};
    CHECK(normalize(sigs, a_first(z, a_arr(f))) ==
          normalize(sigs, a_arr(fxid)));

    // first(a >>> b) ~ first(a) >>> first(b)
    ArrPtr a = rnd_effectful(rng, sigs, Ty::base(2), 3, OpSym::user("opA"));
    ArrPtr b = rnd_effectful(rng, sigs, Ty::base(3), 2, OpSym::user("opB"));
    CHECK(normalize(sigs, a_first(z, a_seq(a, b))) ==
          normalize(sigs, a_seq(a_first(z, a), a_first(z, b))));

    // first(a) >>> arr(id x g) ~ arr(id x g) >>> first(a)
    PureFun g = rnd_fun(rng, z, 2);
    auto idxg = [&](const Ty &main) {
      return PureFun{
          "p",
          t_tuple({t_proj(1, t_var("p")),
                   subst_term(g.body, {{g.binder, t_proj(2, t_var("p"))}})}),
          Ty::pair(main, z), Ty::pair(main, Ty::base(2))};
    };
    ArrPtr a23 = rnd_effectful(rng, sigs, Ty::base(2), 3, OpSym::user("opA"));
    CHECK(normalize(sigs, a_seq(a_first(z, a23), a_arr(idxg(Ty::base(3))))) ==
          normalize(sigs,
                    a_seq(a_arr(idxg(Ty::base(2))), a_first(Ty::base(2), a23))));

    // first(a) >>> arr(pi1) ~ arr(pi1) >>> a
    PureFun pi1{"p", t_proj(1, t_var("p")), Ty::pair(Ty::base(2), z),
                Ty::base(2)};
    PureFun pi1b{"p", t_proj(1, t_var("p")), Ty::pair(Ty::base(3), z),
                 Ty::base(3)};
    CHECK(normalize(sigs, a_seq(a_first(z, a23), a_arr(pi1b))) ==
          normalize(sigs, a_seq(a_arr(pi1), a23)));

    // first(a) >>> arr(assoc) ~ arr(assoc) >>> first(first(a))
    Ty zz = Ty::base(1);
    TermPtr p = t_var("p");
    auto assoc = [&](const Ty &main) {
      return PureFun{
          "p",
          t_tuple({t_tuple({t_proj(1, p), t_proj(1, t_proj(2, p))}),
                   t_proj(2, t_proj(2, p))}),
          Ty::pair(main, Ty::pair(z, zz)),
          Ty::pair(Ty::pair(main, z), zz)};
    };
    CHECK(normalize(sigs, a_seq(a_first(Ty::pair(z, zz), a23),
                                a_arr(assoc(Ty::base(3))))) ==
          normalize(sigs, a_seq(a_arr(assoc(Ty::base(2))),
                                a_first(zz, a_first(z, a23)))));
  }
}

TEST_CASE("normalize: congruence axioms hold extensionally") {
  std::mt19937_64 rng(4);
  SigTable s2;
  s2.locs["l1"] = 2;
  s2.locs["l2"] = 3;
  OpSym g = OpSym::get("l1"), pu = OpSym::put("l2");
  for (int it = 0; it < 30; it++) {
    // a : Real(1) ~> Real(4) via get, b : Real(4) ~> Real(2) via put.
    PureFun pre{"s", t_tuple({t_const({}), t_var("s")}), Ty::base(1),
                Ty::pair(Ty::base(0), Ty::base(1))};
    ArrPtr a = a_seq(a_arr(pre), a_first(Ty::base(1), a_op(s2, g)));
    a = a_seq(a, a_arr(rnd_fun(rng, Ty::pair(Ty::base(2), Ty::base(1)), 4)));
    PureFun mk3{"s",
                t_tuple({t_fun(matmul(4, 3),
                               t_tuple({t_const(random_vec(rng, 12, -1, 1)),
                                        t_var("s")})),
                         t_var("s")}),
                Ty::base(4), Ty::pair(Ty::base(3), Ty::base(4))};
    ArrPtr b = a_seq(a_arr(mk3), a_first(Ty::base(4), a_op(s2, pu)));
    b = a_seq(b, a_arr(rnd_fun(rng, Ty::pair(Ty::base(0), Ty::base(4)), 2)));

    ArrPtr lhs = a_seq(a_seq(a, b), a_arr(pf_identity(Ty::base(2))));
    ArrPtr rhs = a_seq(a, a_seq(b, a_arr(pf_identity(Ty::base(2)))));
    CHECK(ext_equal(s2, lhs, rhs, rng));
    CHECK(ext_equal(s2, a_seq(a, b),
                    reassemble(s2, normalize(s2, a_seq(a, b))), rng));
  }
}

TEST_CASE("normalize is idempotent") {
  SigTable sigs = axiom_sigs();
  std::mt19937_64 rng(5);
  for (int it = 0; it < 20; it++) {
    ArrPtr a = rnd_effectful(rng, sigs, Ty::base(2), 3, OpSym::user("opA"));
    ArrPtr b = rnd_effectful(rng, sigs, Ty::base(3), 2, OpSym::user("opB"));
    NormalForm nf = normalize(sigs, a_seq(a, b));
    CHECK(normalize(sigs, reassemble(sigs, nf)) == nf);
  }
}

TEST_CASE("denotation of ret and op calls") {
  SigTable sigs = axiom_sigs();
  TyEnv delta;
  delta = delta.prepend("x", Ty::base(2));
  ArrPtr r = denote_command(sigs, delta, c_ret(t_fun(swish(2), t_var("x"))));
  CHECK(r->k == ArrTerm::K::Arr);
  CHECK(normalize(sigs, r).ops.empty());

  ArrPtr o = denote_command(sigs, delta, c_op(OpSym::user("opA"), t_var("x")));
  NormalForm nf = normalize(sigs, o);
  REQUIRE(nf.ops.size() == 1);
  CHECK(nf.ops[0].op == OpSym::user("opA"));
}

TEST_CASE("mlp body denotation alternates two linear segments") {
  SigTable sigs = mlp_sigs(2, 3, 2);
  TyEnv delta;
  delta = delta.prepend("x_in", Ty::base(2));
  NormalForm nf = normalize(sigs, denote_command(sigs, delta, mlp_body(3)));
  REQUIRE(nf.ops.size() == 2);
  CHECK(nf.ops[0].op == OpSym::user("linear0"));
  CHECK(nf.ops[1].op == OpSym::user("linear1"));
  CHECK(nf.dom == Ty::base(2));
  CHECK(nf.cod == Ty::base(2));
}

TEST_CASE("evaluate_arr basics") {
  SigTable sigs;
  sigs.locs["l"] = 1;
  PureFun f{"x", t_fun(minus(2), t_tuple({t_var("x"), t_const({1, 1})})),
            Ty::base(2), Ty::base(2)};
  auto [h1, v1] = evaluate_arr(sigs, a_arr(f), Heap{}, Value::vec({1, 2}));
  CHECK(v1 == Value::vec({0, 1}));

  Heap hp = Heap::from({{"l", Value::vec({7})}});
  ArrPtr a =
      a_seq(a_arr(pf_identity(Ty::base(0))), a_op(sigs, OpSym::get("l")));
  auto [h2, v2] = evaluate_arr(sigs, a, hp, Value::unit());
  CHECK(v2 == Value::vec({7}));
  CHECK(h2.same_rep(hp));

  SigTable su = axiom_sigs();
  CHECK_THROWS_AS(evaluate_arr(su, a_op(su, OpSym::user("opA")), Heap{},
                               Value::vec({1, 2})),
                  EvalError);
}

TEST_CASE("algebra laws hold extensionally") {
  std::mt19937_64 rng(6);
  SigTable sigs = axiom_sigs();

  // A handler whose clauses are heap-backed, so folds stay executable.
  auto h = std::make_shared<HandlerNode>();
  h->carrier = Ty::base(2);
  h->ret_binder = "x";
  h->ret_clause = c_ret(t_fun(swish(2), t_var("x")));
  OpClause ca;
  ca.fwd_binder = "x";
  ca.fwd = c_let(
      "w", c_op(OpSym::get("l2"), t_const({})),
      c_ret(t_tuple({t_fun(matmul(2, 3),
                           t_tuple({t_const(random_vec(rng, 6, -1, 1)),
                                    t_var("x")})),
                     t_var("w")})));
  ca.bwd_binder_out = "y";
  ca.bwd_binder_aux = "z";
  ca.bwd = c_let("u", c_op(OpSym::put("l2"), t_var("y")),
                 c_ret(t_fun(matmul(3, 2),
                             t_tuple({t_const(random_vec(rng, 6, -1, 1)),
                                      t_var("z")}))));
  h->op_clauses["opA"] = ca;
  OpClause cb;
  cb.fwd_binder = "x";
  cb.fwd = c_ret(t_tuple({t_fun(matmul(3, 2),
                                t_tuple({t_const(random_vec(rng, 6, -1, 1)),
                                         t_var("x")})),
                          t_var("x")}));
  cb.bwd_binder_out = "y";
  cb.bwd_binder_aux = "z";
  cb.bwd = c_ret(t_fun(matmul(2, 3),
                       t_tuple({t_const(random_vec(rng, 6, -1, 1)),
                                t_var("y")})));
  h->op_clauses["opB"] = cb;

  for (int it = 0; it < 25; it++) {
    ArrPtr a = rnd_effectful(rng, sigs, Ty::base(2), 3, OpSym::user("opA"));
    ArrPtr b = rnd_effectful(rng, sigs, Ty::base(3), 2, OpSym::user("opB"));
    ArrPtr k = ralg_sandwich(rnd_fun(rng, Ty::base(2), 2),
                             a_arr(pf_identity(Ty::base(2))));

    ArrPtr lhs =
        reverse_algebra_fold(sigs, h, normalize(sigs, a_seq(a, b)), k);
    ArrPtr bk = reverse_algebra_fold(sigs, h, normalize(sigs, b), k);
    ArrPtr rhs = reverse_algebra_fold(sigs, h, normalize(sigs, a), bk);
    CHECK(ext_equal(sigs, lhs, rhs, rng, 1e-9));

    ArrPtr idk = reverse_algebra_fold(
        sigs, h, normalize(sigs, a_arr(pf_identity(Ty::base(2)))), k);
    CHECK(ext_equal(sigs, idk, k, rng));
  }
}

TEST_CASE("reverse algebra on a linear arr matches the rd rewriter") {
  std::mt19937_64 rng(8);
  SigTable sigs;
  for (int it = 0; it < 10; it++) {
    auto w = random_vec(rng, 6, -1, 1);
    PureFun f{"x", t_fun(matmul(2, 3), t_tuple({t_const(w), t_var("x")})),
              Ty::base(2), Ty::base(3)};
    ArrPtr composite = ralg_sandwich(f, a_arr(pf_identity(Ty::base(3))));
    Value x = Value::vec(random_vec(rng, 2, -2, 2));
    auto [h1, got] = evaluate_arr(sigs, composite, Heap{}, x);
    Value fx = ev(matmul(2, 3), Value::tup({Value::vec(w), x}));
    Value want =
        ev(matmul(3, 2), Value::tup({ev(transpose(2, 3), Value::vec(w)), fx}));
    CHECK(compare(want, got, 1e-12, 1e-12).pass);
  }
}

TEST_CASE("backend equivalence on the mlp") {
  std::mt19937_64 rng(9);
  for (int it = 0; it < 3; it++) {
    MlpSetup s = make_mlp(2, 3, 2, random_vec(rng, 6, -1, 1),
                          random_vec(rng, 6, -1, 1), random_vec(rng, 2, -1, 1),
                          random_vec(rng, 2, -1, 1), 0.1);
    RunResult op = run_command(s.sigs, {s.heap0, s.main});
    ArrPtr den = denote_command(s.sigs, TyEnv{}, s.main);
    auto [h2, v2] = evaluate_arr(s.sigs, den, s.heap0, Value::unit());
    CHECK(compare(op.value, v2, 1e-9, 1e-12).pass);
    CHECK(compare(op.heap.get("l0", 6), h2.get("l0", 6), 1e-9, 1e-12).pass);
    CHECK(compare(op.heap.get("l1", 6), h2.get("l1", 6), 1e-9, 1e-12).pass);
  }
}

TEST_CASE("backend equivalence on nested autoencoder handlers") {
  std::mt19937_64 rng(10);
  AutoencoderSetup ae = make_autoencoder(4, 2, random_vec(rng, 8, -1, 1),
                                         random_vec(rng, 8, -1, 1),
                                         random_vec(rng, 4, -1, 1), 0.05);
  RunResult op = run_command(ae.sigs, {ae.heap0, ae.main});
  ArrPtr den = denote_command(ae.sigs, TyEnv{}, ae.main);
  auto [h2, v2] = evaluate_arr(ae.sigs, den, ae.heap0, Value::unit());
  CHECK(compare(op.value, v2, 1e-9, 1e-12).pass);
  CHECK(compare(op.heap.get("l0", 8), h2.get("l0", 8), 1e-9, 1e-12).pass);
  CHECK(compare(op.heap.get("l1", 8), h2.get("l1", 8), 1e-9, 1e-12).pass);
}

TEST_CASE("backend equivalence on the ste program") {
  SteSetup s = make_ste(3, {0.4, 1.5, -2.7});
  RunResult op = run_command(s.sigs, {Heap{}, s.main});
  ArrPtr den = denote_command(s.sigs, TyEnv{}, s.main);
  auto [h2, v2] = evaluate_arr(s.sigs, den, Heap{}, Value::unit());
  CHECK(op.value == v2); // bit-identical either way
}
