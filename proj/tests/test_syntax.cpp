#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "rva/term_eval.hpp"

using namespace rva;

TEST_CASE("fresh_name counter suffix") {
  CHECK(fresh_name({"x"}, "x") == "x#1");
  CHECK(fresh_name({}, "y") == "y");
  CHECK(fresh_name({"x", "x#1"}, "x") == "x#2");
  CHECK(fresh_name({"x", "x#1", "x#2"}, "x#1") == "x#3");
}

TEST_CASE("substitution hit and miss") {
  TermPtr c = t_const({1.0});
  CHECK(alpha_eq_term(subst_term(t_var("x"), {{"x", c}}), c));
  CHECK(alpha_eq_term(subst_term(t_var("y"), {{"x", c}}), t_var("y")));
}

TEST_CASE("substitution avoids capture in let") {
  // (let x <- x in x)[c/x] = let x' <- c in x'
  TermPtr t = t_let("x", t_var("x"), t_var("x"));
  TermPtr c = t_const({2.5});
  TermPtr got = subst_term(t, {{"x", c}});
  CHECK(alpha_eq_term(got, t_let("x", c, t_var("x"))));
  // Same value either way per the substitution lemma.
  CHECK(eval_term(got) == eval_term(t_let("x", c, t_var("x"))));

  // Capture case: (let y <- [0] in x + y)[y/x] must rename the binder.
  TermPtr body = t_let("y", t_const({0.0}), t_plus(t_var("x"), t_var("y")));
  TermPtr res = subst_term(body, {{"x", t_var("y")}});
  std::set<Name> fv = free_vars_term(res);
  CHECK(fv.count("y") == 1);
  TermPtr closed = subst_term(res, {{"y", t_const({7.0})}});
  CHECK(eval_term(closed) == Value::vec({7.0}));
}

TEST_CASE("command substitution") {
  TermPtr c = t_const({1.0});
  CmdPtr p = subst_command(c_ret(t_var("x")), {{"x", c}});
  CHECK(alpha_eq_command(p, c_ret(c)));

  CmdPtr q = subst_command(c_op(OpSym::user("op1"), t_var("x")), {{"x", c}});
  CHECK(alpha_eq_command(q, c_op(OpSym::user("op1"), c)));

  // let x <= ret x in Op(x) with x := V rebinds the inner x.
  CmdPtr r = c_let("x", c_ret(t_var("x")), c_op(OpSym::user("op1"), t_var("x")));
  CmdPtr rs = subst_command(r, {{"x", c}});
  CHECK(alpha_eq_command(
      rs, c_let("w", c_ret(c), c_op(OpSym::user("op1"), t_var("w")))));
}

TEST_CASE("substitution lemma on generated terms") {
  // Evaluating N[V/x] equals evaluating let x <- V in N.
  std::mt19937_64 rng(7);
  for (int it = 0; it < 50; it++) {
    auto vv = testing::random_vec(rng, 3, -2, 2);
    TermPtr v = t_const(vv);
    TermPtr n;
    switch (it % 5) {
    case 0:
      n = t_fun(testing::swish(3), t_var("x"));
      break;
    case 1:
      n = t_plus(t_var("x"), t_const(testing::random_vec(rng, 3, -2, 2)));
      break;
    case 2:
      n = t_let("y", t_fun(testing::swish(3), t_var("x")),
                t_plus(t_var("y"), t_var("x")));
      break;
    case 3:
      n = t_proj(2, t_tuple({t_const({1.0}), t_var("x")}));
      break;
    default:
      n = t_rd(t_var("x"), "u", t_fun(testing::swish(3), t_var("u")),
               t_var("x"));
      break;
    }
    Value lhs = eval_term(subst_term(n, {{"x", v}}));
    Value rhs = eval_term(t_let("x", v, n));
    CHECK(lhs == rhs);
  }
}

TEST_CASE("rh_depth per the defining equations") {
  CHECK(rh_depth(c_ret(t_var("x"))) == 0);
  CHECK(rh_depth(c_op(OpSym::user("op1"), t_var("x"))) == 0);

  auto h0 = std::make_shared<HandlerNode>();
  h0->carrier = Ty::base(1);
  h0->ret_binder = "x";
  h0->ret_clause = c_ret(t_var("x"));

  CmdPtr inner = c_rev_handle(t_var("x"), {"y"}, c_ret(t_var("y")), h0);
  CmdPtr outer = c_rev_handle(t_var("v"), {"x"}, inner, h0);
  CHECK(rh_depth(inner) == 1);
  CHECK(rh_depth(outer) == 2);
  CHECK(rh_depth(c_let("a", outer, inner)) == 2);
  CHECK(rh_depth(h0) == 0);
}

TEST_CASE("derivation sizes") {
  CHECK(deriv_size_term(t_var("x")) == 1);
  CHECK(deriv_size_term(t_fun(testing::swish(1), t_var("x"))) == 2);
  CHECK(deriv_size_command(c_op(OpSym::user("op1"), t_var("x"))) == 3);
  CHECK(deriv_size_command(c_ret(t_var("x"))) == 1);
  // Strict decrease into immediate subterms.
  TermPtr t = t_let("y", t_fun(testing::swish(1), t_var("x")),
                    t_plus(t_var("y"), t_var("y")));
  CHECK(deriv_size_term(t) > deriv_size_term(t->kids[0]));
  CHECK(deriv_size_term(t) > deriv_size_term(t->kids[1]));
}

TEST_CASE("tuple let sugar expands to projections") {
  // let <a,b> <= P in ret a expands to a chain of three lets.
  CmdPtr p = c_let_tuple({"a", "b"}, c_ret(t_var("v")), c_ret(t_var("a")), {});
  CHECK(p->kind == CmdKind::CLet);
  CHECK(p->c2->kind == CmdKind::CLet);
  CHECK(p->c2->c1->term->kind == TermKind::Proj);
  CHECK(p->c2->c1->term->index == 1);
  CHECK(p->c2->c2->c1->term->index == 2);
}

TEST_CASE("alpha equivalence across binder names") {
  TermPtr a = t_let("x", t_const({1.0}), t_plus(t_var("x"), t_var("x")));
  TermPtr b = t_let("y", t_const({1.0}), t_plus(t_var("y"), t_var("y")));
  TermPtr c = t_let("y", t_const({1.0}), t_plus(t_var("y"), t_const({1.0})));
  CHECK(alpha_eq_term(a, b));
  CHECK(!alpha_eq_term(a, c));
}

TEST_CASE("pretty printing stays stable") {
  TermPtr t = t_let("x", t_const({1.0}),
                    t_rd(t_var("x"), "u", t_fun(testing::swish(1), t_var("u")),
                         t_var("x")));
  CHECK(pretty(t) == "let x <- [1.0] in x.rd(u. swish<1>(u))(x)");
}
