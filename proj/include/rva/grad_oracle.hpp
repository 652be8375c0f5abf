#pragma once

#include <functional>
#include <string>

#include "rva/values.hpp"

// Independent finite-difference differentiation oracle and comparison
// harness.

namespace rva {

struct GradReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst_index;
  bool pass = false;
  std::string to_json() const;
};

// (Jf(x))^T u by central differences; component i perturbs the i-th scalar
// entry of the flattened input.
Value finite_diff_vjp(const std::function<Value(const Value &)> &f,
                      const Value &x, const Value &u, double h);

// Pointwise pass iff rel <= rel_tol or abs <= abs_tol at every entry.
GradReport compare(const Value &expected, const Value &got, double rel_tol,
                   double abs_tol);

// Closed-form gradients of L(v; m0, m1) = 1/2 ||m1 Swish(m0 v) - t||^2
// with respect to m0 and m1 (in that order). Shapes: m0 is an n_in -> n_hid
// matrix, m1 an n_hid -> n_out matrix, both row-major flat vectors.
std::pair<Value, Value> mlp_loss_grad_reference(const std::vector<double> &m0,
                                                const std::vector<double> &m1,
                                                const std::vector<double> &v,
                                                const std::vector<double> &t,
                                                int n_in, int n_hid, int n_out);

} // namespace rva
