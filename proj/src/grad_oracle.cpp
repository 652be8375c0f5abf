#include "rva/grad_oracle.hpp"

#include <cmath>
#include <sstream>

#include "rva/errors.hpp"

namespace rva {

std::string GradReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"max_rel_err\": " << max_rel_err
     << ", \"max_abs_err\": " << max_abs_err << ", \"worst_index\": \""
     << worst_index << "\", \"pass\": " << (pass ? "true" : "false") << "}";
  return os.str();
}

Value finite_diff_vjp(const std::function<Value(const Value &)> &f,
                      const Value &x, const Value &u, double h) {
  Ty xty = shape_of(x);
  std::vector<double> xf = flatten(x);
  std::vector<double> uf = flatten(u);
  std::vector<double> grad(xf.size());
  for (size_t i = 0; i < xf.size(); i++) {
    std::vector<double> xp = xf, xm = xf;
    xp[i] += h;
    xm[i] -= h;
    std::vector<double> fp = flatten(f(unflatten(xty, xp)));
    std::vector<double> fm = flatten(f(unflatten(xty, xm)));
    if (fp.size() != uf.size() || fm.size() != uf.size())
      throw EvalError(EvalError::Code::ShapeMismatch,
                      "finite_diff_vjp: output shape drifted");
    double acc = 0;
    for (size_t j = 0; j < uf.size(); j++)
      acc += (fp[j] - fm[j]) / (2.0 * h) * uf[j];
    grad[i] = acc;
  }
  return unflatten(xty, grad);
}

GradReport compare(const Value &expected, const Value &got, double rel_tol,
                   double abs_tol) {
  std::vector<double> e = flatten(expected), g = flatten(got);
  if (e.size() != g.size() || !(shape_of(expected) == shape_of(got)))
    throw EvalError(EvalError::Code::ShapeMismatch,
                    "compare: shapes differ: " + expected.show() + " vs " +
                        got.show());
  GradReport rep;
  rep.pass = true;
  for (size_t i = 0; i < e.size(); i++) {
    double abs = std::fabs(e[i] - g[i]);
    double rel = abs / std::max(std::fabs(e[i]), std::fabs(g[i]));
    if (abs == 0.0)
      rel = 0.0;
    bool ok = rel <= rel_tol || abs <= abs_tol;
    if (abs > rep.max_abs_err)
      rep.max_abs_err = abs;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = std::to_string(i);
    }
    if (!ok)
      rep.pass = false;
  }
  return rep;
}

namespace {
double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double swish_prime(double x) {
  double s = sigm(x);
  return s + x * s * (1.0 - s);
}
} // namespace

std::pair<Value, Value> mlp_loss_grad_reference(const std::vector<double> &m0,
                                                const std::vector<double> &m1,
                                                const std::vector<double> &v,
                                                const std::vector<double> &t,
                                                int n_in, int n_hid,
                                                int n_out) {
  // z = m0 v, v1 = Swish(z), r = m1 v1 - t
  std::vector<double> z(n_hid, 0.0), v1(n_hid), r(n_out, 0.0);
  for (int i = 0; i < n_hid; i++)
    for (int j = 0; j < n_in; j++)
      z[i] += m0[i * n_in + j] * v[j];
  for (int i = 0; i < n_hid; i++)
    v1[i] = z[i] * sigm(z[i]);
  for (int i = 0; i < n_out; i++) {
    for (int j = 0; j < n_hid; j++)
      r[i] += m1[i * n_hid + j] * v1[j];
    r[i] -= t[i];
  }
  // dL/dm1 = r v1^T
  std::vector<double> g1(n_hid * n_out);
  for (int i = 0; i < n_out; i++)
    for (int j = 0; j < n_hid; j++)
      g1[i * n_hid + j] = r[i] * v1[j];
  // dL/dm0 = (m1^T r  .*  Swish'(z)) v^T
  std::vector<double> back(n_hid, 0.0);
  for (int j = 0; j < n_hid; j++) {
    for (int i = 0; i < n_out; i++)
      back[j] += m1[i * n_hid + j] * r[i];
    back[j] *= swish_prime(z[j]);
  }
  std::vector<double> g0(n_in * n_hid);
  for (int i = 0; i < n_hid; i++)
    for (int j = 0; j < n_in; j++)
      g0[i * n_in + j] = back[i] * v[j];
  return {Value::vec(std::move(g0)), Value::vec(std::move(g1))};
}

} // namespace rva
