#include "rva/values.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include "rva/errors.hpp"

namespace rva {

bool Value::operator==(const Value &o) const {
  if (kind != o.kind)
    return false;
  return is_vec() ? v == o.v : t == o.t;
}

std::string Value::show() const {
  if (is_vec())
    return show_vector(v);
  std::string s = "<";
  for (size_t i = 0; i < t.size(); i++) {
    if (i)
      s += ", ";
    s += t[i].show();
  }
  return s + ">";
}

bool shape_matches(const Value &v, const Ty &ty) {
  if (ty.is_base())
    return v.is_vec() && (int)v.v.size() == ty.dim();
  if (!v.is_tup() || v.t.size() != ty.comps().size())
    return false;
  for (size_t i = 0; i < v.t.size(); i++)
    if (!shape_matches(v.t[i], ty.comps()[i]))
      return false;
  return true;
}

Ty shape_of(const Value &v) {
  if (v.is_vec())
    return Ty::base((int)v.v.size());
  std::vector<Ty> cs;
  for (const Value &c : v.t)
    cs.push_back(shape_of(c));
  if (cs.size() == 1) // cannot arise from tup(), but stay total
    return Ty::prod({cs[0], Ty::base(0)});
  return Ty::prod(std::move(cs));
}

Value zero_of(const Ty &ty) {
  if (ty.is_base())
    return Value::vec(std::vector<double>(ty.dim(), 0.0));
  std::vector<Value> cs;
  for (const Ty &c : ty.comps())
    cs.push_back(zero_of(c));
  Value r;
  r.kind = Value::Kind::Tup;
  r.t = std::move(cs);
  return r;
}

Value add_values(const Value &a, const Value &b) {
  if (a.kind != b.kind)
    throw EvalError(EvalError::Code::ShapeMismatch,
                    "add_values on " + a.show() + " and " + b.show());
  if (a.is_vec()) {
    if (a.v.size() != b.v.size())
      throw EvalError(EvalError::Code::ShapeMismatch,
                      "add_values length mismatch");
    std::vector<double> r(a.v.size());
    for (size_t i = 0; i < r.size(); i++)
      r[i] = a.v[i] + b.v[i];
    return Value::vec(std::move(r));
  }
  if (a.t.size() != b.t.size())
    throw EvalError(EvalError::Code::ShapeMismatch, "add_values tuple arity");
  std::vector<Value> r;
  r.reserve(a.t.size());
  for (size_t i = 0; i < a.t.size(); i++)
    r.push_back(add_values(a.t[i], b.t[i]));
  Value out;
  out.kind = Value::Kind::Tup;
  out.t = std::move(r);
  return out;
}

std::vector<double> flatten(const Value &v) {
  std::vector<double> out;
  std::function<void(const Value &)> go = [&](const Value &x) {
    if (x.is_vec())
      out.insert(out.end(), x.v.begin(), x.v.end());
    else
      for (const Value &c : x.t)
        go(c);
  };
  go(v);
  return out;
}

static Value unflatten_at(const Ty &ty, const std::vector<double> &flat,
                          size_t &pos) {
  if (ty.is_base()) {
    if (pos + ty.dim() > flat.size())
      throw EvalError(EvalError::Code::ShapeMismatch, "unflatten overflow");
    std::vector<double> xs(flat.begin() + pos, flat.begin() + pos + ty.dim());
    pos += ty.dim();
    return Value::vec(std::move(xs));
  }
  std::vector<Value> cs;
  for (const Ty &c : ty.comps())
    cs.push_back(unflatten_at(c, flat, pos));
  Value r;
  r.kind = Value::Kind::Tup;
  r.t = std::move(cs);
  return r;
}

Value unflatten(const Ty &ty, const std::vector<double> &flat) {
  size_t pos = 0;
  Value v = unflatten_at(ty, flat, pos);
  if (pos != flat.size())
    throw EvalError(EvalError::Code::ShapeMismatch, "unflatten underflow");
  return v;
}

Value term_to_value(const TermPtr &t) {
  switch (t->kind) {
  case TermKind::Const:
    return Value::vec(t->vec);
  case TermKind::Tuple: {
    std::vector<Value> cs;
    for (const auto &k : t->kids)
      cs.push_back(term_to_value(k));
    Value r;
    r.kind = Value::Kind::Tup;
    r.t = std::move(cs);
    return r;
  }
  default:
    throw EvalError(EvalError::Code::Internal,
                    "term_to_value on non-closed-value " + pretty(t));
  }
}

TermPtr value_to_term(const Value &v) {
  if (v.is_vec())
    return t_const(v.v);
  std::vector<TermPtr> cs;
  for (const Value &c : v.t)
    cs.push_back(value_to_term(c));
  if (cs.empty()) {
    auto n = std::make_shared<TermNode>();
    n->kind = TermKind::Tuple;
    return n;
  }
  return t_tuple(std::move(cs));
}

// ---------------------------------------------------------------------------
// Primitive evaluation

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const std::vector<double> &vec_arg(const FunSym &f, const Value &v) {
  if (!v.is_vec())
    throw EvalError(EvalError::Code::ShapeMismatch,
                    f.show() + " expects a vector argument");
  return v.v;
}

std::pair<const Value *, const Value *> pair_arg(const FunSym &f,
                                                 const Value &v) {
  if (!v.is_tup() || v.t.size() != 2)
    throw EvalError(EvalError::Code::ShapeMismatch,
                    f.show() + " expects a pair argument");
  return {&v.t[0], &v.t[1]};
}

void check_len(const FunSym &f, const std::vector<double> &v, int n) {
  if ((int)v.size() != n)
    throw EvalError(EvalError::Code::ShapeMismatch,
                    f.show() + ": argument length " +
                        std::to_string(v.size()) + ", expected " +
                        std::to_string(n));
}

// conv<n,m,c,c'>: x in Real(c*n) channel-major, w in Real(c*c'*m) indexed
// [k][l][j] = w[k*c'*m + l*m + j], out[l][i] = sum_{k,j} x[k][i+j] * w[k][l][j].
Value ev_conv(const FunSym &f, const Value &arg) {
  int n = f.dims[0], m = f.dims[1], c = f.dims[2], cp = f.dims[3];
  auto [xa, wa] = pair_arg(f, arg);
  const auto &x = vec_arg(f, *xa);
  const auto &w = vec_arg(f, *wa);
  check_len(f, x, c * n);
  check_len(f, w, c * cp * m);
  int on = n - m + 1;
  std::vector<double> out(cp * on, 0.0);
  for (int l = 0; l < cp; l++)
    for (int i = 0; i < on; i++) {
      double s = 0;
      for (int k = 0; k < c; k++)
        for (int j = 0; j < m; j++)
          s += x[k * n + i + j] * w[k * cp * m + l * m + j];
      out[l * on + i] = s;
    }
  return Value::vec(std::move(out));
}

Value ev_rd_conv(const FunSym &f, const Value &arg) {
  int n = f.dims[0], m = f.dims[1], c = f.dims[2], cp = f.dims[3];
  auto [ua, pt] = pair_arg(f, arg);
  const auto &u = vec_arg(f, *ua);
  auto [xa, wa] = pair_arg(f, *pt);
  const auto &x = vec_arg(f, *xa);
  const auto &w = vec_arg(f, *wa);
  int on = n - m + 1;
  check_len(f, u, cp * on);
  check_len(f, x, c * n);
  check_len(f, w, c * cp * m);
  std::vector<double> dx(c * n, 0.0), dw(c * cp * m, 0.0);
  // dx[k][i] = sum_{l,j} u[l][i-j] w[k][l][j], zero outside [0, n-m].
  for (int k = 0; k < c; k++)
    for (int i = 0; i < n; i++) {
      double s = 0;
      for (int l = 0; l < cp; l++)
        for (int j = 0; j < m; j++) {
          int ui = i - j;
          if (ui >= 0 && ui < on)
            s += u[l * on + ui] * w[k * cp * m + l * m + j];
        }
      dx[k * n + i] = s;
    }
  // dw[k][l][j] = sum_i u[l][i] x[k][i+j].
  for (int k = 0; k < c; k++)
    for (int l = 0; l < cp; l++)
      for (int j = 0; j < m; j++) {
        double s = 0;
        for (int i = 0; i < on; i++)
          s += u[l * on + i] * x[k * n + i + j];
        dw[k * cp * m + l * m + j] = s;
      }
  return Value::tup({Value::vec(std::move(dx)), Value::vec(std::move(dw))});
}

// pool<n,m,c>: max pooling with stride = window; the last window may be
// partial. Undefined on a tied window unless tie-break is enabled.
int pool_argmax(const FunSym &f, const std::vector<double> &x, int k, int i,
                int n, int m, bool tie_break_first) {
  int lo = i * m, hi = std::min(n, (i + 1) * m);
  int best = lo;
  for (int j = lo + 1; j < hi; j++)
    if (x[k * n + j] > x[k * n + best])
      best = j;
  if (!tie_break_first) {
    for (int j = lo; j < hi; j++)
      for (int j2 = j + 1; j2 < hi; j2++)
        if (x[k * n + j] == x[k * n + j2])
          throw EvalError(EvalError::Code::Partiality,
                          f.show() + " undefined: tied window at channel " +
                              std::to_string(k) + ", window " +
                              std::to_string(i));
  }
  return best;
}

Value ev_pool(const FunSym &f, const Value &arg, const EvOptions &opts) {
  int n = f.dims[0], m = f.dims[1], c = f.dims[2];
  const auto &x = vec_arg(f, arg);
  check_len(f, x, c * n);
  int on = (n + m - 1) / m;
  std::vector<double> out(c * on);
  for (int k = 0; k < c; k++)
    for (int i = 0; i < on; i++)
      out[k * on + i] =
          x[k * n + pool_argmax(f, x, k, i, n, m, opts.pool_tie_break_first)];
  return Value::vec(std::move(out));
}

Value ev_rd_pool(const FunSym &f, const Value &arg, const EvOptions &opts) {
  int n = f.dims[0], m = f.dims[1], c = f.dims[2];
  auto [ua, xa] = pair_arg(f, arg);
  const auto &u = vec_arg(f, *ua);
  const auto &x = vec_arg(f, *xa);
  int on = (n + m - 1) / m;
  check_len(f, u, c * on);
  check_len(f, x, c * n);
  std::vector<double> dx(c * n, 0.0);
  for (int k = 0; k < c; k++)
    for (int i = 0; i < on; i++)
      dx[k * n + pool_argmax(f, x, k, i, n, m, opts.pool_tie_break_first)] +=
          u[k * on + i];
  return Value::vec(std::move(dx));
}

} // namespace

Value ev(const FunSym &f, const Value &arg, const EvOptions &opts) {
  auto R = [](std::vector<double> v) { return Value::vec(std::move(v)); };
  if (f.rd_order > 1)
    throw EvalError(EvalError::Code::MissingRdPartner,
                    "no interpretation for " + f.show());
  const bool rd = f.rd_order == 1;
  switch (f.fam) {
  case PrimFamily::Swish: {
    int n = f.dims[0];
    if (!rd) {
      const auto &x = vec_arg(f, arg);
      check_len(f, x, n);
      std::vector<double> out(n);
      for (int i = 0; i < n; i++)
        out[i] = x[i] * sigm(x[i]);
      return R(std::move(out));
    }
    auto [ua, va] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua), &v = vec_arg(f, *va);
    check_len(f, u, n);
    check_len(f, v, n);
    std::vector<double> out(n);
    for (int i = 0; i < n; i++) {
      double s = sigm(v[i]);
      out[i] = u[i] * (s + v[i] * s * (1.0 - s));
    }
    return R(std::move(out));
  }
  case PrimFamily::Scale: {
    int n = f.dims[0];
    if (!rd) {
      auto [aa, xa] = pair_arg(f, arg);
      const auto &a = vec_arg(f, *aa), &x = vec_arg(f, *xa);
      check_len(f, a, 1);
      check_len(f, x, n);
      std::vector<double> out(n);
      for (int i = 0; i < n; i++)
        out[i] = a[0] * x[i];
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    auto [aa, xa] = pair_arg(f, *pt);
    const auto &a = vec_arg(f, *aa), &x = vec_arg(f, *xa);
    check_len(f, u, n);
    check_len(f, a, 1);
    check_len(f, x, n);
    double da = 0;
    std::vector<double> dx(n);
    for (int i = 0; i < n; i++) {
      da += u[i] * x[i];
      dx[i] = a[0] * u[i];
    }
    return Value::tup({R({da}), R(std::move(dx))});
  }
  case PrimFamily::Minus: {
    int n = f.dims[0];
    if (!rd) {
      auto [xa, ya] = pair_arg(f, arg);
      const auto &x = vec_arg(f, *xa), &y = vec_arg(f, *ya);
      check_len(f, x, n);
      check_len(f, y, n);
      std::vector<double> out(n);
      for (int i = 0; i < n; i++)
        out[i] = x[i] - y[i];
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    (void)pair_arg(f, *pt);
    check_len(f, u, n);
    std::vector<double> neg(n);
    for (int i = 0; i < n; i++)
      neg[i] = -u[i];
    return Value::tup({R(u), R(std::move(neg))});
  }
  case PrimFamily::Matmul: {
    int n = f.dims[0], m = f.dims[1];
    if (!rd) {
      auto [wa, xa] = pair_arg(f, arg);
      const auto &w = vec_arg(f, *wa), &x = vec_arg(f, *xa);
      check_len(f, w, n * m);
      check_len(f, x, n);
      std::vector<double> out(m, 0.0);
      for (int i = 0; i < m; i++)
        for (int j = 0; j < n; j++)
          out[i] += w[i * n + j] * x[j];
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    auto [wa, xa] = pair_arg(f, *pt);
    const auto &w = vec_arg(f, *wa), &x = vec_arg(f, *xa);
    check_len(f, u, m);
    check_len(f, w, n * m);
    check_len(f, x, n);
    std::vector<double> dw(n * m), dx(n, 0.0);
    for (int i = 0; i < m; i++)
      for (int j = 0; j < n; j++) {
        dw[i * n + j] = u[i] * x[j];
        dx[j] += w[i * n + j] * u[i];
      }
    return Value::tup({R(std::move(dw)), R(std::move(dx))});
  }
  case PrimFamily::Transpose: {
    int n = f.dims[0], m = f.dims[1];
    if (!rd) {
      const auto &w = vec_arg(f, arg);
      check_len(f, w, n * m);
      std::vector<double> out(m * n);
      for (int i = 0; i < m; i++)
        for (int j = 0; j < n; j++)
          out[j * m + i] = w[i * n + j];
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    (void)vec_arg(f, *pt);
    check_len(f, u, m * n);
    std::vector<double> out(n * m);
    for (int j = 0; j < n; j++)
      for (int i = 0; i < m; i++)
        out[i * n + j] = u[j * m + i];
    return R(std::move(out));
  }
  case PrimFamily::Conv:
    return rd ? ev_rd_conv(f, arg) : ev_conv(f, arg);
  case PrimFamily::Pool:
    return rd ? ev_rd_pool(f, arg, opts) : ev_pool(f, arg, opts);
  case PrimFamily::Padding: {
    int c = f.dims[0], n = f.dims[1], m = f.dims[2];
    int before = (m - n) / 2;
    if (!rd) {
      const auto &x = vec_arg(f, arg);
      check_len(f, x, c * n);
      std::vector<double> out(c * m, 0.0);
      for (int k = 0; k < c; k++)
        for (int i = 0; i < n; i++)
          out[k * m + before + i] = x[k * n + i];
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    (void)vec_arg(f, *pt);
    check_len(f, u, c * m);
    std::vector<double> out(c * n);
    for (int k = 0; k < c; k++)
      for (int i = 0; i < n; i++)
        out[k * n + i] = u[k * m + before + i];
    return R(std::move(out));
  }
  case PrimFamily::Upscale: {
    int c = f.dims[0], n = f.dims[1], m = f.dims[2];
    if (!rd) {
      const auto &x = vec_arg(f, arg);
      check_len(f, x, c * n);
      std::vector<double> out(c * m);
      for (int k = 0; k < c; k++)
        for (int i = 0; i < m; i++)
          out[k * m + i] = x[k * n + (int)((long)i * n / m)];
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    (void)vec_arg(f, *pt);
    check_len(f, u, c * m);
    std::vector<double> out(c * n, 0.0);
    for (int k = 0; k < c; k++)
      for (int i = 0; i < m; i++)
        out[k * n + (int)((long)i * n / m)] += u[k * m + i];
    return R(std::move(out));
  }
  case PrimFamily::Concat: {
    int c = f.dims[0], cp = f.dims[1], n = f.dims[2];
    if (!rd) {
      auto [xa, ya] = pair_arg(f, arg);
      const auto &x = vec_arg(f, *xa), &y = vec_arg(f, *ya);
      check_len(f, x, c * n);
      check_len(f, y, cp * n);
      std::vector<double> out;
      out.reserve((c + cp) * n);
      out.insert(out.end(), x.begin(), x.end());
      out.insert(out.end(), y.begin(), y.end());
      return R(std::move(out));
    }
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    (void)pair_arg(f, *pt);
    check_len(f, u, (c + cp) * n);
    return Value::tup(
        {R(std::vector<double>(u.begin(), u.begin() + c * n)),
         R(std::vector<double>(u.begin() + c * n, u.end()))});
  }
  case PrimFamily::Round: {
    int n = f.dims[0];
    if (!rd) {
      const auto &x = vec_arg(f, arg);
      check_len(f, x, n);
      std::vector<double> out(n);
      for (int i = 0; i < n; i++)
        out[i] = std::round(x[i]);
      return R(std::move(out));
    }
    // The straight-through premise: rd[round] = 0.
    auto [ua, pt] = pair_arg(f, arg);
    const auto &u = vec_arg(f, *ua);
    (void)vec_arg(f, *pt);
    check_len(f, u, n);
    return R(std::vector<double>(n, 0.0));
  }
  }
  throw EvalError(EvalError::Code::Internal, "ev: unknown family");
}

// ---------------------------------------------------------------------------
// Heap

Value Heap::get(const Name &loc, int dim) const {
  auto it = slots_->find(loc);
  if (it == slots_->end())
    return Value::vec(std::vector<double>(dim, 0.0));
  return it->second;
}

Heap Heap::put(const Name &loc, Value v) const {
  if (!v.is_vec())
    throw EvalError(EvalError::Code::ShapeMismatch,
                    "heap slot " + loc + " written with a non-vector");
  auto m = std::make_shared<std::map<Name, Value>>(*slots_);
  (*m)[loc] = std::move(v);
  Heap h;
  h.slots_ = std::move(m);
  return h;
}

std::string Heap::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{";
  bool first = true;
  for (const auto &[loc, val] : *slots_) {
    if (!first)
      os << ", ";
    first = false;
    os << "\"" << loc << "\": [";
    for (size_t i = 0; i < val.v.size(); i++) {
      if (i)
        os << ", ";
      os << val.v[i];
    }
    os << "]";
  }
  os << "}";
  return os.str();
}

std::string Heap::digest() const {
  // FNV-1a over the canonical serialization.
  std::string s = to_json();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  std::string hex = os.str();
  return hex.size() > 12 ? hex.substr(0, 12) : hex;
}

} // namespace rva
