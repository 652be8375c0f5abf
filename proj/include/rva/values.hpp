#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rva/syntax.hpp"

// Concrete values, the partial evaluation map Ev for every primitive with its
// reverse derivative, the commutative-monoid addition on values, and the heap.

namespace rva {

struct Value {
  enum class Kind { Vec, Tup };
  Kind kind = Kind::Vec;
  std::vector<double> v;
  std::vector<Value> t;

  static Value vec(std::vector<double> xs) {
    Value r;
    r.kind = Kind::Vec;
    r.v = std::move(xs);
    return r;
  }
  static Value tup(std::vector<Value> xs) {
    if (xs.size() == 1)
      return xs[0];
    Value r;
    r.kind = Kind::Tup;
    r.t = std::move(xs);
    return r;
  }
  static Value unit() { return vec({}); }

  bool is_vec() const { return kind == Kind::Vec; }
  bool is_tup() const { return kind == Kind::Tup; }

  bool operator==(const Value &o) const;
  std::string show() const;
};

bool shape_matches(const Value &v, const Ty &ty);
Ty shape_of(const Value &v);
Value zero_of(const Ty &ty);
Value add_values(const Value &a, const Value &b);

std::vector<double> flatten(const Value &v);
Value unflatten(const Ty &ty, const std::vector<double> &flat);

// Conversions between closed value terms and Values.
Value term_to_value(const TermPtr &t);
TermPtr value_to_term(const Value &v);

struct EvOptions {
  bool pool_tie_break_first = false; // --tie-break=first
};

// The evaluation partial function Ev. Throws Partiality (pool ties without
// the tie-break flag), ShapeMismatch, or UnknownSymbol/MissingRdPartner.
Value ev(const FunSym &f, const Value &arg, const EvOptions &opts = {});

// Persistent heap: absent slots read as the zero vector of the declared size.
class Heap {
public:
  Heap() : slots_(std::make_shared<const std::map<Name, Value>>()) {}

  static Heap from(std::map<Name, Value> m) {
    Heap h;
    h.slots_ = std::make_shared<const std::map<Name, Value>>(std::move(m));
    return h;
  }

  Value get(const Name &loc, int dim) const;
  Heap put(const Name &loc, Value v) const; // checks the slot dimension
  const std::map<Name, Value> &slots() const { return *slots_; }
  bool same_rep(const Heap &o) const { return slots_ == o.slots_; }

  std::string to_json() const;
  std::string digest() const;

private:
  std::shared_ptr<const std::map<Name, Value>> slots_;
};

} // namespace rva
