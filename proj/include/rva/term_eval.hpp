#pragma once

#include <optional>

#include "rva/typecheck.hpp"
#include "rva/values.hpp"

// Small-step operational semantics for terms: reverse-derivative rewriting
// and the reduction relation.

namespace rva {

// RD_W^V(x.N): W and V are (possibly open) value terms, N the body. The env
// types the free variables of W, V and N other than x; binder_ty is x's type.
TermPtr rewrite_rd(const TyEnv &env, const Ty &binder_ty, const TermPtr &w,
                   const TermPtr &v, const Name &x, const TermPtr &n);

// One leftmost-innermost step; nothing when t is a value.
std::optional<TermPtr> step_term(const TermPtr &t, const EvOptions &opts = {});

// Transitive closure of step_term down to a closed value.
Value eval_term(const TermPtr &t, const EvOptions &opts = {});

// Evaluate a one-variable pure term as a function of its binder.
Value eval_fun1(const Name &binder, const TermPtr &body, const Value &arg,
                const EvOptions &opts = {});

} // namespace rva
