#pragma once

#include <stdexcept>
#include <string>

namespace rva {

struct SourceSpan {
  int line = 0, col = 0;
  bool known() const { return line > 0; }
  std::string show() const {
    return known() ? std::to_string(line) + ":" + std::to_string(col) : "?";
  }
};

struct ParseError : std::runtime_error {
  SourceSpan span;
  ParseError(SourceSpan s, const std::string &msg)
      : std::runtime_error(s.show() + ": " + msg), span(s) {}
};

struct TypeError : std::runtime_error {
  enum class Code {
    UnboundVariable,
    UnknownSymbol,
    ArityMismatch,
    PlusOnNonBase,
    ProjOutOfRange,
    RdShapeMismatch,
    HandlerCarrierMismatch,
    RevHandleSeedNotProduct,
    BinderCountMismatch,
    RetClauseNotEndomorphic,
    ForwardClauseShape,
    BackwardClauseShape,
  };
  Code code;
  std::string offending; // pretty-printed offending subterm
  SourceSpan span;
  TypeError(Code c, const std::string &msg, std::string off = "",
            SourceSpan s = {})
      : std::runtime_error(msg), code(c), offending(std::move(off)), span(s) {}
};

struct EvalError : std::runtime_error {
  enum class Code {
    Partiality,          // a primitive is undefined at its argument
    ShapeMismatch,
    Stuck,               // closed, not a value, no rule applies
    MissingRdPartner,
    UnhandledOperation,  // user op in redex position with no handler
    ResidualOperation,   // user op survived all handler applications (oracle)
    FuelExhausted,
    Internal,
  };
  Code code;
  EvalError(Code c, const std::string &msg) : std::runtime_error(msg), code(c) {}
};

const char *type_error_code_name(TypeError::Code c);
const char *eval_error_code_name(EvalError::Code c);

} // namespace rva
