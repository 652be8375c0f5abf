#pragma once

#include <functional>
#include <optional>

#include "rva/term_eval.hpp"

// Small-step operational semantics for commands: contexts, the four-way
// command classification, reverse-handler rewriting, heap rules and the
// driver.

namespace rva {

// One frame of F^c: let var <= [-] in body.
struct CtxFrame {
  Name var;
  CmdPtr body;
};
using CmdCtx = std::vector<CtxFrame>; // outermost first

CmdPtr plug(const CmdCtx &ctx, CmdPtr inner);

enum class CmdFormKind { RetVar, OpVar, NestedHandle, TermHole };

// Which command former the term hole sits under.
enum class HoleKind { Ret, Op, Handle };

struct CmdForm {
  CmdFormKind kind;
  CmdCtx ctx;
  Name var;                  // RetVar / OpVar argument, NestedHandle seed
  OpSym op;                  // OpVar, TermHole under an op
  TermPtr term;              // TermHole contents (not a variable)
  HoleKind hole = HoleKind::Ret;
  std::vector<Name> binders; // NestedHandle / TermHole under a handle
  CmdPtr body;
  HandlerPtr handler;
};

// The unique decomposition of a well-typed command over a variable
// environment (raises Internal on ill-typed input).
CmdForm classify(const CmdPtr &p);

// RH_V^H(<y_i>.r): seed is a (possibly open) value term of the binders'
// product type; binders carry their types.
CmdPtr rewrite_rh(const SigTable &sigs, const TermPtr &seed,
                  const std::vector<std::pair<Name, Ty>> &binders,
                  const CmdPtr &r, const HandlerPtr &h);

struct MachineState {
  Heap heap;
  CmdPtr cmd;
};

struct StepResult {
  MachineState state;
  enum class Kind { Term, PureLet, Get, Put, Handle } kind;
};

std::optional<StepResult> step_command(const SigTable &sigs,
                                       const MachineState &s,
                                       const EvOptions &opts = {});

struct RunOptions {
  EvOptions ev;
  long fuel = 1000000;
  bool debug_checks = false; // re-check types and depths on every step
  std::function<void(long, const Heap &, const CmdPtr &)> trace;
};

struct RunResult {
  Heap heap;
  Value value;
  long steps = 0;
};

RunResult run_command(const SigTable &sigs, MachineState s,
                      const RunOptions &opts = {});

} // namespace rva
