#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/diagnostics.hpp"
#include "buildfs/path.hpp"

namespace buildfs {

class UnboundDescriptor : public std::runtime_error {
 public:
  explicit UnboundDescriptor(Descriptor fd)
      : std::runtime_error("unbound file descriptor fd" + std::to_string(fd)), fd_(fd) {}
  Descriptor fd() const { return fd_; }

 private:
  Descriptor fd_;
};

// Descriptor table of one process.
using Scope = std::map<Descriptor, std::string>;

// Descriptor tables of all processes seen so far. A process without an entry
// has the empty scope.
struct EvalState {
  std::unordered_map<ProcessId, Scope> scopes;

  const Scope& scope_of(const ProcessId& p) const {
    static const Scope empty;
    auto it = scopes.find(p);
    return it == scopes.end() ? empty : it->second;
  }

  bool operator==(const EvalState&) const = default;
};

struct AccessSet {
  std::set<std::string> consumed;
  std::set<std::string> produced;

  bool operator==(const AccessSet&) const = default;
};

// Evaluates `e` in `scope`. On an unbound descriptor returns nullopt and
// stores the descriptor in `*unbound`. A relative constant base resolves
// against descriptor 0.
inline std::optional<std::string> try_eval_expr(const Expr& e, const Scope& scope,
                                                Descriptor* unbound = nullptr) {
  auto lookup = [&](Descriptor fd) -> const std::string* {
    auto it = scope.find(fd);
    if (it == scope.end()) {
      if (unbound) *unbound = fd;
      return nullptr;
    }
    return &it->second;
  };

  std::string result;
  if (const auto* p = std::get_if<std::string>(&e.base)) {
    if (path::is_absolute(*p)) {
      result = path::normalize(*p);
    } else {
      const std::string* cwd = lookup(kCwdDescriptor);
      if (!cwd) return std::nullopt;
      result = path::join(*cwd, *p);
    }
  } else {
    const std::string* bound = lookup(std::get<Descriptor>(e.base));
    if (!bound) return std::nullopt;
    result = *bound;
  }
  for (const auto& frag : e.fragments) result = path::join(result, frag);
  return result;
}

inline std::string eval_expr(const Expr& e, const Scope& scope) {
  Descriptor fd = -1;
  auto r = try_eval_expr(e, scope, &fd);
  if (!r) throw UnboundDescriptor(fd);
  return std::move(*r);
}

inline void eval_op(const Operation& op, Scope& scope, AccessSet& acc, Diagnostics& diags) {
  auto report_unbound = [&](Descriptor fd, const char* what) {
    diags.error("unbound-descriptor",
                std::string(what) + " references unbound descriptor fd" + std::to_string(fd));
  };

  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        Descriptor fd = -1;
        if constexpr (std::is_same_v<T, LetFd>) {
          if (auto v = try_eval_expr(o.value, scope, &fd)) {
            scope[o.fd] = std::move(*v);
          } else {
            // The old binding is gone either way.
            scope.erase(o.fd);
            report_unbound(fd, "let");
          }
        } else if constexpr (std::is_same_v<T, DelFd>) {
          if (scope.erase(o.fd) == 0) {
            diags.warn("del-unbound-descriptor",
                       "del of descriptor fd" + std::to_string(o.fd) + " that is not bound");
          }
        } else if constexpr (std::is_same_v<T, Consume>) {
          if (auto v = try_eval_expr(o.target, scope, &fd)) {
            acc.consumed.insert(std::move(*v));
          } else {
            report_unbound(fd, "consume");
          }
        } else {
          if (auto v = try_eval_expr(o.target, scope, &fd)) {
            acc.produced.insert(std::move(*v));
          } else {
            report_unbound(fd, "produce");
          }
        }
      },
      op);
}

inline void eval_statement(const Statement& s, EvalState& state, AccessSet& acc,
                           Diagnostics& diags) {
  if (const auto* sys = std::get_if<SysOp>(&s)) {
    Scope& scope = state.scopes[sys->process];
    for (const auto& op : sys->ops) eval_op(op, scope, acc, diags);
  } else if (const auto* np = std::get_if<NewProc>(&s)) {
    state.scopes[np->process].clear();
  } else {
    const auto& from = std::get<NewProcFrom>(s);
    if (from.process == from.source) return;
    Scope copy = state.scope_of(from.source);
    state.scopes[from.process] = std::move(copy);
  }
}

inline AccessSet eval_task(const Task& t, EvalState& state, Diagnostics& diags) {
  AccessSet acc;
  for (const auto& s : t.body) eval_statement(s, state, acc, diags);
  return acc;
}

struct BuildEvaluation {
  std::vector<AccessSet> accesses;  // aligned with Program::tasks
  EvalState state;
  Diagnostics diagnostics;
};

// Folds eval_task over the program in order, starting from the empty state.
inline BuildEvaluation eval_build(const Program& b) {
  BuildEvaluation r;
  r.accesses.reserve(b.tasks.size());
  for (const auto& t : b.tasks) r.accesses.push_back(eval_task(t, r.state, r.diagnostics));
  return r;
}

}  // namespace buildfs
