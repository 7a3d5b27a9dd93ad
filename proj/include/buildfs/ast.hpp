#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "buildfs/path.hpp"

namespace buildfs {

using TaskName = std::string;
using ProcessId = std::string;
using Descriptor = int;

// Descriptor 0 of a process denotes its working directory.
inline constexpr Descriptor kCwdDescriptor = 0;

// Declared input or output files of a task: nothing, anything, or a finite
// set of normalized absolute paths. An empty set is always stored as Bottom.
class FileSpec {
 public:
  enum class Kind { Bottom, Top, Set };

  FileSpec() = default;

  static FileSpec bottom() { return FileSpec{}; }
  static FileSpec top() {
    FileSpec s;
    s.kind_ = Kind::Top;
    return s;
  }
  template <typename Range>
  static FileSpec of(const Range& paths) {
    FileSpec s;
    for (const auto& p : paths) s.paths_.insert(path::normalize(p));
    s.kind_ = s.paths_.empty() ? Kind::Bottom : Kind::Set;
    return s;
  }
  static FileSpec of(std::initializer_list<std::string> paths) {
    return of<std::initializer_list<std::string>>(paths);
  }

  Kind kind() const { return kind_; }
  bool is_bottom() const { return kind_ == Kind::Bottom; }
  bool is_top() const { return kind_ == Kind::Top; }
  const std::set<std::string>& paths() const { return paths_; }

  void add(std::string_view p) {
    if (kind_ == Kind::Top) return;
    paths_.insert(path::normalize(p));
    kind_ = Kind::Set;
  }

  bool operator==(const FileSpec&) const = default;

 private:
  Kind kind_ = Kind::Bottom;
  std::set<std::string> paths_;
};

// `after d`: an ordered, duplicate-free list of task names. Empty is ⊥.
class DepSpec {
 public:
  DepSpec() = default;
  DepSpec(std::initializer_list<TaskName> names) {
    for (const auto& n : names) add(n);
  }

  void add(const TaskName& name) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
  }
  bool empty() const { return names_.empty(); }
  const std::vector<TaskName>& names() const { return names_; }

  bool operator==(const DepSpec&) const = default;

 private:
  std::vector<TaskName> names_;
};

// A path expression. `"a" at "b" at fd1` is stored as base fd1 with fragments
// {"b", "a"}: fragments are joined onto the base innermost first.
struct Expr {
  std::variant<std::string, Descriptor> base;
  std::vector<std::string> fragments;

  static Expr path(std::string p) { return Expr{std::move(p), {}}; }
  static Expr fd(Descriptor f) { return Expr{f, {}}; }
  static Expr at(std::string fragment, Expr inner) {
    inner.fragments.push_back(std::move(fragment));
    return inner;
  }

  bool is_path() const { return std::holds_alternative<std::string>(base); }
  bool is_fd() const { return std::holds_alternative<Descriptor>(base); }

  bool operator==(const Expr&) const = default;
};

struct LetFd {
  Descriptor fd;
  Expr value;
  bool operator==(const LetFd&) const = default;
};
struct DelFd {
  Descriptor fd;
  bool operator==(const DelFd&) const = default;
};
struct Consume {
  Expr target;
  bool operator==(const Consume&) const = default;
};
struct Produce {
  Expr target;
  bool operator==(const Produce&) const = default;
};

// Sequencing (`o; o`) is the order of operations inside a SysOp block.
using Operation = std::variant<LetFd, DelFd, Consume, Produce>;

struct SysOp {
  ProcessId process;
  std::vector<Operation> ops;
  bool operator==(const SysOp&) const = default;
};
struct NewProc {
  ProcessId process;
  bool operator==(const NewProc&) const = default;
};
struct NewProcFrom {
  ProcessId process;
  ProcessId source;
  bool operator==(const NewProcFrom&) const = default;
};

using Statement = std::variant<SysOp, NewProc, NewProcFrom>;

struct Task {
  TaskName name;
  FileSpec inputs;
  FileSpec outputs;
  DepSpec deps;
  std::vector<Statement> body;

  bool operator==(const Task&) const = default;
};

struct Program {
  std::vector<Task> tasks;
  bool operator==(const Program&) const = default;
};

// Copy of a task without its body.
inline Task header_of(const Task& t) { return Task{t.name, t.inputs, t.outputs, t.deps, {}}; }

}  // namespace buildfs
