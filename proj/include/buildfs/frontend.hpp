#pragma once

#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/diagnostics.hpp"
#include "buildfs/eval.hpp"
#include "buildfs/path.hpp"
#include "buildfs/trace_parser.hpp"
#include "buildfs/translate.hpp"

namespace buildfs {

enum class BuildMode { Generic, Gradle, Make };

inline std::string_view to_string(BuildMode m) {
  switch (m) {
    case BuildMode::Generic: return "generic";
    case BuildMode::Gradle: return "gradle";
    case BuildMode::Make: return "make";
  }
  return "?";
}

// Name of the synthetic task that receives operations outside any task.
inline constexpr std::string_view kPreambleTask = "<preamble>";

struct FrontendOptions {
  BuildMode mode = BuildMode::Generic;
  TranslateOptions translate;
  // Working directory of processes whose chdir the trace does not show.
  std::string initial_cwd = "/";
};

// Receives statements as the frontend attributes them. Task slot 0 is the
// preamble; slots 1.. are tasks in order of their Begin markers.
class StatementSink {
 public:
  virtual ~StatementSink() = default;
  virtual void on_statement(std::size_t slot, const Statement& s) = 0;
};

// Splits a Make task name `<cwd>:<target>` into its two halves.
inline std::optional<std::pair<std::string, std::string>> split_make_task_name(std::string_view name) {
  if (!path::is_absolute(name)) return std::nullopt;
  std::size_t colon = name.find(':');
  if (colon == std::string_view::npos || colon + 1 >= name.size()) return std::nullopt;
  return std::make_pair(std::string(name.substr(0, colon)), std::string(name.substr(colon + 1)));
}

// Turns a trace (syscall lines plus markers) into BuildFS statements
// attributed to tasks. A syscall of pid P belongs to the task open on P or
// on its nearest ancestor with an open task, otherwise to the preamble.
class TraceFrontend {
 public:
  TraceFrontend(FrontendOptions opts, StatementSink& sink) : opts_(std::move(opts)), sink_(sink) {
    opts_.initial_cwd = path::normalize(opts_.initial_cwd);
    slots_.push_back(Task{std::string(kPreambleTask), FileSpec::top(), FileSpec::top(), {}, {}});
    slot_names_.push_back(std::string(kPreambleTask));
  }

  void feed_line(std::string_view line) { feed_item(parser_.parse(line)); }

  // Arbitrary byte chunks; a partial final line waits for the next chunk or
  // for finish().
  void feed_bytes(std::string_view chunk) {
    std::size_t start = 0;
    for (std::size_t nl; (nl = chunk.find('\n', start)) != std::string_view::npos; start = nl + 1) {
      if (partial_.empty()) {
        feed_line(chunk.substr(start, nl - start));
      } else {
        partial_.append(chunk.substr(start, nl - start));
        feed_line(partial_);
        partial_.clear();
      }
    }
    partial_.append(chunk.substr(start));
  }

  void feed(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) feed_line(line);
  }

  void feed_item(TraceItem item) {
    if (std::holds_alternative<std::monostate>(item)) return;
    const ProcessId& pid = std::holds_alternative<TraceEvent>(item) ? std::get<TraceEvent>(item).pid
                                                                     : std::get<Marker>(item).pid;
    if (auto it = orphans_.find(pid); it != orphans_.end()) {
      it->second.push_back(std::move(item));
      return;
    }
    if (!procs_.count(pid)) {
      // Children can print before their parent's clone returns. Hold their
      // lines until the spawn resolves.
      if (parser_.spawn_pending()) {
        orphan_order_.push_back(pid);
        orphans_[pid].push_back(std::move(item));
        return;
      }
      procs_[pid] = Proc{};
    }
    process(std::move(item));
  }

  // End of input: resolves leftovers and finalizes task headers.
  void finish() {
    if (finished_) return;
    finished_ = true;
    if (!partial_.empty()) {
      feed_line(partial_);
      partial_.clear();
    }
    parser_.finish();
    for (const auto& pid : orphan_order_) {
      auto it = orphans_.find(pid);
      if (it == orphans_.end()) continue;
      auto items = std::move(it->second);
      orphans_.erase(it);
      procs_.try_emplace(pid);
      for (auto& item : items) process(std::move(item));
    }
    orphan_order_.clear();
    for (const auto& [pid, slot] : open_) {
      diags_.warn("unclosed-task", "task '" + slots_[slot].name + "' has no End marker; closed at end of trace");
    }
    open_.clear();
    for (const auto& [name, _] : pending_specs_) {
      diags_.warn("orphan-spec-marker", "input/output/after markers for task '" + name + "' that never began");
    }
    if (opts_.mode == BuildMode::Make) derive_make_dependencies();
  }

  // Task headers in program order (valid after finish()).
  std::vector<Task> tasks() const {
    std::vector<Task> out;
    for (std::size_t s : program_slots()) out.push_back(slots_[s]);
    return out;
  }

  // Slots in program order: the preamble first, when it received anything.
  std::vector<std::size_t> program_slots() const {
    std::vector<std::size_t> out;
    if (preamble_used_) out.push_back(0);
    for (std::size_t i = 1; i < slots_.size(); ++i) out.push_back(i);
    return out;
  }

  const TraceLineParser& parser() const { return parser_; }
  Diagnostics diagnostics() const {
    Diagnostics d = parser_.diagnostics();
    d.merge(diags_);
    return d;
  }
  const std::map<std::string, std::size_t>& unknown_syscalls() const { return unknown_; }
  std::size_t statements() const { return statements_; }

 private:
  struct Proc {
    std::optional<ProcessId> parent;
    bool announced = false;  // a newproc statement has been emitted
    bool cwd_bound = false;  // fd0 is bound in the model
    unsigned stdio_bound = 0;  // bit per inherited stdio descriptor
  };

  // Descriptors a process inherits without the trace showing them open.
  static int stdio_bit(Descriptor fd) {
    if (fd == kStdinDescriptor) return 0;
    if (fd == 1 || fd == 2) return fd;
    return -1;
  }
  static std::string_view stdio_path(int bit) {
    static constexpr std::string_view paths[] = {"/dev/stdin", "/dev/stdout", "/dev/stderr"};
    return paths[bit];
  }

  // Binds stdio descriptors the ops read before the process ever set them.
  static void bind_inherited_stdio(Proc& proc, std::vector<Operation>& ops) {
    std::vector<Operation> prefix;
    auto use = [&](Descriptor fd) {
      int bit = stdio_bit(fd);
      if (bit < 0 || (proc.stdio_bound & (1u << bit))) return;
      proc.stdio_bound |= 1u << bit;
      prefix.push_back(LetFd{fd, Expr::path(std::string(stdio_path(bit)))});
    };
    auto use_expr = [&](const Expr& e) {
      if (e.is_fd()) use(std::get<Descriptor>(e.base));
    };
    for (const auto& op : ops) {
      if (const auto* l = std::get_if<LetFd>(&op)) {
        use_expr(l->value);
        if (int bit = stdio_bit(l->fd); bit >= 0) proc.stdio_bound |= 1u << bit;
      } else if (const auto* d = std::get_if<DelFd>(&op)) {
        use(d->fd);
      } else if (const auto* c = std::get_if<Consume>(&op)) {
        use_expr(c->target);
      } else if (const auto* pr = std::get_if<Produce>(&op)) {
        use_expr(pr->target);
      }
    }
    ops.insert(ops.begin(), prefix.begin(), prefix.end());
  }

  void process(TraceItem item) {
    if (auto* m = std::get_if<Marker>(&item)) {
      on_marker(*m);
    } else if (auto* ev = std::get_if<TraceEvent>(&item)) {
      on_event(*ev);
    }
  }

  std::size_t attributed(const ProcessId& pid) const {
    const ProcessId* p = &pid;
    for (std::size_t depth = 0; depth < procs_.size() + 1; ++depth) {
      if (auto it = open_.find(*p); it != open_.end()) return it->second;
      auto pr = procs_.find(*p);
      if (pr == procs_.end() || !pr->second.parent) break;
      p = &*pr->second.parent;
    }
    return 0;
  }

  void emit(std::size_t slot, const Statement& s) {
    if (slot == 0) preamble_used_ = true;
    ++statements_;
    sink_.on_statement(slot, s);
  }

  void announce(const ProcessId& pid, std::size_t slot) {
    Proc& p = procs_[pid];
    if (p.announced) return;
    p.announced = true;
    emit(slot, NewProc{pid});
  }

  void on_event(const TraceEvent& ev) {
    Translation t = translate_syscall(ev, opts_.translate);
    if (!t.recognized) {
      ++unknown_[ev.syscall];
      return;
    }
    if (t.ops.empty() && !t.spawned) return;

    const std::size_t slot = attributed(ev.pid);
    announce(ev.pid, slot);
    Proc& proc = procs_[ev.pid];

    if (!t.ops.empty()) {
      if (t.uses_cwd && !proc.cwd_bound) {
        t.ops.insert(t.ops.begin(), LetFd{kCwdDescriptor, Expr::path(opts_.initial_cwd)});
      }
      if (t.uses_cwd || t.sets_cwd) proc.cwd_bound = true;
      bind_inherited_stdio(proc, t.ops);
      emit(slot, SysOp{ev.pid, std::move(t.ops)});
    }

    if (t.spawned) {
      const ProcessId& child = *t.spawned;
      const Proc parent = procs_[ev.pid];
      Proc& c = procs_[child];
      c = Proc{ev.pid, true, parent.cwd_bound, parent.stdio_bound};
      emit(slot, NewProcFrom{child, ev.pid});
      if (auto it = orphans_.find(child); it != orphans_.end()) {
        auto items = std::move(it->second);
        orphans_.erase(it);
        for (auto& item : items) process(std::move(item));
      }
    }
  }

  struct PendingSpec {
    std::vector<Marker> markers;
  };

  void on_marker(const Marker& m) {
    switch (m.kind) {
      case Marker::Kind::Begin: begin_task(m); break;
      case Marker::Kind::End: end_task(m); break;
      default: {
        std::size_t slot = open_slot_named(m.task);
        if (slot) {
          apply_spec(slot, m);
        } else {
          pending_specs_[m.task].push_back(m);
        }
      }
    }
  }

  std::size_t open_slot_named(const TaskName& name) const {
    if (auto it = latest_.find(name); it != latest_.end()) {
      for (const auto& [_, slot] : open_) {
        if (slot == it->second) return slot;
      }
    }
    return 0;
  }

  void begin_task(const Marker& m) {
    if (auto it = open_.find(m.pid); it != open_.end()) {
      diags_.error("nested-begin", "Begin '" + m.task + "' on pid " + m.pid + " while '" +
                                       slots_[it->second].name + "' is open; closing it");
      open_.erase(it);
    }
    TaskName name = m.task;
    if (used_names_.count(name) || name == kPreambleTask) {
      std::size_t n = 2;
      while (used_names_.count(m.task + "#" + std::to_string(n))) ++n;
      name = m.task + "#" + std::to_string(n);
      diags_.warn("duplicate-task", "task '" + m.task + "' began again; recorded as '" + name + "'");
    }
    used_names_.insert(name);

    Task t;
    t.name = name;
    if (opts_.mode == BuildMode::Make) t.outputs = FileSpec::top();
    const std::size_t slot = slots_.size();
    slots_.push_back(std::move(t));
    slot_names_.push_back(m.task);
    latest_[m.task] = slot;
    open_[m.pid] = slot;

    if (auto it = pending_specs_.find(m.task); it != pending_specs_.end()) {
      for (const auto& spec : it->second) apply_spec(slot, spec);
      pending_specs_.erase(it);
    }
  }

  void end_task(const Marker& m) {
    if (auto it = open_.find(m.pid); it != open_.end() && slot_names_[it->second] == m.task) {
      open_.erase(it);
      return;
    }
    for (auto it = open_.begin(); it != open_.end(); ++it) {
      if (slot_names_[it->second] == m.task) {
        open_.erase(it);
        return;
      }
    }
    diags_.warn("unbalanced-end", "End '" + m.task + "' without a matching Begin");
  }

  std::string resolve_declared(std::size_t slot, std::string_view p) const {
    if (path::is_absolute(p)) return path::normalize(p);
    if (opts_.mode == BuildMode::Make) {
      if (auto parts = split_make_task_name(slot_names_[slot])) return path::join(parts->first, p);
    }
    return path::join(opts_.initial_cwd, p);
  }

  void apply_spec(std::size_t slot, const Marker& m) {
    Task& t = slots_[slot];
    switch (m.kind) {
      case Marker::Kind::Input:
        if (opts_.mode == BuildMode::Make) {
          for (const auto& w : make_words(m.value)) t.inputs.add(resolve_declared(slot, w));
        } else if (!m.value.empty()) {
          t.inputs.add(resolve_declared(slot, m.value));
        }
        break;
      case Marker::Kind::Output:
        if (opts_.mode != BuildMode::Make && !m.value.empty()) t.outputs.add(resolve_declared(slot, m.value));
        break;
      case Marker::Kind::After:
        if (!m.value.empty()) t.deps.add(m.value);
        break;
      default: break;
    }
  }

  static std::vector<std::string> make_words(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j > i) out.emplace_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  }

  // A Make prerequisite that is the target of an earlier task orders that
  // task before this one.
  void derive_make_dependencies() {
    std::unordered_map<std::string, std::size_t> by_target;
    for (std::size_t s = 1; s < slots_.size(); ++s) {
      if (auto parts = split_make_task_name(slot_names_[s])) {
        by_target.try_emplace(path::join(parts->first, parts->second), s);
      }
    }
    for (std::size_t s = 1; s < slots_.size(); ++s) {
      Task& t = slots_[s];
      if (t.inputs.is_top()) continue;
      for (const auto& p : t.inputs.paths()) {
        auto it = by_target.find(p);
        if (it != by_target.end() && it->second < s) t.deps.add(slots_[it->second].name);
      }
    }
  }

  FrontendOptions opts_;
  StatementSink& sink_;
  TraceLineParser parser_;
  Diagnostics diags_;

  std::vector<Task> slots_;               // headers; slot 0 is the preamble
  std::vector<TaskName> slot_names_;      // name as announced by the markers
  std::unordered_set<TaskName> used_names_;
  std::unordered_map<TaskName, std::size_t> latest_;
  std::unordered_map<ProcessId, std::size_t> open_;
  std::map<TaskName, std::vector<Marker>> pending_specs_;
  std::unordered_map<ProcessId, Proc> procs_;
  std::unordered_map<ProcessId, std::vector<TraceItem>> orphans_;
  std::vector<ProcessId> orphan_order_;
  std::map<std::string, std::size_t> unknown_;
  std::string partial_;
  std::size_t statements_ = 0;
  bool preamble_used_ = false;
  bool finished_ = false;
};

// Collects statements into task bodies, merging consecutive operations of
// the same process into one sysop block.
class ProgramBuilder : public StatementSink {
 public:
  void on_statement(std::size_t slot, const Statement& s) override {
    if (slot >= bodies_.size()) bodies_.resize(slot + 1);
    auto& body = bodies_[slot];
    if (const auto* sys = std::get_if<SysOp>(&s); sys && !body.empty()) {
      if (auto* last = std::get_if<SysOp>(&body.back()); last && last->process == sys->process) {
        last->ops.insert(last->ops.end(), sys->ops.begin(), sys->ops.end());
        return;
      }
    }
    body.push_back(s);
  }

  Program build(const TraceFrontend& fe) const {
    Program p;
    auto headers = fe.tasks();
    auto slots = fe.program_slots();
    for (std::size_t i = 0; i < slots.size(); ++i) {
      Task t = std::move(headers[i]);
      if (slots[i] < bodies_.size()) t.body = bodies_[slots[i]];
      p.tasks.push_back(std::move(t));
    }
    return p;
  }

 private:
  std::vector<std::vector<Statement>> bodies_;
};

// Evaluates statements as they arrive, keeping only descriptor tables and
// per-task access sets.
class StreamingEvaluator : public StatementSink {
 public:
  void on_statement(std::size_t slot, const Statement& s) override {
    if (slot >= accesses_.size()) accesses_.resize(slot + 1);
    eval_statement(s, state_, accesses_[slot], diags_);
  }

  // Access sets aligned with fe.tasks().
  std::vector<AccessSet> accesses(const TraceFrontend& fe) const {
    std::vector<AccessSet> out;
    for (std::size_t s : fe.program_slots()) out.push_back(s < accesses_.size() ? accesses_[s] : AccessSet{});
    return out;
  }
  const EvalState& state() const { return state_; }
  const Diagnostics& diagnostics() const { return diags_; }

 private:
  EvalState state_;
  std::vector<AccessSet> accesses_;
  Diagnostics diags_;
};

class TeeSink : public StatementSink {
 public:
  TeeSink(StatementSink& a, StatementSink& b) : a_(a), b_(b) {}
  void on_statement(std::size_t slot, const Statement& s) override {
    a_.on_statement(slot, s);
    b_.on_statement(slot, s);
  }

 private:
  StatementSink& a_;
  StatementSink& b_;
};

inline Program assemble_program(std::istream& trace, const FrontendOptions& opts = {},
                                Diagnostics* diags = nullptr) {
  ProgramBuilder builder;
  TraceFrontend fe(opts, builder);
  fe.feed(trace);
  fe.finish();
  if (diags) diags->merge(fe.diagnostics());
  return builder.build(fe);
}

inline Program assemble_program(std::span<const TraceItem> items, const FrontendOptions& opts = {},
                                Diagnostics* diags = nullptr) {
  ProgramBuilder builder;
  TraceFrontend fe(opts, builder);
  for (const auto& item : items) fe.feed_item(item);
  fe.finish();
  if (diags) diags->merge(fe.diagnostics());
  return builder.build(fe);
}

}  // namespace buildfs
