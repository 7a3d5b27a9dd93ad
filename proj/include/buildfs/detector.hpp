#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/eval.hpp"
#include "buildfs/path_filter.hpp"
#include "buildfs/task_graph.hpp"

namespace buildfs {

enum class FaultKind { MissingInput, MissingOutput, OrderingViolation };

inline std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::MissingInput: return "missing-input";
    case FaultKind::MissingOutput: return "missing-output";
    case FaultKind::OrderingViolation: return "ordering-violation";
  }
  return "?";
}

inline std::string_view rule_citation(FaultKind k) {
  switch (k) {
    case FaultKind::MissingInput:
      return "consumed path is not subsumed by the declared inputs of the task";
    case FaultKind::MissingOutput:
      return "produced path is not subsumed by the declared outputs of the task";
    case FaultKind::OrderingViolation:
      return "conflicting accesses (at least one produce) with no happens-before in either "
             "direction";
  }
  return "";
}

struct FaultReport {
  FaultKind kind;
  TaskName task;
  std::string path;
  TaskName conflicting_task;  // ordering violations only
  std::string access;         // "consumed", "produced" or "consumed+produced"
  std::string conflicting_access;

  // Identity of a report; the access fields are evidence only.
  auto key() const { return std::tie(kind, task, path, conflicting_task); }
  bool operator==(const FaultReport& o) const { return key() == o.key(); }
  bool operator<(const FaultReport& o) const { return key() < o.key(); }
};

namespace detect_detail {

inline std::string access_label(bool consumed, bool produced) {
  if (consumed && produced) return "consumed+produced";
  return produced ? "produced" : "consumed";
}

inline std::size_t graph_index(const TaskGraph& g, const Task& t) {
  auto i = g.find_task(t.name);
  if (!i) throw UnknownTask(t.name);
  return *i;
}

}  // namespace detect_detail

inline std::vector<FaultReport> detect_missing_inputs(
    const Task& t, const AccessSet& acc, const TaskGraph& g,
    const PathFilter& filter = PathFilter::with_defaults()) {
  std::vector<FaultReport> out;
  Coverage cov = g.input_coverage(detect_detail::graph_index(g, t));
  for (const auto& p : acc.consumed) {
    if (filter.excluded(p) || cov.covers(p)) continue;
    out.push_back({FaultKind::MissingInput, t.name, p, {}, "consumed", {}});
  }
  return out;
}

inline std::vector<FaultReport> detect_missing_outputs(
    const Task& t, const AccessSet& acc, const TaskGraph& g,
    const PathFilter& filter = PathFilter::with_defaults()) {
  std::vector<FaultReport> out;
  Coverage cov = g.output_coverage(detect_detail::graph_index(g, t));
  for (const auto& p : acc.produced) {
    if (filter.excluded(p) || cov.covers(p)) continue;
    out.push_back({FaultKind::MissingOutput, t.name, p, {}, "produced", {}});
  }
  return out;
}

// Pairs of distinct tasks that touch a path, at least one of them producing
// it, with neither ordered before the other. Paths are indexed to the tasks
// accessing them, so work is proportional to actual conflicts. The earlier
// task in program order is reported as `task`.
inline std::vector<FaultReport> detect_ordering_violations(
    std::span<const Task> tasks, std::span<const AccessSet> accesses, const TaskGraph& g,
    const PathFilter& filter = PathFilter::with_defaults()) {
  struct Access {
    std::size_t task;
    bool consumed;
    bool produced;
  };
  std::unordered_map<std::string_view, std::vector<Access>> by_path;
  std::vector<std::string_view> order;

  auto record = [&](std::size_t i, const std::string& p, bool produced) {
    if (filter.excluded(p)) return;
    auto [it, fresh] = by_path.try_emplace(p);
    if (fresh) order.push_back(p);
    auto& v = it->second;
    if (v.empty() || v.back().task != i) v.push_back({i, false, false});
    (produced ? v.back().produced : v.back().consumed) = true;
  };
  const std::size_t n = std::min(tasks.size(), accesses.size());
  std::vector<std::size_t> gidx(n);
  for (std::size_t i = 0; i < n; ++i) {
    gidx[i] = detect_detail::graph_index(g, tasks[i]);
    for (const auto& p : accesses[i].consumed) record(i, p, false);
    for (const auto& p : accesses[i].produced) record(i, p, true);
  }

  std::vector<FaultReport> out;
  for (std::string_view p : order) {
    const auto& v = by_path[p];
    if (v.size() < 2) continue;
    for (const auto& x : v) {
      if (!x.produced) continue;
      for (const auto& y : v) {
        if (y.task == x.task || (y.produced && y.task < x.task)) continue;
        if (g.happens_before(gidx[x.task], gidx[y.task]) ||
            g.happens_before(gidx[y.task], gidx[x.task])) {
          continue;
        }
        const Access& a = x.task < y.task ? x : y;
        const Access& b = x.task < y.task ? y : x;
        out.push_back({FaultKind::OrderingViolation, tasks[a.task].name, std::string(p),
                       tasks[b.task].name, detect_detail::access_label(a.consumed, a.produced),
                       detect_detail::access_label(b.consumed, b.produced)});
      }
    }
  }
  return out;
}

// All three detectors over per-task access sets aligned with `tasks`, in a
// stable order: program order of the reporting task, then path, then kind.
inline std::vector<FaultReport> detect_faults(std::span<const Task> tasks,
                                              std::span<const AccessSet> accesses,
                                              const TaskGraph& g,
                                              const PathFilter& filter = PathFilter::with_defaults()) {
  std::vector<FaultReport> all;
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < tasks.size() && i < accesses.size(); ++i) {
    position.emplace(tasks[i].name, i);
    for (auto& r : detect_missing_inputs(tasks[i], accesses[i], g, filter)) all.push_back(std::move(r));
    for (auto& r : detect_missing_outputs(tasks[i], accesses[i], g, filter)) all.push_back(std::move(r));
  }
  for (auto& r : detect_ordering_violations(tasks, accesses, g, filter)) all.push_back(std::move(r));

  auto pos = [&](const TaskName& n) -> std::size_t {
    if (n.empty()) return 0;
    auto it = position.find(n);
    return it == position.end() ? SIZE_MAX : it->second;
  };
  std::stable_sort(all.begin(), all.end(), [&](const FaultReport& a, const FaultReport& b) {
    return std::forward_as_tuple(pos(a.task), a.path, a.kind, pos(a.conflicting_task)) <
           std::forward_as_tuple(pos(b.task), b.path, b.kind, pos(b.conflicting_task));
  });
  return all;
}

struct Verification {
  std::vector<FaultReport> faults;  // empty iff the build execution is correct
  std::vector<AccessSet> accesses;
  Diagnostics diagnostics;
};

inline Verification verify_build(const Program& b, const TaskGraph& g,
                                 const PathFilter& filter = PathFilter::with_defaults()) {
  BuildEvaluation ev = eval_build(b);
  Verification v;
  v.faults = detect_faults(b.tasks, ev.accesses, g, filter);
  v.accesses = std::move(ev.accesses);
  v.diagnostics = std::move(ev.diagnostics);
  return v;
}

}  // namespace buildfs
