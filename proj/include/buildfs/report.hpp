#pragma once

#include <map>
#include <set>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "buildfs/detector.hpp"
#include "buildfs/pipeline.hpp"

namespace buildfs {

inline constexpr std::string_view kReportSchema = "buildfs-report/1";

// Tracer flags used by online mode and recommended for offline captures:
// follow children, long strings, file/descriptor/process syscall families.
inline const std::vector<std::string>& tracer_flags() {
  static const std::vector<std::string> flags = {"-f", "-s", "4096", "-e", "trace=%file,%desc,%process"};
  return flags;
}

inline std::string tracer_invocation() {
  std::string s = "strace";
  for (const auto& f : tracer_flags()) s += " " + f;
  return s + " -o <trace> -- <command...>";
}

namespace report_detail {

struct Counts {
  std::size_t mi = 0, mo = 0, ov = 0, tasks_with_faults = 0;
};

inline Counts count(const std::vector<FaultReport>& faults) {
  Counts c;
  std::set<std::string> tasks;
  for (const auto& f : faults) {
    (f.kind == FaultKind::MissingInput ? c.mi : f.kind == FaultKind::MissingOutput ? c.mo : c.ov)++;
    tasks.insert(f.task);
  }
  c.tasks_with_faults = tasks.size();
  return c;
}

inline std::vector<std::string> prefixes(const PathFilter& f, bool allow) {
  std::vector<std::string> out;
  for (const auto& r : f.rules()) {
    if (r.allow == allow) out.push_back(r.prefix);
  }
  return out;
}

}  // namespace report_detail

inline nlohmann::ordered_json header_record(const AnalysisConfig& c) {
  nlohmann::ordered_json h;
  h["record"] = "header";
  h["schema"] = kReportSchema;
  h["mode"] = to_string(c.mode);
  h["deny"] = report_detail::prefixes(c.filter, false);
  h["allow"] = report_detail::prefixes(c.filter, true);
  h["include_metadata"] = c.translate.include_metadata;
  h["include_mmap"] = c.translate.include_mmap;
  h["make_db"] = c.make_db_path ? nlohmann::ordered_json(*c.make_db_path) : nlohmann::ordered_json(nullptr);
  h["tracer"] = tracer_invocation();
  return h;
}

inline nlohmann::ordered_json fault_record(const FaultReport& f) {
  nlohmann::ordered_json r;
  r["record"] = "fault";
  r["kind"] = to_string(f.kind);
  r["task"] = f.task;
  r["path"] = f.path;
  if (f.kind == FaultKind::OrderingViolation) r["conflicting_task"] = f.conflicting_task;
  r["access"] = f.access;
  if (f.kind == FaultKind::OrderingViolation) r["conflicting_access"] = f.conflicting_access;
  r["rule_citation"] = rule_citation(f.kind);
  return r;
}

inline void write_jsonl(std::ostream& os, const AnalysisConfig& c, const AnalysisResult& r) {
  os << header_record(c).dump() << '\n';
  for (const auto& f : r.faults) os << fault_record(f).dump() << '\n';
  auto n = report_detail::count(r.faults);
  nlohmann::ordered_json s;
  s["record"] = "summary";
  s["tasks"] = r.tasks.size();
  s["faults"] = r.faults.size();
  s["missing_input"] = n.mi;
  s["missing_output"] = n.mo;
  s["ordering_violation"] = n.ov;
  s["warnings"] = r.diagnostics.total() - r.diagnostics.error_count();
  s["errors"] = r.diagnostics.error_count();
  os << s.dump() << '\n';
}

inline void write_human(std::ostream& os, const AnalysisConfig& c, const AnalysisResult& r) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
    return s.empty() ? std::string("(none)") : s;
  };
  os << "mode: " << to_string(c.mode) << "\n";
  os << "denied prefixes: " << join(report_detail::prefixes(c.filter, false)) << "\n";
  os << "allowed prefixes: " << join(report_detail::prefixes(c.filter, true)) << "\n";
  os << "metadata syscalls: " << (c.translate.include_metadata ? "consumption" : "ignored")
     << ", mmap: " << (c.translate.include_mmap ? "consumption" : "ignored") << "\n";
  if (c.make_db_path) os << "make database: " << *c.make_db_path << "\n";
  os << "tracer: " << tracer_invocation() << "\n";

  // Faults are sorted by task already; within a task, group by kind.
  for (std::size_t i = 0; i < r.faults.size();) {
    std::size_t j = i;
    while (j < r.faults.size() && r.faults[j].task == r.faults[i].task) ++j;
    os << "\ntask " << r.faults[i].task << "\n";
    for (FaultKind k : {FaultKind::MissingInput, FaultKind::MissingOutput, FaultKind::OrderingViolation}) {
      bool first = true;
      for (std::size_t x = i; x < j; ++x) {
        const FaultReport& f = r.faults[x];
        if (f.kind != k) continue;
        if (first) os << "  " << to_string(k) << ":\n";
        first = false;
        os << "    " << f.path << "  (" << f.access << ")";
        if (k == FaultKind::OrderingViolation) os << " vs " << f.conflicting_task << " (" << f.conflicting_access << ")";
        os << "\n";
      }
    }
    i = j;
  }
  auto n = report_detail::count(r.faults);
  os << "\n" << r.faults.size() << " fault(s) in " << n.tasks_with_faults << " of " << r.tasks.size()
     << " task(s): " << n.mi << " missing input, " << n.mo << " missing output, " << n.ov
     << " ordering violation\n";
}

}  // namespace buildfs
