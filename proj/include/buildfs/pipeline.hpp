#pragma once

#include <chrono>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "buildfs/detector.hpp"
#include "buildfs/frontend.hpp"
#include "buildfs/make_db.hpp"
#include "buildfs/path_filter.hpp"
#include "buildfs/task_graph.hpp"

namespace buildfs {

struct AnalysisConfig {
  BuildMode mode = BuildMode::Generic;
  PathFilter filter = PathFilter::with_defaults();
  TranslateOptions translate;
  std::string cwd = "/";
  std::optional<std::string> make_db;       // database dump contents
  std::optional<std::string> make_db_path;  // for the report header only
};

struct AnalysisResult {
  std::vector<Task> tasks;  // headers, program order
  std::vector<AccessSet> accesses;
  std::optional<TaskGraph> graph;
  std::vector<FaultReport> faults;
  Diagnostics diagnostics;
  std::map<std::string, std::size_t> unknown_syscalls;
  std::size_t lines = 0;
  std::size_t statements = 0;
};

inline FrontendOptions frontend_options(const AnalysisConfig& c) {
  FrontendOptions o;
  o.mode = c.mode;
  o.translate = c.translate;
  o.initial_cwd = c.cwd;
  return o;
}

namespace pipeline_detail {

inline TaskGraph graph_for(const std::vector<Task>& tasks, const AnalysisConfig& c, Diagnostics& d) {
  Program headers;
  headers.tasks = tasks;
  TaskGraph g = build_graph(headers, &d);
  if (c.make_db) g = refine_from_make_db(std::move(g), *c.make_db, c.cwd, &d);
  return g;
}

}  // namespace pipeline_detail

// Generation, analysis and fault detection over a trace fed incrementally.
// Only descriptor tables, access sets and pending calls are kept; the
// program text itself is never materialized.
class TraceAnalysis {
 public:
  explicit TraceAnalysis(AnalysisConfig c) : config_(std::move(c)), fe_(frontend_options(config_), eval_) {}

  void feed_line(std::string_view line) { fe_.feed_line(line); }
  void feed_bytes(std::string_view chunk) { fe_.feed_bytes(chunk); }
  void feed(std::istream& in) { fe_.feed(in); }

  // Throws BeforeCycle when the declared dependencies are cyclic.
  AnalysisResult finish() {
    fe_.finish();
    AnalysisResult r;
    r.tasks = fe_.tasks();
    r.accesses = eval_.accesses(fe_);
    r.diagnostics = fe_.diagnostics();
    r.diagnostics.merge(eval_.diagnostics());
    r.unknown_syscalls = fe_.unknown_syscalls();
    r.lines = fe_.parser().lines();
    r.statements = fe_.statements();
    r.graph = pipeline_detail::graph_for(r.tasks, config_, r.diagnostics);
    r.faults = detect_faults(r.tasks, r.accesses, *r.graph, config_.filter);
    return r;
  }

  const AnalysisConfig& config() const { return config_; }

 private:
  AnalysisConfig config_;
  StreamingEvaluator eval_;
  TraceFrontend fe_;
};

inline AnalysisResult analyze_trace(std::istream& in, const AnalysisConfig& c) {
  TraceAnalysis a(c);
  a.feed(in);
  return a.finish();
}

// Same analysis starting from a BuildFS program instead of a trace.
inline AnalysisResult analyze_program(const Program& p, const AnalysisConfig& c) {
  AnalysisResult r;
  BuildEvaluation ev = eval_build(p);
  for (const auto& t : p.tasks) r.tasks.push_back(header_of(t));
  r.accesses = std::move(ev.accesses);
  r.diagnostics = std::move(ev.diagnostics);
  for (const auto& t : p.tasks) r.statements += t.body.size();
  r.graph = pipeline_detail::graph_for(r.tasks, c, r.diagnostics);
  r.faults = detect_faults(r.tasks, r.accesses, *r.graph, c.filter);
  return r;
}

}  // namespace buildfs
