// buildfs: detect missing inputs, missing outputs and ordering violations in
// a traced build.
//
// Exit status: 0 no faults, 1 faults found, 2 usage error, 3 input
// unreadable, 4 malformed input, 5 tracer missing, 70 internal error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "buildfs/frontend.hpp"
#include "buildfs/online.hpp"
#include "buildfs/pipeline.hpp"
#include "buildfs/report.hpp"
#include "buildfs/synth.hpp"
#include "buildfs/text.hpp"

namespace {

enum Exit { kClean = 0, kFaults = 1, kUsage = 2, kUnreadable = 3, kMalformed = 4, kNoTracer = 5, kInternal = 70 };

struct Unreadable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Malformed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string mode = "generic";
  std::string make_db;
  std::string cwd;
  std::string format = "human";
  std::string output;
  std::vector<std::string> allow, deny;
  bool no_default_deny = false;
  bool include_metadata = false;
  bool include_mmap = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--mode", o.mode, "Build system conventions")
      ->check(CLI::IsMember({"make", "gradle", "generic"}));
  cmd->add_option("--make-db", o.make_db, "Make database dump (make -pn) used to add dependencies");
  cmd->add_option("--cwd", o.cwd, "Working directory of traced processes at start (default: current)");
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"human", "jsonl"}));
  cmd->add_option("-o,--output", o.output, "Write the report here instead of stdout");
  cmd->add_option("--allow", o.allow, "Report faults under this prefix even if denied");
  cmd->add_option("--deny", o.deny, "Never report faults under this prefix");
  cmd->add_flag("--no-default-deny", o.no_default_deny, "Drop the built-in system prefix denylist");
  cmd->add_flag("--include-metadata", o.include_metadata, "Treat stat/access/readlink as consumption");
  cmd->add_flag("--include-mmap", o.include_mmap, "Treat mmap of a file as consumption");
}

std::string read_file(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Unreadable("cannot read " + p);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Unreadable("error reading " + p);
  return ss.str();
}

buildfs::AnalysisConfig make_config(const CommonOptions& o) {
  buildfs::AnalysisConfig c;
  c.mode = o.mode == "make" ? buildfs::BuildMode::Make
           : o.mode == "gradle" ? buildfs::BuildMode::Gradle
                                : buildfs::BuildMode::Generic;
  c.filter = o.no_default_deny ? buildfs::PathFilter::none() : buildfs::PathFilter::with_defaults();
  for (const auto& p : o.deny) c.filter.deny(p);
  for (const auto& p : o.allow) c.filter.allow(p);
  c.translate.include_metadata = o.include_metadata;
  c.translate.include_mmap = o.include_mmap;
  c.cwd = o.cwd.empty() ? std::filesystem::current_path().string() : o.cwd;
  if (!o.make_db.empty()) {
    c.make_db = read_file(o.make_db);
    c.make_db_path = o.make_db;
  }
  return c;
}

void print_diagnostics(const buildfs::Diagnostics& d) {
  for (const auto& [code, n] : d.counts()) {
    std::cerr << "buildfs: " << code << ": " << n << " occurrence(s)\n";
  }
  for (const auto& s : d.samples()) {
    std::cerr << "  " << (s.severity == buildfs::Severity::Error ? "error" : "warning") << " [" << s.code
              << "] " << s.message << "\n";
  }
}

int emit(const CommonOptions& o, const buildfs::AnalysisConfig& c, const buildfs::AnalysisResult& r) {
  print_diagnostics(r.diagnostics);
  std::ofstream file;
  if (!o.output.empty()) {
    file.open(o.output, std::ios::binary | std::ios::trunc);
    if (!file) throw Unreadable("cannot write " + o.output);
  }
  std::ostream& os = o.output.empty() ? std::cout : file;
  if (o.format == "jsonl") {
    buildfs::write_jsonl(os, c, r);
  } else {
    buildfs::write_human(os, c, r);
  }
  os.flush();
  return r.faults.empty() ? kClean : kFaults;
}

buildfs::Program load_program(const std::string& p) {
  std::string text = read_file(p);
  try {
    return buildfs::parse_buildfs_text(text);
  } catch (const buildfs::SyntaxError& e) {
    throw Malformed(p + ":" + e.what());
  }
}

buildfs::AnalysisResult analyze_trace_file(const std::string& trace, const buildfs::AnalysisConfig& c) {
  std::ifstream in(trace, std::ios::binary);
  if (!in) throw Unreadable("cannot read " + trace);
  buildfs::TraceAnalysis a(c);
  std::vector<char> buf(1 << 16);
  while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || in.gcount() > 0) {
    a.feed_bytes(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  if (in.bad()) throw Unreadable("error reading " + trace);
  return a.finish();
}

struct Runner {
  CLI::App app{"Build fault detection over traced build executions"};

  CommonOptions common;
  std::string trace, program, emit_buildfs;
  std::vector<std::string> command;
  std::uint64_t seed = 0;
  buildfs::SynthParams synth;
  std::size_t faults = 0;
  std::size_t trace_lines = 0;
  std::string out, expected;

  CLI::App* analyze = nullptr;
  CLI::App* run = nullptr;
  CLI::App* gen = nullptr;
  CLI::App* graph = nullptr;

  Runner() {
    app.require_subcommand(1);

    analyze = app.add_subcommand("analyze", "Analyze a captured trace (or a BuildFS program)");
    auto* src = analyze->add_option_group("source");
    src->add_option("--trace", trace, "strace output file");
    src->add_option("--program", program, "BuildFS program text");
    src->require_option(1);
    analyze->add_option("--emit-buildfs", emit_buildfs, "Also write the generated BuildFS program here");
    add_common(analyze, common);

    run = app.add_subcommand("run", "Trace a build command and analyze it while it runs");
    run->add_option("command", command, "Build command, after --")->required();
    add_common(run, common);

    gen = app.add_subcommand("gen", "Generate a synthetic program with known faults");
    gen->add_option("--seed", seed, "Random seed");
    gen->add_option("--tasks", synth.tasks, "Number of fault-free tasks");
    gen->add_option("--faults", faults, "Inject this many faults of seed-chosen kinds");
    gen->add_option("--missing-inputs", synth.missing_inputs);
    gen->add_option("--missing-outputs", synth.missing_outputs);
    gen->add_option("--conflicting-producers", synth.conflicting_producers);
    gen->add_option("--generated-sources", synth.generated_sources);
    gen->add_option("--dependency-outputs", synth.dependency_outputs);
    gen->add_option("--out", out, "Program output (default stdout)");
    gen->add_option("--expected", expected, "Write the expected fault records (JSON lines) here");
    gen->add_option("--trace-lines", trace_lines,
                    "Write an instrumented trace of about this many lines instead of a program");

    graph = app.add_subcommand("graph", "Print the task graph in Graphviz format");
    auto* gsrc = graph->add_option_group("source");
    gsrc->add_option("--trace", trace, "strace output file");
    gsrc->add_option("--program", program, "BuildFS program text");
    gsrc->require_option(1);
    add_common(graph, common);
  }

  std::ostream& output(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Unreadable("cannot write " + path);
    return file;
  }

  int do_analyze() {
    auto c = make_config(common);
    if (!program.empty()) return emit(common, c, buildfs::analyze_program(load_program(program), c));
    if (!emit_buildfs.empty()) {
      std::ifstream in(trace, std::ios::binary);
      if (!in) throw Unreadable("cannot read " + trace);
      buildfs::Program p = buildfs::assemble_program(in, buildfs::frontend_options(c));
      std::ofstream f;
      output(f, emit_buildfs) << buildfs::pretty_print(p);
    }
    return emit(common, c, analyze_trace_file(trace, c));
  }

  int do_run() {
    auto c = make_config(common);
    auto outcome = buildfs::run_online(command, c);
    std::cerr << "buildfs: build exited with status " << outcome.build_status << "\n";
    return emit(common, c, outcome.result);
  }

  int do_gen() {
    std::ofstream f;
    std::ostream& os = output(f, out);
    if (trace_lines > 0) {
      buildfs::write_synthetic_trace(os, trace_lines, seed);
      return kClean;
    }
    if (faults > 0) {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
      std::size_t* kinds[] = {&synth.missing_inputs, &synth.missing_outputs, &synth.conflicting_producers,
                              &synth.generated_sources, &synth.dependency_outputs};
      for (std::size_t i = 0; i < faults; ++i) ++*kinds[rng() % 5];
    }
    auto res = buildfs::generate_synthetic(seed, synth);
    os << buildfs::pretty_print(res.program);
    if (!expected.empty()) {
      std::ofstream ef;
      std::ostream& es = output(ef, expected);
      for (const auto& r : res.expected) es << buildfs::fault_record(r).dump() << '\n';
    }
    return kClean;
  }

  int do_graph() {
    auto c = make_config(common);
    buildfs::AnalysisResult r;
    if (!program.empty()) {
      r = buildfs::analyze_program(load_program(program), c);
    } else {
      r = analyze_trace_file(trace, c);
    }
    std::ofstream f;
    output(f, common.output) << buildfs::to_dot(*r.graph);
    return kClean;
  }

  int dispatch() {
    if (analyze->parsed()) return do_analyze();
    if (run->parsed()) return do_run();
    if (gen->parsed()) return do_gen();
    return do_graph();
  }
};

}  // namespace

int main(int argc, char** argv) {
  Runner r;
  try {
    r.app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return r.app.exit(e) == 0 ? kClean : kUsage;
  }
  try {
    return r.dispatch();
  } catch (const Unreadable& e) {
    std::cerr << "buildfs: " << e.what() << "\n";
    return kUnreadable;
  } catch (const Malformed& e) {
    std::cerr << "buildfs: " << e.what() << "\n";
    return kMalformed;
  } catch (const buildfs::BeforeCycle& e) {
    std::cerr << "buildfs: " << e.what() << "\n";
    return kMalformed;
  } catch (const buildfs::TracerMissing& e) {
    std::cerr << "buildfs: " << e.what() << " (set " << buildfs::kTracerEnv << " to override)\n";
    return kNoTracer;
  } catch (const std::invalid_argument& e) {
    std::cerr << "buildfs: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "buildfs: internal error: " << e.what() << "\n";
    return kInternal;
  }
}
