#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/detector.hpp"

namespace buildfs {

struct SynthParams {
  std::size_t tasks = 6;  // clean tasks before injection
  std::size_t missing_inputs = 0;        // undeclared resource read by a task
  std::size_t conflicting_producers = 0; // two unordered tasks writing one file
  std::size_t generated_sources = 0;     // consumer declares the file but not the producer task
  std::size_t missing_outputs = 0;       // undeclared file written by a task
  std::size_t dependency_outputs = 0;    // dependency's output read without declaring it

  std::size_t fault_count() const {
    return missing_inputs + conflicting_producers + generated_sources + missing_outputs + dependency_outputs;
  }
};

struct SynthResult {
  Program program;
  std::vector<FaultReport> expected;  // sorted by key
};

namespace synth_detail {

// Portable across standard libraries, unlike the <random> distributions.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(gen() % n); }
  bool chance(unsigned percent) { return below(100) < percent; }
};

inline Expr open_expr(Rng& rng, const std::string& p) {
  // Mix absolute paths with paths relative to the working directory.
  const std::string root = "/proj/";
  if (p.rfind(root, 0) == 0 && rng.chance(40)) return Expr::at(p.substr(root.size()), Expr::fd(kCwdDescriptor));
  return Expr::path(p);
}

struct Builder {
  Rng& rng;
  Task task;
  ProcessId proc;
  ProcessId child;
  Descriptor next_fd = 3;
  std::vector<Operation> ops;
  std::vector<Operation> child_ops;

  Builder(Rng& r, std::string name) : rng(r) {
    proc = name + ".p";
    child = name + ".c";
    task.name = std::move(name);
  }

  std::vector<Operation>& target_ops() { return rng.chance(30) ? child_ops : ops; }

  void access(const std::string& p, bool produce) {
    auto& out = target_ops();
    if (rng.chance(50)) {
      Descriptor fd = next_fd++;
      out.push_back(LetFd{fd, open_expr(rng, p)});
      if (produce) {
        out.push_back(Produce{Expr::fd(fd)});
      } else {
        out.push_back(Consume{Expr::fd(fd)});
      }
      out.push_back(DelFd{fd});
    } else if (produce) {
      out.push_back(Produce{open_expr(rng, p)});
    } else {
      out.push_back(Consume{open_expr(rng, p)});
    }
  }
  void consume(const std::string& p) { access(p, false); }
  void produce(const std::string& p) { access(p, true); }

  Task finish() {
    std::vector<Statement> body;
    body.push_back(NewProc{proc});
    std::vector<Operation> first{LetFd{kCwdDescriptor, Expr::path("/proj")}};
    first.insert(first.end(), ops.begin(), ops.end());
    body.push_back(SysOp{proc, std::move(first)});
    if (!child_ops.empty()) {
      body.push_back(NewProcFrom{child, proc});
      body.push_back(SysOp{child, child_ops});
    }
    task.body = std::move(body);
    return std::move(task);
  }
};

}  // namespace synth_detail

// A random well-formed program under /proj plus injected faults whose reports
// are known by construction. Every injection uses fresh paths (and fresh
// tasks where it needs them), so injections never mask each other.
inline SynthResult generate_synthetic(std::uint64_t seed, const SynthParams& params) {
  using synth_detail::Builder;
  synth_detail::Rng rng(seed);
  const std::size_t n = std::max<std::size_t>(params.tasks, 1);

  std::vector<Builder> b;
  std::vector<std::vector<std::string>> outs(n);
  std::vector<std::set<std::size_t>> ancestors(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.emplace_back(rng, "task" + std::to_string(i));
    Builder& t = b.back();
    const std::string src = "/proj/src/t" + std::to_string(i);

    for (std::size_t j = 0; j < i; ++j) {
      if (!rng.chance(30)) continue;
      t.task.deps.add(b[j].task.name);
      ancestors[i].insert(j);
      ancestors[i].insert(ancestors[j].begin(), ancestors[j].end());
    }

    // Private sources, declared either file by file or as their directory.
    const std::size_t nsrc = 1 + rng.below(3);
    const bool dir_input = rng.chance(30);
    if (dir_input) t.task.inputs.add(src);
    for (std::size_t k = 0; k < nsrc; ++k) {
      std::string p = src + "/s" + std::to_string(k) + ".c";
      if (!dir_input) t.task.inputs.add(p);
      t.consume(p);
    }
    if (rng.chance(50)) {
      t.task.inputs.add("/proj/include/common.h");
      t.consume("/proj/include/common.h");
    }
    if (rng.chance(50)) t.consume("/usr/include/stdio.h");  // denied prefix

    for (std::size_t a : ancestors[i]) {
      if (outs[a].empty() || !rng.chance(50)) continue;
      const std::string& p = outs[a][rng.below(outs[a].size())];
      t.task.inputs.add(p);
      t.consume(p);
    }

    const std::size_t nout = 1 + rng.below(2);
    for (std::size_t k = 0; k < nout; ++k) {
      std::string p = "/proj/build/t" + std::to_string(i) + "/o" + std::to_string(k);
      t.task.outputs.add(p);
      t.produce(p);
      outs[i].push_back(std::move(p));
    }
    if (rng.chance(20)) t.produce("/tmp/scratch" + std::to_string(i));  // denied prefix
  }

  std::vector<FaultReport> expected;
  std::size_t k = 0;
  auto fresh = [&](const std::string& leaf) { return "/proj/fault/f" + std::to_string(k) + "/" + leaf; };
  std::vector<Builder> extra;

  for (std::size_t x = 0; x < params.missing_inputs; ++x, ++k) {
    std::size_t i = rng.below(n);
    std::string p = fresh("resource.txt");
    b[i].consume(p);
    expected.push_back({FaultKind::MissingInput, b[i].task.name, p, {}, "consumed", {}});
  }
  for (std::size_t x = 0; x < params.missing_outputs; ++x, ++k) {
    std::size_t i = rng.below(n);
    std::string p = fresh("stray.o");
    b[i].produce(p);
    expected.push_back({FaultKind::MissingOutput, b[i].task.name, p, {}, "produced", {}});
  }
  for (std::size_t x = 0; x < params.dependency_outputs; ++x, ++k) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (!ancestors[i].empty()) candidates.push_back(i);
    }
    std::string p = fresh("dep.out");
    if (candidates.empty()) {
      // No ordered pair exists yet; add one.
      Builder d(rng, "dep" + std::to_string(k));
      Builder u(rng, "use" + std::to_string(k));
      d.task.outputs.add(p);
      d.produce(p);
      u.task.deps.add(d.task.name);
      u.consume(p);
      expected.push_back({FaultKind::MissingInput, u.task.name, p, {}, "consumed", {}});
      extra.push_back(std::move(d));
      extra.push_back(std::move(u));
      continue;
    }
    std::size_t i = candidates[rng.below(candidates.size())];
    auto it = ancestors[i].begin();
    std::advance(it, rng.below(ancestors[i].size()));
    b[*it].task.outputs.add(p);
    b[*it].produce(p);
    b[i].consume(p);
    expected.push_back({FaultKind::MissingInput, b[i].task.name, p, {}, "consumed", {}});
  }

  // The remaining injections bring their own tasks, appended in random order.
  struct Pair {
    Builder first, second;
    std::string path;
    std::string first_access, second_access;
  };
  std::vector<Pair> pairs;
  for (std::size_t x = 0; x < params.conflicting_producers; ++x, ++k) {
    std::string p = fresh("shared.out");
    Builder l(rng, "writerA" + std::to_string(k)), r(rng, "writerB" + std::to_string(k));
    for (Builder* w : {&l, &r}) {
      w->task.outputs.add(p);
      w->produce(p);
    }
    pairs.push_back({std::move(l), std::move(r), p, "produced", "produced"});
  }
  for (std::size_t x = 0; x < params.generated_sources; ++x, ++k) {
    std::string p = fresh("generated.c");
    Builder g(rng, "generate" + std::to_string(k)), c(rng, "compile" + std::to_string(k));
    g.task.outputs.add(p);
    g.produce(p);
    c.task.inputs.add(p);
    c.consume(p);
    c.task.outputs.add(fresh("generated.o"));
    c.produce(fresh("generated.o"));
    if (rng.chance(50)) {
      pairs.push_back({std::move(c), std::move(g), p, "consumed", "produced"});
    } else {
      pairs.push_back({std::move(g), std::move(c), p, "produced", "consumed"});
    }
  }

  SynthResult res;
  for (auto& t : b) res.program.tasks.push_back(t.finish());
  for (auto& t : extra) res.program.tasks.push_back(t.finish());
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng.gen);
  for (std::size_t i : order) {
    Pair& pr = pairs[i];
    expected.push_back({FaultKind::OrderingViolation, pr.first.task.name, pr.path, pr.second.task.name,
                        pr.first_access, pr.second_access});
    res.program.tasks.push_back(pr.first.finish());
    res.program.tasks.push_back(pr.second.finish());
  }
  std::sort(expected.begin(), expected.end());
  res.expected = std::move(expected);
  return res;
}

// Writes an instrumented strace-style trace of roughly `lines` lines: tasks
// of a few processes each, opening, reading and writing project files.
// Used for throughput measurements; the build it describes is fault free
// apart from reads of shared headers nobody declares.
inline void write_synthetic_trace(std::ostream& os, std::size_t lines, std::uint64_t seed = 0) {
  synth_detail::Rng rng(seed);
  std::size_t written = 0;
  long next_pid = 1000;
  const long root = next_pid++;
  auto marker = [&](long pid, const std::string& body) {
    os << pid << " write(1, \"" << kMarkerPrefix << body << "\\n\", " << kMarkerPrefix.size() + body.size() + 1
       << ") = " << kMarkerPrefix.size() + body.size() + 1 << "\n";
    ++written;
  };
  os << root << " execve(\"/usr/bin/make\", [\"make\"], 0x7ffd /* 20 vars */) = 0\n";
  os << root << " chdir(\"/proj\") = 0\n";
  written += 2;
  for (std::size_t t = 0; written < lines; ++t) {
    const std::string name = "/proj:obj/t" + std::to_string(t) + ".o";
    const long shell = next_pid++;
    os << root << " clone(child_stack=NULL, flags=CLONE_CHILD_CLEARTID|SIGCHLD) = " << shell << "\n";
    ++written;
    marker(shell, "Begin " + name);
    marker(shell, name + " input src/t" + std::to_string(t) + ".c");
    const long cc = next_pid++;
    os << shell << " clone(child_stack=NULL, flags=CLONE_CHILD_CLEARTID|SIGCHLD) = " << cc << "\n";
    os << cc << " execve(\"/usr/bin/cc\", [\"cc\"], 0x7ffd /* 20 vars */) = 0\n";
    written += 2;
    const std::size_t reads = 8 + rng.below(24);
    int fd = 3;
    os << cc << " openat(AT_FDCWD, \"src/t" << t << ".c\", O_RDONLY) = " << fd << "\n";
    os << cc << " read(" << fd << ", \"int x;\"..., 4096) = 4096\n";
    os << cc << " close(" << fd << ") = 0\n";
    written += 3;
    for (std::size_t r = 0; r < reads; ++r) {
      os << cc << " openat(AT_FDCWD, \"/usr/include/h" << rng.below(200) << ".h\", O_RDONLY|O_CLOEXEC) = " << fd
         << "\n";
      os << cc << " fstat(" << fd << ", {st_mode=S_IFREG|0644, st_size=1024, ...}) = 0\n";
      os << cc << " read(" << fd << ", \"...\", 4096) = 1024\n";
      os << cc << " close(" << fd << ") = 0\n";
      written += 4;
    }
    os << cc << " openat(AT_FDCWD, \"obj/t" << t << ".o\", O_WRONLY|O_CREAT|O_TRUNC, 0644) = 4\n";
    os << cc << " write(4, \"\\177ELF\"..., 8192) = 8192\n";
    os << cc << " close(4) = 0\n";
    os << cc << " exit_group(0) = ?\n";
    os << cc << " +++ exited with 0 +++\n";
    os << shell << " --- SIGCHLD {si_signo=SIGCHLD, si_code=CLD_EXITED, si_pid=" << cc << "} ---\n";
    written += 6;
    marker(shell, "End " + name);
    os << shell << " +++ exited with 0 +++\n";
    ++written;
  }
}

}  // namespace buildfs
