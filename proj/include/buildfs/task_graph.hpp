#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/diagnostics.hpp"
#include "buildfs/path.hpp"

namespace buildfs {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BeforeCycle : public GraphError {
 public:
  explicit BeforeCycle(std::vector<TaskName> cycle)
      : GraphError(describe(cycle)), cycle_(std::move(cycle)) {}
  const std::vector<TaskName>& cycle() const { return cycle_; }

 private:
  static std::string describe(const std::vector<TaskName>& c) {
    std::string s = "task dependency cycle: ";
    for (std::size_t i = 0; i < c.size(); ++i) s += (i ? " -> " : "") + c[i];
    return s;
  }
  std::vector<TaskName> cycle_;
};

class UnknownTask : public GraphError {
 public:
  explicit UnknownTask(const TaskName& n) : GraphError("unknown task '" + n + "'") {}
};

// The set of paths subsumed (transitively) by one file specification.
//
// Subsumption is reachability over two kinds of steps: a path steps to its
// parent directory, and a declared input of task t steps to each declared
// output of t. A path p is covered by specification k iff some member of k
// is reachable from p. `Coverage` stores the backward closure of k as a set
// of roots such that p is covered iff p or one of its ancestors is a root.
class Coverage {
 public:
  static Coverage everything() { return Coverage(true, nullptr); }
  static Coverage nothing() { return Coverage(false, nullptr); }
  explicit Coverage(std::shared_ptr<const std::unordered_set<std::string>> roots)
      : all_(false), roots_(std::move(roots)) {}

  bool covers(std::string_view p) const {
    if (all_) return true;
    if (!roots_ || roots_->empty()) return false;
    std::string cur(p);
    while (true) {
      if (roots_->count(cur)) return true;
      if (cur.size() <= 1) return false;
      cur.assign(path::parent(cur));
    }
  }

 private:
  Coverage(bool all, std::shared_ptr<const std::unordered_set<std::string>> roots)
      : all_(all), roots_(std::move(roots)) {}
  bool all_;
  std::shared_ptr<const std::unordered_set<std::string>> roots_;
};

// Labelled graph over tasks and files: `in` (file -> task), `out`
// (task -> file) and `before` (task -> task). ⊤ inputs/outputs are flags
// and contribute no edges. Queries are thread-safe; mutation is not.
class TaskGraph {
 public:
  enum class Label { In, Out, Before };
  struct Edge {
    std::string from;
    std::string to;
    Label label;
    bool operator==(const Edge&) const = default;
    auto operator<=>(const Edge&) const = default;
  };

  TaskGraph() = default;
  TaskGraph(const TaskGraph& o) : nodes_(o.nodes_), index_(o.index_), producers_(o.producers_) {}
  TaskGraph& operator=(const TaskGraph& o) {
    if (this != &o) {
      nodes_ = o.nodes_;
      index_ = o.index_;
      producers_ = o.producers_;
      invalidate();
    }
    return *this;
  }
  TaskGraph(TaskGraph&&) = default;
  TaskGraph& operator=(TaskGraph&&) = default;

  std::size_t task_count() const { return nodes_.size(); }
  const TaskName& task_name(std::size_t i) const { return nodes_.at(i).name; }
  std::optional<std::size_t> find_task(const TaskName& n) const {
    auto it = index_.find(n);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::set<std::string>& inputs(std::size_t i) const { return nodes_.at(i).inputs; }
  const std::set<std::string>& outputs(std::size_t i) const { return nodes_.at(i).outputs; }
  bool top_inputs(std::size_t i) const { return nodes_.at(i).top_inputs; }
  bool top_outputs(std::size_t i) const { return nodes_.at(i).top_outputs; }
  const std::vector<std::size_t>& successors(std::size_t i) const { return nodes_.at(i).before; }

  // Effective declared inputs/outputs of a task, including refinements.
  FileSpec input_spec(std::size_t i) const {
    const auto& n = nodes_.at(i);
    return n.top_inputs ? FileSpec::top() : FileSpec::of(n.inputs);
  }
  FileSpec output_spec(std::size_t i) const {
    const auto& n = nodes_.at(i);
    return n.top_outputs ? FileSpec::top() : FileSpec::of(n.outputs);
  }

  std::size_t add_task(const TaskName& name, const FileSpec& inputs, const FileSpec& outputs) {
    if (index_.count(name)) throw GraphError("duplicate task '" + name + "'");
    std::size_t id = nodes_.size();
    Node n;
    n.name = name;
    n.top_inputs = inputs.is_top();
    n.top_outputs = outputs.is_top();
    if (!n.top_inputs) n.inputs = inputs.paths();
    if (!n.top_outputs) {
      n.outputs = outputs.paths();
      for (const auto& o : n.outputs) producers_[o].push_back(id);
    }
    nodes_.push_back(std::move(n));
    index_.emplace(name, id);
    invalidate();
    return id;
  }

  // Adds `p -in-> t`. Returns false when the edge already exists or the task
  // already accepts any input.
  bool add_input(std::size_t t, std::string_view p) {
    Node& n = nodes_.at(t);
    if (n.top_inputs) return false;
    bool added = n.inputs.insert(path::normalize(p)).second;
    if (added) invalidate();
    return added;
  }

  // Adds `from -before-> to`. Returns false when already present.
  bool add_before(std::size_t from, std::size_t to) {
    auto& succ = nodes_.at(from).before;
    nodes_.at(to);
    if (std::find(succ.begin(), succ.end(), to) != succ.end()) return false;
    succ.push_back(to);
    invalidate();
    return true;
  }

  // Throws BeforeCycle naming the tasks on one cycle.
  void check_acyclic() const {
    enum : char { White, Grey, Black };
    std::vector<char> color(nodes_.size(), White);
    std::vector<std::size_t> parent(nodes_.size(), SIZE_MAX);
    for (std::size_t root = 0; root < nodes_.size(); ++root) {
      if (color[root] != White) continue;
      std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
      color[root] = Grey;
      while (!stack.empty()) {
        auto& [v, next] = stack.back();
        const auto& succ = nodes_[v].before;
        if (next == succ.size()) {
          color[v] = Black;
          stack.pop_back();
          continue;
        }
        std::size_t w = succ[next++];
        if (color[w] == Grey) {
          std::vector<TaskName> cyc{nodes_[w].name};
          for (std::size_t u = v; u != w; u = parent[u]) cyc.push_back(nodes_[u].name);
          std::reverse(cyc.begin() + 1, cyc.end());
          cyc.push_back(nodes_[w].name);
          throw BeforeCycle(std::move(cyc));
        }
        if (color[w] == White) {
          color[w] = Grey;
          parent[w] = v;
          stack.emplace_back(w, 0);
        }
      }
    }
  }

  // Transitive closure of `before` edges; irreflexive.
  bool happens_before(std::size_t a, std::size_t b) const {
    if (a >= nodes_.size() || b >= nodes_.size()) throw GraphError("task index out of range");
    if (a == b) return false;
    return reach_from(a)[b] != 0;
  }
  bool happens_before(const TaskName& a, const TaskName& b) const {
    auto ia = find_task(a);
    if (!ia) throw UnknownTask(a);
    auto ib = find_task(b);
    if (!ib) throw UnknownTask(b);
    return happens_before(*ia, *ib);
  }

  Coverage coverage(const FileSpec& k) const {
    if (k.is_top()) return Coverage::everything();
    if (k.is_bottom()) return Coverage::nothing();
    return Coverage(closure(k.paths()));
  }
  Coverage input_coverage(std::size_t t) const {
    const Node& n = nodes_.at(t);
    if (n.top_inputs) return Coverage::everything();
    return Coverage(closure(n.inputs));
  }
  Coverage output_coverage(std::size_t t) const {
    const Node& n = nodes_.at(t);
    if (n.top_outputs) return Coverage::everything();
    return Coverage(closure(n.outputs));
  }

  bool subsumes(std::string_view p, const FileSpec& k) const {
    return coverage(k).covers(path::normalize(p));
  }
  bool subsumes(std::string_view p, std::string_view target) const {
    return subsumes(p, FileSpec::of(std::vector<std::string>{std::string(target)}));
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (const auto& n : nodes_) {
      for (const auto& p : n.inputs) out.push_back({p, n.name, Label::In});
      for (const auto& p : n.outputs) out.push_back({n.name, p, Label::Out});
      for (std::size_t s : n.before) out.push_back({n.name, nodes_[s].name, Label::Before});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    TaskName name;
    std::set<std::string> inputs;
    std::set<std::string> outputs;
    bool top_inputs = false;
    bool top_outputs = false;
    std::vector<std::size_t> before;
  };

  struct Cache {
    std::mutex mu;
    std::unordered_map<std::string, std::shared_ptr<const std::unordered_set<std::string>>> closures;
    std::unordered_map<std::size_t, std::shared_ptr<const std::vector<char>>> reach;
  };

  void invalidate() { cache_ = std::make_unique<Cache>(); }

  static std::string cache_key(const std::set<std::string>& seeds) {
    std::string key;
    for (const auto& s : seeds) {
      key += s;
      key.push_back('\0');
    }
    return key;
  }

  std::shared_ptr<const std::unordered_set<std::string>> closure(
      const std::set<std::string>& seeds) const {
    const std::string key = cache_key(seeds);
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      auto it = cache_->closures.find(key);
      if (it != cache_->closures.end()) return it->second;
    }

    auto roots = std::make_shared<std::unordered_set<std::string>>();
    std::vector<char> expanded(nodes_.size(), 0);
    std::deque<std::string> work;
    auto add = [&](const std::string& p) {
      if (roots->insert(p).second) work.push_back(p);
    };
    for (const auto& s : seeds) add(s);

    while (!work.empty()) {
      std::string r = std::move(work.front());
      work.pop_front();
      // Every declared output at or below r is covered, so the inputs of its
      // producer are covered as well.
      auto visit = [&](const std::vector<std::size_t>& tasks) {
        for (std::size_t t : tasks) {
          if (expanded[t]) continue;
          expanded[t] = 1;
          for (const auto& in : nodes_[t].inputs) add(in);
        }
      };
      if (r == "/") {
        for (const auto& [_, tasks] : producers_) visit(tasks);
        continue;
      }
      auto it = producers_.find(r);
      if (it != producers_.end()) visit(it->second);
      std::string lo = r + "/";
      std::string hi = r + "0";  // '0' follows '/'
      for (auto jt = producers_.lower_bound(lo); jt != producers_.end() && jt->first < hi; ++jt) {
        visit(jt->second);
      }
    }

    std::lock_guard<std::mutex> lock(cache_->mu);
    auto [it, _] = cache_->closures.emplace(key, std::move(roots));
    return it->second;
  }

  const std::vector<char>& reach_from(std::size_t a) const {
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      auto it = cache_->reach.find(a);
      if (it != cache_->reach.end()) return *it->second;
    }
    auto seen = std::make_shared<std::vector<char>>(nodes_.size(), 0);
    std::vector<std::size_t> stack(nodes_[a].before.begin(), nodes_[a].before.end());
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      if ((*seen)[v]) continue;
      (*seen)[v] = 1;
      for (std::size_t w : nodes_[v].before) {
        if (!(*seen)[w]) stack.push_back(w);
      }
    }
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto [it, _] = cache_->reach.emplace(a, std::move(seen));
    return *it->second;
  }

  std::vector<Node> nodes_;
  std::unordered_map<TaskName, std::size_t> index_;
  // declared output path -> producing tasks (never ⊤-output tasks)
  std::map<std::string, std::vector<std::size_t>> producers_;
  std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

// Collects in/out/before edges from every task header. `after` names that do
// not resolve are reported as `dangling-dependency` and skipped.
inline TaskGraph build_graph(const Program& b, Diagnostics* diags = nullptr) {
  TaskGraph g;
  for (const auto& t : b.tasks) g.add_task(t.name, t.inputs, t.outputs);
  for (std::size_t i = 0; i < b.tasks.size(); ++i) {
    for (const auto& d : b.tasks[i].deps.names()) {
      auto j = g.find_task(d);
      if (!j) {
        if (diags) {
          diags->error("dangling-dependency",
                       "task '" + b.tasks[i].name + "' is declared after unknown task '" + d + "'");
        }
        continue;
      }
      g.add_before(*j, i);
    }
  }
  g.check_acyclic();
  return g;
}

// Graphviz rendering: tasks as red boxes, files as blue ellipses.
inline std::string to_dot(const TaskGraph& g) {
  auto q = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "digraph buildfs {\n";
  std::set<std::string> files;
  for (std::size_t i = 0; i < g.task_count(); ++i) {
    os << "  " << q("task:" + g.task_name(i)) << " [label=" << q(g.task_name(i))
       << ", shape=box, color=red];\n";
    files.insert(g.inputs(i).begin(), g.inputs(i).end());
    files.insert(g.outputs(i).begin(), g.outputs(i).end());
  }
  for (const auto& f : files) {
    os << "  " << q("file:" + f) << " [label=" << q(f) << ", shape=ellipse, color=blue];\n";
  }
  for (const auto& e : g.edges()) {
    switch (e.label) {
      case TaskGraph::Label::In:
        os << "  " << q("file:" + e.from) << " -> " << q("task:" + e.to) << " [label=in];\n";
        break;
      case TaskGraph::Label::Out:
        os << "  " << q("task:" + e.from) << " -> " << q("file:" + e.to) << " [label=out];\n";
        break;
      case TaskGraph::Label::Before:
        os << "  " << q("task:" + e.from) << " -> " << q("task:" + e.to) << " [label=before];\n";
        break;
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace buildfs
