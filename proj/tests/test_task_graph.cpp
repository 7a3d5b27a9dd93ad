#include <catch_amalgamated.hpp>

#include <thread>

#include "buildfs/task_graph.hpp"
#include "buildfs/text.hpp"
#include "support/oracle.hpp"
#include "support/random_program.hpp"

using namespace buildfs;

// The three-task example: t1 ("/f1"): "/f2"; t2 ("/f2"): ⊥ after t1;
// t3 ("/f3", "/f4"): ("/f2", "/f5").
static Program example() {
  return parse_buildfs_text(R"(task t1 "/f1": "/f2" after _|_ =
task t2 "/f2": _|_ after t1 =
task t3 ("/f3", "/f4"): ("/f2", "/f5") after _|_ =
)");
}

TEST_CASE("edges come from task headers") {
  TaskGraph g = build_graph(example());
  using L = TaskGraph::Label;
  std::vector<TaskGraph::Edge> want = {
      {"/f1", "t1", L::In}, {"t1", "/f2", L::Out}, {"/f2", "t2", L::In}, {"t1", "t2", L::Before},
      {"/f3", "t3", L::In}, {"/f4", "t3", L::In},  {"t3", "/f2", L::Out}, {"t3", "/f5", L::Out}};
  std::sort(want.begin(), want.end());
  CHECK(g.edges() == want);
  auto dot = to_dot(g);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("\"task:t1\" -> \"task:t2\" [label=before]") != std::string::npos);
}

TEST_CASE("subsumption rules") {
  TaskGraph g = build_graph(example());
  CHECK(g.subsumes("/x/y", "/x/y"));              // self
  CHECK(g.subsumes("/x/y", FileSpec::top()));     // top
  CHECK(g.subsumes("/f1/f3", "/f1"));             // par-dir
  CHECK(g.subsumes("/f1/f3/deep/er", "/f1"));     // par-dir, transitively
  CHECK(g.subsumes("/f1", "/f2"));                // indirect through t1
  CHECK(g.subsumes("/f1/f3", "/f2"));             // par-dir then indirect
  CHECK(g.subsumes("/f4", "/f5"));                // indirect through t3
  CHECK(g.subsumes("/f3", "/f2"));
  CHECK_FALSE(g.subsumes("/f2", "/f1"));
  CHECK_FALSE(g.subsumes("/f3", "/f1"));
  CHECK_FALSE(g.subsumes("/f1", "/f1/f3"));
  CHECK_FALSE(g.subsumes("/f3", FileSpec::bottom()));
  CHECK(g.subsumes("/f1/a", FileSpec::of({"/zz", "/f2"})));  // mul: some member
  CHECK(g.subsumes("/anything", "/"));
}

TEST_CASE("top outputs add no indirect subsumption") {
  auto p = parse_buildfs_text(R"(task m "/src/a.c": ^T^ after _|_ =
task n "/other": "/o" after _|_ =
)");
  TaskGraph g = build_graph(p);
  CHECK_FALSE(g.subsumes("/src/a.c", "/o"));
  CHECK_FALSE(g.subsumes("/x", "/src/a.c"));
  CHECK(g.top_outputs(0));
  CHECK(g.input_spec(0) == FileSpec::of({"/src/a.c"}));
}

TEST_CASE("happens-before is the transitive closure of before edges") {
  auto p = parse_buildfs_text(R"(task a _|_: _|_ after _|_ =
task b _|_: _|_ after a =
task c _|_: _|_ after b =
task d _|_: _|_ after _|_ =
)");
  TaskGraph g = build_graph(p);
  CHECK(g.happens_before("a", "b"));
  CHECK(g.happens_before("a", "c"));
  CHECK_FALSE(g.happens_before("c", "a"));
  CHECK_FALSE(g.happens_before("a", "a"));
  CHECK_FALSE(g.happens_before("a", "d"));
  CHECK_FALSE(g.happens_before("d", "a"));
  CHECK_THROWS_AS(g.happens_before("a", "nope"), UnknownTask);
}

TEST_CASE("cycles and dangling dependencies") {
  auto cyclic = parse_buildfs_text(R"(task a _|_: _|_ after c =
task b _|_: _|_ after a =
task c _|_: _|_ after b =
)");
  try {
    build_graph(cyclic);
    FAIL("expected a cycle");
  } catch (const BeforeCycle& e) {
    REQUIRE(e.cycle().size() == 4);  // closed: first name repeated
    CHECK(e.cycle().front() == e.cycle().back());
  }
  auto dangling = parse_buildfs_text("task a _|_: _|_ after ghost =\n");
  Diagnostics d;
  TaskGraph g = build_graph(dangling, &d);
  CHECK(d.count("dangling-dependency") == 1);
  CHECK(g.edges().empty());
  auto self = parse_buildfs_text("task a _|_: _|_ after a =\n");
  CHECK_THROWS_AS(build_graph(self), BeforeCycle);
}

TEST_CASE("adding edges never falsifies a query") {
  TaskGraph g = build_graph(example());
  bool before = g.subsumes("/f9/x", "/f2");
  CHECK_FALSE(before);
  g.add_input(*g.find_task("t1"), "/f9");
  CHECK(g.subsumes("/f9/x", "/f2"));
  CHECK(g.subsumes("/f1", "/f2"));
  g.add_before(*g.find_task("t2"), *g.find_task("t3"));
  CHECK(g.happens_before("t1", "t3"));
  CHECK(g.happens_before("t1", "t2"));
}

TEST_CASE("queries from several threads agree") {
  Program p = testgen::random_program(4242);
  TaskGraph g = build_graph(p);
  auto reference = [&](std::vector<char>& out) {
    for (std::size_t i = 0; i < g.task_count(); ++i)
      for (const auto& q : testgen::path_candidates()) out.push_back(g.subsumes(q, g.input_spec(i)));
  };
  std::vector<char> expect;
  reference(expect);
  TaskGraph fresh = g;  // copies start with empty caches
  std::vector<std::vector<char>> got(4);
  std::vector<std::thread> th;
  for (auto& v : got) {
    th.emplace_back([&, &v = v] {
      for (std::size_t i = 0; i < fresh.task_count(); ++i)
        for (const auto& q : testgen::path_candidates()) v.push_back(fresh.subsumes(q, fresh.input_spec(i)));
    });
  }
  for (auto& t : th) t.join();
  for (const auto& v : got) CHECK(v == expect);
}

TEST_CASE("subsumption and happens-before agree with a naive fixpoint") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Program p = testgen::random_program(seed);
    TaskGraph g = build_graph(p);
    auto acc = oracle::evaluate(p);
    auto c = oracle::close(p, acc);
    for (const auto& a : c.universe) {
      for (const auto& b : c.universe) {
        if (g.subsumes(a, b) != bool(c.sub[c.index.at(a)][c.index.at(b)])) {
          FAIL("seed " << seed << ": " << a << " vs " << b);
        }
        ++checked;
      }
    }
    for (std::size_t i = 0; i < p.tasks.size(); ++i) {
      for (std::size_t j = 0; j < p.tasks.size(); ++j) {
        REQUIRE(g.happens_before(i, j) == bool(c.hb[i][j]));
        // strict partial order
        if (g.happens_before(i, j)) REQUIRE_FALSE(g.happens_before(j, i));
      }
      REQUIRE_FALSE(g.happens_before(i, i));
    }
  }
  CHECK(checked > 1000);
}
