#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "buildfs/text.hpp"
#include "support/random_program.hpp"

using namespace buildfs;

static std::string slurp(const std::string& name) {
  std::ifstream in(std::string(BUILDFS_TEST_DATA) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST_CASE("parses the mathematical notation") {
  Program p = parse_buildfs_text(slurp("copy_task.bfs"));
  REQUIRE(p.tasks.size() == 1);
  const Task& t = p.tasks[0];
  CHECK(t.name == "target");
  CHECK(t.inputs == FileSpec::of({"/source"}));
  CHECK(t.outputs == FileSpec::of({"/target"}));
  CHECK(t.deps.empty());
  REQUIRE(t.body.size() == 2);
  CHECK(t.body[0] == Statement{NewProc{"p"}});
  const auto& ops = std::get<SysOp>(t.body[1]).ops;
  REQUIRE(ops.size() == 6);
  CHECK(ops[0] == Operation{LetFd{3, Expr::path("/source")}});
  CHECK(ops[1] == Operation{Consume{Expr::fd(3)}});
  CHECK(ops[5] == Operation{DelFd{3}});
}

TEST_CASE("parses at-expressions and paren-free consume") {
  Program p = parse_buildfs_text(slurp("sigma_example.bfs"));
  const auto& ops = std::get<SysOp>(p.tasks[0].body[1]).ops;
  CHECK(ops[1] == Operation{LetFd{2, Expr::at("f3", Expr::fd(1))}});
  CHECK(ops[3] == Operation{Produce{Expr::at("f4", Expr::path("/f2"))}});

  Program q = parse_buildfs_text(slurp("missing_input_example.bfs"));
  REQUIRE(q.tasks.size() == 2);
  CHECK(q.tasks[1].deps.names() == std::vector<TaskName>{"τ1"});
  CHECK(q.tasks[1].outputs.is_bottom());
  CHECK(std::get<SysOp>(q.tasks[1].body[0]).ops[2] == Operation{Consume{Expr::path("/f3")}});
}

TEST_CASE("pretty printing is canonical") {
  Program p;
  Task t;
  t.name = "a b";
  t.inputs = FileSpec::top();
  t.outputs = FileSpec::of({"/o1", "/o2"});
  t.deps.add("x");
  t.deps.add("task");
  t.body.push_back(NewProc{"z"});
  t.body.push_back(NewProcFrom{"c", "z"});
  t.body.push_back(SysOp{"c", {LetFd{5, Expr::at("q\"x", Expr::fd(0))}, DelFd{5}}});
  p.tasks.push_back(t);
  CHECK(pretty_print(p) ==
        "task \"a b\" ^T^: (\"/o1\", \"/o2\") after x, \"task\" =\n"
        "  newproc z\n"
        "  newproc c from z\n"
        "  sysop c =\n"
        "    let fd5 = \"q\\\"x\" at fd0\n"
        "    del(fd5)\n");
  CHECK(pretty_print(Program{}).empty());
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_buildfs_text("task a _|_: _|_ after _|_ =\n  sysop z =\n    consume(\n");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);
  }
  CHECK_THROWS_AS(parse_buildfs_text("task a \"rel\": _|_ after _|_ =\n"), SyntaxError);
  CHECK_THROWS_AS(parse_buildfs_text("  sysop z =\n"), SyntaxError);
  CHECK_THROWS_AS(parse_buildfs_text("task a _|_: _|_ after _|_ =\ntask a _|_: _|_ after _|_ =\n"),
                  DuplicateTaskName);
  CHECK_THROWS_AS(parse_buildfs_text("task a _|_: _|_ after _|_ =\n  sysop z =\n    let fdx = \"/a\"\n"),
                  SyntaxError);
}

TEST_CASE("comments and blank lines are ignored") {
  Program p = parse_buildfs_text("# header\n\ntask a ⊥: ⊤ after ⊥ =\n  # inside\n  newproc z\n");
  REQUIRE(p.tasks.size() == 1);
  CHECK(p.tasks[0].outputs.is_top());
  CHECK(p.tasks[0].body.size() == 1);
}

TEST_CASE("roundtrip on random programs with awkward names") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Program p = testgen::random_program(seed);
    std::string text = pretty_print(p);
    INFO(text);
    CHECK(parse_buildfs_text(text) == p);
  }
}
