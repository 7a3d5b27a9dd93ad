#include <catch_amalgamated.hpp>

#include <sstream>

#include "buildfs/pipeline.hpp"
#include "buildfs/synth.hpp"
#include "buildfs/text.hpp"

using namespace buildfs;

static std::vector<FaultReport> detect(const Program& p) {
  auto v = verify_build(p, build_graph(p));
  std::sort(v.faults.begin(), v.faults.end());
  return v.faults;
}

TEST_CASE("clean generation has no faults") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto r = generate_synthetic(seed, SynthParams{});
    CHECK(r.expected.empty());
    CHECK(detect(r.program).empty());
  }
}

TEST_CASE("one conflicting-producer injection yields one ordering violation") {
  SynthParams prm;
  prm.conflicting_producers = 1;
  auto r = generate_synthetic(3, prm);
  REQUIRE(r.expected.size() == 1);
  CHECK(r.expected[0].kind == FaultKind::OrderingViolation);
  CHECK(detect(r.program) == r.expected);
}

TEST_CASE("each injection kind on its own") {
  for (int kind = 0; kind < 5; ++kind) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SynthParams prm;
      prm.tasks = 1 + seed % 7;
      std::size_t* k[] = {&prm.missing_inputs, &prm.conflicting_producers, &prm.generated_sources,
                          &prm.missing_outputs, &prm.dependency_outputs};
      *k[kind] = 1 + seed % 3;
      auto r = generate_synthetic(seed, prm);
      CHECK(r.expected.size() == prm.fault_count());
      CHECK(detect(r.program) == r.expected);
    }
  }
}

TEST_CASE("generation is deterministic and survives printing") {
  SynthParams prm;
  prm.missing_inputs = prm.conflicting_producers = prm.generated_sources = 1;
  auto a = generate_synthetic(99, prm);
  auto b = generate_synthetic(99, prm);
  CHECK(a.program == b.program);
  CHECK(parse_buildfs_text(pretty_print(a.program)) == a.program);
  CHECK(detect(parse_buildfs_text(pretty_print(a.program))) == a.expected);
}

TEST_CASE("synthetic traces analyze cleanly in make mode") {
  std::stringstream ss;
  write_synthetic_trace(ss, 20000, 5);
  std::string text = ss.str();
  std::size_t lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines >= 20000);
  CHECK(lines < 20200);
  AnalysisConfig c;
  c.mode = BuildMode::Make;
  c.cwd = "/";
  auto r = analyze_trace(ss, c);
  CHECK(r.faults.empty());
  CHECK(r.tasks.size() > 100);
  CHECK(r.diagnostics.error_count() == 0);
}
