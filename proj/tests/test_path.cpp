#include <catch_amalgamated.hpp>

#include "buildfs/path.hpp"
#include "buildfs/path_filter.hpp"

using namespace buildfs;

TEST_CASE("normalize is lexical") {
  CHECK(path::normalize("/a/./b//c/") == "/a/b/c");
  CHECK(path::normalize("/a/b/../c") == "/a/c");
  CHECK(path::normalize("/..") == "/");
  CHECK(path::normalize("/../x") == "/x");
  CHECK(path::normalize("/") == "/");
  CHECK(path::normalize("a/../..") == "..");
  CHECK(path::normalize("./") == ".");
  CHECK(path::normalize("") == ".");
}

TEST_CASE("join resolves fragments against a base") {
  CHECK(path::join("/f1", "f3") == "/f1/f3");
  CHECK(path::join("/f1", "../f2") == "/f2");
  CHECK(path::join("/f1", "/abs") == "/abs");
  CHECK(path::join("/", ".") == "/");
}

TEST_CASE("parent and prefix tests work on whole components") {
  CHECK(path::parent("/a/b") == "/a");
  CHECK(path::parent("/a") == "/");
  CHECK(path::parent("/") == "/");
  CHECK(path::is_under("/usr/lib/x", "/usr"));
  CHECK(path::is_under("/usr", "/usr"));
  CHECK_FALSE(path::is_under("/usrlocal/x", "/usr"));
  CHECK(path::is_under("/anything", "/"));
}

TEST_CASE("path filter: defaults, longest rule wins") {
  auto f = PathFilter::with_defaults();
  for (const char* p : {"/usr/include/stdio.h", "/lib/x", "/proc/1/stat", "/dev/null", "/tmp/cc.s", "/etc/ld.so"}) {
    CHECK(f.excluded(p));
  }
  CHECK_FALSE(f.excluded("/home/u/proj/main.c"));
  CHECK_FALSE(f.excluded("/usrx/y"));
  f.allow("/tmp/build");
  CHECK_FALSE(f.excluded("/tmp/build/a.o"));
  CHECK(f.excluded("/tmp/other"));
  f.deny("/tmp/build/cache");
  CHECK(f.excluded("/tmp/build/cache/z"));
  CHECK(PathFilter::none().rules().empty());
  CHECK_FALSE(PathFilter::none().excluded("/usr/x"));
}
