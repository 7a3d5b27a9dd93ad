#include <catch_amalgamated.hpp>

#include "buildfs/translate.hpp"

using namespace buildfs;

static Translation tr(std::string_view line, TranslateOptions opt = {}) {
  TraceLineParser p;
  auto item = p.parse(line);
  REQUIRE(std::holds_alternative<TraceEvent>(item));
  return translate_syscall(std::get<TraceEvent>(item), opt);
}

static std::vector<Operation> ops(std::initializer_list<Operation> l) { return l; }

TEST_CASE("open family binds the descriptor; creation also produces") {
  CHECK(tr(R"(1 open("/source", O_RDONLY) = 3)").ops == ops({LetFd{3, Expr::path("/source")}}));
  CHECK(tr(R"(1 open("/target", O_WRONLY|O_CREAT) = 4)").ops ==
        ops({LetFd{4, Expr::path("/target")}, Produce{Expr::fd(4)}}));
  CHECK(tr(R"(1 openat(AT_FDCWD, "/t", O_WRONLY|O_TRUNC) = 5)").ops ==
        ops({LetFd{5, Expr::path("/t")}, Produce{Expr::fd(5)}}));
  CHECK(tr(R"(1 creat("/c", 0644) = 6)").ops == ops({LetFd{6, Expr::path("/c")}, Produce{Expr::fd(6)}}));
  // O_CREATE is not O_CREAT; only whole flags count.
  CHECK(tr(R"(1 open("/x", O_RDONLY|O_CLOEXEC) = 3)").ops.size() == 1);
}

TEST_CASE("relative paths resolve against fd0 or the directory descriptor") {
  auto a = tr(R"(1 openat(AT_FDCWD, "src/a.c", O_RDONLY) = 3)");
  CHECK(a.uses_cwd);
  CHECK(a.ops == ops({LetFd{3, Expr::at("src/a.c", Expr::fd(0))}}));
  auto b = tr(R"(1 openat(7, "a.c", O_RDONLY) = 3)");
  CHECK_FALSE(b.uses_cwd);
  CHECK(b.ops == ops({LetFd{3, Expr::at("a.c", Expr::fd(7))}}));
  auto c = tr(R"(1 openat(7, "/abs", O_RDONLY) = 3)");
  CHECK(c.ops == ops({LetFd{3, Expr::path("/abs")}}));
}

TEST_CASE("failed calls contribute nothing") {
  auto t = tr(R"(1 open("/missing", O_RDONLY) = -1 ENOENT (No such file or directory))");
  CHECK(t.ops.empty());
  CHECK(t.recognized);
  CHECK(tr(R"(1 unlink("/x") = -1 EACCES (Permission denied))").ops.empty());
}

TEST_CASE("data transfer") {
  CHECK(tr(R"(1 read(3, "content", 7) = 7)").ops == ops({Consume{Expr::fd(3)}}));
  CHECK(tr(R"(1 pread64(3, "", 10, 0) = 0)").ops == ops({Consume{Expr::fd(3)}}));
  CHECK(tr(R"(1 write(4, "content", 7) = 7)").ops == ops({Produce{Expr::fd(4)}}));
  CHECK(tr(R"(1 sendfile(4, 3, NULL, 100) = 100)").ops == ops({Consume{Expr::fd(3)}, Produce{Expr::fd(4)}}));
  CHECK(tr(R"(1 copy_file_range(3, NULL, 4, NULL, 100, 0) = 100)").ops ==
        ops({Consume{Expr::fd(3)}, Produce{Expr::fd(4)}}));
  CHECK(tr(R"(1 ioctl(4, FICLONE, 3) = 0)").ops == ops({Consume{Expr::fd(3)}, Produce{Expr::fd(4)}}));
  CHECK(tr(R"(1 ioctl(1, TCGETS, {B38400 opost}) = 0)").ops.empty());
  CHECK(tr(R"(1 ftruncate(4, 0) = 0)").ops == ops({Produce{Expr::fd(4)}}));
}

TEST_CASE("stdin is renumbered away from the working-directory descriptor") {
  CHECK(tr(R"(1 read(0, "x", 1) = 1)").ops == ops({Consume{Expr::fd(kStdinDescriptor)}}));
  CHECK(tr(R"(1 dup2(3, 0) = 0)").ops == ops({LetFd{kStdinDescriptor, Expr::fd(3)}}));
}

TEST_CASE("descriptor table operations") {
  CHECK(tr("1 close(3) = 0").ops == ops({DelFd{3}}));
  CHECK(tr("1 dup(3) = 5").ops == ops({LetFd{5, Expr::fd(3)}}));
  CHECK(tr("1 dup2(3, 1) = 1").ops == ops({LetFd{1, Expr::fd(3)}}));
  CHECK(tr("1 dup2(3, 3) = 3").ops.empty());
  CHECK(tr("1 dup3(3, 9, O_CLOEXEC) = 9").ops == ops({LetFd{9, Expr::fd(3)}}));
  CHECK(tr("1 fcntl(3, F_DUPFD_CLOEXEC, 10) = 10").ops == ops({LetFd{10, Expr::fd(3)}}));
  CHECK(tr("1 fcntl(3, F_SETFD, FD_CLOEXEC) = 0").ops.empty());
  auto pipe = tr("1 pipe2([3, 4], O_CLOEXEC) = 0");
  CHECK(pipe.ops == ops({LetFd{3, Expr::path("/dev/pipe")}, LetFd{4, Expr::path("/dev/pipe")}}));
  CHECK(tr("1 socket(AF_UNIX, SOCK_STREAM, 0) = 5").ops == ops({LetFd{5, Expr::path("/dev/socket")}}));
}

TEST_CASE("working directory changes") {
  auto a = tr(R"(1 chdir("/proj/sub") = 0)");
  CHECK(a.sets_cwd);
  CHECK(a.ops == ops({LetFd{0, Expr::path("/proj/sub")}}));
  auto b = tr(R"(1 chdir("sub") = 0)");
  CHECK(b.uses_cwd);
  CHECK(b.ops == ops({LetFd{0, Expr::at("sub", Expr::fd(0))}}));
  CHECK(tr("1 fchdir(5) = 0").ops == ops({LetFd{0, Expr::fd(5)}}));
}

TEST_CASE("namespace changes") {
  CHECK(tr(R"(1 mkdir("/o", 0755) = 0)").ops == ops({Produce{Expr::path("/o")}}));
  CHECK(tr(R"(1 unlinkat(AT_FDCWD, "/o/x", 0) = 0)").ops == ops({Produce{Expr::path("/o/x")}}));
  CHECK(tr(R"(1 rename("/a.tmp", "/a") = 0)").ops == ops({Consume{Expr::path("/a.tmp")}, Produce{Expr::path("/a")}}));
  CHECK(tr(R"(1 renameat2(AT_FDCWD, "/a.tmp", 5, "a", RENAME_NOREPLACE) = 0)").ops ==
        ops({Consume{Expr::path("/a.tmp")}, Produce{Expr::at("a", Expr::fd(5))}}));
  CHECK(tr(R"(1 symlink("lib.so.1", "/l/lib.so") = 0)").ops ==
        ops({Consume{Expr::at("lib.so.1", Expr::at("..", Expr::path("/l/lib.so")))}, Produce{Expr::path("/l/lib.so")}}));
  CHECK(tr(R"(1 symlink("/abs/t", "/l/x") = 0)").ops ==
        ops({Consume{Expr::path("/abs/t")}, Produce{Expr::path("/l/x")}}));
}

TEST_CASE("process creation and exec") {
  auto c = tr("1 clone(child_stack=NULL, flags=CLONE_CHILD_SETTID|SIGCHLD) = 77");
  REQUIRE(c.spawned);
  CHECK(*c.spawned == "77");
  CHECK(c.ops.empty());
  CHECK_FALSE(tr("1 fork() = -1 EAGAIN (Resource temporarily unavailable)").spawned);
  CHECK(tr(R"(1 execve("/usr/bin/cc", ["cc"], 0x7ffd /* 3 vars */) = 0)").ops ==
        ops({Consume{Expr::path("/usr/bin/cc")}}));

  TraceLineParser p;
  auto ev = std::get<TraceEvent>(p.parse("10 vfork() = 11"));
  auto st = translate_event(ev);
  REQUIRE(st.size() == 1);
  CHECK(st[0] == Statement{NewProcFrom{"11", "10"}});
}

TEST_CASE("metadata and mmap are opt-in") {
  CHECK(tr(R"(1 stat("/h.h", {st_mode=S_IFREG}) = 0)").ops.empty());
  TranslateOptions meta;
  meta.include_metadata = true;
  CHECK(tr(R"(1 stat("/h.h", {st_mode=S_IFREG}) = 0)", meta).ops == ops({Consume{Expr::path("/h.h")}}));
  CHECK(tr(R"(1 newfstatat(AT_FDCWD, "/h.h", {st_mode=S_IFREG}, 0) = 0)", meta).ops ==
        ops({Consume{Expr::path("/h.h")}}));
  CHECK(tr("1 mmap(NULL, 4096, PROT_READ, MAP_PRIVATE, 3, 0) = 0x7f00").ops.empty());
  TranslateOptions mm;
  mm.include_mmap = true;
  CHECK(tr("1 mmap(NULL, 4096, PROT_READ, MAP_PRIVATE, 3, 0) = 0x7f00", mm).ops == ops({Consume{Expr::fd(3)}}));
  CHECK(tr("1 mmap(NULL, 4096, PROT_READ, MAP_PRIVATE|MAP_ANONYMOUS, -1, 0) = 0x7f00", mm).ops.empty());
}

TEST_CASE("unknown syscalls are flagged") {
  CHECK_FALSE(tr("1 getpid() = 1").recognized);
  CHECK(tr("1 close(3) = 0").recognized);
}
