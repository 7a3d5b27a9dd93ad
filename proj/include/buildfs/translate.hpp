#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/trace_parser.hpp"

namespace buildfs {

// Real descriptor 0 (stdin) is renumbered, since descriptor 0 of the model is
// the working directory.
inline constexpr Descriptor kStdinDescriptor = 1 << 24;

// Pseudo paths bound to descriptors that do not name files. They live under
// /dev, which the default filter keeps out of reports.
inline constexpr std::string_view kPipePath = "/dev/pipe";
inline constexpr std::string_view kSocketPath = "/dev/socket";
inline constexpr std::string_view kAnonPath = "/dev/anon";

struct TranslateOptions {
  bool include_metadata = false;  // stat/access/readlink count as consumption
  bool include_mmap = false;      // mmap of a descriptor counts as consumption
};

struct Translation {
  std::vector<Operation> ops;
  std::optional<ProcessId> spawned;  // child created by clone/fork/vfork
  bool uses_cwd = false;             // some op resolves a path against fd0
  bool sets_cwd = false;             // chdir/fchdir
  bool recognized = true;            // false for syscalls outside the mapping
};

namespace translate_detail {

inline Descriptor model_fd(long long real) {
  return real == 0 ? kStdinDescriptor : static_cast<Descriptor>(real);
}

class Builder {
 public:
  explicit Builder(const TraceEvent& ev) : ev_(ev) {}

  std::optional<Descriptor> fd(std::size_t i) const {
    if (i >= ev_.args.size()) return std::nullopt;
    auto v = trace_detail::parse_int(ev_.args[i].raw);
    if (!v || *v < 0) return std::nullopt;
    return model_fd(*v);
  }

  std::optional<long long> integer(std::size_t i) const {
    if (i >= ev_.args.size()) return std::nullopt;
    return trace_detail::parse_int(ev_.args[i].raw);
  }

  const std::string& raw(std::size_t i) const {
    static const std::string empty;
    return i < ev_.args.size() ? ev_.args[i].raw : empty;
  }

  // Path argument `i`, relative to the directory descriptor in argument
  // `dirfd_arg` (or the working directory when absent / AT_FDCWD).
  std::optional<Expr> path(std::size_t i, std::optional<std::size_t> dirfd_arg = std::nullopt) {
    if (i >= ev_.args.size() || !ev_.args[i].string) return std::nullopt;
    const std::string& p = *ev_.args[i].string;
    std::optional<Descriptor> dir;
    if (dirfd_arg && raw(*dirfd_arg) != "AT_FDCWD") {
      dir = fd(*dirfd_arg);
      if (!dir) return std::nullopt;
    }
    if (path::is_absolute(p)) return Expr::path(p);
    if (dir) {
      if (p.empty()) return Expr::fd(*dir);  // AT_EMPTY_PATH
      return Expr::at(p, Expr::fd(*dir));
    }
    out.uses_cwd = true;
    if (p.empty()) return Expr::fd(kCwdDescriptor);
    return Expr::at(p, Expr::fd(kCwdDescriptor));
  }

  void let(Descriptor f, Expr e) { out.ops.emplace_back(LetFd{f, std::move(e)}); }
  void del(Descriptor f) { out.ops.emplace_back(DelFd{f}); }
  void consume(std::optional<Expr> e) {
    if (e) out.ops.emplace_back(Consume{std::move(*e)});
  }
  void produce(std::optional<Expr> e) {
    if (e) out.ops.emplace_back(Produce{std::move(*e)});
  }
  void consume_fd(std::optional<Descriptor> f) {
    if (f) out.ops.emplace_back(Consume{Expr::fd(*f)});
  }
  void produce_fd(std::optional<Descriptor> f) {
    if (f) out.ops.emplace_back(Produce{Expr::fd(*f)});
  }
  void bind_result(std::string_view pseudo) {
    if (ev_.retval && *ev_.retval >= 0) let(model_fd(*ev_.retval), Expr::path(std::string(pseudo)));
  }
  // `[3, 4]` style descriptor pairs (pipe, socketpair).
  void bind_pair(std::size_t i, std::string_view pseudo) {
    const std::string& r = raw(i);
    std::size_t pos = 0;
    while ((pos = r.find_first_of("0123456789", pos)) != std::string::npos) {
      std::size_t end = r.find_first_not_of("0123456789", pos);
      let(model_fd(std::stoll(r.substr(pos, end - pos))), Expr::path(std::string(pseudo)));
      if (end == std::string::npos) break;
      pos = end;
    }
  }

  Translation out;

 private:
  const TraceEvent& ev_;
};

inline bool has_flag(const std::string& raw, std::string_view flag) {
  std::size_t pos = 0;
  while ((pos = raw.find(flag, pos)) != std::string::npos) {
    std::size_t end = pos + flag.size();
    bool left = pos == 0 || !trace_detail::is_name_char(raw[pos - 1]);
    bool right = end >= raw.size() || !trace_detail::is_name_char(raw[end]);
    if (left && right) return true;
    pos = end;
  }
  return false;
}

}  // namespace translate_detail

// Maps one decoded syscall onto BuildFS operations. Failed calls map to
// nothing. Unrecognised syscalls set `recognized = false`.
inline Translation translate_syscall(const TraceEvent& ev, const TranslateOptions& opt = {}) {
  using namespace translate_detail;
  Builder b(ev);
  const std::string& sc = ev.syscall;
  if (ev.failed()) return std::move(b.out);

  const std::optional<Descriptor> ret =
      ev.retval && *ev.retval >= 0 ? std::optional<Descriptor>(model_fd(*ev.retval)) : std::nullopt;

  auto open_like = [&](std::optional<Expr> target, const std::string& flags, bool creates) {
    if (!target || !ret) return;
    b.let(*ret, std::move(*target));
    if (creates || has_flag(flags, "O_CREAT") || has_flag(flags, "O_TRUNC")) b.produce_fd(*ret);
  };

  if (sc == "open") {
    open_like(b.path(0), b.raw(1), false);
  } else if (sc == "openat") {
    open_like(b.path(1, 0), b.raw(2), false);
  } else if (sc == "openat2") {
    open_like(b.path(1, 0), b.raw(2), false);
  } else if (sc == "creat") {
    open_like(b.path(0), "", true);
  } else if (sc == "read" || sc == "pread64" || sc == "readv" || sc == "preadv" || sc == "preadv2") {
    b.consume_fd(b.fd(0));
  } else if (sc == "write" || sc == "pwrite64" || sc == "writev" || sc == "pwritev" ||
             sc == "pwritev2" || sc == "ftruncate") {
    b.produce_fd(b.fd(0));
  } else if (sc == "sendfile" || sc == "sendfile64") {
    b.consume_fd(b.fd(1));
    b.produce_fd(b.fd(0));
  } else if (sc == "copy_file_range" || sc == "splice") {
    b.consume_fd(b.fd(0));
    b.produce_fd(b.fd(2));
  } else if (sc == "ioctl" && (has_flag(b.raw(1), "FICLONE") || has_flag(b.raw(1), "FICLONERANGE"))) {
    b.consume_fd(b.fd(2));
    b.produce_fd(b.fd(0));
  } else if (sc == "truncate") {
    b.produce(b.path(0));
  } else if (sc == "close") {
    if (auto f = b.fd(0)) b.del(*f);
  } else if (sc == "dup") {
    if (auto f = b.fd(0); f && ret) b.let(*ret, Expr::fd(*f));
  } else if (sc == "dup2" || sc == "dup3") {
    auto from = b.fd(0);
    auto to = b.fd(1);
    if (from && to && *from != *to) b.let(*to, Expr::fd(*from));
  } else if (sc == "fcntl" || sc == "fcntl64") {
    if (has_flag(b.raw(1), "F_DUPFD") || has_flag(b.raw(1), "F_DUPFD_CLOEXEC")) {
      if (auto f = b.fd(0); f && ret) b.let(*ret, Expr::fd(*f));
    }
  } else if (sc == "chdir") {
    if (auto e = b.path(0)) {
      b.let(kCwdDescriptor, std::move(*e));
      b.out.sets_cwd = true;
    }
  } else if (sc == "fchdir") {
    if (auto f = b.fd(0)) {
      b.let(kCwdDescriptor, Expr::fd(*f));
      b.out.sets_cwd = true;
    }
  } else if (sc == "mkdir" || sc == "rmdir" || sc == "unlink") {
    b.produce(b.path(0));
  } else if (sc == "mkdirat" || sc == "unlinkat" || sc == "mknodat") {
    b.produce(b.path(1, 0));
  } else if (sc == "mknod") {
    b.produce(b.path(0));
  } else if (sc == "link" || sc == "rename") {
    b.consume(b.path(0));
    b.produce(b.path(1));
  } else if (sc == "linkat" || sc == "renameat" || sc == "renameat2") {
    b.consume(b.path(1, 0));
    b.produce(b.path(3, 2));
  } else if (sc == "symlink" || sc == "symlinkat") {
    // A relative link target is relative to the directory holding the link.
    const std::size_t link_arg = sc == "symlink" ? 1 : 2;
    auto link = sc == "symlink" ? b.path(1) : b.path(2, 1);
    if (link && link_arg < ev.args.size() && ev.args[0].string) {
      const std::string& target = *ev.args[0].string;
      if (path::is_absolute(target)) {
        b.consume(Expr::path(target));
      } else {
        b.consume(Expr::at(target, Expr::at("..", *link)));
      }
      b.produce(std::move(link));
    }
  } else if (sc == "execve") {
    b.consume(b.path(0));
  } else if (sc == "execveat") {
    b.consume(b.path(1, 0));
  } else if (sc == "clone" || sc == "clone3" || sc == "fork" || sc == "vfork") {
    if (ev.retval && *ev.retval > 0) b.out.spawned = std::to_string(*ev.retval);
  } else if (sc == "pipe" || sc == "pipe2") {
    b.bind_pair(0, kPipePath);
  } else if (sc == "socketpair") {
    b.bind_pair(3, kSocketPath);
  } else if (sc == "socket" || sc == "accept" || sc == "accept4") {
    b.bind_result(kSocketPath);
  } else if (sc == "eventfd" || sc == "eventfd2" || sc == "epoll_create" || sc == "epoll_create1" ||
             sc == "timerfd_create" || sc == "signalfd" || sc == "signalfd4" ||
             sc == "inotify_init" || sc == "inotify_init1" || sc == "memfd_create" ||
             sc == "pidfd_open") {
    b.bind_result(kAnonPath);
  } else if (sc == "stat" || sc == "lstat" || sc == "stat64" || sc == "lstat64" || sc == "access" ||
             sc == "readlink" || sc == "statfs") {
    if (opt.include_metadata) b.consume(b.path(0));
  } else if (sc == "newfstatat" || sc == "fstatat64" || sc == "statx" || sc == "faccessat" ||
             sc == "faccessat2" || sc == "readlinkat") {
    if (opt.include_metadata) b.consume(b.path(1, 0));
  } else if (sc == "fstat" || sc == "fstat64" || sc == "fstatfs") {
    if (opt.include_metadata) b.consume_fd(b.fd(0));
  } else if (sc == "mmap" || sc == "mmap2") {
    if (opt.include_mmap) {
      auto f = b.integer(4);
      if (f && *f >= 0) b.consume_fd(model_fd(*f));
    }
  } else {
    b.out.recognized = false;
  }
  return std::move(b.out);
}

// The statements a syscall contributes for its own process: a
// `newproc child from pid` for spawns, otherwise one sysop block.
inline std::vector<Statement> translate_event(const TraceEvent& ev, const TranslateOptions& opt = {}) {
  Translation t = translate_syscall(ev, opt);
  std::vector<Statement> out;
  if (t.spawned) out.emplace_back(NewProcFrom{*t.spawned, ev.pid});
  if (!t.ops.empty()) out.emplace_back(SysOp{ev.pid, std::move(t.ops)});
  return out;
}

}  // namespace buildfs
