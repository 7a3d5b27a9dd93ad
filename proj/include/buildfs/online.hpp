#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "buildfs/pipeline.hpp"
#include "buildfs/report.hpp"

namespace buildfs {

inline constexpr const char* kTracerEnv = "BUILDFS_TRACER";

class TracerMissing : public std::runtime_error {
 public:
  explicit TracerMissing(const std::string& tracer) : std::runtime_error("tracer not found: " + tracer) {}
};

struct OnlineOutcome {
  AnalysisResult result;
  int build_status = 0;  // exit status of the traced build, 128+N for signal N
  double seconds_after_eof = 0;  // analysis time left once the trace stream closed
};

namespace online_detail {

inline std::string tracer_program() {
  const char* env = std::getenv(kTracerEnv);
  return env && *env ? env : "strace";
}

inline bool executable(const std::filesystem::path& p) {
  std::error_code ec;
  return std::filesystem::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

inline std::optional<std::string> resolve(const std::string& prog) {
  if (prog.find('/') != std::string::npos) {
    if (executable(prog)) return prog;
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  std::string_view rest = path ? path : "/usr/bin:/bin";
  while (true) {
    std::size_t colon = rest.find(':');
    std::string dir(rest.substr(0, colon));
    if (dir.empty()) dir = ".";
    auto candidate = std::filesystem::path(dir) / prog;
    if (executable(candidate)) return candidate.string();
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return std::nullopt;
}

inline int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 1;
}

}  // namespace online_detail

// Runs the build under the tracer and analyzes the trace as it is written.
// The tracer writes into a FIFO; this thread is the only reader. A helper
// thread reaps the tracer and, if it died without ever opening the FIFO,
// opens and closes the write end so the reader sees end of stream.
inline OnlineOutcome run_online(const std::vector<std::string>& command, const AnalysisConfig& config) {
  namespace fs = std::filesystem;
  const std::string tracer = online_detail::tracer_program();
  auto resolved = online_detail::resolve(tracer);
  if (!resolved) throw TracerMissing(tracer);
  if (command.empty()) throw std::invalid_argument("no build command given");

  std::string tmpl = (fs::temp_directory_path() / "buildfs-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error(std::string("mkdtemp: ") + std::strerror(errno));
  const fs::path dir = tmpl;
  const std::string fifo = (dir / "trace").string();
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};
  if (::mkfifo(fifo.c_str(), 0600) != 0) throw std::runtime_error(std::string("mkfifo: ") + std::strerror(errno));

  std::vector<std::string> args{*resolved};
  for (const auto& f : tracer_flags()) args.push_back(f);
  args.insert(args.end(), {"-o", fifo, "--"});
  args.insert(args.end(), command.begin(), command.end());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t child = ::fork();
  if (child < 0) throw std::runtime_error(std::string("fork: ") + std::strerror(errno));
  if (child == 0) {
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }

  std::atomic<bool> reader_done{false};
  int status = 0;
  std::thread watchdog([&] {
    while (::waitpid(child, &status, 0) < 0 && errno == EINTR) {
    }
    while (!reader_done.load()) {
      int fd = ::open(fifo.c_str(), O_WRONLY | O_NONBLOCK);
      if (fd >= 0) {
        ::close(fd);
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  });

  TraceAnalysis analysis(config);
  int fd = ::open(fifo.c_str(), O_RDONLY);
  if (fd >= 0) {
    std::vector<char> buf(1 << 16);
    while (true) {
      ssize_t n = ::read(fd, buf.data(), buf.size());
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      analysis.feed_bytes(std::string_view(buf.data(), static_cast<std::size_t>(n)));
    }
    ::close(fd);
  }
  reader_done = true;
  const auto eof = std::chrono::steady_clock::now();

  OnlineOutcome out;
  std::exception_ptr failure;
  try {
    out.result = analysis.finish();
  } catch (...) {
    failure = std::current_exception();
  }
  out.seconds_after_eof = std::chrono::duration<double>(std::chrono::steady_clock::now() - eof).count();
  watchdog.join();
  if (failure) std::rethrow_exception(failure);
  out.build_status = online_detail::decode_status(status);
  if (out.build_status != 0) {
    out.result.diagnostics.warn("build-failed", "build exited with status " + std::to_string(out.build_status) +
                                                    "; analyzed the observed prefix of the trace");
  }
  if (fd < 0) out.result.diagnostics.error("trace-unreadable", "could not open " + fifo);
  return out;
}

}  // namespace buildfs
