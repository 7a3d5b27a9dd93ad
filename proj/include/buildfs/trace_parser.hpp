#pragma once

// Decoding of strace-style trace lines:
//
//   1234  openat(AT_FDCWD, "x.c", O_RDONLY) = 3
//   [pid  1234] 12:00:01.5 read(3, "..."..., 4096) = 4096
//   1234  wait4(-1,  <unfinished ...>
//   1234  <... wait4 resumed>NULL, 0, NULL) = 1235
//   1234  open("/x", O_RDONLY) = -1 ENOENT (No such file or directory)
//   1235  +++ exited with 0 +++
//
// Writes to fd 1 whose payload starts with `#BuildFS#: ` are decoded as
// instrumentation markers rather than syscalls.

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "buildfs/ast.hpp"
#include "buildfs/diagnostics.hpp"

namespace buildfs {

inline constexpr std::string_view kMarkerPrefix = "#BuildFS#: ";

struct SyscallArg {
  std::string raw;                    // as printed, trimmed
  std::optional<std::string> string;  // decoded value of a quoted string argument
  bool truncated = false;             // string printed with a trailing "..."
};

struct TraceEvent {
  ProcessId pid;
  std::string syscall;
  std::vector<SyscallArg> args;
  std::optional<long long> retval;  // absent for `= ?` or when no result was printed
  std::string error;                // errno tag such as ENOENT; empty on success

  bool failed() const { return !error.empty() || (retval && *retval < 0); }
};

struct Marker {
  enum class Kind { Begin, End, Input, Output, After };
  Kind kind;
  TaskName task;
  std::string value;  // path for Input/Output, task name for After
  ProcessId pid;

  bool operator==(const Marker&) const = default;
};

// monostate: nothing to process (blank, signal/exit, unfinished half, or a
// malformed line, which is counted).
using TraceItem = std::variant<std::monostate, TraceEvent, Marker>;

// Parses a marker payload (without the prefix).
inline std::optional<Marker> parse_marker_payload(std::string_view body, const ProcessId& pid) {
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' ')) {
    body.remove_suffix(1);
  }
  if (body.starts_with("Begin ")) return Marker{Marker::Kind::Begin, std::string(body.substr(6)), {}, pid};
  if (body.starts_with("End ")) return Marker{Marker::Kind::End, std::string(body.substr(4)), {}, pid};

  struct Sep {
    std::string_view text;
    Marker::Kind kind;
  };
  static constexpr Sep seps[] = {{" input ", Marker::Kind::Input},
                                 {" output ", Marker::Kind::Output},
                                 {" after ", Marker::Kind::After}};
  std::size_t best = std::string_view::npos;
  const Sep* which = nullptr;
  for (const auto& s : seps) {
    std::size_t at = body.find(s.text);
    if (at != std::string_view::npos && at < best) {
      best = at;
      which = &s;
    }
  }
  if (!which || best == 0) return std::nullopt;
  return Marker{which->kind, std::string(body.substr(0, best)),
                std::string(body.substr(best + which->text.size())), pid};
}

namespace trace_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Decodes a C-style quoted string starting at s[i] == '"'. Advances i past the
// closing quote. Returns nullopt when unterminated.
inline std::optional<std::string> decode_string(std::string_view s, std::size_t& i) {
  std::string out;
  ++i;
  while (i < s.size()) {
    char c = s[i++];
    if (c == '"') return out;
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (i >= s.size()) return std::nullopt;
    char e = s[i++];
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'v': out.push_back('\v'); break;
      case 'f': out.push_back('\f'); break;
      case 'a': out.push_back('\a'); break;
      case 'b': out.push_back('\b'); break;
      case 'x': {
        int v = 0, n = 0;
        while (n < 2 && i < s.size() && std::isxdigit(static_cast<unsigned char>(s[i]))) {
          char h = s[i++];
          v = v * 16 + (std::isdigit(static_cast<unsigned char>(h)) ? h - '0' : (std::tolower(h) - 'a' + 10));
          ++n;
        }
        out.push_back(static_cast<char>(v));
        break;
      }
      default:
        if (e >= '0' && e <= '7') {
          int v = e - '0', n = 1;
          while (n < 3 && i < s.size() && s[i] >= '0' && s[i] <= '7') {
            v = v * 8 + (s[i++] - '0');
            ++n;
          }
          out.push_back(static_cast<char>(v));
        } else {
          out.push_back(e);
        }
    }
  }
  return std::nullopt;
}

// Splits the argument list starting right after '('. On success sets `end`
// to the index of the matching ')'.
inline std::optional<std::vector<SyscallArg>> split_args(std::string_view s, std::size_t& end) {
  std::vector<SyscallArg> args;
  std::size_t i = 0;
  std::size_t start = 0;
  int depth = 0;
  std::optional<std::string> str;
  bool truncated = false;

  auto flush = [&](std::size_t stop) {
    std::string_view raw = trim(s.substr(start, stop - start));
    if (!raw.empty() || !args.empty() || str) {
      args.push_back({std::string(raw), std::move(str), truncated});
    }
    str.reset();
    truncated = false;
  };

  while (i < s.size()) {
    char c = s[i];
    if (c == '"') {
      std::size_t before = i;
      auto decoded = decode_string(s, i);
      if (!decoded) return std::nullopt;
      if (depth == 0 && trim(s.substr(start, before - start)).empty()) str = std::move(decoded);
      if (s.substr(i).starts_with("...")) {
        truncated = true;
        i += 3;
      }
      continue;
    }
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      std::size_t close = s.find("*/", i + 2);
      if (close == std::string_view::npos) return std::nullopt;
      i = close + 2;
      continue;
    }
    if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
    } else if (c == ')') {
      if (depth == 0) {
        flush(i);
        end = i;
        return args;
      }
      --depth;
    } else if (c == ',' && depth == 0) {
      flush(i);
      start = i + 1;
    }
    ++i;
  }
  return std::nullopt;
}

inline std::optional<long long> parse_int(std::string_view t) {
  t = trim(t);
  if (t.empty()) return std::nullopt;
  bool neg = false;
  if (t[0] == '-') {
    neg = true;
    t.remove_prefix(1);
  }
  long long v = 0;
  std::size_t i = 0;
  if (t.starts_with("0x") || t.starts_with("0X")) {
    i = 2;
    if (i >= t.size() || !std::isxdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
    for (; i < t.size() && std::isxdigit(static_cast<unsigned char>(t[i])); ++i) {
      char h = t[i];
      v = v * 16 + (std::isdigit(static_cast<unsigned char>(h)) ? h - '0' : (std::tolower(h) - 'a' + 10));
    }
  } else {
    if (!std::isdigit(static_cast<unsigned char>(t[0]))) return std::nullopt;
    for (; i < t.size() && std::isdigit(static_cast<unsigned char>(t[i])); ++i) v = v * 10 + (t[i] - '0');
  }
  // Allow `-y` decorations such as 3</path> after the number.
  if (i < t.size() && t[i] != '<') return std::nullopt;
  return neg ? -v : v;
}

}  // namespace trace_detail

class TraceLineParser {
 public:
  explicit TraceLineParser(ProcessId default_pid = "0") : default_pid_(std::move(default_pid)) {}

  TraceItem parse(std::string_view line) {
    using namespace trace_detail;
    ++lines_;
    std::string_view s = trim(line);
    if (s.empty()) return {};

    ProcessId pid = default_pid_;
    if (s.starts_with("[pid")) {
      std::size_t close = s.find(']');
      if (close == std::string_view::npos) return malformed(line);
      pid = std::string(trim(s.substr(4, close - 4)));
      s = trim(s.substr(close + 1));
    } else if (std::isdigit(static_cast<unsigned char>(s[0]))) {
      std::size_t j = 0;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) {
        pid = std::string(s.substr(0, j));
        s = trim(s.substr(j));
      }
    }
    // Optional timestamp (-t, -tt, -ttt, -r).
    if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) {
      std::size_t j = 0;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == ':' || s[j] == '.')) ++j;
      if (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) s = trim(s.substr(j));
    }

    if (s.starts_with("---") || s.starts_with("+++")) return {};

    std::string joined;
    if (s.starts_with("<...")) {
      std::size_t name_start = 4;
      while (name_start < s.size() && s[name_start] == ' ') ++name_start;
      std::size_t name_end = name_start;
      while (name_end < s.size() && is_name_char(s[name_end])) ++name_end;
      std::string name(s.substr(name_start, name_end - name_start));
      std::size_t gt = s.find('>', name_end);
      if (name.empty() || gt == std::string_view::npos) return malformed(line);
      auto it = pending_.find({pid, name});
      if (it == pending_.end()) {
        diags_.warn("unmatched-resumed", "resumed call without an unfinished half: " + std::string(s));
        ++skipped_;
        return {};
      }
      joined = std::move(it->second) + std::string(s.substr(gt + 1));
      forget(it);
      s = joined;
    }

    std::size_t name_end = 0;
    while (name_end < s.size() && is_name_char(s[name_end])) ++name_end;
    if (name_end == 0 || name_end >= s.size() || s[name_end] != '(') return malformed(line);
    std::string name(s.substr(0, name_end));

    static constexpr std::string_view kUnfinished = "<unfinished ...>";
    if (s.ends_with(kUnfinished)) {
      std::string_view head = s.substr(0, s.size() - kUnfinished.size());
      auto key = std::make_pair(pid, name);
      if (pending_.count(key)) {
        diags_.warn("duplicate-unfinished", "second unfinished " + name + " on pid " + pid);
      } else if (is_spawn(name)) {
        ++spawns_pending_;
      }
      pending_[key] = std::string(head);
      return {};
    }

    std::size_t close = 0;
    auto args = split_args(s.substr(name_end + 1), close);
    if (!args) return malformed(line);
    std::string_view rest = trim(s.substr(name_end + 1 + close + 1));

    TraceEvent ev;
    ev.pid = std::move(pid);
    ev.syscall = std::move(name);
    ev.args = std::move(*args);
    if (rest.starts_with("=")) {
      rest = trim(rest.substr(1));
      std::size_t sp = 0;
      while (sp < rest.size() && !std::isspace(static_cast<unsigned char>(rest[sp])) && rest[sp] != ';') ++sp;
      std::string_view tok = rest.substr(0, sp);
      if (tok != "?") {
        ev.retval = parse_int(tok);
        if (!ev.retval) return malformed(line);
      }
      std::string_view tail = trim(rest.substr(sp));
      std::size_t e = 0;
      while (e < tail.size() && (std::isupper(static_cast<unsigned char>(tail[e])) ||
                                 std::isdigit(static_cast<unsigned char>(tail[e])) || tail[e] == '_')) {
        ++e;
      }
      if (e > 0 && std::isupper(static_cast<unsigned char>(tail[0]))) {
        ev.error = std::string(tail.substr(0, e));
        if (ev.retval && *ev.retval >= 0) ev.error.clear();
      }
    } else if (!rest.empty() && rest != ";") {
      return malformed(line);
    }

    if (is_marker_write(ev)) {
      if (auto m = decode_marker(ev)) return std::move(*m);
      return {};
    }
    return ev;
  }

  // Any clone/fork/vfork currently waiting for its resumed half.
  bool spawn_pending() const { return spawns_pending_ > 0; }
  std::size_t pending_count() const { return pending_.size(); }

  // Drops unfinished halves left at end of input, with a warning each.
  void finish() {
    for (const auto& [key, _] : pending_) {
      diags_.warn("unmatched-unfinished",
                  "unfinished " + key.second + " on pid " + key.first + " never resumed");
    }
    pending_.clear();
    spawns_pending_ = 0;
  }

  std::size_t lines() const { return lines_; }
  std::size_t skipped() const { return skipped_; }
  Diagnostics& diagnostics() { return diags_; }
  const Diagnostics& diagnostics() const { return diags_; }

 private:
  using Key = std::pair<ProcessId, std::string>;

  static bool is_spawn(std::string_view name) {
    return name == "clone" || name == "clone3" || name == "fork" || name == "vfork";
  }

  void forget(std::map<Key, std::string>::iterator it) {
    if (is_spawn(it->first.second) && spawns_pending_ > 0) --spawns_pending_;
    pending_.erase(it);
  }

  static bool is_marker_write(const TraceEvent& ev) {
    if (ev.syscall != "write" || ev.args.size() < 2 || ev.failed()) return false;
    auto fd = trace_detail::parse_int(ev.args[0].raw);
    const auto& payload = ev.args[1].string;
    return fd && *fd == 1 && payload && payload->starts_with(kMarkerPrefix);
  }

  std::optional<Marker> decode_marker(const TraceEvent& ev) {
    const auto& payload = ev.args[1].string;
    if (ev.args[1].truncated) {
      diags_.warn("truncated-marker", "marker payload truncated by the tracer: " + *payload);
    }
    auto m = parse_marker_payload(std::string_view(*payload).substr(kMarkerPrefix.size()), ev.pid);
    if (!m) diags_.warn("malformed-marker", "unrecognised marker: " + *payload);
    return m;
  }

  TraceItem malformed(std::string_view line) {
    ++skipped_;
    diags_.warn("malformed-line", "line " + std::to_string(lines_) + ": " + std::string(line));
    return {};
  }

  ProcessId default_pid_;
  std::map<Key, std::string> pending_;
  std::size_t spawns_pending_ = 0;
  std::size_t lines_ = 0;
  std::size_t skipped_ = 0;
  Diagnostics diags_;
};

}  // namespace buildfs
