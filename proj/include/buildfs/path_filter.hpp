#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "buildfs/path.hpp"

namespace buildfs {

// Decides which paths are eligible for fault reports. Excluded paths are still
// tracked by the evaluator; they just never appear in a report.
//
// Rules are path prefixes (matched on whole components). The longest matching
// rule wins; a path that matches no rule is included.
class PathFilter {
 public:
  struct Rule {
    std::string prefix;
    bool allow;
    bool operator==(const Rule&) const = default;
  };

  static const std::vector<std::string>& default_denylist() {
    static const std::vector<std::string> prefixes = {
        "/usr", "/lib", "/proc", "/dev", "/tmp", "/etc",
        "/bin", "/sbin", "/lib32", "/lib64", "/libx32", "/sys", "/run"};
    return prefixes;
  }

  static PathFilter with_defaults() {
    PathFilter f;
    for (const auto& p : default_denylist()) f.deny(p);
    return f;
  }

  static PathFilter none() { return PathFilter{}; }

  void deny(std::string_view prefix) { set(prefix, false); }
  void allow(std::string_view prefix) { set(prefix, true); }

  bool excluded(std::string_view p) const {
    const Rule* best = nullptr;
    for (const auto& r : rules_) {
      if (path::is_under(p, r.prefix) && (!best || r.prefix.size() > best->prefix.size())) best = &r;
    }
    return best && !best->allow;
  }

  const std::vector<Rule>& rules() const { return rules_; }

 private:
  void set(std::string_view prefix, bool allow) {
    std::string norm = path::normalize(prefix);
    for (auto& r : rules_) {
      if (r.prefix == norm) {
        r.allow = allow;
        return;
      }
    }
    rules_.push_back({std::move(norm), allow});
  }

  std::vector<Rule> rules_;
};

}  // namespace buildfs
