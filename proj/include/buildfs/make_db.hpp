#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "buildfs/diagnostics.hpp"
#include "buildfs/path.hpp"
#include "buildfs/task_graph.hpp"

namespace buildfs {

// One explicit file rule from the database printed by `make -pn`.
struct MakeRule {
  std::string target;
  std::vector<std::string> prerequisites;
  std::vector<std::string> order_only;
  bool operator==(const MakeRule&) const = default;
};

namespace make_detail {

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_special_target(const std::string& t) {
  static const std::regex special(R"(^\.[A-Z_]+$)");
  return std::regex_match(t, special);
}

}  // namespace make_detail

// Extracts `target: prerequisites [| order-only]` lines. Comments, recipe
// lines, variable assignments, pattern rules and special targets are skipped.
inline std::vector<MakeRule> parse_make_database(std::string_view db) {
  using namespace make_detail;
  std::vector<MakeRule> rules;
  std::size_t pos = 0;
  while (pos < db.size()) {
    std::size_t eol = db.find('\n', pos);
    if (eol == std::string_view::npos) eol = db.size();
    std::string_view line = db.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty() || line[0] == '#' || line[0] == '\t' || line[0] == ' ') continue;
    if (line.find('=') != std::string_view::npos) continue;
    if (line.find('%') != std::string_view::npos) continue;
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) continue;

    std::string_view rhs = line.substr(colon + 1);
    if (!rhs.empty() && rhs[0] == ':') rhs.remove_prefix(1);  // double-colon rule
    if (auto semi = rhs.find(';'); semi != std::string_view::npos) rhs = rhs.substr(0, semi);

    std::string_view normal = rhs;
    std::string_view order_only;
    if (auto bar = rhs.find('|'); bar != std::string_view::npos) {
      normal = rhs.substr(0, bar);
      order_only = rhs.substr(bar + 1);
    }
    for (const auto& target : split_words(line.substr(0, colon))) {
      if (is_special_target(target)) continue;
      rules.push_back({target, split_words(normal), split_words(order_only)});
    }
  }
  return rules;
}

// Adds `p -in-> τ` for each prerequisite p of a rule whose target is a task
// of `g`, and `σ -before-> τ` when p is itself the target of task σ. Tasks are
// matched by the `<cwd>:<target>` naming convention, then by the bare target.
// Edges are only ever added; one that would close a cycle is skipped.
inline TaskGraph refine_from_make_db(TaskGraph g, std::string_view db, std::string_view cwd,
                                     Diagnostics* diags = nullptr) {
  const std::string dir = path::normalize(cwd);
  auto find = [&](const std::string& target) -> std::optional<std::size_t> {
    if (auto t = g.find_task(dir + ":" + target)) return t;
    return g.find_task(target);
  };

  for (const auto& rule : parse_make_database(db)) {
    auto task = find(rule.target);
    if (!task) continue;
    auto order = [&](const std::string& prereq) {
      auto dep = find(prereq);
      if (!dep || *dep == *task) return;
      if (g.happens_before(*task, *dep)) {
        if (diags) {
          diags->warn("make-db-cycle", "skipping ordering " + prereq + " -> " + rule.target +
                                           ": it would close a dependency cycle");
        }
        return;
      }
      g.add_before(*dep, *task);
    };
    for (const auto& p : rule.prerequisites) {
      g.add_input(*task, path::join(dir, p));
      order(p);
    }
    for (const auto& p : rule.order_only) order(p);
  }
  return g;
}

}  // namespace buildfs
