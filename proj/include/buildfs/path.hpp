#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace buildfs {

// Lexical path handling. Symlinks are never resolved: the analysis sees the
// paths the build used, and two paths are equal iff their normalized byte
// strings are equal.
namespace path {

inline bool is_absolute(std::string_view p) { return !p.empty() && p.front() == '/'; }

// Collapses `.`, `..`, repeated and trailing separators. Relative inputs stay
// relative (leading `..` segments that cannot be resolved are kept).
inline std::string normalize(std::string_view p) {
  const bool absolute = is_absolute(p);
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i <= p.size()) {
    std::size_t j = p.find('/', i);
    if (j == std::string_view::npos) j = p.size();
    std::string_view seg = p.substr(i, j - i);
    if (seg.empty() || seg == ".") {
      // skip
    } else if (seg == "..") {
      if (!parts.empty() && parts.back() != "..") {
        parts.pop_back();
      } else if (!absolute) {
        parts.push_back(seg);
      }
    } else {
      parts.push_back(seg);
    }
    i = j + 1;
  }
  std::string out;
  out.reserve(p.size() + 1);
  if (absolute) out.push_back('/');
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out.push_back('/');
    out.append(parts[k]);
  }
  if (out.empty()) out = absolute ? "/" : ".";
  return out;
}

// JOIN(base, fragment): an absolute fragment replaces the base.
inline std::string join(std::string_view base, std::string_view fragment) {
  if (is_absolute(fragment)) return normalize(fragment);
  std::string s;
  s.reserve(base.size() + fragment.size() + 1);
  s.append(base);
  s.push_back('/');
  s.append(fragment);
  return normalize(s);
}

// Immediate parent of a normalized absolute path; the root is its own parent.
inline std::string_view parent(std::string_view p) {
  if (p.size() <= 1) return "/";
  auto pos = p.rfind('/');
  if (pos == 0 || pos == std::string_view::npos) return "/";
  return p.substr(0, pos);
}

// True if `p` equals `prefix` or lies below it, comparing whole components.
inline bool is_under(std::string_view p, std::string_view prefix) {
  if (prefix == "/") return is_absolute(p);
  if (p.size() < prefix.size() || p.substr(0, prefix.size()) != prefix) return false;
  return p.size() == prefix.size() || p[prefix.size()] == '/';
}

}  // namespace path
}  // namespace buildfs
