#pragma once

// Brute-force transcriptions of the model's definitions, kept deliberately
// naive: explicit relation matrices over a finite path universe, iterated to
// a fixpoint. Shares nothing with the library besides the AST types.

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "buildfs/ast.hpp"

namespace oracle {

using buildfs::Program;
using buildfs::Task;

inline std::string parent_of(const std::string& p) {
  if (p == "/") return "/";
  auto slash = p.rfind('/');
  return slash == 0 ? "/" : p.substr(0, slash);
}

// Minimal lexical path handling, written independently of buildfs::path.
inline std::string normalize(const std::string& p) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  const bool abs = !p.empty() && p[0] == '/';
  while (i <= p.size()) {
    std::size_t j = p.find('/', i);
    if (j == std::string::npos) j = p.size();
    std::string c = p.substr(i, j - i);
    if (c == "..") {
      if (!parts.empty() && parts.back() != "..") {
        parts.pop_back();
      } else if (!abs) {
        parts.push_back(c);
      }
    } else if (!c.empty() && c != ".") {
      parts.push_back(c);
    }
    i = j + 1;
  }
  std::string out = abs ? "/" : "";
  for (std::size_t k = 0; k < parts.size(); ++k) out += (k ? "/" : "") + parts[k];
  if (out.empty()) out = ".";
  return out;
}

inline std::string join(const std::string& base, const std::string& frag) {
  if (!frag.empty() && frag[0] == '/') return normalize(frag);
  return normalize(base + "/" + frag);
}

struct Access {
  std::set<std::string> consumed, produced;
};

using Scope = std::map<int, std::string>;

inline bool eval_expr(const buildfs::Expr& e, const Scope& s, std::string& out) {
  std::string v;
  if (e.is_fd()) {
    auto it = s.find(std::get<int>(e.base));
    if (it == s.end()) return false;
    v = it->second;
  } else {
    const std::string& p = std::get<std::string>(e.base);
    if (!p.empty() && p[0] == '/') {
      v = normalize(p);
    } else {
      auto it = s.find(0);
      if (it == s.end()) return false;
      v = join(it->second, p);
    }
  }
  for (const auto& f : e.fragments) v = join(v, f);
  out = v;
  return true;
}

inline std::vector<Access> evaluate(const Program& b) {
  std::map<std::string, Scope> sigma;
  std::vector<Access> out;
  for (const Task& t : b.tasks) {
    Access acc;
    for (const auto& st : t.body) {
      if (auto* np = std::get_if<buildfs::NewProc>(&st)) {
        sigma[np->process] = {};
      } else if (auto* nf = std::get_if<buildfs::NewProcFrom>(&st)) {
        Scope copy = sigma[nf->source];
        sigma[nf->process] = copy;
      } else {
        const auto& so = std::get<buildfs::SysOp>(st);
        Scope& s = sigma[so.process];
        for (const auto& op : so.ops) {
          std::string p;
          if (auto* l = std::get_if<buildfs::LetFd>(&op)) {
            if (eval_expr(l->value, s, p)) {
              s[l->fd] = p;
            } else {
              s.erase(l->fd);
            }
          } else if (auto* d = std::get_if<buildfs::DelFd>(&op)) {
            s.erase(d->fd);
          } else if (auto* c = std::get_if<buildfs::Consume>(&op)) {
            if (eval_expr(c->target, s, p)) acc.consumed.insert(p);
          } else if (auto* pr = std::get_if<buildfs::Produce>(&op)) {
            if (eval_expr(pr->target, s, p)) acc.produced.insert(p);
          }
        }
      }
    }
    out.push_back(acc);
  }
  return out;
}

// p ⊑⁺ q over every pair of the universe, plus the happens-before closure.
struct Closures {
  std::vector<std::string> universe;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<bool>> sub;  // ⊑⁺
  std::vector<std::vector<bool>> hb;   // ≺⁺ over task positions

  bool subsumed(const std::string& p, const buildfs::FileSpec& k) const {
    if (k.is_top()) return true;
    for (const auto& q : k.paths()) {
      if (sub[index.at(p)][index.at(q)]) return true;
    }
    return false;
  }
};

inline Closures close(const Program& b, const std::vector<Access>& acc) {
  Closures c;
  std::set<std::string> u;
  auto add = [&](std::string p) {
    while (true) {
      u.insert(p);
      if (p == "/" || p.empty() || p[0] != '/') break;
      p = parent_of(p);
    }
  };
  for (const auto& t : b.tasks) {
    for (const auto& p : t.inputs.paths()) add(p);
    for (const auto& p : t.outputs.paths()) add(p);
  }
  for (const auto& a : acc) {
    for (const auto& p : a.consumed) add(p);
    for (const auto& p : a.produced) add(p);
  }
  c.universe.assign(u.begin(), u.end());
  const std::size_t n = c.universe.size();
  for (std::size_t i = 0; i < n; ++i) c.index[c.universe[i]] = i;

  // ⊑: least relation closed under SELF, PAR-DIR and INDIRECT.
  std::vector<std::vector<bool>> step(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    step[i][i] = true;
    const std::string& p = c.universe[i];
    if (!p.empty() && p[0] == '/' && p != "/") step[i][c.index[parent_of(p)]] = true;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t p1 = 0; p1 < n; ++p1) {
      for (std::size_t p1b = 0; p1b < n; ++p1b) {
        if (!step[p1][p1b]) continue;
        for (const auto& t : b.tasks) {
          if (t.inputs.is_top() || !t.inputs.paths().count(c.universe[p1b])) continue;
          if (t.outputs.is_top()) continue;
          for (const auto& out : t.outputs.paths()) {
            std::size_t p2 = c.index[out];
            if (!step[p1][p2]) {
              step[p1][p2] = true;
              changed = true;
            }
          }
        }
      }
    }
  }
  // ⊑⁺: transitive closure.
  c.sub = step;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (c.sub[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (c.sub[k][j]) c.sub[i][j] = true;

  const std::size_t m = b.tasks.size();
  c.hb.assign(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& d : b.tasks[i].deps.names()) {
      for (std::size_t j = 0; j < m; ++j) {
        if (b.tasks[j].name == d) c.hb[j][i] = true;
      }
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      if (c.hb[i][k])
        for (std::size_t j = 0; j < m; ++j)
          if (c.hb[k][j]) c.hb[i][j] = true;
  return c;
}

// (kind, task, path, conflicting task) with kind 0 = missing input,
// 1 = missing output, 2 = ordering violation.
using Report = std::tuple<int, std::string, std::string, std::string>;

inline std::set<Report> faults(const Program& b) {
  auto acc = evaluate(b);
  auto c = close(b, acc);
  std::set<Report> out;
  for (std::size_t i = 0; i < b.tasks.size(); ++i) {
    const Task& t = b.tasks[i];
    for (const auto& p : acc[i].consumed) {
      if (!c.subsumed(p, t.inputs)) out.insert({0, t.name, p, ""});
    }
    for (const auto& p : acc[i].produced) {
      if (!c.subsumed(p, t.outputs)) out.insert({1, t.name, p, ""});
    }
  }
  for (std::size_t i = 0; i < b.tasks.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (c.hb[i][j] || c.hb[j][i]) continue;
      std::set<std::string> conflict;
      for (const auto& p : acc[i].produced) {
        if (acc[j].consumed.count(p) || acc[j].produced.count(p)) conflict.insert(p);
      }
      for (const auto& p : acc[j].produced) {
        if (acc[i].consumed.count(p) || acc[i].produced.count(p)) conflict.insert(p);
      }
      for (const auto& p : conflict) out.insert({2, b.tasks[j].name, p, b.tasks[i].name});
    }
  }
  return out;
}

}  // namespace oracle
