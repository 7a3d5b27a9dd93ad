#pragma once

// Canonical text format for BuildFS programs.
//
//   task NAME INPUTS: OUTPUTS after DEPS =
//     newproc P
//     newproc P from Q
//     sysop P =
//       let fd3 = "/source"
//       consume(fd3)
//       produce("out.o" at fd0)
//       del(fd3)
//
// INPUTS/OUTPUTS are `_|_` (no files), `^T^` (any file), a quoted absolute
// path, or a parenthesised comma-separated list of those. DEPS is `_|_` or a
// comma-separated list of task names. Names that are not plain words are
// written as quoted strings. `#` starts a comment line. `⊥`/`⊤`, `sysOp in P`
// and parenthesis-free `consume "/x"` are accepted on input.

#include <cctype>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "buildfs/ast.hpp"

namespace buildfs {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::size_t line, std::size_t column, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class DuplicateTaskName : public SyntaxError {
 public:
  DuplicateTaskName(std::size_t line, const std::string& name)
      : SyntaxError(line, 1, "duplicate task name '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

namespace text_detail {

inline bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '.' || c == '-' || c == '+' || c == '@' || c >= 0x80;
}

inline bool is_keyword(std::string_view w) {
  static const std::unordered_set<std::string_view> kw = {
      "task", "after", "newproc", "from", "sysop", "sysOp", "let", "del",
      "consume", "produce", "at", "in"};
  return kw.count(w) > 0;
}

inline std::string quote(std::string_view s) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          out += "\\x";
          out.push_back(hex[c >> 4]);
          out.push_back(hex[c & 0xf]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
  return out;
}

inline std::string name(std::string_view n) {
  bool bare = !n.empty() && !is_keyword(n);
  for (unsigned char c : n) bare = bare && is_word_char(c);
  return bare ? std::string(n) : quote(n);
}

enum class Tok { Word, String, Punct, Bottom, Top, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t column;
};

class LineLexer {
 public:
  LineLexer(std::string_view line, std::size_t lineno) : s_(line), lineno_(lineno) { advance(); }

  const Token& peek() const { return cur_; }
  Token next() {
    Token t = cur_;
    advance();
    return t;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(lineno_, cur_.column, msg); }
  [[noreturn]] void fail_at(const Token& t, const std::string& msg) const {
    throw SyntaxError(lineno_, t.column, msg);
  }

  bool is_punct(char c) const { return cur_.kind == Tok::Punct && cur_.text[0] == c; }
  bool is_word(std::string_view w) const { return cur_.kind == Tok::Word && cur_.text == w; }
  void expect_punct(char c) {
    if (!is_punct(c)) fail(std::string("expected '") + c + "'");
    advance();
  }
  void expect_word(std::string_view w) {
    if (!is_word(w)) fail("expected '" + std::string(w) + "'");
    advance();
  }
  void expect_end() {
    if (cur_.kind != Tok::End) fail("unexpected '" + cur_.text + "'");
  }

 private:
  void advance() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r')) ++i_;
    std::size_t col = i_ + 1;
    if (i_ >= s_.size()) {
      cur_ = {Tok::End, "<end of line>", col};
      return;
    }
    std::string_view rest = s_.substr(i_);
    if (rest.starts_with("_|_")) {
      i_ += 3;
      cur_ = {Tok::Bottom, "_|_", col};
    } else if (rest.starts_with("^T^")) {
      i_ += 3;
      cur_ = {Tok::Top, "^T^", col};
    } else if (rest.starts_with("⊥")) {
      i_ += 3;
      cur_ = {Tok::Bottom, "_|_", col};
    } else if (rest.starts_with("⊤")) {
      i_ += 3;
      cur_ = {Tok::Top, "^T^", col};
    } else if (s_[i_] == '"') {
      cur_ = {Tok::String, read_string(col), col};
    } else if (is_word_char(static_cast<unsigned char>(s_[i_]))) {
      std::size_t j = i_;
      while (j < s_.size() && is_word_char(static_cast<unsigned char>(s_[j]))) ++j;
      cur_ = {Tok::Word, std::string(s_.substr(i_, j - i_)), col};
      i_ = j;
    } else if (std::string_view("(),:=").find(s_[i_]) != std::string_view::npos) {
      cur_ = {Tok::Punct, std::string(1, s_[i_]), col};
      ++i_;
    } else {
      throw SyntaxError(lineno_, col, std::string("unexpected character '") + s_[i_] + "'");
    }
  }

  std::string read_string(std::size_t col) {
    std::string out;
    ++i_;
    while (true) {
      if (i_ >= s_.size()) throw SyntaxError(lineno_, col, "unterminated string");
      char c = s_[i_++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (i_ >= s_.size()) throw SyntaxError(lineno_, col, "unterminated escape");
      char e = s_[i_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'x': {
          if (i_ + 2 > s_.size() || !std::isxdigit(static_cast<unsigned char>(s_[i_])) ||
              !std::isxdigit(static_cast<unsigned char>(s_[i_ + 1]))) {
            throw SyntaxError(lineno_, i_, "bad \\x escape");
          }
          out.push_back(static_cast<char>(std::stoi(std::string(s_.substr(i_, 2)), nullptr, 16)));
          i_ += 2;
          break;
        }
        default:
          throw SyntaxError(lineno_, i_, std::string("unknown escape '\\") + e + "'");
      }
    }
    return out;
  }

  std::string_view s_;
  std::size_t lineno_;
  std::size_t i_ = 0;
  Token cur_{Tok::End, "", 0};
};

inline std::string parse_name(LineLexer& lx, const char* what) {
  const Token& t = lx.peek();
  if (t.kind != Tok::Word && t.kind != Tok::String) lx.fail(std::string("expected ") + what);
  return lx.next().text;
}

inline bool parse_descriptor(const std::string& word, Descriptor& fd) {
  if (word.size() < 3 || word.compare(0, 2, "fd") != 0) return false;
  Descriptor v = 0;
  for (std::size_t i = 2; i < word.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(word[i]))) return false;
    v = v * 10 + (word[i] - '0');
    if (v > 1 << 24) return false;
  }
  fd = v;
  return true;
}

inline Descriptor expect_descriptor(LineLexer& lx) {
  Descriptor fd = 0;
  if (lx.peek().kind != Tok::Word || !parse_descriptor(lx.peek().text, fd)) {
    lx.fail("expected a descriptor such as fd3");
  }
  lx.next();
  return fd;
}

// expr := STRING ['at' expr] | fdN | '(' expr ')'
inline Expr parse_expr(LineLexer& lx) {
  if (lx.is_punct('(')) {
    lx.next();
    Expr e = parse_expr(lx);
    lx.expect_punct(')');
    return e;
  }
  if (lx.peek().kind == Tok::String) {
    std::string p = lx.next().text;
    if (lx.is_word("at")) {
      lx.next();
      return Expr::at(std::move(p), parse_expr(lx));
    }
    return Expr::path(std::move(p));
  }
  return Expr::fd(expect_descriptor(lx));
}

inline Expr parse_op_argument(LineLexer& lx) {
  if (lx.is_punct('(')) {
    lx.next();
    Expr e = parse_expr(lx);
    lx.expect_punct(')');
    return e;
  }
  return parse_expr(lx);
}

inline void add_spec_item(LineLexer& lx, FileSpec& spec, bool& top) {
  const Token t = lx.next();
  if (t.kind == Tok::Top) {
    top = true;
  } else if (t.kind == Tok::Bottom) {
    // contributes nothing
  } else if (t.kind == Tok::String) {
    if (!path::is_absolute(t.text)) lx.fail_at(t, "declared path must be absolute: " + quote(t.text));
    spec.add(t.text);
  } else {
    lx.fail_at(t, "expected a path, _|_ or ^T^");
  }
}

inline FileSpec parse_filespec(LineLexer& lx) {
  FileSpec spec;
  bool top = false;
  if (lx.is_punct('(')) {
    lx.next();
    if (!lx.is_punct(')')) {
      add_spec_item(lx, spec, top);
      while (lx.is_punct(',')) {
        lx.next();
        add_spec_item(lx, spec, top);
      }
    }
    lx.expect_punct(')');
  } else {
    add_spec_item(lx, spec, top);
  }
  return top ? FileSpec::top() : spec;
}

inline DepSpec parse_deps(LineLexer& lx) {
  DepSpec deps;
  bool parens = false;
  if (lx.is_punct('(')) {
    lx.next();
    parens = true;
  }
  if (lx.peek().kind == Tok::Bottom) {
    lx.next();
  } else if (!(parens && lx.is_punct(')'))) {
    deps.add(parse_name(lx, "task name"));
    while (lx.is_punct(',')) {
      lx.next();
      deps.add(parse_name(lx, "task name"));
    }
  }
  if (parens) lx.expect_punct(')');
  return deps;
}

inline void print_expr(std::ostream& os, const Expr& e) {
  for (auto it = e.fragments.rbegin(); it != e.fragments.rend(); ++it) os << quote(*it) << " at ";
  if (e.is_path()) {
    os << quote(std::get<std::string>(e.base));
  } else {
    os << "fd" << std::get<Descriptor>(e.base);
  }
}

inline void print_filespec(std::ostream& os, const FileSpec& k) {
  switch (k.kind()) {
    case FileSpec::Kind::Bottom: os << "_|_"; break;
    case FileSpec::Kind::Top: os << "^T^"; break;
    case FileSpec::Kind::Set: {
      os << '(';
      bool first = true;
      for (const auto& p : k.paths()) {
        if (!first) os << ", ";
        first = false;
        os << quote(p);
      }
      os << ')';
    }
  }
}

}  // namespace text_detail

inline Program parse_buildfs_text(std::string_view source) {
  using namespace text_detail;
  Program prog;
  std::unordered_set<std::string> names;
  Task* task = nullptr;
  SysOp* block = nullptr;

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < source.size()) {
    std::size_t eol = source.find('\n', pos);
    if (eol == std::string_view::npos) eol = source.size();
    std::string_view line = source.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;

    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;

    LineLexer lx(line, lineno);
    const Token head = lx.next();
    if (head.kind != Tok::Word) lx.fail_at(head, "expected a statement keyword");
    const std::string& kw = head.text;

    if (kw == "task") {
      Task t;
      t.name = parse_name(lx, "task name");
      t.inputs = parse_filespec(lx);
      lx.expect_punct(':');
      t.outputs = parse_filespec(lx);
      lx.expect_word("after");
      t.deps = parse_deps(lx);
      lx.expect_punct('=');
      lx.expect_end();
      if (!names.insert(t.name).second) throw DuplicateTaskName(lineno, t.name);
      prog.tasks.push_back(std::move(t));
      task = &prog.tasks.back();
      block = nullptr;
      continue;
    }

    if (!task) lx.fail_at(head, "statement outside of a task");

    if (kw == "newproc") {
      std::string p = parse_name(lx, "process id");
      if (lx.is_word("from")) {
        lx.next();
        std::string src = parse_name(lx, "process id");
        task->body.emplace_back(NewProcFrom{std::move(p), std::move(src)});
      } else {
        task->body.emplace_back(NewProc{std::move(p)});
      }
      lx.expect_end();
      block = nullptr;
    } else if (kw == "sysop" || kw == "sysOp") {
      if (lx.is_word("in")) {
        lx.next();
        if (lx.is_punct('=')) lx.fail("expected process id");
      }
      std::string p = parse_name(lx, "process id");
      lx.expect_punct('=');
      lx.expect_end();
      task->body.emplace_back(SysOp{std::move(p), {}});
      block = &std::get<SysOp>(task->body.back());
    } else if (kw == "let" || kw == "del" || kw == "consume" || kw == "produce") {
      if (!block) lx.fail_at(head, "operation outside of a sysop block");
      if (kw == "let") {
        Descriptor fd = expect_descriptor(lx);
        lx.expect_punct('=');
        block->ops.emplace_back(LetFd{fd, parse_expr(lx)});
      } else if (kw == "del") {
        bool parens = lx.is_punct('(');
        if (parens) lx.next();
        Descriptor fd = expect_descriptor(lx);
        if (parens) lx.expect_punct(')');
        block->ops.emplace_back(DelFd{fd});
      } else if (kw == "consume") {
        block->ops.emplace_back(Consume{parse_op_argument(lx)});
      } else {
        block->ops.emplace_back(Produce{parse_op_argument(lx)});
      }
      lx.expect_end();
    } else {
      lx.fail_at(head, "unknown keyword '" + kw + "'");
    }
  }
  return prog;
}

inline void print_task(std::ostream& os, const Task& t) {
  using namespace text_detail;
  os << "task " << text_detail::name(t.name) << ' ';
  print_filespec(os, t.inputs);
  os << ": ";
  print_filespec(os, t.outputs);
  os << " after ";
  if (t.deps.empty()) {
    os << "_|_";
  } else {
    bool first = true;
    for (const auto& d : t.deps.names()) {
      if (!first) os << ", ";
      first = false;
      os << text_detail::name(d);
    }
  }
  os << " =\n";
  for (const auto& s : t.body) {
    if (const auto* sys = std::get_if<SysOp>(&s)) {
      os << "  sysop " << text_detail::name(sys->process) << " =\n";
      for (const auto& op : sys->ops) {
        os << "    ";
        std::visit(
            [&](const auto& o) {
              using T = std::decay_t<decltype(o)>;
              if constexpr (std::is_same_v<T, LetFd>) {
                os << "let fd" << o.fd << " = ";
                print_expr(os, o.value);
              } else if constexpr (std::is_same_v<T, DelFd>) {
                os << "del(fd" << o.fd << ")";
              } else if constexpr (std::is_same_v<T, Consume>) {
                os << "consume(";
                print_expr(os, o.target);
                os << ")";
              } else {
                os << "produce(";
                print_expr(os, o.target);
                os << ")";
              }
            },
            op);
        os << '\n';
      }
    } else if (const auto* np = std::get_if<NewProc>(&s)) {
      os << "  newproc " << text_detail::name(np->process) << '\n';
    } else {
      const auto& f = std::get<NewProcFrom>(s);
      os << "  newproc " << text_detail::name(f.process) << " from "
         << text_detail::name(f.source) << '\n';
    }
  }
}

inline std::string pretty_print(const Program& b) {
  std::ostringstream os;
  for (const auto& t : b.tasks) print_task(os, t);
  return os.str();
}

}  // namespace buildfs
