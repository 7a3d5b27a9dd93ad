#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace buildfs {

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity;
  std::string code;  // stable kebab-case identifier, e.g. "unbound-descriptor"
  std::string message;
};

// Counts every diagnostic by code but only keeps the first few messages of
// each code, so a noisy multi-GB trace cannot grow this without bound.
class Diagnostics {
 public:
  explicit Diagnostics(std::size_t samples_per_code = 8) : samples_per_code_(samples_per_code) {}

  void warn(std::string code, std::string message) {
    add(Severity::Warning, std::move(code), std::move(message));
  }
  void error(std::string code, std::string message) {
    add(Severity::Error, std::move(code), std::move(message));
  }

  void add(Severity sev, std::string code, std::string message) {
    auto& n = counts_[code];
    ++n;
    if (sev == Severity::Error) ++errors_;
    if (n <= samples_per_code_) samples_.push_back({sev, std::move(code), std::move(message)});
  }

  void merge(const Diagnostics& other) {
    for (const auto& d : other.samples_) {
      if (counts_[d.code] < samples_per_code_) samples_.push_back(d);
    }
    for (const auto& [code, n] : other.counts_) counts_[code] += n;
    errors_ += other.errors_;
  }

  std::size_t count(const std::string& code) const {
    auto it = counts_.find(code);
    return it == counts_.end() ? 0 : it->second;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : counts_) n += c;
    return n;
  }
  std::size_t error_count() const { return errors_; }
  bool empty() const { return counts_.empty(); }

  const std::map<std::string, std::size_t>& counts() const { return counts_; }
  const std::vector<Diagnostic>& samples() const { return samples_; }

 private:
  std::size_t samples_per_code_;
  std::map<std::string, std::size_t> counts_;
  std::vector<Diagnostic> samples_;
  std::size_t errors_ = 0;
};

}  // namespace buildfs
