#pragma once

// Test-side reference implementations. These are written independently of
// the library code they check and only use the standard library.

#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

/// Decodes UTF-8 sequence by sequence from the lead byte and returns the
/// number of scalar values. Stray continuation bytes count as one each.
inline std::size_t code_points(std::string_view s) {
  std::size_t i = 0, n = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (b >= 0xF0 && b <= 0xF7) len = 4;
    else if (b >= 0xE0) len = 3;
    else if (b >= 0xC0) len = 2;
    // Only consume continuation bytes that are really there.
    std::size_t k = 1;
    while (k < len && i + k < s.size() && (static_cast<unsigned char>(s[i + k]) >> 6) == 2) ++k;
    i += k;
    ++n;
  }
  return n;
}

/// ceil(code points / 3)
inline std::size_t tokens(std::string_view s) {
  const auto cp = code_points(s);
  return cp / 3 + (cp % 3 != 0 ? 1 : 0);
}

inline std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Level of a canonical ATX header line ("## Title"), 0 otherwise.
inline int header_level(std::string_view line) {
  int n = 0;
  while (n < static_cast<int>(line.size()) && line[static_cast<std::size_t>(n)] == '#') ++n;
  if (n == 0 || n > 6 || static_cast<std::size_t>(n) >= line.size() || line[static_cast<std::size_t>(n)] != ' ') return 0;
  return n;
}

inline bool blank(std::string_view line) { return line.find_first_not_of(" \t\r") == std::string_view::npos; }

/// Header stack in force just before source line `line` is read, as
/// rendered header lines. When `line` is itself a header, entries at or
/// below its level are dropped too, so the result is its ancestors.
inline std::vector<std::string> ancestors_at(const std::vector<std::string>& source, std::size_t line) {
  std::vector<std::pair<int, std::string>> stack;
  for (std::size_t i = 0; i < line && i < source.size(); ++i) {
    const int lvl = header_level(source[i]);
    if (lvl == 0) continue;
    while (!stack.empty() && stack.back().first >= lvl) stack.pop_back();
    stack.emplace_back(lvl, source[i]);
  }
  if (line < source.size()) {
    const int lvl = header_level(source[line]);
    if (lvl > 0)
      while (!stack.empty() && stack.back().first >= lvl) stack.pop_back();
  }
  std::vector<std::string> out;
  for (auto& [lvl, text] : stack) out.push_back(text);
  return out;
}

/// Non-blank, non-header lines with multiplicity.
inline std::map<std::string, int> body_line_multiset(std::string_view text) {
  std::map<std::string, int> m;
  for (const auto& l : lines_of(text)) {
    if (!blank(l) && header_level(l) == 0) ++m[l];
  }
  return m;
}

/// Random markdown tree: ATX headers of levels 1-4, paragraphs of one or
/// more lines, bullet and numbered lists, Thai and ASCII words, some
/// sentence-final lines and occasional very long lines.
class MarkdownGenerator {
 public:
  explicit MarkdownGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string document() {
    std::ostringstream out;
    const int sections = pick(0, 12);
    bool first = true;
    if (pick(0, 2) == 0) emit_paragraph(out, first);
    for (int s = 0; s < sections; ++s) {
      if (!first) out << '\n';
      first = false;
      out << std::string(static_cast<std::size_t>(pick(1, 4)), '#') << ' ' << title() << '\n';
      const int paras = pick(0, 4);
      for (int p = 0; p < paras; ++p) {
        if (p > 0 || pick(0, 1) == 0) out << '\n';
        if (pick(0, 3) == 0) emit_list(out);
        else emit_lines(out);
      }
    }
    return out.str();
  }

  std::size_t budget() { return static_cast<std::size_t>(pick(8, 160)); }

 private:
  int pick(int lo, int hi) { return static_cast<int>(lo + rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }

  std::string word() {
    static const char* words[] = {"alpha", "bond", "yield", "risk", "fund", "ตลาด", "หลักทรัพย์", "ผลตอบแทน",
                                  "ความเสี่ยง", "portfolio", "equity", "ตราสารหนี้", "42", "x"};
    return words[rng_() % (sizeof(words) / sizeof(words[0]))];
  }

  std::string title() {
    std::string t = word();
    const int n = pick(0, 3);
    for (int i = 0; i < n; ++i) t += " " + word();
    return t + " " + std::to_string(counter_++);
  }

  std::string line() {
    const int n = pick(1, pick(0, 9) == 0 ? 80 : 12);
    std::string l = word();
    for (int i = 1; i < n; ++i) l += " " + word();
    // Unique suffix keeps multiset comparisons meaningful.
    l += " " + std::to_string(counter_++);
    if (pick(0, 2) == 0) l += ".";
    return l;
  }

  void emit_lines(std::ostringstream& out) {
    const int n = pick(1, 5);
    for (int i = 0; i < n; ++i) out << line() << '\n';
  }

  void emit_list(std::ostringstream& out) {
    const int n = pick(1, 5);
    for (int i = 0; i < n; ++i) {
      out << (pick(0, 1) == 0 ? "- " : std::to_string(i + 1) + ". ") << line() << '\n';
      if (pick(0, 3) == 0) out << "  - " << line() << '\n';
    }
  }

  void emit_paragraph(std::ostringstream& out, bool& first) {
    emit_lines(out);
    first = false;
  }

  std::mt19937_64 rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace oracle
