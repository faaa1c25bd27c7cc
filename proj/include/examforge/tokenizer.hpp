#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace examforge {

/// Counts tokens in a piece of text. Implementations must be pure and
/// thread-safe; chunking calls count() many times on overlapping inputs.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::string_view id() const = 0;
  virtual std::size_t count(std::string_view text) const = 0;
};

using TokenCounterPtr = std::shared_ptr<const TokenCounter>;

/// Number of Unicode code points in UTF-8 text (continuation bytes skipped;
/// malformed sequences count one per non-continuation byte).
std::size_t count_code_points(std::string_view utf8);

/// Default counter: ceil(code points / 3). Works on unsegmented scripts such
/// as Thai where whitespace splitting would undercount badly.
class CodePointCounter final : public TokenCounter {
 public:
  static constexpr std::string_view kId = "codepoint3";
  std::string_view id() const override { return kId; }
  std::size_t count(std::string_view text) const override;
};

/// Whitespace-delimited words.
class WhitespaceCounter final : public TokenCounter {
 public:
  static constexpr std::string_view kId = "whitespace";
  std::string_view id() const override { return kId; }
  std::size_t count(std::string_view text) const override;
};

/// Adapts a callable into a TokenCounter so callers can plug in a real
/// tokenizer without subclassing.
class FunctionCounter final : public TokenCounter {
 public:
  FunctionCounter(std::string id, std::function<std::size_t(std::string_view)> fn)
      : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string_view id() const override { return id_; }
  std::size_t count(std::string_view text) const override { return fn_(text); }

 private:
  std::string id_;
  std::function<std::size_t(std::string_view)> fn_;
};

/// Id -> counter lookup. Comes pre-populated with the built-in counters.
class TokenizerRegistry {
 public:
  TokenizerRegistry();

  void add(TokenCounterPtr counter);
  /// Throws std::out_of_range for unknown ids.
  TokenCounterPtr get(std::string_view id) const;
  bool contains(std::string_view id) const;

  static TokenizerRegistry& global();

 private:
  mutable std::mutex mu_;
  std::map<std::string, TokenCounterPtr, std::less<>> counters_;
};

TokenCounterPtr default_token_counter();

}  // namespace examforge
