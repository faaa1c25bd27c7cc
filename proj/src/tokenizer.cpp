#include "examforge/tokenizer.hpp"

#include <stdexcept>

namespace examforge {

std::size_t count_code_points(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::size_t CodePointCounter::count(std::string_view text) const {
  return (count_code_points(text) + 2) / 3;
}

std::size_t WhitespaceCounter::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

TokenizerRegistry::TokenizerRegistry() {
  add(std::make_shared<CodePointCounter>());
  add(std::make_shared<WhitespaceCounter>());
}

void TokenizerRegistry::add(TokenCounterPtr counter) {
  if (!counter) throw std::invalid_argument("null token counter");
  std::lock_guard lock(mu_);
  counters_[std::string(counter->id())] = std::move(counter);
}

TokenCounterPtr TokenizerRegistry::get(std::string_view id) const {
  std::lock_guard lock(mu_);
  auto it = counters_.find(id);
  if (it == counters_.end()) throw std::out_of_range("unknown tokenizer: " + std::string(id));
  return it->second;
}

bool TokenizerRegistry::contains(std::string_view id) const {
  std::lock_guard lock(mu_);
  return counters_.find(id) != counters_.end();
}

TokenizerRegistry& TokenizerRegistry::global() {
  static TokenizerRegistry registry;
  return registry;
}

TokenCounterPtr default_token_counter() {
  static const TokenCounterPtr counter = std::make_shared<CodePointCounter>();
  return counter;
}

}  // namespace examforge
