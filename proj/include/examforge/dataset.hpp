#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace examforge {

enum class RecordKind : std::uint8_t { Chunk, Sft, Dpo, Audit };

std::string_view to_string(RecordKind k);
RecordKind parse_record_kind(std::string_view s);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadFractions : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Compact JSON with object keys sorted at every level, UTF-8.
std::string canonical_json(const nlohmann::ordered_json& payload);
/// Hex SHA-256 of canonical_json(payload).
std::string content_hash(const nlohmann::ordered_json& payload);

/// Which record schema the payload matches, if any.
std::optional<RecordKind> detect_kind(const nlohmann::ordered_json& payload);

struct RecordEnvelope {
  RecordKind kind = RecordKind::Sft;
  nlohmann::ordered_json payload;
  std::string content_hash;

  /// Throws std::invalid_argument when the payload does not match `kind`.
  static RecordEnvelope wrap(RecordKind kind, nlohmann::ordered_json payload);
  bool hash_matches() const;
};

/// One compact JSON object per line, LF terminated, keys in insertion order.
/// Returns the number of lines written. Throws IoError.
std::size_t write_jsonl(const std::vector<nlohmann::ordered_json>& records, const std::filesystem::path& path);
/// Throws IoError, or std::invalid_argument naming the bad line.
std::vector<nlohmann::ordered_json> read_jsonl(const std::filesystem::path& path);

/// Writes the payloads. All records must share one kind.
std::size_t write_records(const std::vector<RecordEnvelope>& records, const std::filesystem::path& path);
std::vector<RecordEnvelope> read_records(const std::filesystem::path& path, RecordKind kind);

/// Keeps the first occurrence of each content hash, preserving order.
std::vector<RecordEnvelope> dedupe(const std::vector<RecordEnvelope>& records);

/// Seeded partition of indices 0..n-1 into groups sized by the fractions
/// (largest-remainder rounding); indices inside a group stay ascending.
/// Throws BadFractions unless the fractions are non-negative and sum to 1
/// within 1e-9.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions, std::uint64_t seed);

template <typename T>
std::vector<std::vector<T>> split(const std::vector<T>& records, std::span<const double> fractions, std::uint64_t seed) {
  std::vector<std::vector<T>> out;
  for (const auto& group : split_indices(records.size(), fractions, seed)) {
    auto& part = out.emplace_back();
    part.reserve(group.size());
    for (std::size_t i : group) part.push_back(records[i]);
  }
  return out;
}

/// Convenience for typed records: serialize each with `to_json` and write.
template <typename T, typename ToJson>
std::size_t write_typed(const std::vector<T>& records, const std::filesystem::path& path, ToJson to_json) {
  std::vector<nlohmann::ordered_json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r));
  return write_jsonl(lines, path);
}

template <typename T, typename FromJson>
std::vector<T> read_typed(const std::filesystem::path& path, FromJson from_json) {
  std::vector<T> out;
  for (const auto& j : read_jsonl(path)) out.push_back(from_json(j));
  return out;
}

}  // namespace examforge
