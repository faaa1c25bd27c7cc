#include "examforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "examforge/hash.hpp"
#include "examforge/random.hpp"

namespace examforge {

std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Chunk: return "chunk";
    case RecordKind::Sft: return "sft";
    case RecordKind::Dpo: return "dpo";
    case RecordKind::Audit: return "audit";
  }
  return "sft";
}

RecordKind parse_record_kind(std::string_view s) {
  if (s == "chunk") return RecordKind::Chunk;
  if (s == "sft") return RecordKind::Sft;
  if (s == "dpo") return RecordKind::Dpo;
  if (s == "audit") return RecordKind::Audit;
  throw std::invalid_argument("unknown record kind: " + std::string(s));
}

namespace {

constexpr auto kReplace = nlohmann::json::error_handler_t::replace;

bool has_all(const nlohmann::ordered_json& j, std::initializer_list<const char*> keys) {
  return j.is_object() && std::all_of(keys.begin(), keys.end(), [&](const char* k) { return j.contains(k); });
}

}  // namespace

std::string canonical_json(const nlohmann::ordered_json& payload) {
  // nlohmann::json stores objects in std::map, so re-parsing sorts keys at
  // every depth.
  const nlohmann::json sorted = nlohmann::json::parse(payload.dump(-1, ' ', false, kReplace));
  return sorted.dump(-1, ' ', false, kReplace);
}

std::string content_hash(const nlohmann::ordered_json& payload) { return sha256_hex(canonical_json(payload)); }

std::optional<RecordKind> detect_kind(const nlohmann::ordered_json& p) {
  if (has_all(p, {"doc_id", "ordinal", "context", "body", "token_count", "atomic_overflow"})) return RecordKind::Chunk;
  if (has_all(p, {"system", "user", "chosen", "rejected", "meta"})) return RecordKind::Dpo;
  if (has_all(p, {"system", "user", "assistant", "meta"})) return RecordKind::Sft;
  if (has_all(p, {"question_id", "backend_id", "request_hash", "response_text"})) return RecordKind::Audit;
  return std::nullopt;
}

RecordEnvelope RecordEnvelope::wrap(RecordKind kind, nlohmann::ordered_json payload) {
  const auto detected = detect_kind(payload);
  if (!detected || *detected != kind)
    throw std::invalid_argument("payload does not match record kind " + std::string(to_string(kind)));
  RecordEnvelope e;
  e.kind = kind;
  e.content_hash = examforge::content_hash(payload);
  e.payload = std::move(payload);
  return e;
}

bool RecordEnvelope::hash_matches() const { return content_hash == examforge::content_hash(payload); }

std::size_t write_jsonl(const std::vector<nlohmann::ordered_json>& records, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& r : records) out << r.dump(-1, ' ', false, kReplace) << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
  return records.size();
}

std::vector<nlohmann::ordered_json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<nlohmann::ordered_json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::ordered_json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::size_t write_records(const std::vector<RecordEnvelope>& records, const std::filesystem::path& path) {
  std::vector<nlohmann::ordered_json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    if (r.kind != records.front().kind) throw std::invalid_argument("write_records: records of mixed kinds");
    lines.push_back(r.payload);
  }
  return write_jsonl(lines, path);
}

std::vector<RecordEnvelope> read_records(const std::filesystem::path& path, RecordKind kind) {
  std::vector<RecordEnvelope> out;
  for (auto& j : read_jsonl(path)) out.push_back(RecordEnvelope::wrap(kind, std::move(j)));
  return out;
}

std::vector<RecordEnvelope> dedupe(const std::vector<RecordEnvelope>& records) {
  std::unordered_set<std::string> seen;
  std::vector<RecordEnvelope> out;
  for (const auto& r : records) {
    if (seen.insert(r.content_hash).second) out.push_back(r);
  }
  return out;
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    std::uint64_t seed) {
  if (fractions.empty()) throw BadFractions("no split fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw BadFractions("split fractions must be non-negative");
    sum += f;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw BadFractions("split fractions must sum to 1");

  // Largest remainder; ties go to the earlier split.
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    // Guard against 0.1 * 100 = 10.000000000000002 style noise.
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders.emplace_back(exact - static_cast<double>(sizes[i]), i);
    assigned += sizes[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) sizes[remainders[k % remainders.size()].second] += 1;
  while (assigned > n) {
    auto it = std::max_element(sizes.begin(), sizes.end());
    --*it;
    --assigned;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  seeded_shuffle(order, rng);

  std::vector<std::vector<std::size_t>> groups(fractions.size());
  std::size_t pos = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + sizes[g]));
    std::sort(groups[g].begin(), groups[g].end());
    pos += sizes[g];
  }
  return groups;
}

}  // namespace examforge
