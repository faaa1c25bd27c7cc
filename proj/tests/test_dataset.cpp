#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <set>

#include "exam_fixtures.hpp"
#include "examforge/augment.hpp"
#include "examforge/dataset.hpp"

using namespace examforge;

namespace {

RecordEnvelope sft_envelope(const std::string& user) {
  SftRecord r{"sys", user, "answer", {}};
  return RecordEnvelope::wrap(RecordKind::Sft, sft_to_json(r));
}

}  // namespace

TEST_CASE("canonical JSON sorts keys and drops whitespace", "[hash]") {
  const auto a = nlohmann::ordered_json::parse(R"({"b": 1, "a": {"y": [1, 2], "x": "ไทย"}})");
  const auto b = nlohmann::ordered_json::parse(R"({"a":{"x":"ไทย","y":[1,2]},"b":1})");
  CHECK(canonical_json(a) == R"({"a":{"x":"ไทย","y":[1,2]},"b":1})");
  CHECK(content_hash(a) == content_hash(b));
  CHECK(content_hash(a).size() == 64);
}

TEST_CASE("record kinds are detected from the payload", "[envelope]") {
  CHECK(detect_kind(sft_envelope("u").payload) == RecordKind::Sft);
  CHECK_FALSE(detect_kind(nlohmann::ordered_json{{"x", 1}}));
  CHECK_THROWS_AS(RecordEnvelope::wrap(RecordKind::Dpo, sft_envelope("u").payload), std::invalid_argument);
  auto e = sft_envelope("u");
  CHECK(e.hash_matches());
  e.payload["user"] = "changed";
  CHECK_FALSE(e.hash_matches());
}

TEST_CASE("write then read returns the same records", "[io]") {
  const auto dir = fixtures::temp_dir("dataset");
  std::vector<RecordEnvelope> recs{sft_envelope("one"), sft_envelope("สอง"), sft_envelope("three")};
  CHECK(write_records(recs, dir / "sft.jsonl") == 3);
  const auto text = fixtures::slurp(dir / "sft.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.rfind(R"({"system":"sys","user":"one","assistant":"answer","meta":{"source":"shuffle")", 0) == 0);

  const auto back = read_records(dir / "sft.jsonl", RecordKind::Sft);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].payload == recs[i].payload);
    CHECK(back[i].content_hash == recs[i].content_hash);
  }

  CHECK(write_records({}, dir / "empty.jsonl") == 0);
  CHECK(fixtures::slurp(dir / "empty.jsonl").empty());
  CHECK(read_records(dir / "empty.jsonl", RecordKind::Sft).empty());

  std::vector<RecordEnvelope> mixed{recs[0], RecordEnvelope::wrap(RecordKind::Chunk, nlohmann::ordered_json{
      {"doc_id", "d"}, {"ordinal", 0}, {"context", nlohmann::ordered_json::array()}, {"body", "b"},
      {"token_count", 1}, {"atomic_overflow", false}, {"label", ""}})};
  CHECK_THROWS_AS(write_records(mixed, dir / "mixed.jsonl"), std::invalid_argument);

  CHECK_THROWS_AS(read_jsonl(dir / "missing.jsonl"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dedupe keeps first occurrences", "[dedupe]") {
  const auto a = sft_envelope("a"), b = sft_envelope("b");
  const auto out = dedupe({a, b, a});
  REQUIRE(out.size() == 2);
  CHECK(out[0].payload == a.payload);
  CHECK(out[1].payload == b.payload);

  std::vector<RecordEnvelope> distinct;
  for (int i = 0; i < 10; ++i) distinct.push_back(sft_envelope(std::to_string(i)));
  CHECK(dedupe(distinct).size() == 10);

  // 900 distinct records, 100 of them repeated once.
  std::vector<RecordEnvelope> big;
  for (int i = 0; i < 900; ++i) big.push_back(sft_envelope("r" + std::to_string(i)));
  for (int i = 0; i < 100; ++i) big.push_back(big[static_cast<std::size_t>(i * 9)]);
  const auto once = dedupe(big);
  CHECK(once.size() == 900);
  CHECK(dedupe(once).size() == 900);
}

TEST_CASE("split is a seeded partition", "[split]") {
  std::vector<int> recs(100);
  std::iota(recs.begin(), recs.end(), 0);
  const std::vector<double> f{0.9, 0.1};
  const auto parts = split(recs, f, 42);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 90);
  CHECK(parts[1].size() == 10);
  std::set<int> all(parts[0].begin(), parts[0].end());
  all.insert(parts[1].begin(), parts[1].end());
  CHECK(all.size() == 100);
  CHECK(split(recs, f, 42) == parts);
  CHECK(split(recs, f, 43) != parts);

  const std::vector<double> bad{0.5, 0.6};
  CHECK_THROWS_AS(split(recs, bad, 1), BadFractions);
  const std::vector<double> neg{1.5, -0.5};
  CHECK_THROWS_AS(split(recs, neg, 1), BadFractions);

  const std::vector<double> thirds{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto t = split_indices(10, thirds, 0);
  CHECK(t[0].size() + t[1].size() + t[2].size() == 10);
  for (const auto& g : t) CHECK((g.size() == 3 || g.size() == 4));
}
