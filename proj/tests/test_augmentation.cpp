#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "exam_fixtures.hpp"
#include "examforge/augment.hpp"
#include "examforge/eval.hpp"
#include "examforge/prompts.hpp"
#include "oracles.hpp"

using namespace examforge;

namespace {

const std::string kCorrectCoT = "12% + 14.4% = 26.4%\n\nดังนั้น คำตอบที่ถูกต้องคือ: 2";
const std::string kWrongCoT = "Half of each.\n\nดังนั้น คำตอบที่ถูกต้องคือ: 3";

std::map<int, std::string> all_reasons() {
  return {{1, "reason one"}, {2, "reason two"}, {3, "reason three"}, {4, "reason four"}};
}

}  // namespace

TEST_CASE("prompt templates are verbatim", "[prompts]") {
  CHECK(kCoTSystemPrompt.find("Think step-by-step and then finish") != std::string_view::npos);
  CHECK(kZeroShotBiasSystemPrompt.ends_with(R"("\\n\\nเหตุผล:\\n".)"));
  CHECK(kZeroShotMultiLLMSystemPrompt.ends_with("provide the backup reason."));
  CHECK(all_prompt_variants().size() == 3);
  for (auto v : all_prompt_variants()) CHECK(parse_prompt_variant(to_string(v.id)) == v.id);
}

TEST_CASE("bias prompts differ only in the target line", "[bias]") {
  const auto q = fixtures::portfolio_question();
  const auto p1 = render_bias_prompt(q, 1);
  const auto p2 = render_bias_prompt(q, 2);
  CHECK(p2.user.find("1) 24.0%\n2) 26.4%\n3) 27.6%\n4) 30.0%") != std::string::npos);
  CHECK(p1.system == p2.system);
  CHECK(p1.system.find("คำตอบที่ถูกต้องคือ: ") != std::string::npos);
  CHECK(p1.system.find("เหตุผล:") != std::string::npos);
  const auto cut = p1.user.rfind("\n\n");
  CHECK(p1.user.substr(0, cut) == p2.user.substr(0, cut));
  CHECK(p2.user.substr(cut + 2) == bias_target_line(2));

  std::set<std::string> users;
  for (int t = 1; t <= 4; ++t) users.insert(render_bias_prompt(q, t).user);
  CHECK(users.size() == 4);
  CHECK_THROWS_AS(render_bias_prompt(q, 5), std::out_of_range);
}

TEST_CASE("reason text is taken after the marker", "[bias]") {
  CHECK(reason_from_response("คำตอบที่ถูกต้องคือ: 2\n\nเหตุผล:\n  because  ") == "because");
  CHECK(reason_from_response("no marker at all") == "no marker at all");
}

TEST_CASE("harvest_bias_outputs counts", "[bias]") {
  const auto q = fixtures::portfolio_question();
  auto [sft, dpo] = harvest_bias_outputs(q, all_reasons());
  REQUIRE(sft.size() == 1);
  REQUIRE(dpo.size() == 3);
  CHECK(sft[0].assistant == "คำตอบที่ถูกต้องคือ: 2\n\nเหตุผล:\nreason two");
  for (const auto& d : dpo) {
    CHECK(d.chosen == sft[0].assistant);
    CHECK(d.chosen != d.rejected);
    CHECK(extract_answer(d.chosen).label == 2);
    CHECK(extract_answer(d.rejected).label == d.meta.rejected_choice);
  }

  auto [only_sft, no_dpo] = harvest_bias_outputs(q, {{2, "just this"}});
  CHECK(only_sft.size() == 1);
  CHECK(no_dpo.empty());

  CHECK_THROWS_AS(harvest_bias_outputs(q, {{1, "a"}, {3, "b"}}), MissingCorrectReason);
  CHECK_THROWS_AS(harvest_bias_outputs(q, {{2, "   "}, {3, "b"}}), MissingCorrectReason);
}

TEST_CASE("system prompt expansion", "[prompts]") {
  SftRecord r{"orig", "user text", "assistant text", {}};
  const auto three = expand_system_prompts(r, all_prompt_variants());
  REQUIRE(three.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(three[i].user == r.user);
    CHECK(three[i].assistant == r.assistant);
    CHECK(three[i].meta.variant_id == all_prompt_variants()[i].id);
  }
  const auto cot = expand_system_prompts(r, {prompt_variant(PromptVariantId::CoT)});
  REQUIRE(cot.size() == 1);
  CHECK(cot[0].system.find("Think step-by-step and then finish") != std::string::npos);
  CHECK_THROWS_AS(expand_system_prompts(r, {}), std::invalid_argument);
}

TEST_CASE("shuffle set names the post-shuffle key", "[shuffle]") {
  const auto q = fixtures::portfolio_question();
  const auto set = build_shuffle_set(q, 50, 1000);
  REQUIRE(set.size() == 50);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set[i];
    CHECK(r.meta.seed == 1000 + i);
    const auto ans = extract_answer(r.assistant);
    REQUIRE(ans.label);
    // The line for the named label in the user turn carries the original correct text.
    const std::string line = std::to_string(*ans.label) + ") " + q.correct_text();
    CHECK(r.user.find(line) != std::string::npos);
    CHECK(r.assistant.ends_with(q.correct_text()));
  }
  CHECK(build_shuffle_set(q, 50, 1000) == set);
  CHECK_THROWS_AS(build_shuffle_set(q, 0, 1), std::invalid_argument);
}

TEST_CASE("identity shuffle answers the original key", "[shuffle]") {
  const auto q = fixtures::portfolio_question();
  std::uint64_t seed = 0;
  while (!shuffle_choices(q, seed).second.is_identity()) ++seed;
  const auto set = build_shuffle_set(q, 1, seed);
  CHECK(extract_answer(set[0].assistant).label == q.answer_key);
}

TEST_CASE("markdown Q&A from the worked example document", "[mdqa]") {
  ChunkConfig cfg;
  cfg.max_tokens = 100000;
  cfg.doc_id = "worked";
  const std::string text = fixtures::slurp(std::string(EXAMFORGE_FIXTURE_DIR) + "/worked_example.md");
  const auto chunks = chunk_document(text, cfg);

  const auto first = qa_from_markdown({chunks[0]});
  REQUIRE(first.size() == 3);
  CHECK(first[0].user.find("Example Heading 1.1") != std::string::npos);
  CHECK(first[0].assistant == "Text under example heading 1.1.");
  CHECK(first[0].meta.doc_id == "worked");

  // One record per header with direct content; "# Example Heading 1" has none.
  CHECK(qa_from_markdown(chunks).size() == 6);

  // Splitting across sub-chunks does not change the records.
  cfg.max_tokens = 20;
  CHECK(qa_from_markdown(chunk_document(text, cfg)) == qa_from_markdown(chunks));
}

TEST_CASE("header without direct content yields no record", "[mdqa]") {
  ChunkConfig cfg;
  const auto recs = qa_from_markdown(chunk_document("## Parent\n### Child\nchild text\n### Other\nmore", cfg));
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].user.find("Child") != std::string::npos);
}

TEST_CASE("response validation", "[multi_llm]") {
  const auto q = fixtures::portfolio_question();
  CHECK(validate_response(q, PromptVariantId::CoT, kCorrectCoT) == Verdict::Accepted);
  CHECK(validate_response(q, PromptVariantId::CoT, kWrongCoT) == Verdict::Rejected);
  CHECK(validate_response(q, PromptVariantId::CoT, "I think it is 2") == Verdict::Rejected);
  // Right label, wrong scaffold for the variant.
  CHECK(validate_response(q, PromptVariantId::CoT, "คำตอบที่ถูกต้องคือ: 2") == Verdict::Excluded);
}

TEST_CASE("multi-LLM pairing", "[multi_llm]") {
  const auto q = fixtures::portfolio_question();
  SECTION("one accepted and one rejected") {
    const auto pairs = pair_multi_llm(q, {{"a", PromptVariantId::CoT, kCorrectCoT}, {"b", PromptVariantId::CoT, kWrongCoT}});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].chosen == kCorrectCoT);
    CHECK(pairs[0].rejected == kWrongCoT);
    CHECK(pairs[0].meta.chosen_backend == "a");
    CHECK(pairs[0].meta.rejected_backend == "b");
  }
  SECTION("all wrong") {
    CHECK(pair_multi_llm(q, {{"a", PromptVariantId::CoT, kWrongCoT}, {"b", PromptVariantId::CoT, kWrongCoT + " "}}).empty());
  }
  SECTION("cross product, capped, cross-backend first") {
    std::vector<CandidateResponse> rs;
    for (int i = 0; i < 2; ++i) rs.push_back({"good" + std::to_string(i), PromptVariantId::CoT, kCorrectCoT + std::string(i, ' ')});
    for (int i = 0; i < 3; ++i) rs.push_back({i == 0 ? "good0" : "bad", PromptVariantId::CoT, kWrongCoT + std::string(i, ' ')});
    CHECK(pair_multi_llm(q, rs, 10).size() == 6);
    const auto capped = pair_multi_llm(q, rs, 4);
    REQUIRE(capped.size() == 4);
    for (const auto& p : capped) CHECK(p.meta.chosen_backend != p.meta.rejected_backend);
  }
  SECTION("variants are paired separately") {
    std::vector<CandidateResponse> rs{{"a", PromptVariantId::CoT, kCorrectCoT},
                                      {"b", PromptVariantId::ZeroShotMultiLLM, kWrongCoT}};
    CHECK(pair_multi_llm(q, rs).empty());
  }
}

TEST_CASE("record JSON round trips", "[json]") {
  const auto q = fixtures::portfolio_question();
  for (const auto& r : build_shuffle_set(q, 3, 9)) CHECK(sft_from_json(sft_to_json(r)) == r);
  auto [sft, dpo] = harvest_bias_outputs(q, all_reasons());
  for (const auto& d : dpo) CHECK(dpo_from_json(dpo_to_json(d)) == d);
  const auto j = sft_to_json(sft[0]);
  CHECK(j["meta"]["source"] == "bias_reason");
  CHECK(j["meta"]["variant_id"] == "zero_shot_bias");
}
