// Acceptance gate. Each criterion prints one PASS/FAIL line with its wall
// time; the exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "exam_fixtures.hpp"
#include "examforge/augment.hpp"
#include "examforge/commands.hpp"
#include "examforge/dataset.hpp"
#include "examforge/eval.hpp"
#include "examforge/markdown.hpp"
#include "oracles.hpp"

using namespace examforge;
namespace fs = std::filesystem;

namespace {

const std::string kAnchor = "ดังนั้น คำตอบที่ถูกต้องคือ:";

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

ChunkConfig config_with(std::size_t max_tokens, std::string doc_id = "doc") {
  ChunkConfig c;
  c.max_tokens = max_tokens;
  c.doc_id = std::move(doc_id);
  return c;
}

std::string chunks_json(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) out += chunk_to_json(c).dump() + "\n";
  return out;
}

BackendSpec mock_backend(const std::string& id) {
  BackendSpec b;
  b.id = id;
  b.type = BackendType::Mock;
  b.model_name = "mock-" + id;
  return b;
}

// 1. Two-step chunking of the worked example.
void worked_example_chunking() {
  const std::string text = fixtures::slurp(fs::path(EXAMFORGE_FIXTURE_DIR) / "worked_example.md");
  const auto step1 = chunk_document(text, config_with(100000));
  expect(step1.size() == 2, "step 1 gives " + std::to_string(step1.size()) + " chunks");
  expect(step1[0].rendered() ==
             "# Example Heading 1\n\n## Example Heading 1.1\nText under example heading 1.1.\n\n"
             "### Example Heading 1.1.1\nDetails under example heading 1.1.1.\n\n"
             "### Example Heading 1.1.2\nDetails under example heading 1.1.2.",
         "step 1 chunk 1 text");
  expect(step1[1].rendered() ==
             "# Example Heading 1\n\n## Example Heading 1.2\nText under example heading 1.2.\n\n"
             "### Example Heading 1.2.1\nDetails under example heading 1.2.1.\n\n"
             "### Example Heading 1.2.2\nDetails under example heading 1.2.2.",
         "step 1 chunk 2 text");

  const std::size_t budget = oracle::tokens(step1[1].rendered()) - 1;
  const auto subs = split_oversized(step1[1], config_with(budget));
  expect(subs.size() == 3, "step 2 gives " + std::to_string(subs.size()) + " sub-chunks");
  expect(subs[0].rendered() == "# Example Heading 1\n\n## Example Heading 1.2\nText under example heading 1.2.", "sub 1");
  expect(subs[1].rendered() ==
             "# Example Heading 1\n\n## Example Heading 1.2\n\n### Example Heading 1.2.1\nDetails under example heading 1.2.1.",
         "sub 2");
  expect(subs[2].rendered() ==
             "# Example Heading 1\n\n## Example Heading 1.2\n\n### Example Heading 1.2.2\nDetails under example heading 1.2.2.",
         "sub 3");
  for (const auto& s : subs) expect(!s.atomic_overflow && s.token_count <= budget, "sub-chunk over budget");

  // With 1.2 made longer than 1.1 the whole document gives 1 + 3 chunks.
  std::string longer = text;
  const std::string needle = "Text under example heading 1.2.";
  longer.replace(longer.find(needle), needle.size(), needle + " Extra words push this section over.");
  const auto l1 = chunk_document(longer, config_with(100000));
  const auto l2 = chunk_document(longer, config_with(oracle::tokens(l1[1].rendered()) - 1));
  expect(l2.size() == 4, "lengthened document gives " + std::to_string(l2.size()) + " chunks");
}

// 2. Invariants over random documents.
void chunk_properties() {
  oracle::MarkdownGenerator gen(20240601);
  for (int i = 0; i < 1000; ++i) {
    const std::string doc = gen.document();
    const auto cfg = config_with(gen.budget());
    const auto chunks = chunk_document(doc, cfg);
    const auto source = oracle::lines_of(doc);
    const std::string at = "document " + std::to_string(i) + ": ";
    std::map<std::string, int> seen;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      const auto& c = chunks[k];
      expect(c.ordinal == k, at + "ordinals not dense");
      expect(c.token_count == oracle::tokens(c.rendered()), at + "token count mismatch");
      expect(c.token_count <= cfg.max_tokens || c.atomic_overflow, at + "chunk over budget");
      expect(!c.blocks.empty(), at + "empty chunk");
      expect(c.context.lines() == oracle::ancestors_at(source, c.blocks.front().source_line), at + "wrong context");
      for (auto& [line, n] : oracle::body_line_multiset(c.body)) seen[line] += n;
      if (!c.atomic_overflow) {
        const auto again = split_oversized(c, cfg);
        expect(again.size() == 1 && again[0].rendered() == c.rendered(), at + "split not idempotent");
      }
    }
    expect(seen == oracle::body_line_multiset(doc), at + "body lines lost or duplicated");
    expect(chunks_json(chunk_document(doc, cfg)) == chunks_json(chunks), at + "not deterministic");
  }
}

// 3. Published model outputs all extract to the key.
void published_extraction() {
  const auto j = nlohmann::json::parse(fixtures::slurp(fs::path(EXAMFORGE_FIXTURE_DIR) / "model_outputs.json"));
  expect(j["outputs"].size() == 9, "expected 9 outputs");
  for (const auto& o : j["outputs"]) {
    const auto a = extract_answer(o["text"].get<std::string>());
    const auto model = o["model"].get<std::string>();
    expect(a.label == 2, model + " did not extract to 2");
    expect(a.method == ExtractionMethod::Anchor, model + " did not use the anchor");
  }
}

ExamReport score_with_wrong(const Exam& exam, const std::set<std::size_t>& wrong) {
  std::map<std::string, ExtractedAnswer> answers;
  for (std::size_t i = 0; i < exam.questions.size(); ++i) {
    const auto& q = exam.questions[i];
    answers[q.id] = {wrong.count(i) ? q.answer_key % 4 + 1 : q.answer_key, ExtractionMethod::Anchor, ""};
  }
  return score_exam(exam, answers);
}

// 4. Scoring and the pass rule.
void scoring() {
  const auto keys = [](int i) { return 1 + i % 4; };
  std::set<std::size_t> wrong50;
  for (std::size_t i = 36; i < 50; ++i) wrong50.insert(i);
  const auto p1 = score_with_wrong(fixtures::synthetic_exam(ExamLevel::P1, 50, keys), wrong50);
  expect(p1.correct_count == 36 && std::abs(p1.overall_pct - 0.72) < 1e-9 && p1.passed, "36/50 is not 72% pass");
  expect(format_percent(p1.overall_pct) == "72%", "72% formatting");

  const auto p2 = score_with_wrong(fixtures::synthetic_exam(ExamLevel::P2, 25, keys), {3, 11, 19, 22});
  expect(p2.correct_count == 21 && std::abs(p2.overall_pct - 0.84) < 1e-9 && p2.passed, "21/25 is not 84% pass");

  auto dual = fixtures::synthetic_exam(ExamLevel::P1, 10, keys);
  dual.passing_rule.module_thresholds["rules"] = 0.70;
  for (std::size_t i = 0; i < 5; ++i) dual.questions[i].module_tag = "rules";
  const auto r = score_with_wrong(dual, {1, 2});
  expect(std::abs(r.overall_pct - 0.8) < 1e-9, "dual overall is not 80%");
  expect(std::abs(r.module_pct.at("rules") - 0.6) < 1e-9, "dual module is not 60%");
  expect(!r.passed, "dual criterion passed with a failing module");
}

// 5. Choice shuffling.
void shuffling() {
  const auto q = fixtures::portfolio_question();
  std::set<std::array<int, 4>> seen;
  for (int rank = 0; rank < ChoicePermutation::kCount; ++rank) {
    const auto perm = ChoicePermutation::from_rank(rank);
    seen.insert(perm.images());
    const auto s = apply_permutation(q, perm);
    int brute = 0;
    for (int k = 1; k <= 4; ++k)
      if (s.choice(k).text == q.correct_text()) brute = k;
    expect(s.answer_key == brute, "key remap wrong for rank " + std::to_string(rank));
    expect(apply_permutation(s, perm.inverse()) == q, "inverse does not restore rank " + std::to_string(rank));
  }
  expect(seen.size() == 24, "ranks do not cover all permutations");

  Exam exam;
  exam.questions.push_back(q);
  const auto original = exam_to_json(exam).dump();
  std::array<int, 4> counts{};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto [s, perm] = shuffle_choices(q, seed);
    ++counts[static_cast<std::size_t>(s.answer_key - 1)];
    Exam back;
    back.questions.push_back(apply_permutation(s, perm.inverse()));
    expect(exam_to_json(back).dump() == original, "round trip differs at seed " + std::to_string(seed));
  }
  const double sigma = std::sqrt(1000 * 0.25 * 0.75);
  for (int k = 0; k < 4; ++k)
    expect(std::abs(counts[static_cast<std::size_t>(k)] - 250.0) <= 4 * sigma,
           "position " + std::to_string(k + 1) + " count " + std::to_string(counts[static_cast<std::size_t>(k)]));
}

// 6. Dataset counts from bias harvesting and multi-model pairing.
void augmentation_counts() {
  const auto dir = fixtures::temp_dir("accept_aug");
  const int n = 12;
  const auto exam = fixtures::synthetic_exam(ExamLevel::P2, n, [](int i) { return 1 + (i * 3) % 4; });
  save_exam(exam, dir / "exam.json");
  std::vector<cli::ResponseRecord> rs;
  for (const auto& q : exam.questions) {
    for (int t = 1; t <= 4; ++t) {
      cli::ResponseRecord r;
      r.question_id = q.id;
      r.backend_id = "m";
      r.variant = PromptVariantId::ZeroShotBias;
      r.target = t;
      r.text = "คำตอบที่ถูกต้องคือ: " + std::to_string(t) + "\n\nเหตุผล:\nreason " + std::to_string(t);
      rs.push_back(r);
    }
  }
  write_typed(rs, dir / "bias.jsonl", cli::response_to_json);
  cli::AugmentOptions o;
  o.mode = cli::AugmentMode::Bias;
  o.exam = dir / "exam.json";
  o.responses = dir / "bias.jsonl";
  o.out_dir = dir / "out";
  std::ostringstream log;
  const auto s = cli::cmd_augment(o, log);
  expect(s.sft == static_cast<std::size_t>(n), "bias SFT count " + std::to_string(s.sft));
  expect(s.dpo == static_cast<std::size_t>(3 * n), "bias DPO count " + std::to_string(s.dpo));
  expect(read_jsonl(o.out_dir / "bias.dpo.jsonl").size() == static_cast<std::size_t>(3 * n), "DPO file size");
  fs::remove_all(dir);

  const auto q = fixtures::portfolio_question();
  for (int a = 0; a <= 4; ++a) {
    for (int r = 0; r <= 4; ++r) {
      for (std::size_t cap : {1u, 4u, 100u}) {
        std::vector<CandidateResponse> cands;
        for (auto variant : {PromptVariantId::CoT, PromptVariantId::ZeroShotMultiLLM}) {
          for (int i = 0; i < a; ++i)
            cands.push_back({"g" + std::to_string(i), variant, "ok " + std::to_string(i) + "\n" + kAnchor + " 2"});
          for (int i = 0; i < r; ++i)
            cands.push_back({"b" + std::to_string(i), variant, "no " + std::to_string(i) + "\n" + kAnchor + " 3"});
        }
        const auto pairs = pair_multi_llm(q, cands, cap);
        const std::size_t per_variant = std::min(static_cast<std::size_t>(a * r), cap);
        expect(pairs.size() == 2 * per_variant, "pairing a=" + std::to_string(a) + " r=" + std::to_string(r) +
                                                    " K=" + std::to_string(cap) + " gave " + std::to_string(pairs.size()));
      }
    }
  }
}

// 7. A mocked evaluation run is reproducible.
void reproducible_eval() {
  unsetenv(kCacheDirEnv);
  const auto dir = fixtures::temp_dir("accept_eval");
  const auto exam = fixtures::synthetic_exam(ExamLevel::P1, 50, [](int i) { return 1 + (i * 7) % 4; });
  save_exam(exam, dir / "exam.json");

  auto b = mock_backend("fixture");
  b.fixture = "responses.json";
  nlohmann::json responses = nlohmann::json::object();
  for (std::size_t i = 0; i < exam.questions.size(); ++i) {
    const auto& q = exam.questions[i];
    const auto p = render_exam_prompt(q, prompt_variant(PromptVariantId::CoT));
    const ChatRequest req{p.system, p.user, 0.0, 2048, 0};
    const int label = i % 25 < 18 ? q.answer_key : q.answer_key % 4 + 1;  // 36 of 50
    responses[request_hash(req, b)] = "working\n\n" + kAnchor + " " + std::to_string(label);
  }
  std::ofstream(dir / "responses.json") << nlohmann::json{{"responses", responses}}.dump();
  std::ofstream(dir / "backends.json") << nlohmann::json{{"backends", {backend_to_json(b)}}}.dump();
  const auto backend = load_backends(dir / "backends.json").at(0);

  std::string first_report, first_audit;
  for (int run = 0; run < 2; ++run) {
    Gateway gw;
    cli::EvalCommandOptions o;
    o.exam = dir / "exam.json";
    o.backend = backend;
    o.out_dir = dir / ("run" + std::to_string(run));
    std::ostringstream log;
    const auto s = cli::cmd_eval(o, gw, log);
    expect(s.rendered.find("72%") != std::string::npos, "report table lacks 72%");
    expect(s.run.report.passed, "36/50 did not pass");
    const auto rep = fixtures::slurp(s.report_file), audit = fixtures::slurp(s.audit_file);
    if (run == 0) {
      first_report = rep;
      first_audit = audit;
    } else {
      expect(rep == first_report, "report files differ between runs");
      expect(audit == first_audit, "audit files differ between runs");
    }
  }
  fs::remove_all(dir);
}

// 8. Corpus token statistics per label.
void corpus_statistics() {
  const auto dir = fixtures::temp_dir("accept_stats");
  oracle::MarkdownGenerator gen(99);
  std::map<std::string, std::uint64_t> expected;
  for (const std::string label : {"P1", "P2", "P3"}) {
    for (int d = 0; d < 5; ++d) {
      const std::string doc = gen.document();
      fs::create_directories(dir / "corpus" / label);
      std::ofstream(dir / "corpus" / label / ("doc" + std::to_string(d) + ".md"), std::ios::binary) << doc;
      // Body tokens of every chunk, from the oracle counter.
      for (const auto& c : chunk_document(doc, config_with(512))) expected[label] += oracle::tokens(c.body);
    }
  }
  std::uint64_t total = 0;
  for (auto& [label, n] : expected) total += n;

  cli::ChunkOptions o;
  o.inputs = {dir / "corpus"};
  o.out_dir = dir / "chunks";
  std::ostringstream log;
  const auto s = cli::cmd_chunk(o, log);
  expect(s.stats.per_label == expected, "per-label totals differ from the oracle");
  expect(s.stats.total == total, "grand total differs from the oracle");

  const auto table = render_stats_table(s.stats);
  for (auto& [label, n] : expected)
    expect(table.find(label) != std::string::npos && table.find(format_thousands(n)) != std::string::npos,
           "table row missing for " + label);
  expect(table.find("Total") != std::string::npos && table.find(format_thousands(total)) != std::string::npos,
         "table total row missing");
  fs::remove_all(dir);
}

struct Criterion {
  const char* name;
  double limit_seconds;
  std::function<void()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1 worked example two-step chunking", 1, worked_example_chunking},
      {"2 chunk invariants on 1000 random documents", 30, chunk_properties},
      {"3 published outputs extract to the key", 1, published_extraction},
      {"4 scoring and dual pass rule", 1, scoring},
      {"5 shuffle key remap, uniformity, round trip", 5, shuffling},
      {"6 bias and pairing dataset counts", 5, augmentation_counts},
      {"7 reproducible mocked evaluation", 10, reproducible_eval},
      {"8 corpus statistics per label", 5, corpus_statistics},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && secs > c.limit_seconds) error = "took longer than the limit";
    std::ostringstream line;
    line << (error.empty() ? "PASS" : "FAIL") << "  " << c.name << "  (" << secs << "s, limit " << c.limit_seconds
         << "s)";
    if (!error.empty()) line << "  " << error;
    std::cout << line.str() << std::endl;
    if (!error.empty()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
