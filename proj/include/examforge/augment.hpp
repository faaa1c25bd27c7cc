#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "examforge/exam.hpp"
#include "examforge/markdown.hpp"
#include "examforge/prompts.hpp"
#include "json.hpp"

namespace examforge {

enum class SftSource : std::uint8_t { BiasReason, MarkdownQa, Shuffle };
enum class DpoSource : std::uint8_t { BiasReason, MultiLlm };

std::string_view to_string(SftSource s);
std::string_view to_string(DpoSource s);

struct SftMeta {
  SftSource source = SftSource::Shuffle;
  std::optional<std::string> question_id;
  std::optional<std::string> doc_id;
  std::optional<std::uint64_t> seed;
  std::optional<PromptVariantId> variant_id;
  std::optional<std::string> prng;
  std::optional<std::array<int, kChoiceCount>> permutation;

  bool operator==(const SftMeta&) const = default;
};

struct SftRecord {
  std::string system;
  std::string user;
  std::string assistant;
  SftMeta meta;

  bool operator==(const SftRecord&) const = default;
};

struct DpoMeta {
  DpoSource source = DpoSource::BiasReason;
  std::string question_id;
  std::optional<std::string> chosen_backend;
  std::optional<std::string> rejected_backend;
  PromptVariantId prompt_variant = PromptVariantId::ZeroShotBias;
  std::optional<int> rejected_choice;

  bool operator==(const DpoMeta&) const = default;
};

struct DpoRecord {
  std::string system;
  std::string user;
  std::string chosen;
  std::string rejected;
  DpoMeta meta;

  bool operator==(const DpoRecord&) const = default;
};

struct BiasReason {
  std::string question_id;
  int choice_label = 1;
  std::string reason_text;
  bool is_correct = false;
};

class MissingCorrectReason : public std::runtime_error {
 public:
  explicit MissingCorrectReason(const std::string& question_id)
      : std::runtime_error("no reason supplied for the correct choice of question " + question_id),
        question_id_(question_id) {}
  const std::string& question_id() const { return question_id_; }

 private:
  std::string question_id_;
};

// ---------------------------------------------------------------------------
// Biased zero-shot reasoning
// ---------------------------------------------------------------------------

/// User-turn line that steers the model toward `target`.
std::string bias_target_line(int target);

/// Zero-shot bias system prompt; the user turn is the question followed by
/// the target line. Throws std::out_of_range unless target is 1..4.
RenderedPrompt render_bias_prompt(const ExamQuestion& q, int target);

/// Text after the last reason marker, trimmed; the whole response when the
/// marker is missing.
std::string reason_from_response(std::string_view response);

/// "คำตอบที่ถูกต้องคือ: <label>\n\nเหตุผล:\n<reason>"
std::string format_reasoned_answer(int label, std::string_view reason);

std::vector<BiasReason> bias_reasons(const ExamQuestion& q, const std::map<int, std::string>& reasons);

/// One SFT record for the correct choice's reason and one DPO pair per
/// incorrect-choice reason. Blank reasons count as absent. Throws
/// MissingCorrectReason when the answer key has no reason.
std::pair<std::vector<SftRecord>, std::vector<DpoRecord>> harvest_bias_outputs(
    const ExamQuestion& q, const std::map<int, std::string>& reasons);

// ---------------------------------------------------------------------------
// System prompts, shuffles, markdown Q&A
// ---------------------------------------------------------------------------

/// One copy of `record` per variant with that variant's system text.
/// Throws std::invalid_argument on an empty variant list.
std::vector<SftRecord> expand_system_prompts(const SftRecord& record, const std::vector<PromptVariant>& variants);

inline constexpr int kDefaultShufflesPerQuestion = 4;

/// "ดังนั้น คำตอบที่ถูกต้องคือ: <label>) <text>"
std::string format_final_answer(int label, std::string_view choice_text);

/// n records; record i uses shuffle seed `seed + i`. Each assistant turn
/// names the post-shuffle correct label. Throws std::invalid_argument if
/// n < 1.
std::vector<SftRecord> build_shuffle_set(const ExamQuestion& q, int n, std::uint64_t seed);

struct MarkdownQaOptions {
  /// "{title}" is the innermost header, "{path}" the full header path joined
  /// with " > ".
  std::string question_template = "Explain the topic \"{title}\" ({path}).";
  std::string system_prompt =
      "You are a Certified Thai Investment Consultant (IC). Answer the question using your knowledge of the "
      "study materials.";
};

/// One record per header occurrence with non-empty direct content; content
/// of a header split across sub-chunks is rejoined in order.
std::vector<SftRecord> qa_from_markdown(const std::vector<Chunk>& chunks, const MarkdownQaOptions& options = {});

// ---------------------------------------------------------------------------
// Multi-LLM validation and pairing
// ---------------------------------------------------------------------------

struct CandidateResponse {
  std::string backend_id;
  PromptVariantId prompt_variant = PromptVariantId::CoT;
  std::string text;
};

enum class Verdict : std::uint8_t { Accepted, Rejected, Excluded };

/// Accepted: scaffold present and the extracted label is the key.
/// Rejected: nothing extractable, or a different label.
/// Excluded: right label but without the variant's scaffold; such a response
/// is neither a good example nor a wrong answer.
Verdict validate_response(const ExamQuestion& q, PromptVariantId variant, std::string_view text);

inline constexpr std::size_t kDefaultPairCap = 4;

/// Within each prompt variant, pairs every accepted response with every
/// rejected one, cross-backend pairs first, keeping at most `cap` pairs.
std::vector<DpoRecord> pair_multi_llm(const ExamQuestion& q, const std::vector<CandidateResponse>& responses,
                                      std::size_t cap = kDefaultPairCap);

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::ordered_json sft_to_json(const SftRecord& r);
SftRecord sft_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json dpo_to_json(const DpoRecord& r);
DpoRecord dpo_from_json(const nlohmann::ordered_json& j);

}  // namespace examforge
